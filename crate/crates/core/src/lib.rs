//! Simulation and analysis toolkit for a reduced stochastic model of
//! pipe-flow turbulence.
//!
//! The model is a scalar SPDE for a turbulence level q on an interval [0, L]
//! with Neumann boundaries: heat diffusion, linear relaxation toward the
//! laminar state q ≡ 0, a bistable reaction term with stable states 0 and
//! q₊ = 1 + √(r/(r+1)), and one of four multiplicative Gaussian forcings
//! (Itô white, Stratonovich white, and two Ornstein–Uhlenbeck red couplings).
//!
//! The crate provides:
//! - the spectral machinery of the Neumann cosine basis ([`spectral`]);
//! - reproducible forcing and the effective Itô form of every regime
//!   ([`forcing`]);
//! - exponential-integrator time stepping of the nonlinear and linearized
//!   systems with first-passage detection and same-noise coupled runs
//!   ([`sim`]);
//! - every analytic lower bound on the onset probability, with the
//!   γ-covariance engine and its independent quadrature oracle ([`bounds`]);
//! - rare-event estimation by trajectory-adaptive multilevel splitting and
//!   plain Monte Carlo ([`rare`]);
//! - figure-parameter presets, config parsing, CSV export, and the
//!   validation checks behind the command-line tool ([`presets`], [`config`],
//!   [`report`], [`validate`]).

pub mod bounds;
pub mod error;
pub mod forcing;
pub mod grid;
pub mod config;
pub mod presets;
pub mod rare;
pub mod report;
pub mod validate;
pub mod sim;
pub mod spectral;

pub use error::{ModelError, Result};
