//! Analytic lower bounds on the probability of turbulence onset, with full
//! audit information (mean, deviation, Φ-argument, optimising time) kept on
//! every result.

pub mod gamma;
pub mod gaussian;
pub mod ito;
pub mod opt;
pub mod phi;

pub use gamma::{
    gamma00_additive, gamma00_strat, gamma_additive_lambda, gamma_additive_red,
    gamma_quadrature_oracle, gamma_strat_lambda, gamma_strat_red, GammaKind, GammaTable,
};
pub use gaussian::{
    additive_red_time_factor, gauss_bound_at, gauss_bound_sup, j_prime_from_threshold,
    j_threshold_from_prime, optimal_jump_time, red_supnorm_bound, strat_red_time_factor,
    strat_white_mean_var, strat_white_supnorm_bound, supnorm_query, GaussBoundQuery, GaussNoise,
};
pub use ito::{gambler_ruin, ito_restrained_bound, ito_sup_bound, ItoBoundQuery};
pub use phi::{erfc, normal_cdf, normal_upper_tail};

/// Which statement a bound value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundProvenance {
    MartingaleRuin,
    MartingaleRuinRestrained,
    MartingaleRuinSup,
    LogScaleWhiteFixed,
    LogScaleWhiteSup,
    LogScaleWhiteSupNorm,
    LogScaleRedFixed(GammaKind),
    LogScaleRedSup(GammaKind),
    LogScaleRedSupNorm(GammaKind),
}

impl std::fmt::Display for BoundProvenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundProvenance::MartingaleRuin => write!(f, "martingale-ruin"),
            BoundProvenance::MartingaleRuinRestrained => write!(f, "martingale-ruin-restrained"),
            BoundProvenance::MartingaleRuinSup => write!(f, "martingale-ruin-sup"),
            BoundProvenance::LogScaleWhiteFixed => write!(f, "log-scale-white-fixed-time"),
            BoundProvenance::LogScaleWhiteSup => write!(f, "log-scale-white-sup"),
            BoundProvenance::LogScaleWhiteSupNorm => write!(f, "log-scale-white-sup-norm"),
            BoundProvenance::LogScaleRedFixed(k) => write!(f, "log-scale-red-fixed-time({k})"),
            BoundProvenance::LogScaleRedSup(k) => write!(f, "log-scale-red-sup({k})"),
            BoundProvenance::LogScaleRedSupNorm(k) => write!(f, "log-scale-red-sup-norm({k})"),
        }
    }
}

/// A bound value with the intermediate quantities needed to audit it.
#[derive(Debug, Clone, Copy)]
pub struct BoundResult {
    /// Value before clipping; the martingale bounds can be negative.
    pub raw: f64,
    /// Raw value clamped to [0, 1].
    pub clipped: f64,
    /// Mean term (Gaussian bounds) or the unrestrained ruin term (martingale bounds).
    pub mean: f64,
    /// Standard deviation (Gaussian bounds) or the finite-horizon penalty.
    pub stdev: f64,
    /// Φ-argument for Gaussian bounds; NaN for the martingale family.
    pub phi_argument: f64,
    /// Optimising time for sup/min-over-t variants.
    pub optimal_time: Option<f64>,
    /// Heuristic estimate of the truncation error in mean and variance sums.
    pub tail_estimate: f64,
    pub provenance: BoundProvenance,
}
