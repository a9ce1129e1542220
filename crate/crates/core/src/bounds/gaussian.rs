//! Gaussian lower bounds from the logarithmic-scale comparison chain.
//!
//! On a log scale the multiplicative-noise linear system dominates an
//! additive-noise heat equation whose mode projections are Gaussian, so for
//! any nonnegative projection function f and level J′ > 0,
//!
//! ```text
//! P(⟨f, u(·,t)⟩ ≥ J′) ≥ 1 - Φ((J″ - mean(t)) / stdev(t)),
//! J″ = ‖f‖₁ log(J′/‖f‖₁),
//! ```
//!
//! with `mean(t) = ⟨e^{tΔ}f, log q₀⟩ - a₀⟨e₀,g⟩t - Σ_{n≥1} aₙ⟨eₙ,g⟩(1-e^{-tλₙ})/λₙ`.
//! The variance is the accumulated covariance of the forcing: for white
//! Stratonovich noise `σ² Σ_i ζ_i (a₀²⟨e₀,b_i⟩² t + Σ aₙ₁aₙ₂ (1-e^{-t(λₙ₁+λₙ₂)})/(λₙ₁+λₙ₂)⟨eₙ₁,b_i⟩⟨eₙ₂,b_i⟩)`,
//! and for red forcing the γ-table of [`crate::bounds::gamma`]. With the
//! covariance operator diagonal in the eigenbasis both collapse to diagonal
//! sums.
//!
//! The min-over-t corollary variants optimise the Φ-argument on [t_min, T];
//! taking f = g ≡ 1 yields the sup-norm forms used for the global onset
//! level 0 < J < 2.

use crate::bounds::gamma::{gamma_lambda, GammaKind};
use crate::bounds::opt::minimize_over_time;
use crate::bounds::phi::normal_upper_tail;
use crate::bounds::{BoundProvenance, BoundResult};
use crate::error::{domain, usage, Result};
use crate::forcing::NoiseSpec;
use crate::grid::{norm_1, norm_2, Field};
use crate::spectral::{analyze, eigenvalue};

/// Forcing regime entering a Gaussian bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaussNoise {
    StratWhite { sigma: f64 },
    Red { kind: GammaKind, kappa: f64, sigma_r: f64, sigma_xi: f64 },
}

/// Inputs of the log-scale Gaussian bounds.
#[derive(Debug, Clone)]
pub struct GaussBoundQuery {
    /// Nonnegative projection function, not almost everywhere zero.
    pub f: Field,
    /// Nonnegative heterogeneity in the drift.
    pub g: Field,
    /// Strictly positive initial state (its logarithm enters the mean).
    pub q0: Field,
    /// Target level J′ for ⟨f, u⟩.
    pub j_prime: f64,
    pub horizon: f64,
    pub noise: GaussNoise,
    pub spec: NoiseSpec,
    /// Mode truncation of the spectral sums.
    pub n_max: usize,
    /// Lower end of the optimisation window (t = 0 is degenerate).
    pub t_min: f64,
    /// When set, adds the white-noise drift loss `σ²/2 Σ ζ_i b_i²` of the Itô
    /// route to the heterogeneity. This is a documented mean-shift option
    /// only; no probabilistic guarantee is claimed for it.
    pub ito_mean_shift_sigma: Option<f64>,
}

impl GaussBoundQuery {
    pub fn validate(&self) -> Result<()> {
        if self.f.grid() != self.g.grid() || self.f.grid() != self.q0.grid() {
            return Err(usage("f, g and q0 must share one grid".to_string()));
        }
        if self.f.min_value() < 0.0 {
            return Err(usage("projection function f must be nonnegative".to_string()));
        }
        if norm_1(&self.f) <= 0.0 {
            return Err(usage("projection function f must not vanish".to_string()));
        }
        if self.g.min_value() < 0.0 {
            return Err(usage("heterogeneity g must be nonnegative".to_string()));
        }
        if self.q0.min_value() <= 0.0 {
            return Err(domain(
                "q0 must be strictly positive: log(q0) enters the bound".to_string(),
            ));
        }
        if !(self.j_prime > 0.0) {
            return Err(usage(format!("level J' must be positive, got {}", self.j_prime)));
        }
        if !(self.horizon > 0.0) || !(self.t_min > 0.0) || self.t_min > self.horizon {
            return Err(usage(format!(
                "need 0 < t_min ≤ horizon, got t_min = {}, horizon = {}",
                self.t_min, self.horizon
            )));
        }
        match self.noise {
            GaussNoise::StratWhite { sigma } => {
                if !(sigma > 0.0) {
                    return Err(usage("the white-noise bound requires σ_S > 0".to_string()));
                }
            }
            GaussNoise::Red { kappa, sigma_r, sigma_xi, .. } => {
                if !(kappa > 0.0) || !(sigma_r > 0.0) || !(sigma_xi > 0.0) {
                    return Err(usage(
                        "the red-noise bound requires κ > 0, σ_R > 0, σ_ξ > 0".to_string(),
                    ));
                }
            }
        }
        self.spec.require_constant_mode()
    }
}

/// Threshold conversion `J′ = ‖f‖₁ exp(J″/‖f‖₁)`.
pub fn j_prime_from_threshold(f_norm_1: f64, j_double: f64) -> f64 {
    f_norm_1 * (j_double / f_norm_1).exp()
}

/// Inverse conversion `J″ = ‖f‖₁ log(J′/‖f‖₁)`.
pub fn j_threshold_from_prime(f_norm_1: f64, j_prime: f64) -> f64 {
    f_norm_1 * (j_prime / f_norm_1).ln()
}

/// Precomputed spectral data shared by all evaluation times of one query.
struct GaussEvaluator {
    a: Vec<f64>,
    g_coeffs: Vec<f64>,
    logq0_coeffs: Vec<f64>,
    lambdas: Vec<f64>,
    j_double: f64,
    noise: GaussNoise,
    spec: NoiseSpec,
    n_max: usize,
    tail_estimate: f64,
}

impl GaussEvaluator {
    fn build(query: &GaussBoundQuery) -> Result<Self> {
        query.validate()?;
        let length = query.f.grid().length();
        let log_q0 = query.q0.map(f64::ln)?;
        let g_eff = match query.ito_mean_shift_sigma {
            None => query.g.clone(),
            Some(sigma) => {
                let shift = query.spec.squared_basis_field(query.f.grid())?;
                Field::new(
                    query.g.grid().clone(),
                    query
                        .g
                        .values()
                        .iter()
                        .zip(shift.values())
                        .map(|(&g, &s)| g + 0.5 * sigma * sigma * s)
                        .collect(),
                )?
            }
        };
        let n_max = query.n_max;
        let a = analyze(&query.f, n_max).coeffs().to_vec();
        let g_coeffs = analyze(&g_eff, n_max).coeffs().to_vec();
        let logq0_coeffs = analyze(&log_q0, n_max).coeffs().to_vec();
        let lambdas: Vec<f64> = (0..=n_max).map(|n| eigenvalue(n, length)).collect();
        let f_l1 = norm_1(&query.f);
        let j_double = j_threshold_from_prime(f_l1, query.j_prime);

        // Truncation tail: Bessel bounds on the discarded modes of the mean
        // plus the largest per-mode variance contribution left out.
        let f_l2 = norm_2(&query.f);
        let lambda_next = eigenvalue(n_max + 1, length);
        let mut tail = f_l2 * norm_2(&g_eff) / lambda_next + f_l2 * norm_2(&log_q0) * (-query.t_min * lambda_next).exp();
        let mut var_tail = 0.0f64;
        for n in (n_max + 1)..=query.spec.max_mode() {
            let zeta = query.spec.zeta(n);
            if zeta == 0.0 {
                continue;
            }
            let lam = eigenvalue(n, length);
            let contrib = match query.noise {
                GaussNoise::StratWhite { sigma } => sigma * sigma * zeta / (2.0 * lam),
                GaussNoise::Red { kind, kappa, sigma_r, sigma_xi } => {
                    gamma_lambda(kind, lam, lam, query.horizon, kappa, sigma_r, sigma_xi, zeta)?
                }
            };
            var_tail = var_tail.max(contrib * f_l2 * f_l2);
        }
        tail += var_tail;

        Ok(GaussEvaluator {
            a,
            g_coeffs,
            logq0_coeffs,
            lambdas,
            j_double,
            noise: query.noise,
            spec: query.spec.clone(),
            n_max,
            tail_estimate: tail,
        })
    }

    fn mean_at(&self, t: f64) -> f64 {
        let mut mean = 0.0;
        for n in 0..=self.n_max {
            let decay = (-t * self.lambdas[n]).exp();
            mean += self.a[n] * decay * self.logq0_coeffs[n];
            if n == 0 {
                mean -= self.a[0] * self.g_coeffs[0] * t;
            } else {
                mean -= self.a[n] * self.g_coeffs[n] * (1.0 - decay) / self.lambdas[n];
            }
        }
        mean
    }

    fn variance_at(&self, t: f64) -> Result<f64> {
        let top = self.n_max.min(self.spec.max_mode());
        match self.noise {
            GaussNoise::StratWhite { sigma } => {
                let mut var = self.spec.zeta(0) * self.a[0] * self.a[0] * t;
                for n in 1..=top {
                    let zeta = self.spec.zeta(n);
                    if zeta == 0.0 || self.a[n] == 0.0 {
                        continue;
                    }
                    let lam2 = 2.0 * self.lambdas[n];
                    var += zeta * self.a[n] * self.a[n] * (1.0 - (-t * lam2).exp()) / lam2;
                }
                Ok(sigma * sigma * var)
            }
            GaussNoise::Red { kind, kappa, sigma_r, sigma_xi } => {
                let mut var = 0.0;
                for n in 0..=top {
                    let zeta = self.spec.zeta(n);
                    if zeta == 0.0 || self.a[n] == 0.0 {
                        continue;
                    }
                    let lam = self.lambdas[n];
                    var += self.a[n]
                        * self.a[n]
                        * gamma_lambda(kind, lam, lam, t, kappa, sigma_r, sigma_xi, zeta)?;
                }
                Ok(var)
            }
        }
    }

    fn phi_argument_at(&self, t: f64) -> Result<(f64, f64, f64)> {
        let mean = self.mean_at(t);
        let var = self.variance_at(t)?;
        let stdev = var.max(0.0).sqrt();
        let arg = if stdev == 0.0 {
            if self.j_double - mean <= 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        } else {
            (self.j_double - mean) / stdev
        };
        Ok((arg, mean, stdev))
    }

    fn result_at(&self, t: f64, provenance: BoundProvenance, opt_t: Option<f64>) -> Result<BoundResult> {
        let (arg, mean, stdev) = self.phi_argument_at(t)?;
        let value = if arg == f64::NEG_INFINITY {
            1.0
        } else if arg == f64::INFINITY {
            0.0
        } else {
            normal_upper_tail(arg)
        };
        Ok(BoundResult {
            raw: value,
            clipped: value.clamp(0.0, 1.0),
            mean,
            stdev,
            phi_argument: arg,
            optimal_time: opt_t,
            tail_estimate: self.tail_estimate,
            provenance,
        })
    }
}

/// Mean and variance of the log-scale projection at time `t` under white
/// Stratonovich forcing.
pub fn strat_white_mean_var(
    f: &Field,
    g: &Field,
    q0: &Field,
    t: f64,
    sigma_s: f64,
    spec: &NoiseSpec,
    n_max: usize,
) -> Result<(f64, f64)> {
    let query = GaussBoundQuery {
        f: f.clone(),
        g: g.clone(),
        q0: q0.clone(),
        j_prime: 1.0,
        horizon: t.max(1e-12),
        noise: GaussNoise::StratWhite { sigma: sigma_s },
        spec: spec.clone(),
        n_max,
        t_min: t.max(1e-12),
        ito_mean_shift_sigma: None,
    };
    let eval = GaussEvaluator::build(&query)?;
    Ok((eval.mean_at(t), eval.variance_at(t)?))
}

/// Fixed-time Gaussian bound `1 - Φ((J″ - mean)/stdev)`.
pub fn gauss_bound_at(query: &GaussBoundQuery, t: f64) -> Result<BoundResult> {
    if !(t > 0.0) {
        return Err(domain(format!("bound evaluation requires t > 0, got {t}")));
    }
    let eval = GaussEvaluator::build(query)?;
    let provenance = match query.noise {
        GaussNoise::StratWhite { .. } => BoundProvenance::LogScaleWhiteFixed,
        GaussNoise::Red { kind, .. } => BoundProvenance::LogScaleRedFixed(kind),
    };
    eval.result_at(t, provenance, None)
}

/// Min-over-t Gaussian bound on `[t_min, horizon]`; optimises the Φ-argument,
/// which stays finite when the tail probability underflows.
pub fn gauss_bound_sup(query: &GaussBoundQuery) -> Result<BoundResult> {
    let eval = GaussEvaluator::build(query)?;
    let objective =
        |t: f64| eval.phi_argument_at(t).map(|(arg, _, _)| arg).unwrap_or(f64::INFINITY);
    let (t_star, _) = minimize_over_time(objective, query.t_min, query.horizon, 512);
    let provenance = match query.noise {
        GaussNoise::StratWhite { .. } => BoundProvenance::LogScaleWhiteSup,
        GaussNoise::Red { kind, .. } => BoundProvenance::LogScaleRedSup(kind),
    };
    eval.result_at(t_star, provenance, Some(t_star))
}

/// Query of the sup-norm onset bounds: f = g ≡ 1, J′ = L·J, 0 < J < 2.
pub fn supnorm_query(
    q0: &Field,
    j: f64,
    horizon: f64,
    noise: GaussNoise,
    spec: &NoiseSpec,
    n_max: usize,
    t_min: f64,
) -> Result<GaussBoundQuery> {
    if !(j > 0.0 && j < 2.0) {
        return Err(usage(format!("sup-norm level must satisfy 0 < J < 2, got {j}")));
    }
    let grid = q0.grid().clone();
    let ones = Field::constant(grid.clone(), 1.0)?;
    Ok(GaussBoundQuery {
        f: ones.clone(),
        g: ones,
        q0: q0.clone(),
        j_prime: grid.length() * j,
        horizon,
        noise,
        spec: spec.clone(),
        n_max,
        t_min,
        ito_mean_shift_sigma: None,
    })
}

/// Sup-norm onset bound under white Stratonovich noise: f = g ≡ 1, J′ = L·J.
pub fn strat_white_supnorm_bound(
    q0: &Field,
    j: f64,
    horizon: f64,
    sigma_s: f64,
    spec: &NoiseSpec,
    n_max: usize,
    t_min: f64,
) -> Result<BoundResult> {
    let query =
        supnorm_query(q0, j, horizon, GaussNoise::StratWhite { sigma: sigma_s }, spec, n_max, t_min)?;
    let mut out = gauss_bound_sup(&query)?;
    out.provenance = BoundProvenance::LogScaleWhiteSupNorm;
    Ok(out)
}

/// Sup-norm onset bound under red forcing (either coupling).
pub fn red_supnorm_bound(
    q0: &Field,
    j: f64,
    horizon: f64,
    kind: GammaKind,
    kappa: f64,
    sigma_r: f64,
    sigma_xi: f64,
    spec: &NoiseSpec,
    n_max: usize,
    t_min: f64,
) -> Result<BoundResult> {
    let query = supnorm_query(
        q0,
        j,
        horizon,
        GaussNoise::Red { kind, kappa, sigma_r, sigma_xi },
        spec,
        n_max,
        t_min,
    )?;
    let mut out = gauss_bound_sup(&query)?;
    out.provenance = BoundProvenance::LogScaleRedSupNorm(kind);
    Ok(out)
}

/// The time at which the sup-norm white-noise bound peaks:
/// `t* = log J - L⁻¹ ∫ log q₀`.
pub fn optimal_jump_time(q0: &Field, j: f64) -> Result<f64> {
    if !(j > 0.0) {
        return Err(usage(format!("level must be positive, got {j}")));
    }
    if q0.min_value() <= 0.0 {
        return Err(domain("q0 must be strictly positive".to_string()));
    }
    let grid = q0.grid();
    let log_q0 = q0.map(f64::ln)?;
    let mean_log: f64 =
        (0..grid.n_points()).map(|k| grid.weight(k) * log_q0.values()[k]).sum::<f64>()
            / grid.length();
    Ok(j.ln() - mean_log)
}

/// Time penalty `√(t / ∫₀ᵗ (1-e^{-sκ})² ds)` of the additive red coupling
/// relative to white noise; stays above 1 for all t, κ > 0.
pub fn additive_red_time_factor(t: f64, kappa: f64) -> Result<f64> {
    let unit = crate::bounds::gamma::gamma00_additive(t, kappa, 1.0, 1.0, 1.0)?;
    Ok((t / (kappa * kappa * unit)).sqrt())
}

/// Time penalty `√(t / ∫₀ᵗ e^{-2sκ} ds)` of the time-derivative red coupling;
/// tends to 1 as t → 0 and diverges as t → ∞.
pub fn strat_red_time_factor(t: f64, kappa: f64) -> Result<f64> {
    let unit = crate::bounds::gamma::gamma00_strat(t, kappa, 1.0, 1.0, 1.0)?;
    Ok((t / unit).sqrt())
}
