//! Gaussian forcing: Q-Wiener increments along the cosine eigenbasis, the
//! Ornstein–Uhlenbeck red-noise process, and the single effective Itô form of
//! every supported noise regime.
//!
//! The covariance operator Q is diagonal in the Laplacian eigenbasis with
//! eigenvalues ζ_0..ζ_m (all higher modes unforced), so one increment of
//! `Q^{1/2} dW` is `Σ_i √ζ_i e_i(x) N(0, dt)` with independent normals per
//! mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, usage, Result};
use crate::grid::{Field, Grid};
use crate::spectral::eigenfunction_value;

/// Finite-mode diagonal spectrum of the covariance operator Q.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// Highest forced mode index m.
    m: usize,
    /// Intensities ζ_0..ζ_m.
    zeta: Vec<f64>,
}

impl NoiseSpec {
    pub fn new(zeta: Vec<f64>) -> Result<Self> {
        if zeta.is_empty() {
            return Err(usage("noise spectrum must contain at least ζ_0".to_string()));
        }
        if zeta.iter().any(|&z| !(z >= 0.0) || !z.is_finite()) {
            return Err(domain("noise intensities must be finite and nonnegative".to_string()));
        }
        Ok(NoiseSpec { m: zeta.len() - 1, zeta })
    }

    /// Spectrum ζ_i = exp(−(i−1)²) on modes 0..=m.
    pub fn gaussian_bump(m: usize) -> Self {
        let zeta = (0..=m).map(|i| (-((i as f64 - 1.0).powi(2))).exp()).collect();
        NoiseSpec { m, zeta }
    }

    /// Single forced constant mode with intensity `zeta0`.
    pub fn single_mode(zeta0: f64) -> Result<Self> {
        NoiseSpec::new(vec![zeta0])
    }

    pub fn max_mode(&self) -> usize {
        self.m
    }

    pub fn zeta(&self, i: usize) -> f64 {
        self.zeta.get(i).copied().unwrap_or(0.0)
    }

    pub fn zetas(&self) -> &[f64] {
        &self.zeta
    }

    /// Modes with strictly positive intensity, paired with √ζ_i.
    pub fn active_modes(&self) -> Vec<(usize, f64)> {
        self.zeta
            .iter()
            .enumerate()
            .filter(|(_, &z)| z > 0.0)
            .map(|(i, &z)| (i, z.sqrt()))
            .collect()
    }

    /// `Σ_i ζ_i b_i(x)²` sampled on a grid; the field multiplying q in every
    /// white-noise Itô correction.
    pub fn squared_basis_field(&self, grid: &Grid) -> Result<Field> {
        let length = grid.length();
        Field::from_fn(grid.clone(), |x| {
            self.zeta
                .iter()
                .enumerate()
                .filter(|(_, &z)| z > 0.0)
                .map(|(i, &z)| {
                    let b = eigenfunction_value(i, length, x);
                    z * b * b
                })
                .sum()
        })
    }

    /// Enforces the standing assumption of the analytic bounds: the constant
    /// mode must be forced.
    pub fn require_constant_mode(&self) -> Result<()> {
        if self.zeta(0) > 0.0 {
            Ok(())
        } else {
            Err(usage("the analytic bounds require ζ_0 > 0".to_string()))
        }
    }
}

/// How the noise enters the model, with its intensities.
///
/// Exactly one of σ_I, σ_S, σ_R is carried per variant, so σ_I·σ_S = 0 holds
/// by construction. The red variants fix the coupling operator: `AdditiveRed`
/// feeds the Ornstein–Uhlenbeck state straight into the drift (F = Id),
/// `StratRed` couples through its time derivative (F = ∂_t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseRegime {
    ItoWhite { sigma: f64 },
    StratWhite { sigma: f64 },
    AdditiveRed { sigma: f64, kappa: f64, sigma_xi: f64 },
    StratRed { sigma: f64, kappa: f64, sigma_xi: f64 },
}

impl NoiseRegime {
    pub fn validate(&self) -> Result<()> {
        let check_sigma = |s: f64| {
            if s >= 0.0 && s.is_finite() {
                Ok(())
            } else {
                Err(domain(format!("noise intensity must be finite and nonnegative, got {s}")))
            }
        };
        match *self {
            NoiseRegime::ItoWhite { sigma } | NoiseRegime::StratWhite { sigma } => check_sigma(sigma),
            NoiseRegime::AdditiveRed { sigma, kappa, sigma_xi }
            | NoiseRegime::StratRed { sigma, kappa, sigma_xi } => {
                check_sigma(sigma)?;
                if !(kappa > 0.0) {
                    return Err(domain(format!("red noise requires κ > 0, got {kappa}")));
                }
                if !(sigma_xi > 0.0) {
                    return Err(domain(format!("red noise requires σ_ξ > 0, got {sigma_xi}")));
                }
                Ok(())
            }
        }
    }

    pub fn is_red(&self) -> bool {
        matches!(self, NoiseRegime::AdditiveRed { .. } | NoiseRegime::StratRed { .. })
    }

    pub fn kappa(&self) -> Option<f64> {
        match *self {
            NoiseRegime::AdditiveRed { kappa, .. } | NoiseRegime::StratRed { kappa, .. } => {
                Some(kappa)
            }
            _ => None,
        }
    }

    pub fn sigma_xi(&self) -> Option<f64> {
        match *self {
            NoiseRegime::AdditiveRed { sigma_xi, .. } | NoiseRegime::StratRed { sigma_xi, .. } => {
                Some(sigma_xi)
            }
            _ => None,
        }
    }
}

/// Reproducible random source: identical (seed, stream) pairs yield
/// bit-identical draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// Derived stream for an auxiliary noise source (e.g. the independent
    /// Wiener process driving the Ornstein–Uhlenbeck state).
    pub fn substream(&self, tag: u64) -> Self {
        RngStream { seed: self.seed, stream: self.stream ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

pub(crate) fn draw_standard_normals(rng: &mut ChaCha12Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// One increment of `Q^{1/2} W` over a step of length `dt`, as a grid field.
pub fn wiener_increment(
    grid: &Grid,
    spec: &NoiseSpec,
    dt: f64,
    rng: &mut ChaCha12Rng,
) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(domain(format!("noise increment requires dt > 0, got {dt}")));
    }
    let sqrt_dt = dt.sqrt();
    let length = grid.length();
    let mut values = vec![0.0; grid.n_points()];
    for (i, sqrt_zeta) in spec.active_modes() {
        let z: f64 = rng.sample(StandardNormal);
        let amp = sqrt_zeta * sqrt_dt * z;
        for (j, v) in values.iter_mut().enumerate() {
            *v += amp * eigenfunction_value(i, length, grid.node(j));
        }
    }
    Field::new(grid.clone(), values)
}

/// Exact Gaussian transition of the Ornstein–Uhlenbeck modes over one step:
/// `ξ_i ← e^{-κ dt} ξ_i + √(σ_ξ² ζ_i (1 - e^{-2κ dt}) / (2κ)) N(0,1)`.
///
/// `xi` holds one coefficient per active mode of `spec`, in ascending mode
/// order; `normals` supplies the standard normal draws (one per active mode),
/// so a caller can share them with a coupled diffusion row.
pub fn ou_step_with_normals(
    xi: &mut [f64],
    dt: f64,
    kappa: f64,
    sigma_xi: f64,
    spec: &NoiseSpec,
    normals: &[f64],
) -> Result<()> {
    if !(kappa > 0.0) {
        return Err(domain(format!("Ornstein-Uhlenbeck step requires κ > 0, got {kappa}")));
    }
    if !(dt > 0.0) {
        return Err(domain(format!("Ornstein-Uhlenbeck step requires dt > 0, got {dt}")));
    }
    let active = spec.active_modes();
    if xi.len() != active.len() || normals.len() != active.len() {
        return Err(usage("Ornstein-Uhlenbeck state length must match the active modes".to_string()));
    }
    let decay = (-kappa * dt).exp();
    let var_factor = -(-2.0 * kappa * dt).exp_m1() / (2.0 * kappa);
    for ((x, z), (_, sqrt_zeta)) in xi.iter_mut().zip(normals).zip(active) {
        let sd = sigma_xi * sqrt_zeta * var_factor.sqrt();
        *x = decay * *x + sd * z;
    }
    Ok(())
}

/// As [`ou_step_with_normals`], drawing fresh normals from `rng`.
pub fn ou_step(
    xi: &mut [f64],
    dt: f64,
    kappa: f64,
    sigma_xi: f64,
    spec: &NoiseSpec,
    rng: &mut ChaCha12Rng,
) -> Result<()> {
    let mut normals = vec![0.0; xi.len()];
    draw_standard_normals(rng, &mut normals);
    ou_step_with_normals(xi, dt, kappa, sigma_xi, spec, &normals)
}

/// Drift additions and diffusion factors of a regime once rewritten with Itô
/// noise. The drift gains `white_drift_coeff · q · Σζ_i b_i²` and
/// `ou_drift_coeff · q · ξ`; q diffuses multiplicatively with magnitude
/// `q_diffusion_w` against W and `q_diffusion_wp` against the W′ that drives
/// the Ornstein–Uhlenbeck state (same normals in the `StratRed` case).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveModel {
    pub regime: NoiseRegime,
    pub white_drift_coeff: f64,
    pub ou_drift_coeff: f64,
    pub q_diffusion_w: f64,
    pub q_diffusion_wp: f64,
}

/// Itô-form conversion of every supported regime.
pub fn ito_form(regime: &NoiseRegime, _spec: &NoiseSpec) -> Result<EffectiveModel> {
    regime.validate()?;
    let model = match *regime {
        NoiseRegime::ItoWhite { sigma } => EffectiveModel {
            regime: *regime,
            white_drift_coeff: 0.0,
            ou_drift_coeff: 0.0,
            q_diffusion_w: sigma,
            q_diffusion_wp: 0.0,
        },
        NoiseRegime::StratWhite { sigma } => EffectiveModel {
            regime: *regime,
            white_drift_coeff: 0.5 * sigma * sigma,
            ou_drift_coeff: 0.0,
            q_diffusion_w: sigma,
            q_diffusion_wp: 0.0,
        },
        // Additive coupling: the Ito-Stratonovich correction vanishes.
        NoiseRegime::AdditiveRed { sigma, .. } => EffectiveModel {
            regime: *regime,
            white_drift_coeff: 0.0,
            ou_drift_coeff: sigma,
            q_diffusion_w: 0.0,
            q_diffusion_wp: 0.0,
        },
        NoiseRegime::StratRed { sigma, kappa, sigma_xi } => EffectiveModel {
            regime: *regime,
            white_drift_coeff: 0.5 * sigma * sigma * sigma_xi * sigma_xi,
            ou_drift_coeff: -sigma * kappa,
            q_diffusion_w: 0.0,
            q_diffusion_wp: sigma * sigma_xi,
        },
    };
    Ok(model)
}

impl EffectiveModel {
    /// Coefficient field c(x) of the white-noise-induced drift `c(x)·q`.
    pub fn white_correction_field(&self, grid: &Grid, spec: &NoiseSpec) -> Result<Field> {
        let base = spec.squared_basis_field(grid)?;
        base.map(|v| self.white_drift_coeff * v)
    }
}

/// Nonzero eigenvalue `(1 + σ_R²) σ_ξ² ζ_i` of the per-mode 2×2 noise block of
/// the `StratRed` system (the other eigenvalue is 0).
pub fn strat_red_noise_block_eigenvalue(sigma_r: f64, sigma_xi: f64, zeta_i: f64) -> f64 {
    (1.0 + sigma_r * sigma_r) * sigma_xi * sigma_xi * zeta_i
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner, norm_inf};
    use crate::spectral::eigenpair;

    fn grid() -> Grid {
        Grid::new(10.0, 101).unwrap()
    }

    #[test]
    fn zero_spectrum_gives_zero_increment() {
        let spec = NoiseSpec::new(vec![0.0, 0.0, 0.0]).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        let inc = wiener_increment(&grid(), &spec, 0.01, &mut rng).unwrap();
        assert_eq!(norm_inf(&inc), 0.0);
    }

    #[test]
    fn increment_rejects_nonpositive_dt() {
        let spec = NoiseSpec::single_mode(1.0).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        assert!(wiener_increment(&grid(), &spec, 0.0, &mut rng).is_err());
    }

    #[test]
    fn spec_rejects_negative_intensity() {
        assert!(NoiseSpec::new(vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn increments_are_bit_reproducible() {
        let spec = NoiseSpec::gaussian_bump(100);
        let draw = || {
            let mut rng = RngStream::new(42, 7).rng();
            let mut all = Vec::new();
            for _ in 0..5 {
                all.extend_from_slice(
                    wiener_increment(&grid(), &spec, 0.01, &mut rng).unwrap().values(),
                );
            }
            all
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn projected_increment_variance_matches_spectrum() {
        // Var[⟨e_0, dW⟩] = ζ_0 dt and Var[⟨e_1, dW⟩] = ζ_1 dt (Monte Carlo).
        let g = grid();
        let spec = NoiseSpec::gaussian_bump(100);
        let dt = 0.01;
        let e0 = eigenpair(0, 10.0).unwrap().1.sample(&g).unwrap();
        let e1 = eigenpair(1, 10.0).unwrap().1.sample(&g).unwrap();
        let n = 100_000;
        let mut rng = RngStream::new(3, 0).rng();
        let (mut s0, mut s1, mut s01) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let inc = wiener_increment(&g, &spec, dt, &mut rng).unwrap();
            let p0 = inner(&e0, &inc).unwrap();
            let p1 = inner(&e1, &inc).unwrap();
            s0 += p0 * p0;
            s1 += p1 * p1;
            s01 += p0 * p1;
        }
        let var0 = s0 / n as f64;
        let var1 = s1 / n as f64;
        let cov01 = s01 / n as f64;
        // Var of a squared-normal mean estimate: 2 var² / n.
        let se0 = spec.zeta(0) * dt * (2.0 / n as f64).sqrt();
        let se1 = spec.zeta(1) * dt * (2.0 / n as f64).sqrt();
        assert!((var0 - spec.zeta(0) * dt).abs() < 3.0 * se0, "var0 = {var0}");
        assert!((var1 - dt).abs() < 3.0 * se1, "var1 = {var1}");
        // Mode independence: covariance is zero within 3 standard errors.
        let se01 = (spec.zeta(0) * spec.zeta(1)).sqrt() * dt / (n as f64).sqrt();
        assert!(cov01.abs() < 3.0 * se01, "cov01 = {cov01}");
    }

    #[test]
    fn ou_stays_at_zero_without_intensity() {
        let spec = NoiseSpec::single_mode(1.0).unwrap();
        let mut xi = vec![0.0];
        let mut rng = RngStream::new(5, 0).rng();
        for _ in 0..100 {
            ou_step(&mut xi, 0.01, 0.5, 0.0, &spec, &mut rng).unwrap();
        }
        assert_eq!(xi[0], 0.0);
    }

    #[test]
    fn ou_rejects_nonpositive_kappa() {
        let spec = NoiseSpec::single_mode(1.0).unwrap();
        let mut xi = vec![0.0];
        let mut rng = RngStream::new(5, 0).rng();
        assert!(ou_step(&mut xi, 0.01, 0.0, 0.1, &spec, &mut rng).is_err());
    }

    #[test]
    fn ou_reaches_stationary_variance_and_autocorrelation() {
        // Long-run Var[ξ_0] → σ_ξ² ζ_0 / (2κ); lag-Δ autocorrelation e^{-κΔ}.
        let spec = NoiseSpec::single_mode(1.0).unwrap();
        let (kappa, sigma_xi, dt) = (0.5, 0.1, 0.01);
        let n_paths = 100_000;
        let warm_steps = 2_000; // 20 time units ≫ 1/κ
        let lag_steps = 100; // Δ = 1
        let mut rng = RngStream::new(11, 0).rng();
        let (mut sum_sq, mut sum_lag) = (0.0, 0.0);
        for _ in 0..n_paths {
            let mut xi = vec![0.0];
            for _ in 0..warm_steps {
                ou_step(&mut xi, dt, kappa, sigma_xi, &spec, &mut rng).unwrap();
            }
            let a = xi[0];
            for _ in 0..lag_steps {
                ou_step(&mut xi, dt, kappa, sigma_xi, &spec, &mut rng).unwrap();
            }
            sum_sq += a * a;
            sum_lag += a * xi[0];
        }
        let var = sum_sq / n_paths as f64;
        let stationary = sigma_xi * sigma_xi / (2.0 * kappa);
        let se_var = stationary * (2.0 / n_paths as f64).sqrt();
        assert!((var - stationary).abs() < 3.0 * se_var, "var = {var} vs {stationary}");
        let corr = sum_lag / sum_sq;
        let expected = (-kappa * 1.0f64).exp();
        let se_corr = ((1.0 - expected * expected) / n_paths as f64).sqrt();
        assert!((corr - expected).abs() < 3.0 * se_corr, "corr = {corr} vs {expected}");
    }

    #[test]
    fn ou_exact_update_matches_refined_euler_moments() {
        // Mean and variance at several horizons against Euler-Maruyama with a
        // much smaller step; the Euler bias is O(dt_fine).
        let spec = NoiseSpec::single_mode(1.0).unwrap();
        let (kappa, sigma_xi) = (0.8, 0.3);
        let x0 = 0.7;
        for &horizon in &[0.5, 1.0, 2.0] {
            let mut xi = vec![x0];
            // σ_ξ = 0 isolates the deterministic mean decay.
            let steps = (horizon / 0.1) as usize;
            for _ in 0..steps {
                ou_step_with_normals(&mut xi, 0.1, kappa, sigma_xi, &spec, &[0.0]).unwrap();
            }
            let exact_mean = x0 * (-kappa * horizon).exp();
            assert!((xi[0] - exact_mean).abs() < 1e-12);
            // Exact variance of the update vs fine-Euler accumulated variance.
            let exact_var =
                sigma_xi * sigma_xi * (1.0 - (-2.0 * kappa * horizon).exp()) / (2.0 * kappa);
            let dt_fine = 1e-4;
            let n_fine = (horizon / dt_fine) as usize;
            let mut var_euler = 0.0;
            for _ in 0..n_fine {
                let decay = 1.0 - kappa * dt_fine;
                var_euler = decay * decay * var_euler + sigma_xi * sigma_xi * dt_fine;
            }
            assert!(
                (exact_var - var_euler).abs() < 2.0 * kappa * dt_fine * exact_var + 1e-6,
                "horizon {horizon}: exact {exact_var} vs euler {var_euler}"
            );
        }
    }

    #[test]
    fn ito_form_ito_white_has_no_correction() {
        let spec = NoiseSpec::gaussian_bump(4);
        let model = ito_form(&NoiseRegime::ItoWhite { sigma: 0.5 }, &spec).unwrap();
        assert_eq!(model.white_drift_coeff, 0.0);
        assert_eq!(model.ou_drift_coeff, 0.0);
        let corr = model.white_correction_field(&grid(), &spec).unwrap();
        assert_eq!(norm_inf(&corr), 0.0);
    }

    #[test]
    fn ito_form_strat_white_single_constant_mode() {
        // m = 0, ζ_0 = 1 on L = 10: correction coefficient is σ²/2 · 1/L.
        let spec = NoiseSpec::single_mode(1.0).unwrap();
        let sigma = 0.7;
        let model = ito_form(&NoiseRegime::StratWhite { sigma }, &spec).unwrap();
        let corr = model.white_correction_field(&grid(), &spec).unwrap();
        let expected = 0.5 * sigma * sigma / 10.0;
        for &v in corr.values() {
            assert!((v - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn ito_form_additive_red_has_null_correction() {
        let spec = NoiseSpec::gaussian_bump(4);
        let model = ito_form(
            &NoiseRegime::AdditiveRed { sigma: 1.5, kappa: 0.5, sigma_xi: 0.1 },
            &spec,
        )
        .unwrap();
        assert_eq!(model.white_drift_coeff, 0.0);
        assert_eq!(model.ou_drift_coeff, 1.5);
        assert_eq!(model.q_diffusion_w, 0.0);
        assert_eq!(model.q_diffusion_wp, 0.0);
    }

    #[test]
    fn ito_form_strat_red_coefficients() {
        let (sigma, kappa, sigma_xi) = (0.5, 0.05, 0.1);
        let spec = NoiseSpec::gaussian_bump(4);
        let model =
            ito_form(&NoiseRegime::StratRed { sigma, kappa, sigma_xi }, &spec).unwrap();
        assert!((model.ou_drift_coeff + sigma * kappa).abs() < 1e-15);
        assert!((model.white_drift_coeff - 0.5 * sigma * sigma * sigma_xi * sigma_xi).abs() < 1e-15);
        assert!((model.q_diffusion_wp - sigma * sigma_xi).abs() < 1e-15);
        // Correction is nonnegative wherever q ≥ 0.
        let corr = model.white_correction_field(&grid(), &spec).unwrap();
        assert!(corr.min_value() >= 0.0);
    }

    #[test]
    fn strat_red_noise_block_spectrum() {
        let v = strat_red_noise_block_eigenvalue(0.5, 0.1, 1.0);
        assert!((v - 1.25 * 0.01).abs() < 1e-15);
    }

    #[test]
    fn invalid_regimes_are_rejected() {
        assert!(NoiseRegime::AdditiveRed { sigma: 1.0, kappa: 0.0, sigma_xi: 0.1 }
            .validate()
            .is_err());
        assert!(NoiseRegime::StratRed { sigma: 1.0, kappa: 0.5, sigma_xi: 0.0 }
            .validate()
            .is_err());
        assert!(NoiseRegime::ItoWhite { sigma: -1.0 }.validate().is_err());
    }
}
