//! Neumann cosine eigenbasis on [0, L], spectral analysis/synthesis, the
//! dissipative heat semigroup and its fundamental solution.
//!
//! The Laplacian with homogeneous Neumann conditions has eigenpairs
//!
//! ```text
//! e_0 ≡ 1/√L,   e_n(x) = √(2/L) cos(nπx/L),   λ_n = (nπ/L)²
//! ```
//!
//! and the cable-equation kernel is the spectral sum
//! `G_α(x,y,t) = e^{-tα} Σ_n e_n(x) e_n(y) e^{-tλ_n}`.
//!
//! Grid-resident fields are transformed with a DCT-I whose forward direction
//! is exactly the trapezoid quadrature `⟨e_n, f⟩`; the inverse halves the
//! Nyquist coefficient so that analyze → reconstruct is the identity on the
//! grid. Semigroup application is diagonal in that representation.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{domain, usage, Result};
use crate::grid::{Field, Grid};

/// Truncation tail target for spectral sums.
const TAIL_EPS: f64 = 1e-14;

/// Eigenvalue λ_n = (nπ/L)² of mode `n`.
pub fn eigenvalue(n: usize, length: f64) -> f64 {
    let k = n as f64 * PI / length;
    k * k
}

/// One eigenfunction of the Neumann Laplacian on [0, L].
#[derive(Debug, Clone, Copy)]
pub struct EigenMode {
    n: usize,
    length: f64,
}

impl EigenMode {
    pub fn mode(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        eigenvalue(self.n, self.length)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        eigenfunction_value(self.n, self.length, x)
    }

    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        if (grid.length() - self.length).abs() > 1e-12 * self.length {
            return Err(usage("eigenmode length differs from grid length".to_string()));
        }
        Field::from_fn(grid.clone(), |x| self.evaluate(x))
    }
}

pub(crate) fn eigenfunction_value(n: usize, length: f64, x: f64) -> f64 {
    if n == 0 {
        1.0 / length.sqrt()
    } else {
        (2.0 / length).sqrt() * (n as f64 * PI * x / length).cos()
    }
}

/// Eigenpair (λ_n, e_n) of the Neumann Laplacian.
pub fn eigenpair(n: usize, length: f64) -> Result<(f64, EigenMode)> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(domain(format!("domain length must be positive, got {length}")));
    }
    Ok((eigenvalue(n, length), EigenMode { n, length }))
}

/// Coefficients `a_n = ⟨e_n, f⟩` for n = 0..=n_max.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    coeffs: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn new(coeffs: Vec<f64>) -> Self {
        SpectralCoeffs { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn n_max(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

/// Projection of `f` onto modes 0..=n_max by trapezoid quadrature.
pub fn analyze(f: &Field, n_max: usize) -> SpectralCoeffs {
    let grid = f.grid();
    let length = grid.length();
    let mut coeffs = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut acc = 0.0;
        for j in 0..grid.n_points() {
            acc += grid.weight(j) * eigenfunction_value(n, length, grid.node(j)) * f.values()[j];
        }
        coeffs.push(acc);
    }
    SpectralCoeffs { coeffs }
}

/// Pointwise sum `Σ_n a_n e_n(x_j)` on the grid nodes.
pub fn synthesize(coeffs: &SpectralCoeffs, grid: &Grid) -> Result<Field> {
    let length = grid.length();
    let mut values = vec![0.0; grid.n_points()];
    for (n, &a) in coeffs.coeffs.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (j, v) in values.iter_mut().enumerate() {
            *v += a * eigenfunction_value(n, length, grid.node(j));
        }
    }
    Field::new(grid.clone(), values)
}

/// Number of modes needed so the tail factor `e^{-t λ_N}` drops below 1e-14,
/// capped at `cap`.
pub fn truncation_modes(t: f64, length: f64, cap: usize) -> usize {
    if t <= 0.0 {
        return cap;
    }
    let lambda_needed = -TAIL_EPS.ln() / t;
    let n = (length / PI * lambda_needed.sqrt()).ceil() as usize + 1;
    n.min(cap)
}

/// Grid-exact cosine transform pair (DCT-I via an FFT of the even extension).
///
/// `analyze_grid` returns the trapezoid coefficients ⟨e_k, f⟩ for k = 0..M
/// (M = n_points − 1); `reconstruct` inverts it exactly, which requires
/// halving the Nyquist coefficient because the trapezoid rule double-counts
/// that mode.
pub struct CosineTransform {
    grid: Grid,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    /// Normalisation `c_k` with `e_k(x) = c_k cos(kπx/L)`.
    norms: Vec<f64>,
}

impl CosineTransform {
    pub fn new(grid: Grid) -> Self {
        let m = grid.n_points() - 1;
        let fft = FftPlanner::new().plan_fft_forward(2 * m);
        let mut norms = vec![(2.0 / grid.length()).sqrt(); m + 1];
        norms[0] = 1.0 / grid.length().sqrt();
        CosineTransform { grid, fft, buf: vec![Complex::default(); 2 * m], norms }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn run_extended(&mut self, data: &[f64]) {
        let m = self.grid.n_points() - 1;
        self.buf[0] = Complex::new(data[0], 0.0);
        self.buf[m] = Complex::new(data[m], 0.0);
        for j in 1..m {
            self.buf[j] = Complex::new(data[j], 0.0);
            self.buf[2 * m - j] = Complex::new(data[j], 0.0);
        }
        self.fft.process(&mut self.buf);
    }

    /// Trapezoid coefficients ⟨e_k, f⟩ for k = 0..=M.
    pub fn analyze_grid(&mut self, values: &[f64], out: &mut [f64]) {
        let m = self.grid.n_points() - 1;
        debug_assert_eq!(values.len(), m + 1);
        debug_assert_eq!(out.len(), m + 1);
        self.run_extended(values);
        let dx = self.grid.spacing();
        for k in 0..=m {
            out[k] = 0.5 * dx * self.norms[k] * self.buf[k].re;
        }
    }

    /// Exact inverse of `analyze_grid`.
    pub fn reconstruct(&mut self, coeffs: &[f64], out: &mut [f64]) {
        let m = self.grid.n_points() - 1;
        debug_assert_eq!(coeffs.len(), m + 1);
        debug_assert_eq!(out.len(), m + 1);
        let mut h = vec![0.0; m + 1];
        for k in 0..=m {
            let alpha = if k == m { 0.5 * coeffs[k] } else { coeffs[k] };
            h[k] = alpha * self.norms[k];
        }
        self.run_extended(&h);
        let h0 = h[0];
        let hm = h[m];
        for j in 0..=m {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            out[j] = 0.5 * (self.buf[j].re + h0 + sign * hm);
        }
    }

    /// In-place application of `e^{t(Δ - α)}` to grid samples.
    pub fn apply_semigroup_values(&mut self, values: &mut [f64], t: f64, alpha: f64) {
        let m = self.grid.n_points() - 1;
        let mut coeffs = vec![0.0; m + 1];
        self.analyze_grid(values, &mut coeffs);
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c *= (-t * (alpha + eigenvalue(k, self.grid.length()))).exp();
        }
        self.reconstruct(&coeffs, values);
    }
}

/// `e^{t(Δ - α)} f` through the eigen decomposition; `t = 0` returns `f`.
pub fn apply_semigroup(f: &Field, t: f64, alpha: f64) -> Result<Field> {
    if t < 0.0 || !t.is_finite() {
        return Err(domain(format!("semigroup time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let mut transform = CosineTransform::new(f.grid().clone());
    let mut values = f.values().to_vec();
    transform.apply_semigroup_values(&mut values, t, alpha);
    Field::new(f.grid().clone(), values)
}

/// Fundamental solution `G_α(x, y, t)` of the cable equation, truncated at
/// `n_max` modes. Rejects `t ≤ 0`: the series has no pointwise limit there.
pub fn heat_kernel(x: f64, y: f64, t: f64, alpha: f64, n_max: usize, length: f64) -> Result<f64> {
    if !(length > 0.0) {
        return Err(domain(format!("domain length must be positive, got {length}")));
    }
    if !(t > 0.0) {
        return Err(domain(format!("heat kernel requires t > 0, got {t}")));
    }
    let mut acc = 0.0;
    for n in 0..=n_max {
        let decay = (-t * eigenvalue(n, length)).exp();
        if decay < TAIL_EPS && n > 0 {
            break;
        }
        acc += eigenfunction_value(n, length, x) * eigenfunction_value(n, length, y) * decay;
    }
    Ok((-t * alpha).exp() * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner, norm_inf};

    fn grid(n: usize) -> Grid {
        Grid::new(10.0, n).unwrap()
    }

    #[test]
    fn eigenpair_zero_mode() {
        let (lambda, e0) = eigenpair(0, 10.0).unwrap();
        assert_eq!(lambda, 0.0);
        assert!((e0.evaluate(3.7) - 0.316228).abs() < 1e-6);
    }

    #[test]
    fn eigenpair_first_mode_eigenvalue() {
        let (lambda, _) = eigenpair(1, 10.0).unwrap();
        assert!((lambda - 0.0986960).abs() < 1e-7);
    }

    #[test]
    fn eigenpair_rejects_bad_length() {
        assert!(eigenpair(1, 0.0).is_err());
        assert!(eigenpair(1, -2.0).is_err());
    }

    #[test]
    fn modes_orthogonal_under_quadrature() {
        let g = grid(1001);
        let e2 = eigenpair(2, 10.0).unwrap().1.sample(&g).unwrap();
        let e3 = eigenpair(3, 10.0).unwrap().1.sample(&g).unwrap();
        assert!(inner(&e2, &e3).unwrap().abs() < 1e-10);
    }

    #[test]
    fn mode_normalised_under_quadrature() {
        let g = grid(1001);
        let e1 = eigenpair(1, 10.0).unwrap().1.sample(&g).unwrap();
        assert!((inner(&e1, &e1).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sup_norm_of_first_mode() {
        let g = grid(1001);
        let e1 = eigenpair(1, 10.0).unwrap().1.sample(&g).unwrap();
        assert!((norm_inf(&e1) - (0.2f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gram_matrix_is_identity() {
        let g = grid(1001);
        let modes: Vec<Field> =
            (0..=20).map(|n| eigenpair(n, 10.0).unwrap().1.sample(&g).unwrap()).collect();
        for (i, a) in modes.iter().enumerate() {
            for (j, b) in modes.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (inner(a, b).unwrap() - expected).abs() < 1e-7,
                    "gram entry ({i},{j}) off"
                );
            }
        }
    }

    #[test]
    fn analyze_picks_out_single_mode() {
        let g = grid(1001);
        let e3 = eigenpair(3, 10.0).unwrap().1.sample(&g).unwrap();
        let coeffs = analyze(&e3, 8);
        for (n, &a) in coeffs.coeffs().iter().enumerate() {
            let expected = if n == 3 { 1.0 } else { 0.0 };
            assert!((a - expected).abs() < 1e-8, "coefficient {n} = {a}");
        }
    }

    #[test]
    fn analyze_synthesize_roundtrip_on_constant() {
        let g = grid(101);
        let f = Field::constant(g.clone(), 0.5).unwrap();
        let back = synthesize(&analyze(&f, 16), &g).unwrap();
        for (&a, &b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn analyze_linear_ramp_matches_direct_quadrature() {
        // ⟨e_1, x⟩ on [0,10]: continuum value -2 L √(2L) / π².
        let g = grid(1001);
        let ramp = Field::from_fn(g.clone(), |x| x).unwrap();
        let a1 = analyze(&ramp, 1).coeffs()[1];
        let mut direct = 0.0;
        for j in 0..g.n_points() {
            direct += g.weight(j) * eigenfunction_value(1, 10.0, g.node(j)) * g.node(j);
        }
        assert!((a1 - direct).abs() < 1e-12);
        let continuum = -2.0 * 10.0 * 20.0f64.sqrt() / (PI * PI);
        assert!((a1 - continuum).abs() < 1e-3, "a1 = {a1}, continuum = {continuum}");
    }

    #[test]
    fn dct_analyze_matches_quadrature_analyze() {
        let g = grid(101);
        let f = Field::from_fn(g.clone(), |x| (0.3 * x).sin() + 0.2 * x).unwrap();
        let mut transform = CosineTransform::new(g.clone());
        let mut fast = vec![0.0; g.n_points()];
        transform.analyze_grid(f.values(), &mut fast);
        let slow = analyze(&f, g.n_points() - 1);
        for (k, (&a, &b)) in fast.iter().zip(slow.coeffs()).enumerate() {
            assert!((a - b).abs() < 1e-11, "mode {k}: dct {a} vs quadrature {b}");
        }
    }

    #[test]
    fn dct_reconstruct_inverts_analyze() {
        let g = grid(101);
        // Includes Nyquist-frequency content on purpose.
        let f = Field::from_fn(g.clone(), |x| if (x * 10.0) as usize % 2 == 0 { 1.0 } else { -0.5 })
            .unwrap();
        let mut transform = CosineTransform::new(g.clone());
        let mut coeffs = vec![0.0; g.n_points()];
        transform.analyze_grid(f.values(), &mut coeffs);
        let mut back = vec![0.0; g.n_points()];
        transform.reconstruct(&coeffs, &mut back);
        for (&a, &b) in back.iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn semigroup_identity_at_t_zero() {
        let g = grid(101);
        let f = Field::from_fn(g, |x| x.cos()).unwrap();
        let out = apply_semigroup(&f, 0.0, 1.0).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn semigroup_rejects_negative_time() {
        let g = grid(101);
        let f = Field::constant(g, 1.0).unwrap();
        assert!(apply_semigroup(&f, -0.1, 1.0).is_err());
    }

    #[test]
    fn semigroup_decays_constant_by_alpha_only() {
        let g = grid(101);
        let f = Field::constant(g, 2.0).unwrap();
        let out = apply_semigroup(&f, 0.7, 1.3).unwrap();
        let expected = 2.0 * (-0.7 * 1.3f64).exp();
        for &v in out.values() {
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn semigroup_decays_first_mode_exactly() {
        let g = grid(101);
        let e1 = eigenpair(1, 10.0).unwrap().1.sample(&g).unwrap();
        let out = apply_semigroup(&e1, 1.0, 1.0).unwrap();
        let factor = (-(1.0 + eigenvalue(1, 10.0))).exp();
        let max_err = out
            .values()
            .iter()
            .zip(e1.values())
            .map(|(&o, &e)| (o - factor * e).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-10, "max error {max_err}");
    }

    /// Dense matrix exponential of the mirror-point finite-difference Neumann
    /// Laplacian; an independent discretisation of the same semigroup.
    fn matexp_fd_oracle(values: &[f64], t: f64, alpha: f64, length: f64) -> Vec<f64> {
        let n = values.len();
        let dx = length / (n - 1) as f64;
        let mut a = vec![vec![0.0; n]; n];
        for j in 0..n {
            a[j][j] = -2.0 / (dx * dx) - alpha;
            if j == 0 {
                a[0][1] = 2.0 / (dx * dx);
            } else if j == n - 1 {
                a[n - 1][n - 2] = 2.0 / (dx * dx);
            } else {
                a[j][j - 1] = 1.0 / (dx * dx);
                a[j][j + 1] = 1.0 / (dx * dx);
            }
        }
        // exp(tA)v by scaling and squaring on the *vector space*: repeated
        // Taylor steps with dt small enough that the series converges fast.
        let steps = (t * 4.0 / (dx * dx)).ceil().max(1.0) as usize;
        let dt = t / steps as f64;
        let mut v = values.to_vec();
        for _ in 0..steps {
            let mut acc = v.clone();
            let mut term = v.clone();
            for k in 1..=12 {
                let mut next = vec![0.0; n];
                for (j, row) in a.iter().enumerate() {
                    let mut s = 0.0;
                    for (i, &aji) in row.iter().enumerate() {
                        if aji != 0.0 {
                            s += aji * term[i];
                        }
                    }
                    next[j] = s * dt / k as f64;
                }
                for (acc_j, &n_j) in acc.iter_mut().zip(&next) {
                    *acc_j += n_j;
                }
                term = next;
            }
            v = acc;
        }
        v
    }

    #[test]
    fn semigroup_agrees_with_finite_difference_exponential() {
        let g = Grid::new(10.0, 81).unwrap();
        let f = Field::from_fn(g.clone(), |x| {
            eigenfunction_value(1, 10.0, x) + 0.5 * eigenfunction_value(4, 10.0, x)
        })
        .unwrap();
        let ours = apply_semigroup(&f, 1.0, 1.0).unwrap();
        let oracle = matexp_fd_oracle(f.values(), 1.0, 1.0, 10.0);
        let max_err = ours
            .values()
            .iter()
            .zip(&oracle)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        // The discretisations share the semigroup but differ at O(dx²) in the
        // mode-4 eigenvalue.
        assert!(max_err < 2e-3, "max divergence {max_err}");
    }

    #[test]
    fn semigroup_composition() {
        let g = grid(101);
        let f = Field::from_fn(g, |x| (x - 4.0).tanh()).unwrap();
        let two_step =
            apply_semigroup(&apply_semigroup(&f, 0.3, 1.0).unwrap(), 0.5, 1.0).unwrap();
        let one_step = apply_semigroup(&f, 0.8, 1.0).unwrap();
        for (&a, &b) in two_step.values().iter().zip(one_step.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn heat_kernel_rejects_nonpositive_time() {
        assert!(heat_kernel(1.0, 2.0, 0.0, 1.0, 64, 10.0).is_err());
        assert!(heat_kernel(1.0, 2.0, -1.0, 1.0, 64, 10.0).is_err());
    }

    #[test]
    fn heat_kernel_mass_decays_by_alpha() {
        // ∫ G_α(x, y, t) dx keeps only the constant mode.
        let g = grid(201);
        let n_max = truncation_modes(1.0, 10.0, 4 * g.n_points());
        let y = 3.3;
        let mut mass = 0.0;
        for j in 0..g.n_points() {
            mass += g.weight(j) * heat_kernel(g.node(j), y, 1.0, 1.0, n_max, 10.0).unwrap();
        }
        assert!((mass - (-1.0f64).exp()).abs() < 1e-8, "mass = {mass}");
    }

    #[test]
    fn heat_kernel_chapman_kolmogorov() {
        let g = grid(201);
        let cap = 4 * g.n_points();
        let (x, z) = (1.7, 6.2);
        for &(t, s) in &[(0.1f64, 0.5f64), (0.5, 1.0), (0.1, 1.0), (0.5, 0.5)] {
            let nt = truncation_modes(t.min(s), 10.0, cap);
            let mut composed = 0.0;
            for j in 0..g.n_points() {
                let y = g.node(j);
                composed += g.weight(j)
                    * heat_kernel(x, y, t, 1.0, nt, 10.0).unwrap()
                    * heat_kernel(y, z, s, 1.0, nt, 10.0).unwrap();
            }
            let direct = heat_kernel(x, z, t + s, 1.0, nt, 10.0).unwrap();
            assert!(
                (composed - direct).abs() < 1e-8,
                "t={t}, s={s}: composed {composed} vs direct {direct}"
            );
        }
    }

    #[test]
    fn heat_kernel_equilibrates_without_dissipation() {
        let n_max = truncation_modes(200.0, 10.0, 1000);
        for &x in &[0.0, 2.5, 7.9] {
            let v = heat_kernel(x, 4.0, 200.0, 0.0, n_max, 10.0).unwrap();
            assert!((v - 0.1).abs() < 1e-8);
        }
    }

    #[test]
    fn semigroup_contracts_and_preserves_positivity_on_smooth_fields() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let g = grid(101);
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let coeffs: Vec<f64> =
                (0..12).map(|k| rng.random_range(-1.0..1.0) / (1.0 + k as f64)).collect();
            let base = synthesize(&SpectralCoeffs::new(coeffs), &g).unwrap();
            let shifted = base.map(|v| v - base.min_value()).unwrap();
            let t = rng.random_range(0.01..3.0);
            let out = apply_semigroup(&shifted, t, 0.5).unwrap();
            assert!(norm_inf(&out) <= norm_inf(&shifted) + 1e-12, "contraction violated");
            assert!(out.min_value() >= -1e-9, "positivity violated: {}", out.min_value());
        }
    }
}
