//! Time integration of the turbulence SPDE and its linearization.
//!
//! One step of the nonlinear model in its effective Itô form is the
//! exponential-integrator update
//!
//! ```text
//! q ← S_dt[ q·(1 + η) ] + Φ_dt[ N(q) + extra drift ],   then clamp at 0,
//! ```
//!
//! where `S_dt = e^{dt(Δ-α)}` is the exact semigroup (α = 1 for the nonlinear
//! model), `Φ_dt` integrates the Duhamel kernel exactly per mode
//! (`(1 - e^{-dt μ_n})/μ_n`), `N(q) = (r+1)q²(2-q)`, the extra drift collects
//! the Itô corrections and red-noise coupling of the active regime, and
//! `η = σ Q^{1/2}ΔW` is the multiplicative increment. Putting the noise
//! inside the semigroup argument keeps three structural identities exact in
//! discrete time: constant steady states are fixed points, the reweighted L¹
//! mass of the Itô-white linear system is a martingale step by step, and two
//! systems driven by the same draws preserve their pathwise ordering.
//!
//! The Ornstein–Uhlenbeck modes advance by their exact Gaussian transition;
//! in the time-derivative coupling the same normals feed the q diffusion row,
//! in the additive coupling the state uses an independent substream. The
//! clamp at zero is a discretisation safeguard (the continuous solution stays
//! nonnegative); every clamped node is counted in the record.

use rand_chacha::ChaCha12Rng;

use crate::error::{domain, usage, ModelError, Result};
use crate::forcing::{
    draw_standard_normals, ito_form, EffectiveModel, NoiseRegime, NoiseSpec, RngStream,
};
use crate::grid::{norm_1_slice, norm_inf_slice, Field, Grid};
use crate::spectral::{eigenfunction_value, eigenvalue, CosineTransform};

/// Stream tag for the independent Wiener process of the additive red coupling.
const OU_STREAM_TAG: u64 = 0x6F75; // "ou"

/// Which system a stepper integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// Full model: reaction (r+1)q²(2-q), relaxation -q.
    Nonlinear,
    /// Linearization around the laminar state: -g(x)·u with semigroup part α.
    Linear,
}

/// Physical and numerical parameters of one run.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub r: f64,
    pub grid: Grid,
    pub horizon: f64,
    pub dt: f64,
    pub regime: NoiseRegime,
    pub spec: NoiseSpec,
    pub q0: Field,
    /// Heterogeneity of the linearized drift -g(x)·u; the nonlinear model
    /// always relaxes with coefficient one. Set g ≡ α for the homogeneous
    /// linearization.
    pub g: Field,
    /// Semigroup dissipation of linearized runs; the residual (α - g(x))·u is
    /// integrated explicitly, so it vanishes exactly when g ≡ α.
    pub alpha: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) {
            return Err(domain(format!("Reynolds parameter must be positive, got {}", self.r)));
        }
        if !(self.dt > 0.0) {
            return Err(domain(format!("time step must be positive, got {}", self.dt)));
        }
        if self.horizon < self.dt {
            return Err(usage(format!(
                "horizon {} shorter than one step {}",
                self.horizon, self.dt
            )));
        }
        if self.q0.grid() != &self.grid || self.g.grid() != &self.grid {
            return Err(usage("q0 and g must live on the model grid".to_string()));
        }
        if self.q0.min_value() < 0.0 {
            return Err(domain("initial state must be nonnegative".to_string()));
        }
        if norm_1_slice(&self.grid, self.q0.values()) <= 0.0 {
            return Err(domain("initial state must not be identically zero".to_string()));
        }
        if self.g.min_value() < 0.0 {
            return Err(domain("heterogeneity must be nonnegative".to_string()));
        }
        if self.alpha < 0.0 {
            return Err(domain(format!("dissipation must be nonnegative, got {}", self.alpha)));
        }
        self.regime.validate()
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }
}

/// Deterministic equilibria `q_± = 1 ± √(r/(r+1))` of the reaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStates {
    pub q_minus: f64,
    pub q_plus: f64,
}

impl SteadyStates {
    /// The absorbing laminar state.
    pub fn laminar(&self) -> f64 {
        0.0
    }

    /// The barrier between laminar and turbulent basins.
    pub fn saddle(&self) -> f64 {
        self.q_minus
    }

    pub fn turbulent(&self) -> f64 {
        self.q_plus
    }
}

pub fn steady_states(r: f64) -> Result<SteadyStates> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(domain(format!("Reynolds parameter must be positive, got {r}")));
    }
    let root = (r / (r + 1.0)).sqrt();
    Ok(SteadyStates { q_minus: 1.0 - root, q_plus: 1.0 + root })
}

/// Standard normal draws for one step; `z_w` drives the Q-Wiener process W,
/// `z_wp` the auxiliary W′ of the red regimes. Length = active modes.
#[derive(Debug, Clone)]
pub struct StepNoise {
    pub z_w: Vec<f64>,
    pub z_wp: Vec<f64>,
}

impl StepNoise {
    pub fn zeros(n_active: usize) -> Self {
        StepNoise { z_w: vec![0.0; n_active], z_wp: vec![0.0; n_active] }
    }
}

/// Outcome of one step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepOutcome {
    /// Nodes clamped from below at zero.
    pub clamped: usize,
}

/// Exponential-integrator stepper for one system and regime.
pub struct Stepper {
    kind: SystemKind,
    grid: Grid,
    dt: f64,
    sqrt_dt: f64,
    reaction_coeff: f64,
    model: EffectiveModel,
    active: Vec<(usize, f64)>,
    basis: Vec<Vec<f64>>,
    bsq: Vec<f64>,
    /// α - g(x) residual drift of linearized runs (zero when g ≡ α).
    g_residual: Vec<f64>,
    ou_decay: f64,
    ou_sd: Vec<f64>,
    decay: Vec<f64>,
    duhamel: Vec<f64>,
    transform: CosineTransform,
    buf_mult: Vec<f64>,
    buf_drift: Vec<f64>,
    buf_xi_field: Vec<f64>,
    coeff_a: Vec<f64>,
    coeff_b: Vec<f64>,
}

impl Stepper {
    pub fn new(params: &ModelParams, kind: SystemKind) -> Result<Self> {
        params.validate()?;
        let grid = params.grid.clone();
        let n = grid.n_points();
        let length = grid.length();
        let model = ito_form(&params.regime, &params.spec)?;
        let active = params.spec.active_modes();
        let basis: Vec<Vec<f64>> = active
            .iter()
            .map(|&(i, _)| (0..n).map(|j| eigenfunction_value(i, length, grid.node(j))).collect())
            .collect();
        let bsq = params.spec.squared_basis_field(&grid)?.values().to_vec();
        let alpha = match kind {
            SystemKind::Nonlinear => 1.0,
            SystemKind::Linear => params.alpha,
        };
        let g_residual = match kind {
            SystemKind::Nonlinear => vec![0.0; n],
            SystemKind::Linear => params.g.values().iter().map(|&g| alpha - g).collect(),
        };
        let dt = params.dt;
        let mut decay = vec![0.0; n];
        let mut duhamel = vec![0.0; n];
        for k in 0..n {
            let mu = alpha + eigenvalue(k, length);
            decay[k] = (-dt * mu).exp();
            duhamel[k] = if mu == 0.0 { dt } else { -(-dt * mu).exp_m1() / mu };
        }
        let (ou_decay, ou_sd) = match params.regime {
            NoiseRegime::AdditiveRed { kappa, sigma_xi, .. }
            | NoiseRegime::StratRed { kappa, sigma_xi, .. } => {
                let var_factor = -(-2.0 * kappa * dt).exp_m1() / (2.0 * kappa);
                (
                    (-kappa * dt).exp(),
                    active.iter().map(|&(_, sz)| sigma_xi * sz * var_factor.sqrt()).collect(),
                )
            }
            _ => (0.0, Vec::new()),
        };
        Ok(Stepper {
            kind,
            dt,
            sqrt_dt: dt.sqrt(),
            reaction_coeff: if kind == SystemKind::Nonlinear { params.r + 1.0 } else { 0.0 },
            model,
            basis,
            bsq,
            g_residual,
            ou_decay,
            ou_sd,
            decay,
            duhamel,
            transform: CosineTransform::new(grid.clone()),
            buf_mult: vec![0.0; n],
            buf_drift: vec![0.0; n],
            buf_xi_field: vec![0.0; n],
            coeff_a: vec![0.0; n],
            coeff_b: vec![0.0; n],
            active,
            grid,
        })
    }

    pub fn n_active_modes(&self) -> usize {
        self.active.len()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn is_red(&self) -> bool {
        self.model.regime.is_red()
    }

    /// Whether the step consumes draws for W / for W′.
    pub fn uses_w(&self) -> bool {
        self.model.q_diffusion_w != 0.0
    }

    pub fn uses_wp(&self) -> bool {
        self.is_red()
    }

    /// Advance state (q, ξ) by one step with the given normal draws.
    pub fn step(&mut self, q: &mut [f64], xi: &mut [f64], noise: &StepNoise) -> StepOutcome {
        let n = q.len();
        debug_assert_eq!(n, self.grid.n_points());

        // Exact Ornstein–Uhlenbeck transition first; the drift below sees the
        // end-of-step state. In the time-derivative coupling the same normals
        // feed the q diffusion row.
        if self.is_red() {
            for (idx, x) in xi.iter_mut().enumerate() {
                *x = self.ou_decay * *x + self.ou_sd[idx] * noise.z_wp[idx];
            }
        }

        // Multiplicative factor 1 + η on the semigroup argument.
        self.buf_mult.copy_from_slice(q);
        let c_w = self.model.q_diffusion_w;
        let c_wp = self.model.q_diffusion_wp;
        if c_w != 0.0 || c_wp != 0.0 {
            for (idx, &(_, sqrt_zeta)) in self.active.iter().enumerate() {
                let amp = self.sqrt_dt
                    * sqrt_zeta
                    * (c_w * noise.z_w[idx] + c_wp * noise.z_wp[idx]);
                if amp == 0.0 {
                    continue;
                }
                let row = &self.basis[idx];
                for j in 0..n {
                    self.buf_mult[j] += amp * row[j] * q[j];
                }
            }
        }

        // Explicit drift: reaction, white-noise correction, red coupling,
        // heterogeneity residual. Skipped entirely when all terms vanish
        // (e.g. the homogeneous linearization under Itô white noise).
        let drift_active = self.kind == SystemKind::Nonlinear
            || self.model.white_drift_coeff != 0.0
            || self.model.ou_drift_coeff != 0.0
            || self.g_residual.iter().any(|&v| v != 0.0);
        let needs_xi = self.model.ou_drift_coeff != 0.0;
        if needs_xi {
            self.buf_xi_field.iter_mut().for_each(|v| *v = 0.0);
            for (idx, row) in self.basis.iter().enumerate() {
                let c = xi[idx];
                if c == 0.0 {
                    continue;
                }
                for j in 0..n {
                    self.buf_xi_field[j] += c * row[j];
                }
            }
        }
        let wc = self.model.white_drift_coeff;
        let oc = self.model.ou_drift_coeff;
        if drift_active {
            for j in 0..n {
                let qj = q[j];
                let mut drift = self.g_residual[j] * qj;
                if self.kind == SystemKind::Nonlinear {
                    drift += self.reaction_coeff * qj * qj * (2.0 - qj);
                }
                if wc != 0.0 {
                    drift += wc * self.bsq[j] * qj;
                }
                if needs_xi {
                    drift += oc * qj * self.buf_xi_field[j];
                }
                self.buf_drift[j] = drift;
            }
        }

        self.transform.analyze_grid(&self.buf_mult, &mut self.coeff_a);
        if drift_active {
            self.transform.analyze_grid(&self.buf_drift, &mut self.coeff_b);
            for k in 0..n {
                self.coeff_a[k] =
                    self.decay[k] * self.coeff_a[k] + self.duhamel[k] * self.coeff_b[k];
            }
        } else {
            for k in 0..n {
                self.coeff_a[k] *= self.decay[k];
            }
        }
        self.transform.reconstruct(&self.coeff_a, q);

        let mut clamped = 0;
        for v in q.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                clamped += 1;
            }
        }

        StepOutcome { clamped }
    }
}

/// One explicit step of the nonlinear system (convenience wrapper around
/// [`Stepper`] for single-shot use).
pub fn step_nonlinear(
    q: &Field,
    params: &ModelParams,
    noise: &StepNoise,
    xi: &[f64],
) -> Result<(Field, Vec<f64>)> {
    step_once(q, params, SystemKind::Nonlinear, noise, xi)
}

/// One explicit step of the linearized system.
pub fn step_linear(
    u: &Field,
    params: &ModelParams,
    noise: &StepNoise,
    xi: &[f64],
) -> Result<(Field, Vec<f64>)> {
    step_once(u, params, SystemKind::Linear, noise, xi)
}

fn step_once(
    q: &Field,
    params: &ModelParams,
    kind: SystemKind,
    noise: &StepNoise,
    xi: &[f64],
) -> Result<(Field, Vec<f64>)> {
    let mut stepper = Stepper::new(params, kind)?;
    if q.grid() != &params.grid {
        return Err(usage("state must live on the model grid".to_string()));
    }
    let mut values = q.values().to_vec();
    let mut xi = xi.to_vec();
    if xi.is_empty() {
        xi = vec![0.0; stepper.n_active_modes()];
    }
    stepper.step(&mut values, &mut xi, noise);
    Ok((Field::new(params.grid.clone(), values)?, xi))
}

/// First-passage time of one sup-norm threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstPassage {
    pub threshold: f64,
    pub time: Option<f64>,
}

/// Full record of one simulated path.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub dt: f64,
    /// Times of the norm series (every integration step, t = 0 included).
    pub norm_times: Vec<f64>,
    pub norms_l1: Vec<f64>,
    pub norms_inf: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<Field>,
    /// Ornstein–Uhlenbeck mode coefficients at the snapshot times (red regimes).
    pub xi_snapshots: Option<Vec<Vec<f64>>>,
    pub first_passage: Vec<FirstPassage>,
    pub clamp_events: u64,
}

impl TrajectoryRecord {
    pub fn first_passage_for(&self, threshold: f64) -> Option<f64> {
        self.first_passage
            .iter()
            .find(|fp| (fp.threshold - threshold).abs() < 1e-12)
            .and_then(|fp| fp.time)
    }

    pub fn terminal(&self) -> &Field {
        self.snapshots.last().expect("record holds at least the initial snapshot")
    }
}

/// Crossing detector: sup-norm series against a sorted list of thresholds,
/// crossing times interpolated linearly inside the step.
struct PassageTracker {
    thresholds: Vec<f64>,
    times: Vec<Option<f64>>,
    next: usize,
}

impl PassageTracker {
    fn new(mut thresholds: Vec<f64>) -> Self {
        thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = thresholds.len();
        PassageTracker { thresholds, times: vec![None; n], next: 0 }
    }

    fn observe(&mut self, t_prev: f64, s_prev: f64, t_curr: f64, s_curr: f64) {
        while self.next < self.thresholds.len() && s_curr > self.thresholds[self.next] {
            let j = self.thresholds[self.next];
            let time = if t_curr == 0.0 {
                0.0
            } else {
                let frac = ((j - s_prev) / (s_curr - s_prev)).clamp(0.0, 1.0);
                t_prev + frac * (t_curr - t_prev)
            };
            self.times[self.next] = Some(time);
            self.next += 1;
        }
    }

    fn into_passages(self) -> Vec<FirstPassage> {
        self.thresholds
            .into_iter()
            .zip(self.times)
            .map(|(threshold, time)| FirstPassage { threshold, time })
            .collect()
    }
}

/// Integrate one path, recording norms at every step, snapshots every
/// `save_stride` steps, and first-passage times of the given sup-norm
/// thresholds.
pub fn simulate_path(
    params: &ModelParams,
    kind: SystemKind,
    stream: RngStream,
    save_stride: usize,
    thresholds: &[f64],
) -> Result<TrajectoryRecord> {
    let mut stepper = Stepper::new(params, kind)?;
    let mut driver = NoiseDriver::new(&stepper, params, stream);
    let n_steps = params.n_steps();
    let stride = save_stride.max(1);

    let mut q = params.q0.values().to_vec();
    let mut xi = vec![0.0; stepper.n_active_modes()];
    let mut record = RecordBuilder::new(params, &q, &xi, stepper.is_red(), thresholds, n_steps, stride);

    for step_idx in 1..=n_steps {
        let noise = driver.draw();
        let outcome = stepper.step(&mut q, &mut xi, noise);
        let t = step_idx as f64 * params.dt;
        if q.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Integration {
                time: t,
                reason: "state became non-finite".to_string(),
            });
        }
        record.push(params, t, &q, &xi, outcome, step_idx % stride == 0 || step_idx == n_steps);
    }
    Ok(record.finish())
}

/// Draws the per-step normals a stepper needs, with the stream split the
/// regimes prescribe (shared stream for the time-derivative coupling, an
/// independent substream for the additive coupling's forcing).
struct NoiseDriver {
    noise: StepNoise,
    rng_w: ChaCha12Rng,
    rng_wp: Option<ChaCha12Rng>,
    uses_w: bool,
    uses_wp: bool,
    wp_from_main: bool,
}

impl NoiseDriver {
    fn new(stepper: &Stepper, params: &ModelParams, stream: RngStream) -> Self {
        let independent_wp = matches!(params.regime, NoiseRegime::AdditiveRed { .. });
        NoiseDriver {
            noise: StepNoise::zeros(stepper.n_active_modes()),
            rng_w: stream.rng(),
            rng_wp: independent_wp.then(|| stream.substream(OU_STREAM_TAG).rng()),
            uses_w: stepper.uses_w(),
            uses_wp: stepper.uses_wp(),
            wp_from_main: !independent_wp,
        }
    }

    fn draw(&mut self) -> &StepNoise {
        if self.uses_w {
            draw_standard_normals(&mut self.rng_w, &mut self.noise.z_w);
        }
        if self.uses_wp {
            if self.wp_from_main {
                draw_standard_normals(&mut self.rng_w, &mut self.noise.z_wp);
            } else {
                draw_standard_normals(
                    self.rng_wp.as_mut().expect("substream exists for additive coupling"),
                    &mut self.noise.z_wp,
                );
            }
        }
        &self.noise
    }
}

struct RecordBuilder {
    dt: f64,
    norm_times: Vec<f64>,
    norms_l1: Vec<f64>,
    norms_inf: Vec<f64>,
    snapshot_times: Vec<f64>,
    snapshots: Vec<Field>,
    xi_snapshots: Option<Vec<Vec<f64>>>,
    tracker: PassageTracker,
    clamp_events: u64,
    prev_time: f64,
    prev_sup: f64,
}

impl RecordBuilder {
    fn new(
        params: &ModelParams,
        q: &[f64],
        xi: &[f64],
        red: bool,
        thresholds: &[f64],
        n_steps: usize,
        stride: usize,
    ) -> Self {
        let sup0 = norm_inf_slice(q);
        let mut tracker = PassageTracker::new(thresholds.to_vec());
        tracker.observe(0.0, sup0, 0.0, sup0);
        let mut builder = RecordBuilder {
            dt: params.dt,
            norm_times: Vec::with_capacity(n_steps + 1),
            norms_l1: Vec::with_capacity(n_steps + 1),
            norms_inf: Vec::with_capacity(n_steps + 1),
            snapshot_times: Vec::with_capacity(n_steps / stride + 2),
            snapshots: Vec::with_capacity(n_steps / stride + 2),
            xi_snapshots: red.then(Vec::new),
            tracker,
            clamp_events: 0,
            prev_time: 0.0,
            prev_sup: sup0,
        };
        builder.norm_times.push(0.0);
        builder.norms_l1.push(norm_1_slice(&params.grid, q));
        builder.norms_inf.push(sup0);
        builder.snapshot_times.push(0.0);
        builder.snapshots.push(Field::new(params.grid.clone(), q.to_vec()).expect("finite state"));
        if let Some(list) = builder.xi_snapshots.as_mut() {
            list.push(xi.to_vec());
        }
        builder
    }

    fn push(
        &mut self,
        params: &ModelParams,
        t: f64,
        q: &[f64],
        xi: &[f64],
        outcome: StepOutcome,
        snapshot: bool,
    ) {
        let sup = norm_inf_slice(q);
        self.norm_times.push(t);
        self.norms_l1.push(norm_1_slice(&params.grid, q));
        self.norms_inf.push(sup);
        self.tracker.observe(self.prev_time, self.prev_sup, t, sup);
        self.prev_time = t;
        self.prev_sup = sup;
        self.clamp_events += outcome.clamped as u64;
        if snapshot {
            self.snapshot_times.push(t);
            self.snapshots
                .push(Field::new(params.grid.clone(), q.to_vec()).expect("finite state"));
            if let Some(list) = self.xi_snapshots.as_mut() {
                list.push(xi.to_vec());
            }
        }
    }

    fn finish(self) -> TrajectoryRecord {
        TrajectoryRecord {
            dt: self.dt,
            norm_times: self.norm_times,
            norms_l1: self.norms_l1,
            norms_inf: self.norms_inf,
            snapshot_times: self.snapshot_times,
            snapshots: self.snapshots,
            xi_snapshots: self.xi_snapshots,
            first_passage: self.tracker.into_passages(),
            clamp_events: self.clamp_events,
        }
    }
}

/// The reweighted mass `M(t) = e^{-(T-t)α} ‖u(·,t)‖₁` along a recorded path;
/// a martingale when the record comes from an Itô-white linear run.
pub fn observable_m(record: &TrajectoryRecord, alpha: f64, horizon: f64) -> Vec<(f64, f64)> {
    record
        .norm_times
        .iter()
        .zip(&record.norms_l1)
        .map(|(&t, &l1)| (t, (-(horizon - t) * alpha).exp() * l1))
        .collect()
}

/// Result of a same-noise coupled run of the nonlinear system and its
/// linearization at α = 1.
#[derive(Debug, Clone)]
pub struct CoupledComparison {
    pub q_record: TrajectoryRecord,
    pub u_record: TrajectoryRecord,
    /// Minimum of q - u over all nodes and all steps before q first exceeds 2.
    pub min_gap: f64,
    /// First time the sup-norm of q exceeded 2, if it did.
    pub q_exceeded_two_at: Option<f64>,
}

/// Run the nonlinear model and its α = 1 linearization under identical noise
/// draws, tracking the pointwise gap while q stays below 2.
pub fn coupled_compare(
    params: &ModelParams,
    stream: RngStream,
    save_stride: usize,
    thresholds: &[f64],
) -> Result<CoupledComparison> {
    let mut linear_params = params.clone();
    linear_params.alpha = 1.0;
    linear_params.g = Field::constant(params.grid.clone(), 1.0)?;
    let mut stepper_q = Stepper::new(params, SystemKind::Nonlinear)?;
    let mut stepper_u = Stepper::new(&linear_params, SystemKind::Linear)?;
    let mut driver = NoiseDriver::new(&stepper_q, params, stream);
    let n_steps = params.n_steps();
    let stride = save_stride.max(1);

    let mut q = params.q0.values().to_vec();
    let mut u = params.q0.values().to_vec();
    let mut xi_q = vec![0.0; stepper_q.n_active_modes()];
    let mut xi_u = xi_q.clone();
    let mut rec_q =
        RecordBuilder::new(params, &q, &xi_q, stepper_q.is_red(), thresholds, n_steps, stride);
    let mut rec_u =
        RecordBuilder::new(params, &u, &xi_u, stepper_u.is_red(), thresholds, n_steps, stride);

    let mut min_gap = q
        .iter()
        .zip(&u)
        .map(|(&a, &b)| a - b)
        .fold(f64::INFINITY, f64::min);
    let mut exceeded_at = None;

    for step_idx in 1..=n_steps {
        let noise = driver.draw().clone();
        let out_q = stepper_q.step(&mut q, &mut xi_q, &noise);
        let out_u = stepper_u.step(&mut u, &mut xi_u, &noise);
        let t = step_idx as f64 * params.dt;
        if q.iter().chain(u.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::Integration {
                time: t,
                reason: "coupled state became non-finite".to_string(),
            });
        }
        if exceeded_at.is_none() {
            if norm_inf_slice(&q) > 2.0 {
                exceeded_at = Some(t);
            } else {
                let gap = q.iter().zip(&u).map(|(&a, &b)| a - b).fold(f64::INFINITY, f64::min);
                min_gap = min_gap.min(gap);
            }
        }
        let snap = step_idx % stride == 0 || step_idx == n_steps;
        rec_q.push(params, t, &q, &xi_q, out_q, snap);
        rec_u.push(&linear_params, t, &u, &xi_u, out_u, snap);
    }

    Ok(CoupledComparison {
        q_record: rec_q.finish(),
        u_record: rec_u.finish(),
        min_gap,
        q_exceeded_two_at: exceeded_at,
    })
}

/// Run the two white-noise linearizations (Stratonovich vs Itô, same σ)
/// under identical draws; returns the minimum of u_strat - u_ito over the
/// whole space-time grid.
pub fn coupled_strat_vs_ito(params: &ModelParams, stream: RngStream) -> Result<f64> {
    let sigma = match params.regime {
        NoiseRegime::ItoWhite { sigma } | NoiseRegime::StratWhite { sigma } => sigma,
        _ => {
            return Err(usage(
                "the Stratonovich-Itô comparison needs a white-noise regime".to_string(),
            ))
        }
    };
    let mut params_strat = params.clone();
    params_strat.regime = NoiseRegime::StratWhite { sigma };
    let mut params_ito = params.clone();
    params_ito.regime = NoiseRegime::ItoWhite { sigma };

    let mut stepper_s = Stepper::new(&params_strat, SystemKind::Linear)?;
    let mut stepper_i = Stepper::new(&params_ito, SystemKind::Linear)?;
    let mut driver = NoiseDriver::new(&stepper_s, &params_strat, stream);
    let n_steps = params.n_steps();

    let mut us = params.q0.values().to_vec();
    let mut ui = params.q0.values().to_vec();
    let mut xi = vec![0.0; stepper_s.n_active_modes()];
    let mut min_gap = f64::INFINITY;
    for step_idx in 1..=n_steps {
        let noise = driver.draw().clone();
        stepper_s.step(&mut us, &mut xi, &noise);
        stepper_i.step(&mut ui, &mut xi, &noise);
        let t = step_idx as f64 * params.dt;
        if us.iter().chain(ui.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::Integration {
                time: t,
                reason: "coupled state became non-finite".to_string(),
            });
        }
        let gap = us.iter().zip(&ui).map(|(&a, &b)| a - b).fold(f64::INFINITY, f64::min);
        min_gap = min_gap.min(gap);
    }
    Ok(min_gap)
}
