//! Rare-event estimation of `P(sup_{t ≤ T} score(state) > level)`: plain
//! Monte Carlo and trajectory-adaptive multilevel splitting (the classical
//! kill-and-clone scheme with running-maximum score).
//!
//! One splitting iteration removes the `kill_count` lowest running maxima,
//! records that killing level, and regrows each removed path from a uniformly
//! chosen survivor: the parent's stored states are copied up to the first
//! step where its running maximum exceeded the level, and the tail is
//! resimulated with fresh noise, so the clone's score history equals the
//! parent's exactly up to the branch point. Every kill round multiplies the
//! estimate by `1 - ℓ/N`; the loop stops when the killing level passes the
//! target and the estimate is closed with the surviving success fraction.
//!
//! Two provisions keep the scheme effective on dynamics whose forcing ramps
//! up from zero (the red-noise regimes start with a deterministic decay, so
//! path maxima can carry atoms):
//! - the running maximum excludes the t = 0 score; the target must lie above
//!   the initial score anyway (enforced), so the estimated event is
//!   unchanged, and a shared start cannot tie the whole ensemble;
//! - every path segment carries an independent uniform mark and the order
//!   statistics are taken lexicographically in (score, mark), which is the
//!   usual atomless completion of the score. Paths tied at the killing score
//!   branch at their first visit of that score and re-draw their tail, so an
//!   atom is drained by resampling rather than freezing the ensemble. A
//!   genuinely frozen ensemble (e.g. zero noise) is still reported through
//!   the stagnation guard.

use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{usage, ModelError, Result};
use crate::forcing::{draw_standard_normals, RngStream};
use crate::grid::{norm_1_slice, norm_inf_slice, Grid};
use crate::sim::{steady_states, ModelParams, StepNoise, Stepper, SystemKind};

/// Path functional whose running maximum triggers the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreFunction {
    /// L¹ mass of the field; the onset target is q₊·L.
    ScaledL1,
    /// Sup norm of the field; the onset target is q₊.
    SupNorm,
}

impl ScoreFunction {
    pub fn evaluate(&self, grid: &Grid, values: &[f64]) -> f64 {
        match self {
            ScoreFunction::ScaledL1 => norm_1_slice(grid, values),
            ScoreFunction::SupNorm => norm_inf_slice(values),
        }
    }

    /// Turbulence-onset target of this score at Reynolds parameter r.
    pub fn target_level(&self, r: f64, length: f64) -> Result<f64> {
        let q_plus = steady_states(r)?.q_plus;
        Ok(match self {
            ScoreFunction::ScaledL1 => q_plus * length,
            ScoreFunction::SupNorm => q_plus,
        })
    }
}

/// Anything TAMS can split: a fixed-step Markov system with a scalar score.
pub trait TamsSystem: Clone + Send + Sync {
    type State: Clone + Send;

    fn initial_state(&self) -> Self::State;
    fn n_steps(&self) -> usize;
    fn step(&mut self, state: &mut Self::State, rng: &mut ChaCha12Rng);
    fn score(&self, state: &Self::State) -> f64;
}

/// Splitting parameters.
#[derive(Debug, Clone)]
pub struct TamsConfig {
    pub n_trajectories: usize,
    /// Paths removed per iteration (ℓ); ties below the level are all removed.
    pub kill_count: usize,
    pub max_iterations: usize,
    pub target_level: f64,
    pub base_stream: RngStream,
    /// Abort when the killing level has not increased for this many rounds.
    pub stagnation_window: usize,
}

impl TamsConfig {
    pub fn new(n_trajectories: usize, target_level: f64, base_stream: RngStream) -> Self {
        TamsConfig {
            n_trajectories,
            kill_count: 1,
            max_iterations: 10_000,
            target_level,
            base_stream,
            stagnation_window: 50,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_trajectories < 2 {
            return Err(usage("splitting needs at least two trajectories".to_string()));
        }
        if self.kill_count == 0 || self.kill_count >= self.n_trajectories {
            return Err(usage(format!(
                "kill count must satisfy 1 ≤ ℓ < N, got ℓ = {}, N = {}",
                self.kill_count, self.n_trajectories
            )));
        }
        Ok(())
    }
}

/// Result of one splitting run.
#[derive(Debug, Clone)]
pub struct TamsEstimate {
    pub p_hat: f64,
    /// Natural log of the estimate; stays informative when `p_hat`
    /// underflows to zero (deep rare events accumulate thousands of
    /// `1 - ℓ/N` factors).
    pub log_p_hat: f64,
    pub iterations: usize,
    /// Killing level sequence.
    pub levels: Vec<f64>,
    /// Paths whose running maximum exceeded the target when the run stopped.
    pub successes: usize,
    pub n_branchings: usize,
}

/// One stored trajectory: states and running-maximum score at every step,
/// plus the uniform tie-breaker mark of its last resampled segment.
struct Trajectory<S> {
    states: Vec<S>,
    running_max: Vec<f64>,
    mark: f64,
}

impl<S: Clone> Trajectory<S> {
    fn sup_score(&self) -> f64 {
        *self.running_max.last().expect("trajectory has at least the initial state")
    }

    /// Lexicographic comparison of (sup score, mark).
    fn key(&self) -> (f64, f64) {
        (self.sup_score(), self.mark)
    }

    /// Copy the prefix of `parent` up to (and including) the first step where
    /// its running maximum exceeds `level` — or first reaches it, when the
    /// parent survived the kill only through its mark.
    fn branch_from(parent: &Trajectory<S>, level: f64, mark: f64) -> (Trajectory<S>, usize) {
        let idx = if parent.sup_score() > level {
            parent
                .running_max
                .iter()
                .position(|&s| s > level)
                .expect("survivor exceeds the killing level")
        } else {
            parent
                .running_max
                .iter()
                .position(|&s| s >= level)
                .expect("survivor reaches the killing level")
        };
        (
            Trajectory {
                states: parent.states[..=idx].to_vec(),
                running_max: parent.running_max[..=idx].to_vec(),
                mark,
            },
            idx,
        )
    }
}

fn grow<S: TamsSystem>(
    system: &mut S,
    trajectory: &mut Trajectory<S::State>,
    rng: &mut ChaCha12Rng,
) {
    let mut state = trajectory.states.last().expect("non-empty trajectory").clone();
    let mut running = trajectory.sup_score();
    for _ in trajectory.states.len()..=system.n_steps() {
        system.step(&mut state, rng);
        running = running.max(system.score(&state));
        trajectory.states.push(state.clone());
        trajectory.running_max.push(running);
    }
}

/// Trajectory-adaptive multilevel splitting estimate of
/// `P(max over the path of score > target)`.
pub fn tams_estimate<S: TamsSystem>(system: &S, config: &TamsConfig) -> Result<TamsEstimate> {
    tams_estimate_impl(system, config).map(|(estimate, _)| estimate)
}

/// As [`tams_estimate`], also returning the state sequences of the final
/// ensemble (one `Vec<State>` per trajectory, one state per step).
pub fn tams_estimate_with_paths<S: TamsSystem>(
    system: &S,
    config: &TamsConfig,
) -> Result<(TamsEstimate, Vec<Vec<S::State>>)> {
    tams_estimate_impl(system, config)
}

fn tams_estimate_impl<S: TamsSystem>(
    system: &S,
    config: &TamsConfig,
) -> Result<(TamsEstimate, Vec<Vec<S::State>>)> {
    config.validate()?;
    {
        let sys = system.clone();
        let initial_score = sys.score(&sys.initial_state());
        if !(config.target_level > initial_score) {
            return Err(usage(format!(
                "splitting target {} must exceed the initial score {initial_score}",
                config.target_level
            )));
        }
    }
    let n = config.n_trajectories;
    let mut stream_counter: u64 = 0;
    let next_rng = |counter: &mut u64| {
        let rng = RngStream::new(config.base_stream.seed, config.base_stream.stream + *counter)
            .rng();
        *counter += 1;
        rng
    };

    let mut paths: Vec<Trajectory<S::State>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut sys = system.clone();
        let state = sys.initial_state();
        let mut rng = next_rng(&mut stream_counter);
        let mark = rand::Rng::random::<f64>(&mut rng);
        let mut traj =
            Trajectory { states: vec![state], running_max: vec![f64::NEG_INFINITY], mark };
        grow(&mut sys, &mut traj, &mut rng);
        paths.push(traj);
    }

    let mut log_p = 0.0f64;
    let log_keep = (1.0 - config.kill_count as f64 / n as f64).ln();
    let mut levels = Vec::new();
    let mut iterations = 0usize;
    let mut n_branchings = 0usize;
    let mut stagnant = 0usize;

    loop {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| paths[a].key().partial_cmp(&paths[b].key()).unwrap());
        let (level, level_mark) = paths[order[config.kill_count - 1]].key();
        if level > config.target_level {
            break;
        }
        if iterations >= config.max_iterations {
            break;
        }
        if let Some(&prev) = levels.last() {
            if level <= prev {
                stagnant += 1;
                if stagnant >= config.stagnation_window {
                    return Err(ModelError::Degenerate(format!(
                        "killing level stuck at {level} for {stagnant} iterations \
                         (log p̂ so far {log_p:.1}, iteration {iterations})"
                    )));
                }
            } else {
                stagnant = 0;
            }
        }
        log_p += log_keep;
        levels.push(level);

        let killed = &order[..config.kill_count];
        let survivors = &order[config.kill_count..];
        for &j in killed {
            let mut rng = next_rng(&mut stream_counter);
            // Uniform parent choice from the same stream keeps runs
            // reproducible under one base seed.
            let pick = (rand::Rng::random::<u64>(&mut rng) as usize) % survivors.len();
            let parent = survivors[pick];
            // A clone branching at a numeric tie of the level crosses the
            // lexicographic level only through its mark, so the fresh mark is
            // drawn conditionally above the level's.
            let mark = if paths[parent].sup_score() > level {
                rand::Rng::random::<f64>(&mut rng)
            } else {
                level_mark + (1.0 - level_mark) * rand::Rng::random::<f64>(&mut rng)
            };
            let (mut traj, _) = Trajectory::branch_from(&paths[parent], level, mark);
            let mut sys = system.clone();
            grow(&mut sys, &mut traj, &mut rng);
            paths[j] = traj;
            n_branchings += 1;
        }
        iterations += 1;
    }

    let successes =
        paths.iter().filter(|p| p.sup_score() > config.target_level).count();
    let log_p_hat = log_p + (successes as f64 / n as f64).ln();
    let estimate = TamsEstimate {
        p_hat: log_p_hat.exp(),
        log_p_hat,
        iterations,
        levels,
        successes,
        n_branchings,
    };
    Ok((estimate, paths.into_iter().map(|t| t.states).collect()))
}

/// Mean, standard error and raw estimates of independent splitting runs
/// (stream-shifted from the base seed).
pub fn tams_repeat<S: TamsSystem>(
    system: &S,
    config: &TamsConfig,
    repetitions: usize,
) -> Result<(f64, f64, Vec<TamsEstimate>)> {
    if repetitions == 0 {
        return Err(usage("need at least one repetition".to_string()));
    }
    let estimates: Vec<Result<TamsEstimate>> = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut cfg = config.clone();
            cfg.base_stream = RngStream::new(
                config.base_stream.seed,
                config.base_stream.stream + (rep as u64) * (1 << 32),
            );
            tams_estimate(system, &cfg)
        })
        .collect();
    let estimates: Vec<TamsEstimate> = estimates.into_iter().collect::<Result<_>>()?;
    let mean = estimates.iter().map(|e| e.p_hat).sum::<f64>() / repetitions as f64;
    let var = estimates.iter().map(|e| (e.p_hat - mean).powi(2)).sum::<f64>()
        / (repetitions.max(2) - 1) as f64;
    let se = (var / repetitions as f64).sqrt();
    Ok((mean, se, estimates))
}

/// Plain Monte Carlo crossing estimate for any splitting-capable system.
pub fn mc_estimate_system<S: TamsSystem>(
    system: &S,
    level: f64,
    n_paths: usize,
    base_stream: RngStream,
) -> (f64, f64) {
    let hits: u64 = (0..n_paths as u64)
        .into_par_iter()
        .map_init(
            || system.clone(),
            |sys, k| {
                let mut rng =
                    RngStream::new(base_stream.seed, base_stream.stream + k).rng();
                let mut state = sys.initial_state();
                if sys.score(&state) > level {
                    return 1u64;
                }
                for _ in 0..sys.n_steps() {
                    sys.step(&mut state, &mut rng);
                    if sys.score(&state) > level {
                        return 1;
                    }
                }
                0
            },
        )
        .sum();
    let p = hits as f64 / n_paths as f64;
    let se = (p * (1.0 - p) / n_paths as f64).sqrt();
    (p, se)
}

/// Monte Carlo estimate of the turbulence-onset probability for the SPDE
/// model: fraction of paths whose running-maximum score exceeds `level` by
/// the horizon, with the binomial standard error.
pub fn mc_estimate(
    params: &ModelParams,
    kind: SystemKind,
    score: ScoreFunction,
    level: f64,
    n_paths: usize,
    base_stream: RngStream,
) -> Result<(f64, f64)> {
    if n_paths == 0 {
        return Err(usage("need at least one path".to_string()));
    }
    let system = PdeScoreSystem::new(params.clone(), kind, score)?;
    Ok(mc_estimate_system(&system, level, n_paths, base_stream))
}

/// SPDE adapter for the splitting machinery. Both Wiener processes draw from
/// the one per-segment stream (independent normals either way), so clones
/// regrow with noise independent of their parent's tail.
pub struct PdeScoreSystem {
    params: ModelParams,
    kind: SystemKind,
    score: ScoreFunction,
    stepper: Stepper,
    noise: StepNoise,
}

/// Field values plus Ornstein–Uhlenbeck mode coefficients.
#[derive(Debug, Clone)]
pub struct PdeState {
    pub q: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PdeScoreSystem {
    pub fn new(params: ModelParams, kind: SystemKind, score: ScoreFunction) -> Result<Self> {
        let stepper = Stepper::new(&params, kind)?;
        let noise = StepNoise::zeros(stepper.n_active_modes());
        Ok(PdeScoreSystem { params, kind, score, stepper, noise })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
}

impl Clone for PdeScoreSystem {
    fn clone(&self) -> Self {
        PdeScoreSystem::new(self.params.clone(), self.kind, self.score)
            .expect("parameters were validated on construction")
    }
}

impl TamsSystem for PdeScoreSystem {
    type State = PdeState;

    fn initial_state(&self) -> PdeState {
        PdeState {
            q: self.params.q0.values().to_vec(),
            xi: vec![0.0; self.stepper.n_active_modes()],
        }
    }

    fn n_steps(&self) -> usize {
        self.params.n_steps()
    }

    fn step(&mut self, state: &mut PdeState, rng: &mut ChaCha12Rng) {
        if self.stepper.uses_w() {
            draw_standard_normals(rng, &mut self.noise.z_w);
        }
        if self.stepper.uses_wp() {
            draw_standard_normals(rng, &mut self.noise.z_wp);
        }
        self.stepper.step(&mut state.q, &mut state.xi, &self.noise);
    }

    fn score(&self, state: &PdeState) -> f64 {
        self.score.evaluate(&self.params.grid, &state.q)
    }
}

/// Scalar Ornstein–Uhlenbeck toy system advanced by its exact transition;
/// the validation benchmark for the splitting estimator.
#[derive(Debug, Clone)]
pub struct ScalarOu {
    pub theta: f64,
    pub sigma: f64,
    pub x0: f64,
    pub dt: f64,
    pub steps: usize,
    decay: f64,
    sd: f64,
}

impl ScalarOu {
    pub fn new(theta: f64, sigma: f64, x0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(theta > 0.0) || !(dt > 0.0) {
            return Err(usage("scalar system needs θ > 0 and dt > 0".to_string()));
        }
        let decay = (-theta * dt).exp();
        let sd = sigma * (-(-2.0 * theta * dt).exp_m1() / (2.0 * theta)).sqrt();
        Ok(ScalarOu { theta, sigma, x0, dt, steps, decay, sd })
    }

    /// Lower bound `P(X_T > a)` on the crossing probability (single-time
    /// Gaussian marginal), used as an analytic sanity band.
    pub fn single_time_lower_bound(&self, level: f64) -> f64 {
        let t = self.dt * self.steps as f64;
        let var = self.sigma * self.sigma * (1.0 - (-2.0 * self.theta * t).exp())
            / (2.0 * self.theta);
        let mean = self.x0 * (-self.theta * t).exp();
        crate::bounds::normal_upper_tail((level - mean) / var.sqrt())
    }
}

impl TamsSystem for ScalarOu {
    type State = f64;

    fn initial_state(&self) -> f64 {
        self.x0
    }

    fn n_steps(&self) -> usize {
        self.steps
    }

    fn step(&mut self, state: &mut f64, rng: &mut ChaCha12Rng) {
        let z: f64 = rand::Rng::sample(rng, rand_distr::StandardNormal);
        *state = self.decay * *state + self.sd * z;
    }

    fn score(&self, state: &f64) -> f64 {
        *state
    }
}
