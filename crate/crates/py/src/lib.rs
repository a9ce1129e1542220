//! Python bindings: the spectral primitives, γ coefficients, analytic onset
//! bounds, and configuration-driven simulation/estimation, exposed as the
//! `pipeflow` extension module.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pipeflow_core::bounds;
use pipeflow_core::bounds::GammaKind;
use pipeflow_core::config::ExperimentConfig;
use pipeflow_core::error::ModelError;
use pipeflow_core::forcing::RngStream;
use pipeflow_core::grid;
use pipeflow_core::presets;
use pipeflow_core::rare::{self, PdeScoreSystem, ScoreFunction, TamsConfig};
use pipeflow_core::sim::{self, SystemKind};
use pipeflow_core::spectral;

fn py_err(e: ModelError) -> PyErr {
    match e {
        ModelError::Usage(_) | ModelError::Domain(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Uniform grid on [0, L].
#[pyclass(name = "Grid", from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: grid::Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(length: f64, n_points: usize) -> PyResult<Self> {
        Ok(PyGrid { inner: grid::Grid::new(length, n_points).map_err(py_err)? })
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length()
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.inner.n_points()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes()
    }

    fn __repr__(&self) -> String {
        format!("Grid(length={}, n_points={})", self.inner.length(), self.inner.n_points())
    }
}

/// Real field sampled on a grid.
#[pyclass(name = "Field", from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: grid::Field,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: PyGrid, values: Vec<f64>) -> PyResult<Self> {
        Ok(PyField { inner: grid::Field::new(grid.inner, values).map_err(py_err)? })
    }

    #[staticmethod]
    fn constant(grid: PyGrid, value: f64) -> PyResult<Self> {
        Ok(PyField { inner: grid::Field::constant(grid.inner, value).map_err(py_err)? })
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn norm_1(&self) -> f64 {
        grid::norm_1(&self.inner)
    }

    fn norm_inf(&self) -> f64 {
        grid::norm_inf(&self.inner)
    }

    fn inner_product(&self, other: &PyField) -> PyResult<f64> {
        grid::inner(&self.inner, &other.inner).map_err(py_err)
    }

    /// e^{t(Δ-α)} applied to this field.
    fn apply_semigroup(&self, t: f64, alpha: f64) -> PyResult<PyField> {
        Ok(PyField { inner: spectral::apply_semigroup(&self.inner, t, alpha).map_err(py_err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.values().len()
    }
}

/// One simulated path: norm series, snapshots and first-passage times.
#[pyclass(name = "Trajectory")]
struct PyTrajectory {
    inner: sim::TrajectoryRecord,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.norm_times.clone()
    }

    #[getter]
    fn norms_l1(&self) -> Vec<f64> {
        self.inner.norms_l1.clone()
    }

    #[getter]
    fn norms_inf(&self) -> Vec<f64> {
        self.inner.norms_inf.clone()
    }

    #[getter]
    fn snapshot_times(&self) -> Vec<f64> {
        self.inner.snapshot_times.clone()
    }

    fn snapshots(&self) -> Vec<Vec<f64>> {
        self.inner.snapshots.iter().map(|f| f.values().to_vec()).collect()
    }

    fn first_passage<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let dict = PyDict::new(py);
        for fp in &self.inner.first_passage {
            dict.set_item(fp.threshold, fp.time)?;
        }
        Ok(dict)
    }

    #[getter]
    fn clamp_events(&self) -> u64 {
        self.inner.clamp_events
    }
}

fn bound_dict<'py>(py: Python<'py>, b: &bounds::BoundResult) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("raw", b.raw)?;
    dict.set_item("clipped", b.clipped)?;
    dict.set_item("mean", b.mean)?;
    dict.set_item("stdev", b.stdev)?;
    dict.set_item("phi_argument", if b.phi_argument.is_nan() { None } else { Some(b.phi_argument) })?;
    dict.set_item("optimal_time", b.optimal_time)?;
    dict.set_item("provenance", b.provenance.to_string())?;
    Ok(dict)
}

/// A full experiment: model, noise regime, run settings.
#[pyclass(name = "Experiment", skip_from_py_object)]
#[derive(Clone)]
struct PyExperiment {
    config: ExperimentConfig,
}

#[pymethods]
impl PyExperiment {
    /// Load a built-in preset by name.
    #[staticmethod]
    fn from_preset(name: &str) -> PyResult<Self> {
        presets::preset_config(name)
            .map(|config| PyExperiment { config })
            .ok_or_else(|| PyValueError::new_err(format!("unknown preset {name:?}")))
    }

    /// Parse a TOML configuration.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyExperiment { config: ExperimentConfig::from_toml(text).map_err(py_err)? })
    }

    fn to_toml(&self) -> String {
        self.config.to_toml()
    }

    /// Integrate one path.
    #[pyo3(signature = (seed=None, stream=0, save_stride=10, thresholds=None, linear=false))]
    fn simulate(
        &self,
        seed: Option<u64>,
        stream: u64,
        save_stride: usize,
        thresholds: Option<Vec<f64>>,
        linear: bool,
    ) -> PyResult<PyTrajectory> {
        let params = self.config.model_params().map_err(py_err)?;
        let kind = if linear { SystemKind::Linear } else { SystemKind::Nonlinear };
        let record = sim::simulate_path(
            &params,
            kind,
            RngStream::new(seed.unwrap_or(self.config.run.seed), stream),
            save_stride,
            thresholds.as_deref().unwrap_or(&self.config.run.thresholds),
        )
        .map_err(py_err)?;
        Ok(PyTrajectory { inner: record })
    }

    /// Monte Carlo estimate of P(sup score > level) with its standard error.
    #[pyo3(signature = (level=None, n_paths=None, seed=None))]
    fn mc_estimate(
        &self,
        level: Option<f64>,
        n_paths: Option<usize>,
        seed: Option<u64>,
    ) -> PyResult<(f64, f64)> {
        let params = self.config.model_params().map_err(py_err)?;
        let level = match level {
            Some(l) => l,
            None => self.config.tams_target().map_err(py_err)?,
        };
        rare::mc_estimate(
            &params,
            self.config.system().map_err(py_err)?,
            self.config.score().map_err(py_err)?,
            level,
            n_paths.unwrap_or(self.config.run.n_paths),
            RngStream::new(seed.unwrap_or(self.config.run.seed), self.config.run.stream),
        )
        .map_err(py_err)
    }

    /// One splitting run; returns a dict with the estimate and its history.
    #[pyo3(signature = (seed=None, target=None, n_trajectories=None, max_iterations=None))]
    fn tams<'py>(
        &self,
        py: Python<'py>,
        seed: Option<u64>,
        target: Option<f64>,
        n_trajectories: Option<usize>,
        max_iterations: Option<usize>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let params = self.config.model_params().map_err(py_err)?;
        let system = PdeScoreSystem::new(
            params,
            self.config.system().map_err(py_err)?,
            self.config.score().map_err(py_err)?,
        )
        .map_err(py_err)?;
        let target = match target {
            Some(t) => t,
            None => self.config.tams_target().map_err(py_err)?,
        };
        let mut tams_config = TamsConfig::new(
            n_trajectories.unwrap_or(self.config.tams.n_trajectories),
            target,
            RngStream::new(seed.unwrap_or(self.config.run.seed), self.config.run.stream),
        );
        tams_config.kill_count = self.config.tams.kill_count;
        tams_config.max_iterations = max_iterations.unwrap_or(self.config.tams.max_iterations);
        tams_config.stagnation_window = self.config.tams.stagnation_window;
        let estimate = rare::tams_estimate(&system, &tams_config).map_err(py_err)?;
        let dict = PyDict::new(py);
        dict.set_item("p_hat", estimate.p_hat)?;
        dict.set_item("iterations", estimate.iterations)?;
        dict.set_item("successes", estimate.successes)?;
        dict.set_item("levels", estimate.levels)?;
        dict.set_item("n_branchings", estimate.n_branchings)?;
        Ok(dict)
    }

    /// The sup-norm onset bound matching this experiment's noise regime,
    /// optimised over time.
    #[pyo3(signature = (level=None))]
    fn onset_bound<'py>(&self, py: Python<'py>, level: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
        let params = self.config.model_params().map_err(py_err)?;
        let level = match level {
            Some(l) => l,
            None => self.config.onset_level().map_err(py_err)?,
        };
        let n_max = self.config.bounds.n_max;
        let t_min = self.config.bounds.t_min;
        let result = match self.config.noise.regime.as_str() {
            "ito-white" => {
                let query = bounds::ItoBoundQuery::from_initial_field(
                    &params.q0,
                    self.config.bounds.j0,
                    level,
                    params.alpha,
                    params.horizon,
                    self.config.noise.sigma_i,
                    params.spec.zeta(0),
                )
                .map_err(py_err)?;
                bounds::ito_sup_bound(&query, params.dt).map_err(py_err)?
            }
            "strat-white" => bounds::strat_white_supnorm_bound(
                &params.q0,
                level,
                params.horizon,
                self.config.noise.sigma_s,
                &params.spec,
                n_max,
                t_min,
            )
            .map_err(py_err)?,
            _ => {
                let kind = self
                    .config
                    .gamma_kind()
                    .ok_or_else(|| PyValueError::new_err("regime carries no γ family"))?;
                bounds::red_supnorm_bound(
                    &params.q0,
                    level,
                    params.horizon,
                    kind,
                    self.config.noise.kappa,
                    self.config.noise.sigma_r,
                    self.config.noise.sigma_xi,
                    &params.spec,
                    n_max,
                    t_min,
                )
                .map_err(py_err)?
            }
        };
        bound_dict(py, &result)
    }

    #[getter]
    fn preset(&self) -> Option<String> {
        self.config.preset.clone()
    }
}

/// Deterministic steady states (q₋, q₊) of the reaction at Reynolds parameter r.
#[pyfunction]
fn steady_states(r: f64) -> PyResult<(f64, f64)> {
    let ss = sim::steady_states(r).map_err(py_err)?;
    Ok((ss.q_minus, ss.q_plus))
}

/// Eigenvalue (nπ/L)² of the Neumann Laplacian.
#[pyfunction]
fn eigenvalue(n: usize, length: f64) -> f64 {
    spectral::eigenvalue(n, length)
}

/// Fundamental solution G_α(x, y, t) truncated at n_max modes.
#[pyfunction]
fn heat_kernel(x: f64, y: f64, t: f64, alpha: f64, n_max: usize, length: f64) -> PyResult<f64> {
    spectral::heat_kernel(x, y, t, alpha, n_max, length).map_err(py_err)
}

/// Standard normal distribution function Φ.
#[pyfunction]
fn normal_cdf(z: f64) -> f64 {
    bounds::normal_cdf(z)
}

/// Upper tail 1 − Φ(z), accurate for large z.
#[pyfunction]
fn normal_upper_tail(z: f64) -> f64 {
    bounds::normal_upper_tail(z)
}

fn parse_kind(kind: &str) -> PyResult<GammaKind> {
    match kind {
        "additive-red" => Ok(GammaKind::AdditiveRed),
        "strat-red" => Ok(GammaKind::StratRed),
        other => Err(PyValueError::new_err(format!(
            "unknown γ family {other:?} (expected additive-red or strat-red)"
        ))),
    }
}

/// Covariance coefficient γ_{n1,n2}(t) of the requested red-noise coupling.
#[pyfunction]
#[pyo3(signature = (kind, n1, n2, length, t, kappa, sigma_r, sigma_xi, p))]
#[allow(clippy::too_many_arguments)]
fn gamma(
    kind: &str,
    n1: usize,
    n2: usize,
    length: f64,
    t: f64,
    kappa: f64,
    sigma_r: f64,
    sigma_xi: f64,
    p: f64,
) -> PyResult<f64> {
    let result = match parse_kind(kind)? {
        GammaKind::AdditiveRed => {
            bounds::gamma_additive_red(n1, n2, length, t, kappa, sigma_r, sigma_xi, p)
        }
        GammaKind::StratRed => {
            bounds::gamma_strat_red(n1, n2, length, t, kappa, sigma_r, sigma_xi, p)
        }
    };
    result.map_err(py_err)
}

/// Independent quadrature oracle for γ (same signature as `gamma`).
#[pyfunction]
#[pyo3(signature = (kind, n1, n2, length, t, kappa, sigma_r, sigma_xi, p))]
#[allow(clippy::too_many_arguments)]
fn gamma_quadrature(
    kind: &str,
    n1: usize,
    n2: usize,
    length: f64,
    t: f64,
    kappa: f64,
    sigma_r: f64,
    sigma_xi: f64,
    p: f64,
) -> PyResult<f64> {
    let kind = parse_kind(kind)?;
    Ok(bounds::gamma_quadrature_oracle(
        kind,
        spectral::eigenvalue(n1, length),
        spectral::eigenvalue(n2, length),
        t,
        kappa,
        sigma_r,
        sigma_xi,
        p,
    ))
}

/// Names of the built-in presets.
#[pyfunction]
fn preset_names() -> Vec<String> {
    presets::PRESET_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Splitting estimate on the scalar Ornstein–Uhlenbeck benchmark; returns
/// (p_hat, iterations).
#[pyfunction]
#[pyo3(signature = (theta, sigma, x0, dt, steps, level, n_trajectories=100, seed=0))]
#[allow(clippy::too_many_arguments)]
fn toy_tams(
    theta: f64,
    sigma: f64,
    x0: f64,
    dt: f64,
    steps: usize,
    level: f64,
    n_trajectories: usize,
    seed: u64,
) -> PyResult<(f64, usize)> {
    let system = rare::ScalarOu::new(theta, sigma, x0, dt, steps).map_err(py_err)?;
    let config = TamsConfig::new(n_trajectories, level, RngStream::new(seed, 0));
    let estimate = rare::tams_estimate(&system, &config).map_err(py_err)?;
    Ok((estimate.p_hat, estimate.iterations))
}

/// Score target of a norm kind ("sup-norm" or "scaled-l1") at parameters (r, L).
#[pyfunction]
fn onset_target(score: &str, r: f64, length: f64) -> PyResult<f64> {
    let score = match score {
        "sup-norm" => ScoreFunction::SupNorm,
        "scaled-l1" => ScoreFunction::ScaledL1,
        other => return Err(PyValueError::new_err(format!("unknown score {other:?}"))),
    };
    score.target_level(r, length).map_err(py_err)
}

#[pymodule]
fn pipeflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(steady_states, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(heat_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(normal_upper_tail, m)?)?;
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(toy_tams, m)?)?;
    m.add_function(wrap_pyfunction!(onset_target, m)?)?;
    Ok(())
}
