//! Experiment configuration: a TOML file whose keys mirror the model
//! parameter names. Unknown keys are rejected and configurations round-trip
//! losslessly through serialization.

use serde::{Deserialize, Serialize};

use crate::bounds::GammaKind;
use crate::error::{usage, Result};
use crate::forcing::{NoiseRegime, NoiseSpec};
use crate::grid::{Field, Grid};
use crate::rare::ScoreFunction;
use crate::sim::{ModelParams, SystemKind};

/// Constant-or-sampled field specification.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum FieldSpec {
    Constant(f64),
    Values(Vec<f64>),
}

impl FieldSpec {
    pub fn realize(&self, grid: &Grid, key: &str) -> Result<Field> {
        match self {
            FieldSpec::Constant(c) => Field::constant(grid.clone(), *c)
                .map_err(|e| usage(format!("{key}: {e}"))),
            FieldSpec::Values(values) => Field::new(grid.clone(), values.clone())
                .map_err(|e| usage(format!("{key}: {e}"))),
        }
    }
}

/// Noise spectrum: a named family or explicit intensities ζ_0..ζ_m.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ZetaSpec {
    Named(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub r: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dx: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    pub q0: FieldSpec,
    #[serde(default = "unit_field")]
    pub g: FieldSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// One of "ito-white", "strat-white", "additive-red", "strat-red".
    pub regime: String,
    #[serde(default, rename = "sigma_I")]
    pub sigma_i: f64,
    #[serde(default, rename = "sigma_S")]
    pub sigma_s: f64,
    #[serde(default, rename = "sigma_R")]
    pub sigma_r: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub sigma_xi: f64,
    /// Highest forced mode.
    pub m: usize,
    pub zeta: ZetaSpec,
    #[serde(default = "default_basis")]
    pub basis_kind: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub stream: u64,
    pub workers: Option<usize>,
    pub out_dir: String,
    pub save_stride: usize,
    pub thresholds: Vec<f64>,
    /// "sup-norm" or "scaled-l1".
    pub score: String,
    pub n_paths: usize,
    /// "nonlinear" or "linear".
    pub system: String,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 12345,
            stream: 0,
            workers: None,
            out_dir: "out".to_string(),
            save_stride: 10,
            thresholds: vec![0.75, 1.25],
            score: "sup-norm".to_string(),
            n_paths: 10_000,
            system: "nonlinear".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TamsSection {
    pub n_trajectories: usize,
    pub kill_count: usize,
    pub max_iterations: usize,
    /// Defaults to the score's onset target when absent.
    pub target_level: Option<f64>,
    pub repetitions: usize,
    /// Abort when the killing level stops increasing for this many rounds.
    pub stagnation_window: usize,
}

impl Default for TamsSection {
    fn default() -> Self {
        TamsSection {
            n_trajectories: 50,
            kill_count: 1,
            max_iterations: 5000,
            target_level: None,
            repetitions: 10,
            stagnation_window: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    /// Bound names, or the single entry "auto" for the regime's sup-norm
    /// bound family.
    pub selection: Vec<String>,
    /// Lower exit level J0 of the martingale bounds.
    pub j0: f64,
    /// Onset level J; defaults to q₊ when absent.
    pub level: Option<f64>,
    pub n_max: usize,
    pub t_grid: usize,
    pub t_min: f64,
    pub ito_mean_shift: bool,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection {
            selection: vec!["auto".to_string()],
            j0: 0.25,
            level: None,
            n_max: 64,
            t_grid: 512,
            t_min: 0.01,
            ito_mean_shift: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub preset: Option<String>,
    pub model: ModelSection,
    pub noise: NoiseSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub tams: TamsSection,
    #[serde(default)]
    pub bounds: BoundsSection,
}

fn one() -> f64 {
    1.0
}

fn unit_field() -> FieldSpec {
    FieldSpec::Constant(1.0)
}

fn default_basis() -> String {
    "laplacian-eigenbasis".to_string()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| usage(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.model.r > 0.0) {
            return Err(usage(format!("model.r must be positive, got {}", self.model.r)));
        }
        if !(self.model.length > 0.0) {
            return Err(usage(format!("model.L must be positive, got {}", self.model.length)));
        }
        if !(self.model.dt > 0.0) {
            return Err(usage(format!("model.dt must be positive, got {}", self.model.dt)));
        }
        if !(self.model.dx > 0.0) {
            return Err(usage(format!("model.dx must be positive, got {}", self.model.dx)));
        }
        if !(self.model.horizon >= self.model.dt) {
            return Err(usage(format!(
                "model.T must be at least one step, got {}",
                self.model.horizon
            )));
        }
        if self.noise.basis_kind != "laplacian-eigenbasis" {
            return Err(usage(format!(
                "noise.basis_kind: only \"laplacian-eigenbasis\" is supported, got {:?}",
                self.noise.basis_kind
            )));
        }
        self.regime()?;
        self.noise_spec()?;
        self.score()?;
        self.system()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::with_spacing(self.model.length, self.model.dx)
    }

    pub fn regime(&self) -> Result<NoiseRegime> {
        let n = &self.noise;
        let regime = match n.regime.as_str() {
            "ito-white" => NoiseRegime::ItoWhite { sigma: n.sigma_i },
            "strat-white" => NoiseRegime::StratWhite { sigma: n.sigma_s },
            "additive-red" => {
                NoiseRegime::AdditiveRed { sigma: n.sigma_r, kappa: n.kappa, sigma_xi: n.sigma_xi }
            }
            "strat-red" => {
                NoiseRegime::StratRed { sigma: n.sigma_r, kappa: n.kappa, sigma_xi: n.sigma_xi }
            }
            other => {
                return Err(usage(format!(
                    "noise.regime: unknown regime {other:?} (expected ito-white, strat-white, \
                     additive-red or strat-red)"
                )))
            }
        };
        regime.validate().map_err(|e| usage(format!("noise.regime: {e}")))?;
        Ok(regime)
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        match &self.noise.zeta {
            ZetaSpec::Named(name) => match name.as_str() {
                "gaussian-bump" => Ok(NoiseSpec::gaussian_bump(self.noise.m)),
                other => Err(usage(format!("noise.zeta: unknown spectrum {other:?}"))),
            },
            ZetaSpec::Values(values) => {
                if values.len() != self.noise.m + 1 {
                    return Err(usage(format!(
                        "noise.zeta: expected m+1 = {} intensities, got {}",
                        self.noise.m + 1,
                        values.len()
                    )));
                }
                NoiseSpec::new(values.clone())
            }
        }
    }

    pub fn score(&self) -> Result<ScoreFunction> {
        match self.run.score.as_str() {
            "sup-norm" => Ok(ScoreFunction::SupNorm),
            "scaled-l1" => Ok(ScoreFunction::ScaledL1),
            other => Err(usage(format!("run.score: unknown score {other:?}"))),
        }
    }

    pub fn system(&self) -> Result<SystemKind> {
        match self.run.system.as_str() {
            "nonlinear" => Ok(SystemKind::Nonlinear),
            "linear" => Ok(SystemKind::Linear),
            other => Err(usage(format!("run.system: unknown system {other:?}"))),
        }
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let grid = self.grid()?;
        let params = ModelParams {
            r: self.model.r,
            grid: grid.clone(),
            horizon: self.model.horizon,
            dt: self.model.dt,
            regime: self.regime()?,
            spec: self.noise_spec()?,
            q0: self.model.q0.realize(&grid, "model.q0")?,
            g: self.model.g.realize(&grid, "model.g")?,
            alpha: self.model.alpha,
        };
        params.validate()?;
        Ok(params)
    }

    /// Onset level for bounds and estimates: configured value or q₊.
    pub fn onset_level(&self) -> Result<f64> {
        match self.bounds.level {
            Some(level) => Ok(level),
            None => Ok(crate::sim::steady_states(self.model.r)?.q_plus),
        }
    }

    /// Splitting target: configured value or the score's onset target.
    pub fn tams_target(&self) -> Result<f64> {
        match self.tams.target_level {
            Some(level) => Ok(level),
            None => self.score()?.target_level(self.model.r, self.model.length),
        }
    }

    /// The γ family matching a red regime.
    pub fn gamma_kind(&self) -> Option<GammaKind> {
        match self.noise.regime.as_str() {
            "additive-red" => Some(GammaKind::AdditiveRed),
            "strat-red" => Some(GammaKind::StratRed),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset_config;

    #[test]
    fn presets_round_trip_through_toml() {
        for name in crate::presets::PRESET_NAMES {
            let config = preset_config(name).unwrap();
            let text = config.to_toml();
            let back = ExperimentConfig::from_toml(&text).unwrap();
            assert_eq!(config, back, "preset {name} did not round-trip");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = preset_config("fig1-ito-linf").unwrap().to_toml() + "\nbogus_key = 1\n";
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn invalid_dt_names_the_key() {
        let mut config = preset_config("fig1-ito-linf").unwrap();
        config.model.dt = -0.5;
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("model.dt"), "message was: {err}");
    }

    #[test]
    fn explicit_zeta_must_match_mode_count() {
        let mut config = preset_config("fig1-ito-linf").unwrap();
        config.noise.zeta = ZetaSpec::Values(vec![1.0, 0.5]);
        assert!(config.noise_spec().is_err());
    }

    #[test]
    fn model_params_realize() {
        let config = preset_config("fig2-stratred-k005").unwrap();
        let params = config.model_params().unwrap();
        assert_eq!(params.grid.n_points(), 101);
        assert_eq!(params.n_steps(), 1000);
        assert!(config.gamma_kind() == Some(GammaKind::StratRed));
        assert!((config.tams_target().unwrap() - 1.25).abs() < 1e-12);
    }
}
