//! Configuration-driven front end: simulate paths, evaluate analytic onset
//! bounds, run splitting or Monte Carlo estimates, and execute the validation
//! battery.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage/config error, 3 numeric
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use pipeflow_core::bounds::{
    gauss_bound_at, ito_restrained_bound, ito_sup_bound, red_supnorm_bound,
    strat_white_supnorm_bound, supnorm_query, GaussNoise, ItoBoundQuery,
};
use pipeflow_core::config::ExperimentConfig;
use pipeflow_core::error::ModelError;
use pipeflow_core::forcing::RngStream;
use pipeflow_core::presets::{preset_config, PRESET_NAMES};
use pipeflow_core::rare::{
    mc_estimate, tams_estimate_with_paths, PdeScoreSystem, TamsConfig, TamsEstimate,
};
use pipeflow_core::report::{
    fmt_sig, write_bound_audit_csv, write_estimates_csv, write_manifest, write_summary_csv,
    write_trajectory_csv, BoundAuditRow,
};
use pipeflow_core::sim::simulate_path;
use pipeflow_core::validate::{run_all_checks, ValidationSizes};

#[derive(Parser)]
#[command(
    name = "pipeflow",
    about = "Stochastic pipe-flow turbulence model: simulation, analytic onset bounds, rare-event estimation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Path of a TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Name of a built-in preset (see list-presets).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Override of the base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for ensemble parallelism (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write trajectory/summary CSV files.
    Simulate(ConfigArgs),
    /// Evaluate the selected analytic bounds over the time grid.
    Bound(ConfigArgs),
    /// Trajectory-adaptive multilevel splitting estimate of the onset probability.
    Tams {
        #[command(flatten)]
        args: ConfigArgs,
        /// Also dump the best final path as a trajectory CSV.
        #[arg(long)]
        dump_best_path: bool,
    },
    /// Plain Monte Carlo estimate of the onset probability.
    Mc(ConfigArgs),
    /// Run the validation battery (γ oracle, martingale, orderings, domination, presets).
    Validate {
        #[command(flatten)]
        args: ConfigArgs,
        /// Reduced ensemble sizes for a fast smoke run.
        #[arg(long)]
        quick: bool,
    },
    /// List the built-in presets.
    ListPresets {
        /// Print the full TOML of one preset.
        #[arg(long)]
        dump: Option<String>,
    },
}

fn exit_code_for(e: &ModelError) -> u8 {
    match e {
        ModelError::Usage(_) | ModelError::Domain(_) => 2,
        ModelError::Integration { .. } | ModelError::Degenerate(_) => 3,
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, (u8, String)> {
    let mut config = match (&args.config, &args.preset) {
        (Some(_), Some(_)) => {
            return Err((2, "pass either --config or --preset, not both".to_string()))
        }
        (None, None) => {
            return Err((2, "a configuration is required: pass --config PATH or --preset NAME".to_string()))
        }
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                (2, format!("cannot read config file {}: {e}", path.display()))
            })?;
            ExperimentConfig::from_toml(&text).map_err(|e| (2, e.to_string()))?
        }
        (None, Some(name)) => preset_config(name).ok_or_else(|| {
            (2, format!("unknown preset {name:?}; available: {}", PRESET_NAMES.join(", ")))
        })?,
    };
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    if let Some(workers) = args.workers {
        config.run.workers = Some(workers);
    }
    if let Some(out) = &args.out {
        config.run.out_dir = out.display().to_string();
    }
    config.validate().map_err(|e| (2, e.to_string()))?;
    if let Some(workers) = config.run.workers {
        // Ignore the error if a pool already exists (e.g. repeated setup).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    Ok(config)
}

fn out_dir(config: &ExperimentConfig) -> Result<PathBuf, (u8, String)> {
    let dir = PathBuf::from(&config.run.out_dir);
    std::fs::create_dir_all(&dir)
        .map_err(|e| (2, format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn model_err(e: ModelError) -> (u8, String) {
    (exit_code_for(&e), e.to_string())
}

fn cmd_simulate(args: &ConfigArgs) -> Result<(), (u8, String)> {
    let config = load_config(args)?;
    let dir = out_dir(&config)?;
    let params = config.model_params().map_err(model_err)?;
    let record = simulate_path(
        &params,
        config.system().map_err(model_err)?,
        RngStream::new(config.run.seed, config.run.stream),
        config.run.save_stride,
        &config.run.thresholds,
    )
    .map_err(model_err)?;
    write_trajectory_csv(&dir.join("trajectory.csv"), &record).map_err(model_err)?;
    write_summary_csv(&dir.join("summary.csv"), &record).map_err(model_err)?;
    write_manifest(&dir.join("manifest.toml"), "simulate", &config).map_err(model_err)?;
    println!(
        "simulated {} steps on {} nodes; final norms: L1 = {}, sup = {}",
        params.n_steps(),
        params.grid.n_points(),
        fmt_sig(*record.norms_l1.last().unwrap()),
        fmt_sig(*record.norms_inf.last().unwrap()),
    );
    for fp in &record.first_passage {
        match fp.time {
            Some(t) => println!("first passage of level {}: t = {}", fp.threshold, fmt_sig(t)),
            None => println!("first passage of level {}: not reached", fp.threshold),
        }
    }
    if record.clamp_events > 0 {
        println!("positivity clamp applied at {} node-steps", record.clamp_events);
    }
    println!("wrote {}", dir.join("trajectory.csv").display());
    println!("wrote {}", dir.join("summary.csv").display());
    Ok(())
}

/// Log-uniform time grid of a bound sweep.
fn time_grid(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let ratio = (t_max / t_min).powf(1.0 / (n - 1) as f64);
    let mut t = t_min;
    (0..n)
        .map(|_| {
            let v = t.min(t_max);
            t *= ratio;
            v
        })
        .collect()
}

fn cmd_bound(args: &ConfigArgs) -> Result<(), (u8, String)> {
    let config = load_config(args)?;
    let dir = out_dir(&config)?;
    let params = config.model_params().map_err(model_err)?;
    let level = config.onset_level().map_err(model_err)?;
    let spec = params.spec.clone();
    let grid_ts = time_grid(config.bounds.t_min, params.horizon, config.bounds.t_grid);

    let mut selection: Vec<String> = config.bounds.selection.clone();
    if selection.iter().any(|s| s == "auto") {
        selection = match config.noise.regime.as_str() {
            "ito-white" => vec!["martingale-restrained".into(), "martingale-sup".into()],
            "strat-white" => vec!["white-sup-norm".into()],
            _ => vec!["red-sup-norm".into()],
        };
    }
    if selection.is_empty() {
        println!("warning: empty bound selection, nothing to do");
        return Ok(());
    }

    for name in &selection {
        let mut rows = Vec::with_capacity(grid_ts.len());
        let summary = match name.as_str() {
            "martingale-restrained" | "martingale-sup" => {
                let query = ItoBoundQuery::from_initial_field(
                    &params.q0,
                    config.bounds.j0,
                    level,
                    params.alpha,
                    params.horizon,
                    config.noise.sigma_i,
                    spec.zeta(0),
                )
                .map_err(model_err)?;
                for &t in &grid_ts {
                    let horizon_query = ItoBoundQuery { horizon: t, ..query };
                    let b = ito_restrained_bound(&horizon_query).map_err(model_err)?;
                    rows.push(BoundAuditRow {
                        t,
                        mean: b.mean,
                        stdev: b.stdev,
                        phi_arg: f64::NAN,
                        raw_bound: b.raw,
                        clipped_bound: b.clipped,
                    });
                }
                if name == "martingale-sup" {
                    let b = ito_sup_bound(&query, config.bounds.t_min).map_err(model_err)?;
                    format!(
                        "sup over horizons: raw {} clipped {} at t* = {}",
                        fmt_sig(b.raw),
                        fmt_sig(b.clipped),
                        fmt_sig(b.optimal_time.unwrap_or(f64::NAN))
                    )
                } else {
                    let b = ito_restrained_bound(&query).map_err(model_err)?;
                    format!("at T = {}: raw {} clipped {}", params.horizon, fmt_sig(b.raw), fmt_sig(b.clipped))
                }
            }
            "white-sup-norm" | "red-sup-norm" => {
                let noise = match (name.as_str(), config.gamma_kind()) {
                    ("white-sup-norm", _) => GaussNoise::StratWhite { sigma: config.noise.sigma_s },
                    ("red-sup-norm", Some(kind)) => GaussNoise::Red {
                        kind,
                        kappa: config.noise.kappa,
                        sigma_r: config.noise.sigma_r,
                        sigma_xi: config.noise.sigma_xi,
                    },
                    _ => {
                        return Err((
                            2,
                            format!("bound {name} requires a matching noise regime"),
                        ))
                    }
                };
                let query = supnorm_query(
                    &params.q0,
                    level,
                    params.horizon,
                    noise,
                    &spec,
                    config.bounds.n_max,
                    config.bounds.t_min,
                )
                .map_err(model_err)?;
                for &t in &grid_ts {
                    let b = gauss_bound_at(&query, t).map_err(model_err)?;
                    rows.push(BoundAuditRow {
                        t,
                        mean: b.mean,
                        stdev: b.stdev,
                        phi_arg: b.phi_argument,
                        raw_bound: b.raw,
                        clipped_bound: b.clipped,
                    });
                }
                let b = match noise {
                    GaussNoise::StratWhite { sigma } => strat_white_supnorm_bound(
                        &params.q0,
                        level,
                        params.horizon,
                        sigma,
                        &spec,
                        config.bounds.n_max,
                        config.bounds.t_min,
                    ),
                    GaussNoise::Red { kind, kappa, sigma_r, sigma_xi } => red_supnorm_bound(
                        &params.q0,
                        level,
                        params.horizon,
                        kind,
                        kappa,
                        sigma_r,
                        sigma_xi,
                        &spec,
                        config.bounds.n_max,
                        config.bounds.t_min,
                    ),
                }
                .map_err(model_err)?;
                format!(
                    "best over t: bound {} (Φ-argument {}) at t* = {}",
                    fmt_sig(b.clipped),
                    fmt_sig(b.phi_argument),
                    fmt_sig(b.optimal_time.unwrap_or(f64::NAN))
                )
            }
            other => {
                return Err((
                    2,
                    format!(
                        "unknown bound {other:?}; expected martingale-restrained, \
                         martingale-sup, white-sup-norm, red-sup-norm or auto"
                    ),
                ))
            }
        };
        let file = dir.join(format!("bounds-{name}.csv"));
        write_bound_audit_csv(&file, &rows).map_err(model_err)?;
        println!("{name}: {summary}");
        println!("wrote {}", file.display());
    }
    write_manifest(&dir.join("manifest.toml"), "bound", &config).map_err(model_err)?;
    Ok(())
}

fn dump_pde_path(
    path: &Path,
    params: &pipeflow_core::sim::ModelParams,
    states: &[pipeflow_core::rare::PdeState],
    stride: usize,
) -> Result<(), (u8, String)> {
    use std::io::Write;
    let file = std::fs::File::create(path)
        .map_err(|e| (2, format!("cannot write {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    let mut emit = |line: String| {
        w.write_all(line.as_bytes())
            .map_err(|e| (2u8, format!("cannot write {}: {e}", path.display())))
    };
    emit("time,x_index,value\n".to_string())?;
    for (k, state) in states.iter().enumerate().step_by(stride.max(1)) {
        let t = k as f64 * params.dt;
        for (j, &v) in state.q.iter().enumerate() {
            emit(format!("{},{},{}\n", fmt_sig(t), j, fmt_sig(v)))?;
        }
    }
    Ok(())
}

fn cmd_tams(args: &ConfigArgs, dump_best_path: bool) -> Result<(), (u8, String)> {
    let config = load_config(args)?;
    let dir = out_dir(&config)?;
    let params = config.model_params().map_err(model_err)?;
    let score = config.score().map_err(model_err)?;
    let target = config.tams_target().map_err(model_err)?;
    let system = PdeScoreSystem::new(params.clone(), config.system().map_err(model_err)?, score)
        .map_err(model_err)?;

    let mut estimates: Vec<(usize, TamsEstimate, f64)> = Vec::new();
    let mut best_path: Option<(f64, Vec<pipeflow_core::rare::PdeState>)> = None;
    for rep in 0..config.tams.repetitions.max(1) {
        let tams_config = TamsConfig {
            n_trajectories: config.tams.n_trajectories,
            kill_count: config.tams.kill_count,
            max_iterations: config.tams.max_iterations,
            target_level: target,
            base_stream: RngStream::new(
                config.run.seed,
                config.run.stream + (rep as u64) * (1 << 32),
            ),
            stagnation_window: config.tams.stagnation_window,
        };
        let start = Instant::now();
        let (estimate, paths) = tams_estimate_with_paths(&system, &tams_config).map_err(model_err)?;
        let wall = start.elapsed().as_secs_f64();
        if dump_best_path {
            for states in &paths {
                let sup = states
                    .iter()
                    .map(|s| score.evaluate(&params.grid, &s.q))
                    .fold(f64::NEG_INFINITY, f64::max);
                if best_path.as_ref().map_or(true, |(s, _)| sup > *s) {
                    best_path = Some((sup, states.clone()));
                }
            }
        }
        println!(
            "repetition {rep}: p_hat = {} ({} iterations, {}/{} successes, {:.2}s)",
            fmt_sig(estimate.p_hat),
            estimate.iterations,
            estimate.successes,
            config.tams.n_trajectories,
            wall
        );
        estimates.push((rep, estimate, wall));
    }
    let mean = estimates.iter().map(|(_, e, _)| e.p_hat).sum::<f64>() / estimates.len() as f64;
    let var = estimates.iter().map(|(_, e, _)| (e.p_hat - mean).powi(2)).sum::<f64>()
        / (estimates.len().max(2) - 1) as f64;
    println!(
        "splitting estimate over {} repetitions: {} ± {} (target {} on the {} score)",
        estimates.len(),
        fmt_sig(mean),
        fmt_sig((var / estimates.len() as f64).sqrt()),
        fmt_sig(target),
        config.run.score,
    );
    let rows: Vec<(usize, &TamsEstimate, f64)> =
        estimates.iter().map(|(r, e, w)| (*r, e, *w)).collect();
    write_estimates_csv(&dir.join("estimates.csv"), &rows).map_err(model_err)?;
    if let Some((sup, states)) = best_path {
        let file = dir.join("tams-best-path.csv");
        dump_pde_path(&file, &params, &states, config.run.save_stride)?;
        println!("best path reached score {}; wrote {}", fmt_sig(sup), file.display());
    }
    write_manifest(&dir.join("manifest.toml"), "tams", &config).map_err(model_err)?;
    println!("wrote {}", dir.join("estimates.csv").display());
    Ok(())
}

fn cmd_mc(args: &ConfigArgs) -> Result<(), (u8, String)> {
    let config = load_config(args)?;
    let dir = out_dir(&config)?;
    let params = config.model_params().map_err(model_err)?;
    let score = config.score().map_err(model_err)?;
    let target = config.tams_target().map_err(model_err)?;
    let (p_hat, se) = mc_estimate(
        &params,
        config.system().map_err(model_err)?,
        score,
        target,
        config.run.n_paths,
        RngStream::new(config.run.seed, config.run.stream),
    )
    .map_err(model_err)?;
    println!(
        "Monte Carlo estimate over {} paths: p_hat = {} ± {} (target {} on the {} score)",
        config.run.n_paths,
        fmt_sig(p_hat),
        fmt_sig(se),
        fmt_sig(target),
        config.run.score,
    );
    let line = format!("n_paths,p_hat,stderr\n{},{},{}\n", config.run.n_paths, fmt_sig(p_hat), fmt_sig(se));
    std::fs::write(dir.join("mc.csv"), line)
        .map_err(|e| (2, format!("cannot write {}: {e}", dir.join("mc.csv").display())))?;
    write_manifest(&dir.join("manifest.toml"), "mc", &config).map_err(model_err)?;
    println!("wrote {}", dir.join("mc.csv").display());
    Ok(())
}

fn cmd_validate(args: &ConfigArgs, quick: bool) -> Result<(), (u8, String)> {
    if let Some(workers) = args.workers {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    let sizes = if quick { ValidationSizes::quick() } else { ValidationSizes::full() };
    let seed = args.seed.unwrap_or(20_260_809);
    let start = Instant::now();
    let checks = run_all_checks(&sizes, RngStream::new(seed, 0));
    let mut failed = 0usize;
    for check in &checks {
        let tag = if check.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {}", check.name, check.details);
        if !check.passed {
            failed += 1;
        }
    }
    println!(
        "{} of {} checks passed in {:.1}s (seed {seed}{})",
        checks.len() - failed,
        checks.len(),
        start.elapsed().as_secs_f64(),
        if quick { ", quick sizes" } else { "" }
    );
    if failed > 0 {
        return Err((1, format!("{failed} validation check(s) failed")));
    }
    Ok(())
}

fn cmd_list_presets(dump: Option<&str>) -> Result<(), (u8, String)> {
    match dump {
        None => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
        Some(name) => match preset_config(name) {
            Some(config) => {
                print!("{}", config.to_toml());
                Ok(())
            }
            None => Err((2, format!("unknown preset {name:?}"))),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bound(args) => cmd_bound(args),
        Command::Tams { args, dump_best_path } => cmd_tams(args, *dump_best_path),
        Command::Mc(args) => cmd_mc(args),
        Command::Validate { args, quick } => cmd_validate(args, *quick),
        Command::ListPresets { dump } => cmd_list_presets(dump.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
