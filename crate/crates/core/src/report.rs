//! CSV and manifest output. Numbers are written with 15 significant digits;
//! bit-exactness across platforms is not promised.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::{ModelError, Result};
use crate::rare::TamsEstimate;
use crate::sim::TrajectoryRecord;

fn io_err(path: &Path, e: std::io::Error) -> ModelError {
    ModelError::Usage(format!("cannot write {}: {e}", path.display()))
}

/// 15-significant-digit decimal text.
pub fn fmt_sig(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{x}")
    } else {
        format!("{x:.14e}")
    }
}

/// Long-form trajectory table: one row per (snapshot time, node).
pub fn write_trajectory_csv(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>, line: String| {
        w.write_all(line.as_bytes()).map_err(|e| io_err(path, e))
    };
    write(&mut w, "time,x_index,value\n".to_string())?;
    for (t, field) in record.snapshot_times.iter().zip(&record.snapshots) {
        for (j, &v) in field.values().iter().enumerate() {
            write(&mut w, format!("{},{},{}\n", fmt_sig(*t), j, fmt_sig(v)))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Norm series plus first-passage columns (the τ columns repeat the passage
/// time of each threshold on every row; empty means no crossing).
pub fn write_summary_csv(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = "time,norm_l1,norm_inf".to_string();
    for fp in &record.first_passage {
        header.push_str(&format!(",tau_{}", fp.threshold));
    }
    header.push('\n');
    w.write_all(header.as_bytes()).map_err(|e| io_err(path, e))?;
    let tau_cols: Vec<String> = record
        .first_passage
        .iter()
        .map(|fp| fp.time.map(fmt_sig).unwrap_or_default())
        .collect();
    for i in 0..record.norm_times.len() {
        let mut line = format!(
            "{},{},{}",
            fmt_sig(record.norm_times[i]),
            fmt_sig(record.norms_l1[i]),
            fmt_sig(record.norms_inf[i])
        );
        for tau in &tau_cols {
            line.push(',');
            line.push_str(tau);
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// One audit row of a bound evaluated at time t.
#[derive(Debug, Clone, Copy)]
pub struct BoundAuditRow {
    pub t: f64,
    pub mean: f64,
    pub stdev: f64,
    pub phi_arg: f64,
    pub raw_bound: f64,
    pub clipped_bound: f64,
}

pub fn write_bound_audit_csv(path: &Path, rows: &[BoundAuditRow]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(b"t,mean,stdev,phi_arg,raw_bound,clipped_bound\n")
        .map_err(|e| io_err(path, e))?;
    for row in rows {
        let phi = if row.phi_arg.is_nan() { String::new() } else { fmt_sig(row.phi_arg) };
        let line = format!(
            "{},{},{},{},{},{}\n",
            fmt_sig(row.t),
            fmt_sig(row.mean),
            fmt_sig(row.stdev),
            phi,
            fmt_sig(row.raw_bound),
            fmt_sig(row.clipped_bound)
        );
        w.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Splitting (or Monte Carlo) estimates, one row per repetition.
pub fn write_estimates_csv(
    path: &Path,
    estimates: &[(usize, &TamsEstimate, f64)],
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(b"repetition,p_hat,iterations,wall_time_s\n").map_err(|e| io_err(path, e))?;
    for (rep, est, wall) in estimates {
        let line =
            format!("{},{},{},{}\n", rep, fmt_sig(est.p_hat), est.iterations, fmt_sig(*wall));
        w.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reproducibility manifest: tool version, the command, effective seeds, and
/// the full configuration echo.
pub fn write_manifest(path: &Path, command: &str, config: &ExperimentConfig) -> Result<()> {
    let text = format!(
        "version = {:?}\ncommand = {:?}\nseed = {}\nstream = {}\n\n[config]\n{}",
        env!("CARGO_PKG_VERSION"),
        command,
        config.run.seed,
        config.run.stream,
        indent_toml(&config.to_toml())
    );
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn indent_toml(toml: &str) -> String {
    // Nest the echoed configuration under [config] by prefixing its tables.
    toml.lines()
        .map(|line| {
            if let Some(rest) = line.strip_prefix('[') {
                format!("[config.{rest}")
            } else {
                line.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}
