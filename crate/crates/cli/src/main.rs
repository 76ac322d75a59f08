//! Config-driven command line binding the CSI laboratory into reproducible
//! pipelines.
//!
//! `run`, `emulate`, `eval`, and `validate` operate on a JSON config file
//! (with `--set key=value` overrides composing left to right); `preprocess`,
//! `estimate`, and `metrics` are standalone stages that read and write the
//! NDJSON capture format so pipelines can be chained or replaced piecemeal.
//! Successful commands print a JSON report to stdout and exit 0; failures
//! print a structured JSON error report to stderr and exit nonzero, with
//! validation failures listing every offending config key.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use csilab::config::{load_config, Issue, MusicParams, PipelineConfig, Severity};
use csilab::estimators::{compute_pdp, estimate_tof, estimate_velocity};
use csilab::experiments::{run_cv_eval, run_emulate, run_experiment, ExperimentError};
use csilab::metrics::{
    chi_squared_distance_threshold, mahalanobis_filter, noise_correlation, noise_stats,
};
use csilab::ndjson;
use csilab::preprocess::{
    detrend_series, equalize_series, filter_series, normalize_series, read_profile,
    DetrendMethod, FilterKind, GainMethod,
};
use csilab::CsiSeries;

/// Ground-truth-aware Wi-Fi CSI laboratory.
#[derive(Parser)]
#[command(name = "csilab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config end-to-end.
    Run(ConfigArgs),
    /// Check a config fully — schema and cross-field — without executing.
    Validate(ConfigArgs),
    /// Emulate the captures only: one NDJSON file per receiver, no analysis.
    Emulate(ConfigArgs),
    /// Cross-validate the surrogate activity classifier within each receiver.
    Eval(ConfigArgs),
    /// Transform a capture: equalize, normalize gain, filter, detrend.
    Preprocess(PreprocessArgs),
    /// Estimate velocity or time of flight from a capture.
    Estimate(EstimateArgs),
    /// Report noise statistics of a static capture, before and after
    /// Mahalanobis outlier filtering.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file.
    config: PathBuf,
    /// Override one config key, e.g. `--set receivers[0].profile=off`.
    /// Repeatable; overrides compose left to right.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for `--set seed=N`, applied after every `--set`.
    #[arg(long)]
    seed: Option<u64>,
    /// Shorthand for `--set output_dir=DIR`, applied after every `--set`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig, CliError> {
        let mut overrides = self.set.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        if let Some(out) = &self.out {
            let quoted = serde_json::Value::String(out.to_string_lossy().into_owned());
            overrides.push(format!("output_dir={quoted}"));
        }
        load_config(&self.config, &overrides).map_err(|e| CliError::Other(e.to_string()))
    }
}

#[derive(Args)]
struct PreprocessArgs {
    /// Input capture (NDJSON).
    input: PathBuf,
    /// Output capture (NDJSON), written atomically.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Divide out a receiver profile first (JSON sidecar).
    #[arg(long, value_name = "PROFILE")]
    equalize: Option<PathBuf>,
    /// Per-frame gain normalization: `l1`, `l2`, `rssi`, or a JSON object
    /// such as `{"anchored":{"anchors":[-28,28]}}`.
    #[arg(long, value_name = "SPEC")]
    gain: Option<String>,
    /// Per-tone time filter as JSON, e.g.
    /// `{"filter":"hampel","window":7,"nsigma":3.0}`.
    #[arg(long, value_name = "SPEC")]
    filter: Option<String>,
    /// Per-frame phase detrending: `ls` or `pads`.
    #[arg(long, value_name = "SPEC")]
    detrend: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorKind {
    /// Subspace scan over packet windows for the moving-path velocity.
    Velocity,
    /// Delay-profile peak spacing per frame for the excess time of flight.
    Tof,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input capture (NDJSON), already preprocessed as needed.
    input: PathBuf,
    /// Which estimator to run.
    #[arg(long, value_enum)]
    estimator: EstimatorKind,
    /// Write per-window (velocity) or per-frame (tof) rows as CSV.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Velocity: packets per analysis window.
    #[arg(long, default_value_t = 50)]
    window_len: usize,
    /// Velocity: signal-subspace dimension.
    #[arg(long, default_value_t = 2)]
    n_sources: usize,
    /// Velocity: scan limit, m/s.
    #[arg(long, default_value_t = 3.0)]
    v_max: f64,
    /// Velocity: scan step, m/s.
    #[arg(long, default_value_t = 0.001)]
    v_step: f64,
    /// Velocity: exclude |v| at or below this when picking the peak, m/s.
    #[arg(long, default_value_t = 0.05)]
    dead_zone: f64,
    /// Velocity: skip windows losing more than this fraction of packets.
    #[arg(long, default_value_t = 0.2)]
    max_loss: f64,
    /// Tof: peak threshold as a fraction of the strongest bin's power.
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
}

#[derive(Args)]
struct MetricsArgs {
    /// Input static capture (NDJSON).
    input: PathBuf,
    /// Also write the JSON report here (atomically).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Chi-squared percentile setting the Mahalanobis outlier threshold.
    #[arg(long, default_value_t = 99.9)]
    percentile: f64,
}

/// A command failure, rendered as a structured JSON report on stderr.
enum CliError {
    /// Config validation findings; every offending key is listed.
    Invalid(Vec<Issue>),
    /// Any other failure, as a printable message.
    Other(String),
}

impl From<ExperimentError> for CliError {
    fn from(err: ExperimentError) -> Self {
        match err {
            ExperimentError::Invalid { issues } => CliError::Invalid(issues),
            other => CliError::Other(other.to_string()),
        }
    }
}

fn other(err: impl std::fmt::Display) -> CliError {
    CliError::Other(err.to_string())
}

fn print_json<S: Serialize>(report: &S) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    // A downstream pipe may close early (`csilab ... | head`); that is not
    // a reason to panic after the command itself succeeded.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(err) => {
            let report = match &err {
                CliError::Invalid(issues) => json!({
                    "error": "configuration invalid",
                    "issues": issues,
                }),
                CliError::Other(message) => json!({ "error": message }),
            };
            use std::io::Write;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            let _ = writeln!(std::io::stderr().lock(), "{text}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Run(args) => {
            let summary = run_experiment(&args.load()?)?;
            print_json(&summary);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(args) => {
            let issues = args.load()?.validate();
            let valid = issues.iter().all(|i| i.severity != Severity::Error);
            print_json(&json!({ "valid": valid, "issues": issues }));
            Ok(if valid {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Emulate(args) => {
            let summary = run_emulate(&args.load()?)?;
            print_json(&summary);
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval(args) => {
            let summary = run_cv_eval(&args.load()?)?;
            print_json(&summary);
            Ok(ExitCode::SUCCESS)
        }
        Command::Preprocess(args) => {
            print_json(&preprocess(&args)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate(args) => {
            print_json(&estimate(&args)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Metrics(args) => {
            print_json(&metrics(&args)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Parse a flag value as JSON, falling back to a bare string (so `l1`
/// works without shell quoting while `{"filter":"median","window":5}`
/// still parses as an object).
fn parse_spec<T: serde::de::DeserializeOwned>(flag: &str, raw: &str) -> Result<T, CliError> {
    let value = serde_json::from_str::<serde_json::Value>(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    serde_json::from_value(value).map_err(|e| CliError::Other(format!("{flag}: {e}")))
}

/// Write `bytes` to `path` via a sibling temp file and rename, creating
/// missing parent directories.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Other(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| CliError::Other(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!("{name}.tmp"));
    fs::write(&tmp, bytes)
        .map_err(|e| CliError::Other(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Other(format!("cannot finalize {}: {e}", path.display())))?;
    Ok(())
}

fn csv_bytes<S: Serialize>(rows: &[S]) -> Result<Vec<u8>, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(other)?;
    }
    writer.into_inner().map_err(other)
}

fn read_series(path: &Path) -> Result<CsiSeries, CliError> {
    ndjson::read_series_file(path)
        .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn preprocess(args: &PreprocessArgs) -> Result<serde_json::Value, CliError> {
    let mut series = read_series(&args.input)?;
    let mut steps = Vec::new();

    if let Some(path) = &args.equalize {
        let profile =
            read_profile(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
        series = equalize_series(&series, &profile).map_err(other)?;
        steps.push("equalize".to_string());
    }
    if let Some(spec) = &args.gain {
        let method: GainMethod = parse_spec("--gain", spec)?;
        series = normalize_series(&series, &method).map_err(other)?;
        steps.push(format!("gain:{}", method.name()));
    }
    if let Some(spec) = &args.filter {
        let kind: FilterKind = parse_spec("--filter", spec)?;
        series = filter_series(&series, &kind).map_err(other)?;
        steps.push("filter".to_string());
    }
    if let Some(spec) = &args.detrend {
        let method: DetrendMethod = parse_spec("--detrend", spec)?;
        series = detrend_series(&series, method).map_err(other)?;
        steps.push(format!("detrend:{}", spec));
    }

    let mut bytes = Vec::new();
    ndjson::write_series(&series, &mut bytes).map_err(other)?;
    write_atomic(&args.out, &bytes)?;

    Ok(json!({
        "receiver": series.receiver_id(),
        "frames": series.len(),
        "steps": steps,
        "out": args.out,
    }))
}

#[derive(Serialize)]
struct VelocityRow {
    start_ts_us: u64,
    end_ts_us: u64,
    n_frames: usize,
    velocity_mps: f64,
}

#[derive(Serialize)]
struct TofRow {
    seq: u64,
    ts_us: u64,
    tof_ns: Option<f64>,
}

fn estimate(args: &EstimateArgs) -> Result<serde_json::Value, CliError> {
    let series = read_series(&args.input)?;
    let grid = series
        .grid()
        .ok_or_else(|| CliError::Other("capture is empty".into()))?;

    match args.estimator {
        EstimatorKind::Velocity => {
            let params = MusicParams {
                window_len: args.window_len,
                n_sources: args.n_sources,
                v_max_mps: args.v_max,
                v_step_mps: args.v_step,
                dead_zone_mps: args.dead_zone,
                max_loss: args.max_loss,
            };
            let config = params.build(grid.center_freq_hz());
            let track = estimate_velocity(&series, &config).map_err(other)?;
            let rows: Vec<VelocityRow> = track
                .windows
                .iter()
                .map(|w| VelocityRow {
                    start_ts_us: w.start_ts_us,
                    end_ts_us: w.end_ts_us,
                    n_frames: w.n_frames,
                    velocity_mps: w.velocity_mps,
                })
                .collect();
            if let Some(out) = &args.out {
                write_atomic(out, &csv_bytes(&rows)?)?;
            }
            Ok(json!({
                "estimator": "velocity",
                "windows": rows.len(),
                "skipped": track.skipped,
                "median_mps": track.median_mps,
                "iqr_mps": track.iqr_mps,
                "out": args.out,
            }))
        }
        EstimatorKind::Tof => {
            let mut rows = Vec::with_capacity(series.len());
            for frame in &series.frames {
                let pdp = compute_pdp(frame).map_err(other)?;
                let tof_s = estimate_tof(&pdp, args.threshold).map_err(other)?;
                rows.push(TofRow {
                    seq: frame.seq,
                    ts_us: frame.ts_us,
                    tof_ns: tof_s.map(|s| s * 1e9),
                });
            }
            let mut estimates: Vec<f64> = rows.iter().filter_map(|r| r.tof_ns).collect();
            estimates.sort_by(|a, b| a.total_cmp(b));
            let median_ns = match estimates.len() {
                0 => None,
                n if n % 2 == 1 => Some(estimates[n / 2]),
                n => Some(0.5 * (estimates[n / 2 - 1] + estimates[n / 2])),
            };
            if let Some(out) = &args.out {
                write_atomic(out, &csv_bytes(&rows)?)?;
            }
            Ok(json!({
                "estimator": "tof",
                "frames": rows.len(),
                "estimates": estimates.len(),
                "median_ns": median_ns,
                "out": args.out,
            }))
        }
    }
}

fn metrics(args: &MetricsArgs) -> Result<serde_json::Value, CliError> {
    let series = read_series(&args.input)?;
    let dim = series
        .grid()
        .ok_or_else(|| CliError::Other("capture is empty".into()))?
        .len();

    let before = noise_stats(&series).map_err(other)?;
    let correlation = noise_correlation(&series).map_err(other)?;
    let threshold =
        chi_squared_distance_threshold(dim, args.percentile / 100.0).map_err(other)?;
    let (filtered, removed) = mahalanobis_filter(&series, threshold).map_err(other)?;
    let after = noise_stats(&filtered).map_err(other)?;

    let lag1: Vec<f64> = (0..dim.saturating_sub(1))
        .map(|k| correlation.matrix[k][k + 1])
        .collect();
    let mean_lag1 = lag1.iter().sum::<f64>() / lag1.len().max(1) as f64;

    let report = json!({
        "receiver": series.receiver_id(),
        "n_frames": series.len(),
        "removed_frames": removed,
        "mahalanobis_threshold": threshold,
        "mean_lag1_correlation": mean_lag1,
        "amplitude": before.amplitude.summary(),
        "amplitude_filtered": after.amplitude.summary(),
        "phase": before.phase.summary(),
        "phase_filtered": after.phase.summary(),
    });
    if let Some(out) = &args.out {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        write_atomic(out, text.as_bytes())?;
    }
    Ok(report)
}
