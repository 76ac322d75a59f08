//! Experiment runners: a validated [`PipelineConfig`] in, plot-ready
//! artifacts on disk out.
//!
//! Every runner writes into one output directory: captures as NDJSON,
//! per-packet or per-tone results as CSV (headers come from the row struct
//! fields), aggregate reports as JSON, the effective config as
//! `config.json`, and a `manifest.json` naming the config hash, seed,
//! library version and every artifact — enough to re-run the exact
//! experiment. Writes are atomic (temp file + rename), contain no wall-clock
//! timestamps, and are byte-identical across re-runs with the same config
//! and seed.

mod agc_sweep;
mod cross_device;
mod cv_eval;
mod doppler;
mod faithfulness;
mod noise;
mod profile_stability;
mod schema;
mod sensitivity;
mod tof;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::channel::{ChannelError, StaticChannel};
use crate::config::{ConfigError, Issue, PipelineConfig, Severity};
use crate::estimators::EstimatorError;
use crate::eval::EvalError;
use crate::frame::FrameError;
use crate::grid::{GridError, SharedGrid};
use crate::metrics::MetricsError;
use crate::ndjson::{self, NdjsonError};
use crate::preprocess::PreprocessError;
use crate::receiver::{ReceiverError, ReceiverModel};
use crate::rng::derive_seed;
use crate::schedule::{apply_precoding, IdealStream, PrecodingSchedule, ScheduleError};

/// Errors from running an experiment.
#[derive(Debug, Error)]
pub enum ExperimentError {
    /// The config failed validation; every finding is listed.
    #[error("configuration invalid: {}", format_issues(.issues))]
    Invalid { issues: Vec<Issue> },
    /// An artifact could not be written.
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    /// An artifact could not be encoded (CSV or JSON).
    #[error("cannot encode {name}: {detail}")]
    Encode { name: String, detail: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Receiver(#[from] ReceiverError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ndjson(#[from] NdjsonError),
}

fn format_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// What a finished run produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub experiment: String,
    pub out_dir: PathBuf,
    /// Artifact file names, sorted, as listed in the manifest.
    pub files: Vec<String>,
    pub config_hash: String,
}

/// The manifest written alongside every run's artifacts.
#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    config_hash: String,
    seed: u64,
    version: &'static str,
    files: &'a [String],
}

/// Collects artifacts for one run directory; all writes are atomic.
pub(crate) struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<String>,
}

impl ArtifactWriter {
    fn new(dir: &Path) -> Result<Self, ExperimentError> {
        fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write_atomic(&self, name: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!("{name}.tmp"));
        let io_err = |source| ExperimentError::Io {
            path: target.display().to_string(),
            source,
        };
        fs::write(&tmp, bytes).map_err(io_err)?;
        fs::rename(&tmp, &target).map_err(io_err)
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        self.write_atomic(name, bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Write a CSV artifact; the header row comes from the field names.
    pub(crate) fn write_csv<S: Serialize>(
        &mut self,
        name: &str,
        rows: &[S],
    ) -> Result<(), ExperimentError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in rows {
            writer.serialize(row).map_err(|e| ExperimentError::Encode {
                name: name.to_string(),
                detail: e.to_string(),
            })?;
        }
        let bytes = writer
            .into_inner()
            .expect("flushing an in-memory CSV buffer cannot fail");
        self.put(name, &bytes)
    }

    /// Write a CSV artifact from an explicit header and string records
    /// (for matrices whose column count is data-dependent).
    pub(crate) fn write_csv_records(
        &mut self,
        name: &str,
        header: &[String],
        rows: &[Vec<String>],
    ) -> Result<(), ExperimentError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let encode = |e: csv::Error| ExperimentError::Encode {
            name: name.to_string(),
            detail: e.to_string(),
        };
        writer.write_record(header).map_err(encode)?;
        for row in rows {
            writer.write_record(row).map_err(encode)?;
        }
        let bytes = writer
            .into_inner()
            .expect("flushing an in-memory CSV buffer cannot fail");
        self.put(name, &bytes)
    }

    /// Write a pretty-printed JSON artifact.
    pub(crate) fn write_json<S: Serialize>(
        &mut self,
        name: &str,
        value: &S,
    ) -> Result<(), ExperimentError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| ExperimentError::Encode {
                name: name.to_string(),
                detail: e.to_string(),
            })?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    /// Write a capture as an NDJSON series.
    pub(crate) fn write_series(
        &mut self,
        name: &str,
        series: &crate::frame::CsiSeries,
    ) -> Result<(), ExperimentError> {
        let mut buffer = Vec::new();
        ndjson::write_series(series, &mut buffer)?;
        self.put(name, &buffer)
    }

    /// Write the effective config, the CSV column schema, and the manifest,
    /// and summarize the run.
    fn finish(
        mut self,
        experiment: &str,
        config: &PipelineConfig,
    ) -> Result<RunSummary, ExperimentError> {
        let documented: Vec<&schema::SchemaEntry> = schema::SCHEMA
            .iter()
            .filter(|entry| {
                self.files
                    .iter()
                    .any(|file| schema::matches(entry.pattern, file))
            })
            .collect();
        if !documented.is_empty() {
            self.write_json("csv_schema.json", &documented)?;
        }
        let mut effective = serde_json::to_string_pretty(config).expect("config serializes");
        effective.push('\n');
        self.put("config.json", effective.as_bytes())?;
        self.files.sort_unstable();
        let manifest = Manifest {
            experiment,
            config_hash: config.config_hash(),
            seed: config.seed.expect("validated config has a seed"),
            version: env!("CARGO_PKG_VERSION"),
            files: &self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        self.write_atomic("manifest.json", text.as_bytes())?;
        Ok(RunSummary {
            experiment: experiment.to_string(),
            out_dir: self.dir,
            files: self.files,
            config_hash: config.config_hash(),
        })
    }
}

/// Everything the capture-based experiments share: the grid, the static
/// channel, the materialized schedule, the exact pre-receiver stream, and
/// the resolved receiver models.
pub(crate) struct Scene {
    pub grid: SharedGrid,
    pub channel: StaticChannel,
    pub schedule: PrecodingSchedule,
    pub ideal: IdealStream,
    pub models: Vec<ReceiverModel>,
    pub seed: u64,
}

impl Scene {
    /// Capture seed for receiver `i`; every receiver distorts the same
    /// ideal stream with an independent substream.
    pub(crate) fn receiver_seed(&self, i: usize) -> u64 {
        derive_seed(self.seed, &[i as u64])
    }
}

pub(crate) fn setup(config: &PipelineConfig) -> Result<Scene, ExperimentError> {
    let seed = config.seed.expect("validated config has a seed");
    let grid = config.channel.build_grid()?;
    let channel = config.channel.build_channel(&grid)?;
    let schedule = config.schedule.build(&grid, seed)?;
    let ideal = apply_precoding(&channel, &schedule)?;
    let models = config
        .receivers
        .iter()
        .map(|r| r.resolve(&grid))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Scene {
        grid,
        channel,
        schedule,
        ideal,
        models,
        seed,
    })
}

/// Validate `config` and run the experiment it names.
///
/// Artifacts land in `config.output_dir`. Validation failures return
/// [`ExperimentError::Invalid`] carrying every finding; warnings alone do
/// not block the run.
pub fn run_experiment(config: &PipelineConfig) -> Result<RunSummary, ExperimentError> {
    let issues = config.validate();
    if issues.iter().any(|i| i.severity == Severity::Error) {
        return Err(ExperimentError::Invalid { issues });
    }
    let experiment = config.experiment.as_deref().expect("validated");
    let mut writer = ArtifactWriter::new(Path::new(&config.output_dir))?;
    match experiment {
        "agc_sweep" => agc_sweep::run(config, &mut writer)?,
        "doppler" => doppler::run(config, &mut writer)?,
        "tof" => tof::run(config, &mut writer)?,
        "profile_stability" => profile_stability::run(config, &mut writer)?,
        "noise" => noise::run(config, &mut writer)?,
        "faithfulness" => faithfulness::run(config, &mut writer)?,
        "sensitivity" => sensitivity::run(config, &mut writer)?,
        "cross_device" => cross_device::run(config, &mut writer)?,
        other => unreachable!("validation admits no experiment named {other}"),
    }
    writer.finish(experiment, config)
}

/// Validate `config` and emulate the captures only: precode the schedule
/// through the channel and distort it once per receiver, writing one
/// `capture_<receiver>.ndjson` per receiver plus the usual config and
/// manifest — the first stage of [`run_experiment`], with no estimation.
pub fn run_emulate(config: &PipelineConfig) -> Result<RunSummary, ExperimentError> {
    let issues = config.validate();
    if issues.iter().any(|i| i.severity == Severity::Error) {
        return Err(ExperimentError::Invalid { issues });
    }
    if config.experiment.as_deref() == Some("cross_device") {
        return Err(ConfigError::BadValue {
            key: "experiment".into(),
            detail: "cross_device generates labeled datasets internally and has no packet \
                     schedule to emulate; pick a schedule-bearing experiment"
                .into(),
        }
        .into());
    }
    let scene = setup(config)?;
    let mut writer = ArtifactWriter::new(Path::new(&config.output_dir))?;
    for (i, model) in scene.models.iter().enumerate() {
        let series = crate::receiver::distort(&scene.ideal, model, scene.receiver_seed(i))?;
        writer.write_series(&format!("capture_{}.ndjson", model.name), &series)?;
    }
    writer.finish("emulate", config)
}

/// Validate `config` and run within-receiver cross-validated classification.
///
/// This reuses the `cross_device` configuration surface (classes, folds,
/// repeats, feature variants, drop-free receivers) but scores each receiver
/// against itself, emitting one evaluation report and confusion matrix per
/// receiver/variant pair.
pub fn run_cv_eval(config: &PipelineConfig) -> Result<RunSummary, ExperimentError> {
    let issues = config.validate();
    if issues.iter().any(|i| i.severity == Severity::Error) {
        return Err(ExperimentError::Invalid { issues });
    }
    if config.experiment.as_deref() != Some("cross_device") {
        return Err(ConfigError::BadValue {
            key: "experiment".into(),
            detail: "cross-validated evaluation reuses the cross_device configuration; \
                     set experiment to \"cross_device\""
                .into(),
        }
        .into());
    }
    let mut writer = ArtifactWriter::new(Path::new(&config.output_dir))?;
    cv_eval::run(config, &mut writer)?;
    writer.finish("cv_eval", config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{config_from_value, ReceiverConfig};
    use serde_json::json;

    fn read(dir: &Path, name: &str) -> Vec<u8> {
        fs::read(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
    }

    #[test]
    fn invalid_configs_are_rejected_with_the_full_issue_list() {
        let config = PipelineConfig::default();
        let err = run_experiment(&config).unwrap_err();
        match err {
            ExperimentError::Invalid { issues } => {
                assert!(issues.iter().any(|i| i.key == "experiment"));
                assert!(issues.iter().any(|i| i.key == "seed"));
            }
            other => panic!("expected Invalid, got {other}"),
        }
    }

    #[test]
    fn doppler_run_produces_manifested_deterministic_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let config_for = |dir: &Path, seed: u64| {
            config_from_value(json!({
                "experiment": "doppler",
                "seed": seed,
                "output_dir": dir.to_str().unwrap(),
                "schedule": {
                    "kind": {
                        "kind": "two_path_doppler",
                        "static_gain": 0.7,
                        "dynamic_gain": 0.3,
                        "velocity_mps": 1.0
                    },
                    "n_packets": 300,
                    "rate_pps": 200.0
                },
                "receivers": [
                    { "preset": "x310" },
                    { "name": "plain", "noise": { "amp_std": 0.01 } }
                ],
                "estimator": { "music": { "v_step_mps": 0.01 } }
            }))
            .unwrap()
        };

        let dir_a = tmp.path().join("a");
        let summary = run_experiment(&config_for(&dir_a, 11)).unwrap();
        assert_eq!(summary.experiment, "doppler");
        for name in [
            "capture_x310.ndjson",
            "capture_plain.ndjson",
            "doppler_windows_x310.csv",
            "doppler_windows_plain.csv",
            "doppler_summary.json",
            "config.json",
        ] {
            assert!(summary.files.contains(&name.to_string()), "missing {name}");
            assert!(dir_a.join(name).exists(), "{name} not on disk");
        }

        let manifest: serde_json::Value =
            serde_json::from_slice(&read(&dir_a, "manifest.json")).unwrap();
        assert_eq!(manifest["experiment"], "doppler");
        assert_eq!(manifest["seed"], 11);
        assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 16);

        let report: serde_json::Value =
            serde_json::from_slice(&read(&dir_a, "doppler_summary.json")).unwrap();
        let receivers: Vec<&str> = report
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["receiver"].as_str().unwrap())
            .collect();
        assert_eq!(receivers, ["x310", "plain"]);

        // Same config and seed: every artifact byte-identical (the configs
        // name different directories, so compare data and manifest fields).
        let dir_b = tmp.path().join("b");
        run_experiment(&config_for(&dir_b, 11)).unwrap();
        for name in &summary.files {
            if name == "config.json" {
                continue;
            }
            assert_eq!(
                read(&dir_a, name),
                read(&dir_b, name),
                "{name} differs between identical runs"
            );
        }

        // Different seed: the captured data actually changes.
        let dir_c = tmp.path().join("c");
        run_experiment(&config_for(&dir_c, 12)).unwrap();
        assert_ne!(
            read(&dir_a, "capture_plain.ndjson"),
            read(&dir_c, "capture_plain.ndjson")
        );
    }

    #[test]
    fn cv_eval_reports_per_receiver_accuracy_with_confusion_matrices() {
        let tmp = tempfile::tempdir().unwrap();
        let mut config = config_from_value(json!({
            "experiment": "cross_device",
            "seed": 5,
            "output_dir": tmp.path().join("cv").to_str().unwrap(),
            "receivers": [
                { "preset": "x310" },
                { "preset": "qca9300", "drop_prob": 0.0 }
            ],
            "eval": {
                "n_classes": 3,
                "n_per_class": 20,
                "folds": 5,
                "repeats": 2,
                "variants": ["raw", "l1"]
            }
        }))
        .unwrap();

        let summary = run_cv_eval(&config).unwrap();
        assert_eq!(summary.experiment, "cv_eval");
        for name in [
            "cv_report_x310_raw.json",
            "cv_report_qca9300_l1.json",
            "confusion_x310_raw.csv",
            "confusion_qca9300_l1.csv",
            "cv_summary.json",
            "csv_schema.json",
        ] {
            assert!(summary.files.contains(&name.to_string()), "missing {name}");
        }

        let cells: serde_json::Value =
            serde_json::from_slice(&read(&tmp.path().join("cv"), "cv_summary.json")).unwrap();
        let cells = cells.as_array().unwrap();
        assert_eq!(cells.len(), 4);
        for cell in cells {
            let acc = cell["mean_accuracy"].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&acc), "accuracy {acc} out of range");
        }

        // The confusion matrix rows sum to the held-out counts over all folds.
        let confusion = read(&tmp.path().join("cv"), "confusion_x310_raw.csv");
        let text = String::from_utf8(confusion).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "true_class,predicted_0,predicted_1,predicted_2");
        let total: u64 = lines
            .flat_map(|l| l.split(',').skip(1).map(|v| v.parse::<u64>().unwrap()))
            .sum();
        assert_eq!(total, 120, "every example is tested exactly once per repeat");

        // Only the cross-device configuration surface drives this runner.
        config.experiment = Some("doppler".into());
        config.schedule.kind = Some(crate::schedule::ScheduleKind::TwoPathDoppler {
            static_gain: 0.7,
            dynamic_gain: 0.3,
            velocity_mps: 1.0,
            initial_excess_m: 30.0,
        });
        let err = run_cv_eval(&config).unwrap_err();
        assert!(err.to_string().contains("cross_device"), "got: {err}");
    }

    #[test]
    fn tof_equalization_improves_mean_error_for_a_rippled_receiver() {
        let tmp = tempfile::tempdir().unwrap();
        // A strong phase ripple puts ghost peaks next to the direct path
        // that outweigh it; raw estimates lock onto the ghosts while the
        // equalized ones track the true moving path.
        let mut config = config_from_value(json!({
            "experiment": "tof",
            "seed": 3,
            "output_dir": tmp.path().join("tof").to_str().unwrap(),
            "schedule": {
                "kind": {
                    "kind": "two_path_tof",
                    "static_gain": 1.0,
                    "dynamic_gain": 0.6,
                    "start_excess_m": 100.0,
                    "end_excess_m": 300.0
                },
                "n_packets": 150,
                "rate_pps": 100.0
            },
            "receivers": [ {
                "preset": "asus1",
                "profile_ripple": { "harmonics": 1, "amp": 0.2, "phase": 1.8, "seed": 9 }
            } ]
        }))
        .unwrap();
        config.receivers[0] = ReceiverConfig {
            drop_prob: Some(0.0),
            ..config.receivers[0].clone()
        };

        run_experiment(&config).unwrap();
        let summary: serde_json::Value =
            serde_json::from_slice(&read(&tmp.path().join("tof"), "tof_summary.json")).unwrap();
        let entry = &summary.as_array().unwrap()[0];
        let raw = entry["raw_mean_abs_error_ns"].as_f64().unwrap();
        let equalized = entry["equalized_mean_abs_error_ns"].as_f64().unwrap();
        assert!(
            equalized < raw,
            "equalized {equalized} ns should beat raw {raw} ns"
        );
        assert!(equalized < 60.0, "equalized error {equalized} ns should be near one bin");
    }
}
