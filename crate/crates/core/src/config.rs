//! Pipeline configuration: the JSON tree that fully describes one run.
//!
//! Parsing and validation are deliberately separated. The serde model keeps
//! every semantic field optional or defaulted, so a config file with several
//! problems parses fine and [`PipelineConfig::validate`] can report *all* of
//! them at once — one [`Issue`] per offending key — instead of stopping at
//! the first. Command-line overrides (`--set key=value`) are applied to the
//! raw JSON tree before typing, so they can address any field, including
//! array elements (`receivers[0].profile=off`).

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::channel::{multipath_channel, ChannelError, PathComponent, StaticChannel};
use crate::consts::DEFAULT_CENTER_FREQ_HZ;
use crate::estimators::{velocity_grid, MusicConfig};
use crate::eval::FeaturePipeline;
use crate::grid::{GridError, SharedGrid, SubcarrierGrid};
use crate::preprocess::{DetrendMethod, FilterKind, GainMethod, StandardizationSpec};
use crate::receiver::{
    fourier_profile, AgcPolicy, NoiseSpec, PhaseRampSpec, ReceiverError, ReceiverModel,
    ToneSelection,
};
use crate::schedule::{make_schedule, PrecodingSchedule, ScheduleError, ScheduleKind};
use crate::Complex64;

/// Experiments the pipeline can run.
pub const EXPERIMENT_NAMES: [&str; 8] = [
    "agc_sweep",
    "doppler",
    "tof",
    "profile_stability",
    "noise",
    "faithfulness",
    "sensitivity",
    "cross_device",
];

/// Errors from reading, overriding, or resolving a configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// The config file could not be read.
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    /// The config text is not valid JSON or does not fit the schema.
    #[error("cannot parse configuration: {detail}")]
    Parse { detail: String },
    /// A `--set key=value` override could not be applied.
    #[error("override '{key}': {detail}")]
    BadOverride { key: String, detail: String },
    /// A field holds a value the pipeline cannot work with.
    #[error("{key}: {detail}")]
    BadValue { key: String, detail: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Receiver(#[from] ReceiverError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// How bad a validation finding is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// The run would fail or produce meaningless output.
    Error,
    /// The run proceeds, but the configuration is probably not intended.
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// One validation finding, anchored to the config key it concerns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    /// Dotted path of the offending key, e.g. `receivers[1].preset`.
    pub key: String,
    pub message: String,
}

impl Issue {
    fn error(key: impl Into<String>, message: impl Into<String>) -> Issue {
        Issue {
            severity: Severity::Error,
            key: key.into(),
            message: message.into(),
        }
    }

    fn warning(key: impl Into<String>, message: impl Into<String>) -> Issue {
        Issue {
            severity: Severity::Warning,
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.severity, self.key, self.message)
    }
}

/// A static multipath component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub gain: f64,
    pub delay_ns: f64,
    pub phase_rad: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            gain: 1.0,
            delay_ns: 0.0,
            phase_rad: 0.0,
        }
    }
}

/// The physical channel and tone grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Tone grid name; only "ht20" is defined.
    pub grid: String,
    pub center_freq_hz: f64,
    pub paths: Vec<PathConfig>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            grid: "ht20".into(),
            center_freq_hz: DEFAULT_CENTER_FREQ_HZ,
            paths: vec![PathConfig::default()],
        }
    }
}

impl ChannelConfig {
    /// Construct the tone grid this config names.
    pub fn build_grid(&self) -> Result<SharedGrid, ConfigError> {
        match self.grid.as_str() {
            "ht20" => Ok(SubcarrierGrid::ht20(self.center_freq_hz)?),
            other => Err(ConfigError::BadValue {
                key: "channel.grid".into(),
                detail: format!("unknown grid '{other}'; valid grids: ht20"),
            }),
        }
    }

    /// Synthesize the static channel on `grid`.
    pub fn build_channel(&self, grid: &SharedGrid) -> Result<StaticChannel, ConfigError> {
        let paths: Vec<PathComponent> = self
            .paths
            .iter()
            .map(|p| PathComponent {
                gain: Complex64::from_polar(p.gain, p.phase_rad),
                delay_s: p.delay_ns * 1e-9,
            })
            .collect();
        Ok(multipath_channel(&paths, grid)?)
    }
}

/// The precoding schedule driving the ground-truth channel change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Schedule family and parameters; see [`ScheduleKind`].
    pub kind: Option<ScheduleKind>,
    pub n_packets: usize,
    pub rate_pps: f64,
    /// Permit two-path excess delays beyond the grid's unambiguous range
    /// (deliberate aliasing).
    pub allow_alias: bool,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            kind: None,
            n_packets: 1000,
            rate_pps: 500.0,
            allow_alias: false,
        }
    }
}

impl ScheduleConfig {
    /// Materialize the schedule on `grid`.
    pub fn build(&self, grid: &SharedGrid, seed: u64) -> Result<PrecodingSchedule, ConfigError> {
        let kind = self.kind.as_ref().ok_or_else(|| ConfigError::BadValue {
            key: "schedule.kind".into(),
            detail: "no schedule kind configured".into(),
        })?;
        Ok(make_schedule(
            kind,
            self.n_packets,
            self.rate_pps,
            grid,
            seed,
            self.allow_alias,
        )?)
    }
}

/// Whether a receiver's static nonlinearity profile is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileSwitch {
    /// Keep the profile the preset defines.
    On,
    /// Replace the profile with a flat (ideal) response.
    Off,
}

/// Synthetic profile-strength dial: replaces the receiver's static profile
/// with a smooth low-order Fourier ripple of chosen severity (harmonic `h`
/// contributes `amp/h` relative amplitude ripple and `phase/h` radians of
/// phase ripple at `h` cycles across the band).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RippleSpec {
    pub harmonics: usize,
    pub amp: f64,
    pub phase: f64,
    pub seed: u64,
}

/// One receiver in the experiment: a preset template plus field overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    /// Hardware template name; omit to start from a neutral receiver.
    pub preset: Option<String>,
    /// Instance name; defaults to the preset name (or "custom").
    pub name: Option<String>,
    /// Static nonlinearity profile switch (default: whatever the template has).
    pub profile: Option<ProfileSwitch>,
    /// Replace the profile with a synthetic ripple of chosen severity;
    /// wins over `profile` when both are set.
    pub profile_ripple: Option<RippleSpec>,
    pub agc: Option<AgcPolicy>,
    pub noise: Option<NoiseSpec>,
    pub phase_ramp: Option<PhaseRampSpec>,
    pub smoothing_width: Option<usize>,
    pub tones: Option<ToneSelection>,
    pub rssi_quant_db: Option<f64>,
    pub drop_prob: Option<f64>,
}

impl ReceiverConfig {
    /// A bare preset reference.
    pub fn preset(name: &str) -> ReceiverConfig {
        ReceiverConfig {
            preset: Some(name.into()),
            ..ReceiverConfig::default()
        }
    }

    /// Build the concrete receiver model on `grid`.
    pub fn resolve(&self, grid: &SharedGrid) -> Result<ReceiverModel, ConfigError> {
        let mut model = match &self.preset {
            Some(preset) => ReceiverModel::preset(preset, grid)?,
            None => ReceiverModel::neutral(
                self.name.clone().unwrap_or_else(|| "custom".into()),
                grid,
            ),
        };
        if let Some(name) = &self.name {
            model.name = name.clone();
        }
        if self.profile == Some(ProfileSwitch::Off) {
            model.profile_amp = vec![1.0; grid.len()];
            model.profile_phase = vec![0.0; grid.len()];
        }
        if let Some(ripple) = self.profile_ripple {
            let (amp, phase) =
                fourier_profile(grid, ripple.harmonics, ripple.amp, ripple.phase, ripple.seed);
            model.profile_amp = amp;
            model.profile_phase = phase;
        }
        if let Some(agc) = self.agc {
            model.agc = agc;
        }
        if let Some(noise) = self.noise {
            model.noise = noise;
        }
        if let Some(ramp) = self.phase_ramp {
            model.phase_ramp = ramp;
        }
        if let Some(width) = self.smoothing_width {
            model.smoothing_width = width;
        }
        if let Some(tones) = &self.tones {
            model.tones = tones.clone();
        }
        if let Some(quant) = self.rssi_quant_db {
            model.rssi_quant_db = quant;
        }
        if let Some(drop) = self.drop_prob {
            model.drop_prob = drop;
        }
        Ok(model)
    }
}

/// Preprocessing stages applied between emulation and estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessingConfig {
    /// Per-frame gain normalization; omit to keep reported scales.
    pub gain: Option<GainMethod>,
    /// Phase detrend method; omit to keep raw phases.
    pub detrend: Option<DetrendMethod>,
    /// Time-domain amplitude filter; omit to disable.
    pub filter: Option<FilterKind>,
    /// Dataset standardization recipe; omit to disable.
    pub standardize: Option<StandardizationSpec>,
    /// Percentile of the amplitude Mahalanobis distance used as the outlier
    /// cut in the noise experiment.
    pub outlier_percentile: f64,
}

impl Default for PreprocessingConfig {
    fn default() -> Self {
        PreprocessingConfig {
            gain: None,
            detrend: None,
            filter: None,
            standardize: None,
            outlier_percentile: 99.9,
        }
    }
}

/// Velocity-estimator knobs (scan grid given as a symmetric range).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MusicParams {
    pub window_len: usize,
    pub n_sources: usize,
    pub v_max_mps: f64,
    pub v_step_mps: f64,
    pub dead_zone_mps: f64,
    pub max_loss: f64,
}

impl Default for MusicParams {
    fn default() -> Self {
        MusicParams {
            window_len: 50,
            n_sources: 2,
            v_max_mps: 3.0,
            v_step_mps: 0.001,
            dead_zone_mps: 0.05,
            max_loss: 0.2,
        }
    }
}

impl MusicParams {
    /// Expand into the estimator's config for the given carrier.
    pub fn build(&self, carrier_freq_hz: f64) -> MusicConfig {
        MusicConfig {
            window_len: self.window_len,
            n_sources: self.n_sources,
            velocities: velocity_grid(-self.v_max_mps, self.v_max_mps, self.v_step_mps),
            carrier_freq_hz,
            dead_zone_mps: self.dead_zone_mps,
            max_loss: self.max_loss,
        }
    }
}

/// Delay-profile estimator knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdpParams {
    /// Peak threshold as a fraction of the strongest bin.
    pub threshold: f64,
}

impl Default for PdpParams {
    fn default() -> Self {
        PdpParams { threshold: 0.1 }
    }
}

/// Mutual-information estimator knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiParams {
    /// Neighbor count of the k-nearest-neighbor estimator.
    pub k: usize,
}

impl Default for MiParams {
    fn default() -> Self {
        MiParams { k: 4 }
    }
}

/// Estimator configuration shared by the experiments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub music: MusicParams,
    pub pdp: PdpParams,
    pub mi: MiParams,
}

/// Evaluation-harness configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_classes: usize,
    pub n_per_class: usize,
    pub folds: usize,
    pub repeats: usize,
    /// Independent experiment replications (seed offsets) for cross_device.
    pub n_seeds: usize,
    /// Feature-pipeline variant names to compare.
    pub variants: Vec<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_classes: 4,
            n_per_class: 30,
            folds: 5,
            repeats: 2,
            n_seeds: 10,
            variants: FeaturePipeline::all()
                .iter()
                .map(|p| p.name().to_string())
                .collect(),
        }
    }
}

/// The complete, self-contained description of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Which experiment to run; see [`EXPERIMENT_NAMES`].
    pub experiment: Option<String>,
    /// Master seed; mandatory, every random draw derives from it.
    pub seed: Option<u64>,
    /// Directory artifacts are written into.
    pub output_dir: String,
    pub channel: ChannelConfig,
    pub schedule: ScheduleConfig,
    pub receivers: Vec<ReceiverConfig>,
    pub preprocessing: PreprocessingConfig,
    pub estimator: EstimatorConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            experiment: None,
            seed: None,
            output_dir: "out".into(),
            channel: ChannelConfig::default(),
            schedule: ScheduleConfig::default(),
            receivers: Vec::new(),
            preprocessing: PreprocessingConfig::default(),
            estimator: EstimatorConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Schedule kinds an experiment requires, if it is picky.
fn required_schedule_kinds(experiment: &str) -> Option<&'static [&'static str]> {
    match experiment {
        "agc_sweep" => Some(&["gain_sweep"]),
        "doppler" => Some(&["two_path_doppler"]),
        "tof" => Some(&["two_path_tof"]),
        "sensitivity" => Some(&["single_tone"]),
        // Deviation from injected factors is measured against anchor tones
        // the schedule leaves untouched, so the schedule must leave some.
        "faithfulness" => Some(&["single_tone", "tone_block"]),
        _ => None,
    }
}

/// Config-facing name of a schedule kind (matches the JSON tag).
fn kind_name(kind: &ScheduleKind) -> &'static str {
    match kind {
        ScheduleKind::Constant { .. } => "constant",
        ScheduleKind::GainSweep { .. } => "gain_sweep",
        ScheduleKind::TwoPathDoppler { .. } => "two_path_doppler",
        ScheduleKind::TwoPathTof { .. } => "two_path_tof",
        ScheduleKind::SingleTone { .. } => "single_tone",
        ScheduleKind::ToneBlock { .. } => "tone_block",
    }
}

impl PipelineConfig {
    /// Full semantic validation; returns one issue per offending key, all
    /// collected in a single pass. An empty list means the config can run.
    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = Vec::new();

        match self.experiment.as_deref() {
            None => issues.push(Issue::error(
                "experiment",
                format!("missing; valid experiments: {}", EXPERIMENT_NAMES.join(", ")),
            )),
            Some(name) if !EXPERIMENT_NAMES.contains(&name) => issues.push(Issue::error(
                "experiment",
                format!(
                    "unknown experiment '{name}'; valid experiments: {}",
                    EXPERIMENT_NAMES.join(", ")
                ),
            )),
            Some(_) => {}
        }
        if self.seed.is_none() {
            issues.push(Issue::error(
                "seed",
                "seed is mandatory for reproducibility; set \"seed\": <integer>",
            ));
        }
        if self.output_dir.trim().is_empty() {
            issues.push(Issue::error("output_dir", "must not be empty"));
        }

        let grid = match self.channel.build_grid() {
            Ok(grid) => Some(grid),
            Err(err) => {
                issues.push(Issue::error("channel", err.to_string()));
                None
            }
        };
        if self.channel.paths.is_empty() {
            issues.push(Issue::error(
                "channel.paths",
                "at least one path is required",
            ));
        }
        for (i, path) in self.channel.paths.iter().enumerate() {
            if !(path.gain.is_finite() && path.delay_ns.is_finite() && path.phase_rad.is_finite())
            {
                issues.push(Issue::error(
                    format!("channel.paths[{i}]"),
                    "gain, delay_ns and phase_rad must be finite",
                ));
            }
        }
        if let Some(grid) = &grid {
            if !self.channel.paths.is_empty() {
                if let Err(err) = self.channel.build_channel(grid) {
                    issues.push(Issue::error("channel.paths", err.to_string()));
                }
            }
        }

        if self.receivers.is_empty() {
            issues.push(Issue::error(
                "receivers",
                "at least one receiver model is required",
            ));
        }
        if let Some(grid) = &grid {
            let mut names = BTreeSet::new();
            for (i, config) in self.receivers.iter().enumerate() {
                if let Some(ripple) = &config.profile_ripple {
                    if ripple.harmonics == 0
                        || !(ripple.amp.is_finite() && ripple.amp >= 0.0)
                        || !(ripple.phase.is_finite() && ripple.phase >= 0.0)
                    {
                        issues.push(Issue::error(
                            format!("receivers[{i}].profile_ripple"),
                            "needs harmonics >= 1 and finite non-negative amp and phase",
                        ));
                    }
                }
                match config.resolve(grid) {
                    Ok(model) => {
                        if let Err(err) = model.validate(grid) {
                            issues
                                .push(Issue::error(format!("receivers[{i}]"), err.to_string()));
                        }
                        if !names.insert(model.name.clone()) {
                            issues.push(Issue::error(
                                format!("receivers[{i}].name"),
                                format!(
                                    "duplicate receiver name '{}'; artifacts are keyed by name",
                                    model.name
                                ),
                            ));
                        }
                    }
                    Err(err) => {
                        issues.push(Issue::error(format!("receivers[{i}]"), err.to_string()))
                    }
                }
            }
        }

        let needs_schedule = self.experiment.as_deref() != Some("cross_device");
        if needs_schedule {
            let mut schedule_ok = true;
            if self.schedule.n_packets == 0 {
                issues.push(Issue::error("schedule.n_packets", "must be at least 1"));
                schedule_ok = false;
            }
            if !(self.schedule.rate_pps.is_finite() && self.schedule.rate_pps > 0.0) {
                issues.push(Issue::error(
                    "schedule.rate_pps",
                    "must be a positive packet rate",
                ));
                schedule_ok = false;
            }
            match &self.schedule.kind {
                None => issues.push(Issue::error(
                    "schedule.kind",
                    "missing; every experiment except cross_device needs a schedule",
                )),
                Some(kind) => {
                    if let Some(required) =
                        self.experiment.as_deref().and_then(required_schedule_kinds)
                    {
                        if !required.contains(&kind_name(kind)) {
                            issues.push(Issue::error(
                                "schedule.kind",
                                format!(
                                    "experiment '{}' needs kind {}, got '{}'",
                                    self.experiment.as_deref().unwrap_or(""),
                                    required
                                        .iter()
                                        .map(|k| format!("'{k}'"))
                                        .collect::<Vec<_>>()
                                        .join(" or "),
                                    kind_name(kind)
                                ),
                            ));
                        }
                    }
                    if schedule_ok {
                        if let Some(grid) = &grid {
                            match make_schedule(
                                kind,
                                self.schedule.n_packets,
                                self.schedule.rate_pps,
                                grid,
                                self.seed.unwrap_or(0),
                                self.schedule.allow_alias,
                            ) {
                                Ok(_) => {}
                                Err(ScheduleError::ExcessDelayAliases { max_m, limit_m }) => {
                                    issues.push(Issue::warning(
                                        "schedule.allow_alias",
                                        format!(
                                            "excess path length reaches {max_m:.1} m, beyond \
                                             the unambiguous {limit_m:.1} m; delay estimates \
                                             will wrap unless allow_alias is set to true"
                                        ),
                                    ));
                                }
                                Err(err) => issues
                                    .push(Issue::error("schedule.kind", err.to_string())),
                            }
                        }
                    }
                }
            }
        }

        if let Some(GainMethod::Anchored { anchors, .. }) = &self.preprocessing.gain {
            if anchors.is_empty() {
                issues.push(Issue::error(
                    "preprocessing.gain",
                    "anchored normalization needs a non-empty anchor set",
                ));
            }
        }
        if let Some(filter) = &self.preprocessing.filter {
            let window = match filter {
                FilterKind::Median { window }
                | FilterKind::SavitzkyGolay { window, .. }
                | FilterKind::Hampel { window, .. } => *window,
            };
            if window < 3 || window % 2 == 0 {
                issues.push(Issue::error(
                    "preprocessing.filter.window",
                    format!("window {window} must be odd and at least 3"),
                ));
            }
            if let FilterKind::SavitzkyGolay { window, poly } = filter {
                if poly >= window {
                    issues.push(Issue::error(
                        "preprocessing.filter.poly",
                        format!("polynomial order {poly} must be below the window {window}"),
                    ));
                }
            }
            if let FilterKind::Hampel { nsigma, .. } = filter {
                if !(nsigma.is_finite() && *nsigma >= 0.0) {
                    issues.push(Issue::error(
                        "preprocessing.filter.nsigma",
                        "must be a finite non-negative factor",
                    ));
                }
            }
        }
        if !(self.preprocessing.outlier_percentile > 0.0
            && self.preprocessing.outlier_percentile < 100.0)
        {
            issues.push(Issue::error(
                "preprocessing.outlier_percentile",
                format!(
                    "{} is outside (0, 100)",
                    self.preprocessing.outlier_percentile
                ),
            ));
        }

        let music = &self.estimator.music;
        if music.n_sources == 0 || music.n_sources + 2 > music.window_len {
            issues.push(Issue::error(
                "estimator.music.n_sources",
                format!(
                    "{} sources cannot be resolved in {}-packet windows",
                    music.n_sources, music.window_len
                ),
            ));
        }
        if !(music.v_step_mps.is_finite() && music.v_step_mps > 0.0) {
            issues.push(Issue::error(
                "estimator.music.v_step_mps",
                "must be a positive step",
            ));
        }
        if !(music.v_max_mps.is_finite() && music.v_max_mps > 0.0) {
            issues.push(Issue::error(
                "estimator.music.v_max_mps",
                "must be a positive range",
            ));
        }
        if !(music.dead_zone_mps.is_finite() && music.dead_zone_mps >= 0.0) {
            issues.push(Issue::error(
                "estimator.music.dead_zone_mps",
                "must be finite and non-negative",
            ));
        }
        if !(music.max_loss.is_finite() && (0.0..1.0).contains(&music.max_loss)) {
            issues.push(Issue::error(
                "estimator.music.max_loss",
                "must lie in [0, 1)",
            ));
        }
        if !(self.estimator.pdp.threshold.is_finite()
            && (0.0..=1.0).contains(&self.estimator.pdp.threshold))
        {
            issues.push(Issue::error(
                "estimator.pdp.threshold",
                format!("{} is outside [0, 1]", self.estimator.pdp.threshold),
            ));
        }
        if self.estimator.mi.k == 0 {
            issues.push(Issue::error("estimator.mi.k", "must be at least 1"));
        }

        let eval = &self.eval;
        if eval.n_classes < 2 {
            issues.push(Issue::error("eval.n_classes", "need at least 2 classes"));
        }
        if eval.n_per_class < 2 {
            issues.push(Issue::error(
                "eval.n_per_class",
                "need at least 2 examples per class",
            ));
        }
        if eval.folds < 2 {
            issues.push(Issue::error("eval.folds", "need at least 2 folds"));
        }
        if eval.repeats == 0 {
            issues.push(Issue::error("eval.repeats", "need at least 1 repeat"));
        }
        if eval.n_seeds == 0 {
            issues.push(Issue::error("eval.n_seeds", "need at least 1 seed"));
        }
        if eval.variants.is_empty() {
            issues.push(Issue::error(
                "eval.variants",
                "need at least one feature-pipeline variant",
            ));
        }
        let valid_variants: Vec<&str> = FeaturePipeline::all().iter().map(|p| p.name()).collect();
        for (i, name) in eval.variants.iter().enumerate() {
            if FeaturePipeline::from_name(name).is_none() {
                issues.push(Issue::error(
                    format!("eval.variants[{i}]"),
                    format!(
                        "unknown variant '{name}'; valid variants: {}",
                        valid_variants.join(", ")
                    ),
                ));
            }
        }
        if self.experiment.as_deref() == Some("cross_device") {
            let held = eval.n_classes * (eval.n_per_class / 5).max(1);
            if held < 10 {
                issues.push(Issue::error(
                    "eval.n_per_class",
                    format!(
                        "diagonal cells would hold out only {held} examples, need at least 10 \
                         for a bootstrap interval"
                    ),
                ));
            }
            if self.receivers.len() < 2 {
                issues.push(Issue::error(
                    "receivers",
                    "cross_device needs at least 2 receiver models",
                ));
            }
            // The classification dataset needs a fixed feature shape, which
            // dropped packets and decimated tone sets would break.
            if let Some(grid) = &grid {
                for (i, config) in self.receivers.iter().enumerate() {
                    if let Ok(model) = config.resolve(grid) {
                        if model.drop_prob > 0.0 || !matches!(model.tones, ToneSelection::All) {
                            issues.push(Issue::error(
                                format!("receivers[{i}]"),
                                "cross_device needs drop-free receivers reporting every \
                                 tone; set drop_prob to 0 and tones to \"all\"",
                            ));
                        }
                    }
                }
            }
        }

        issues
    }

    /// Compact canonical JSON of the effective config (defaults included).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// FNV-1a hash of the canonical JSON, as 16 hex digits.
    pub fn config_hash(&self) -> String {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.canonical_json().bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{hash:016x}")
    }
}

/// One step of an override path.
#[derive(Debug, PartialEq)]
enum Step {
    Key(String),
    Index(usize),
}

fn parse_path(key: &str) -> Result<Vec<Step>, String> {
    let mut steps = Vec::new();
    for segment in key.split('.') {
        if segment.is_empty() {
            return Err("empty path segment".into());
        }
        let (head, mut rest) = match segment.find('[') {
            Some(pos) => segment.split_at(pos),
            None => (segment, ""),
        };
        if head.is_empty() {
            return Err(format!("segment '{segment}' must start with a key name"));
        }
        steps.push(Step::Key(head.to_string()));
        while !rest.is_empty() {
            let close = rest
                .find(']')
                .ok_or_else(|| format!("unclosed '[' in '{segment}'"))?;
            let index: usize = rest[1..close]
                .parse()
                .map_err(|_| format!("bad array index in '{segment}'"))?;
            steps.push(Step::Index(index));
            rest = &rest[close + 1..];
            if !rest.is_empty() && !rest.starts_with('[') {
                return Err(format!("unexpected text after ']' in '{segment}'"));
            }
        }
    }
    Ok(steps)
}

/// Split a `key=value` override; the value parses as JSON when it can and
/// falls back to a plain string (so `profile=off` and `rate_pps=250` both
/// do what they look like).
pub fn parse_override(spec: &str) -> Result<(String, Value), ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::BadOverride {
        key: spec.to_string(),
        detail: "expected key=value".into(),
    })?;
    if key.is_empty() {
        return Err(ConfigError::BadOverride {
            key: spec.to_string(),
            detail: "empty key".into(),
        });
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Set `key` to `value` inside a raw JSON tree.
///
/// Path segments are dotted keys with optional `[index]` suffixes.
/// Missing intermediate objects are created; array indices must already
/// exist (overrides never grow arrays).
pub fn apply_override(root: &mut Value, key: &str, value: Value) -> Result<(), ConfigError> {
    let steps = parse_path(key).map_err(|detail| ConfigError::BadOverride {
        key: key.to_string(),
        detail,
    })?;
    let mut current = root;
    let mut pending = Some(value);
    for (i, step) in steps.iter().enumerate() {
        let last = i + 1 == steps.len();
        match step {
            Step::Key(name) => {
                let object = current
                    .as_object_mut()
                    .ok_or_else(|| ConfigError::BadOverride {
                        key: key.to_string(),
                        detail: format!("'{name}' addresses a non-object value"),
                    })?;
                if last {
                    object.insert(name.clone(), pending.take().expect("value set once"));
                    return Ok(());
                }
                current = object
                    .entry(name.clone())
                    .or_insert_with(|| Value::Object(Default::default()));
            }
            Step::Index(index) => {
                let array = current
                    .as_array_mut()
                    .ok_or_else(|| ConfigError::BadOverride {
                        key: key.to_string(),
                        detail: format!("'[{index}]' addresses a non-array value"),
                    })?;
                let len = array.len();
                let slot = array
                    .get_mut(*index)
                    .ok_or_else(|| ConfigError::BadOverride {
                        key: key.to_string(),
                        detail: format!("index {index} out of bounds (length {len})"),
                    })?;
                if last {
                    *slot = pending.take().expect("value set once");
                    return Ok(());
                }
                current = slot;
            }
        }
    }
    unreachable!("paths are non-empty and every last step returns");
}

/// Read a config file into a raw JSON tree (overrides apply to this).
pub fn read_config_value(path: &Path) -> Result<Value, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|err| ConfigError::Parse {
        detail: err.to_string(),
    })
}

/// Type a raw JSON tree as a [`PipelineConfig`].
pub fn config_from_value(value: Value) -> Result<PipelineConfig, ConfigError> {
    serde_json::from_value(value).map_err(|err| ConfigError::Parse {
        detail: err.to_string(),
    })
}

/// Read a config file and apply `key=value` overrides left to right.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<PipelineConfig, ConfigError> {
    let mut value = read_config_value(path)?;
    for spec in overrides {
        let (key, json) = parse_override(spec)?;
        apply_override(&mut value, &key, json)?;
    }
    config_from_value(value)
}
