//! Receiver impairment models: everything a real CSI-reporting device does
//! to the channel estimate before handing it to the application.
//!
//! The distortion chain applies, in order: automatic gain control, the
//! device's static amplitude/phase profile, a per-packet linear phase ramp,
//! additive (optionally correlated, optionally heavy-tailed) noise, complex
//! smoothing across tones, tone decimation, and RSSI quantization. Every
//! stochastic stage draws from its own `(seed, seq, purpose)` substream, so
//! toggling one stage never changes the draws of another.

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use crate::frame::{CsiFrame, CsiSeries, FrameError};
use crate::grid::{GridError, SharedGrid, IWL5300_HT20_INDICES};
use crate::rng::{self, purpose};
use crate::schedule::IdealStream;
use crate::Complex64;

use serde::{Deserialize, Serialize};

/// Errors raised while configuring or running a receiver model.
#[derive(Debug, Error)]
pub enum ReceiverError {
    #[error("parameter {name} is invalid: {value}")]
    BadParam { name: &'static str, value: f64 },
    #[error("profile length {got} does not match grid length {expected}")]
    ProfileLength { expected: usize, got: usize },
    #[error("unknown receiver preset {name:?}; known presets: {known}")]
    UnknownPreset { name: String, known: String },
    #[error("packet seq {seq} has zero power; RSSI is undefined")]
    ZeroPower { seq: u64 },
    #[error("noise covariance is not positive definite (lag_corr {lag_corr})")]
    BadCovariance { lag_corr: f64 },
    #[error("reported tone list is not a subset of the grid")]
    TonesNotOnGrid(#[from] GridError),
    #[error("all packets were dropped; nothing to report")]
    AllDropped,
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Automatic gain control policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgcPolicy {
    /// Fixed unit gain.
    None,
    /// Coarse stepped AGC with hysteresis: the gain re-centres the output
    /// power on 0 dB in multiples of `step_db`, but only once the output
    /// power leaves the `±hysteresis_db` band.
    StepCoarse { step_db: f64, hysteresis_db: f64 },
    /// Fine stepped AGC: re-centres on every packet in multiples of `step_db`.
    StepFine { step_db: f64 },
    /// Gain drawn uniformly from `±spread_db` on every packet, independent
    /// of the input (models undocumented per-packet gain states).
    Random { spread_db: f64 },
}

/// Additive noise specification.
///
/// `amp_std` is the target standard deviation of the *amplitude* fluctuation
/// on a unit-magnitude tone; the underlying complex noise has variance
/// `2 * amp_std^2` per tone. `lag_corr` introduces AR(1)-style correlation
/// across neighbouring tones. With probability `outlier_prob` a packet's
/// noise vector is scaled by `outlier_scale` (burst interference).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub amp_std: f64,
    pub lag_corr: f64,
    pub outlier_prob: f64,
    pub outlier_scale: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            amp_std: 0.0,
            lag_corr: 0.0,
            outlier_prob: 0.0,
            outlier_scale: 1.0,
        }
    }
}

impl NoiseSpec {
    /// Complex noise covariance over `k` tones: `2 amp_std^2 * lag_corr^|i-j|`.
    pub fn covariance(&self, k: usize) -> DMatrix<f64> {
        let var = 2.0 * self.amp_std * self.amp_std;
        DMatrix::from_fn(k, k, |i, j| {
            var * self.lag_corr.powi((i as i32 - j as i32).abs())
        })
    }
}

/// Per-packet linear phase ramp `exp(j (slope * m_k + intercept))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseRampSpec {
    /// Slope drawn uniformly from `±slope_max_rad` (radians per subcarrier
    /// index); zero disables the slope.
    pub slope_max_rad: f64,
    /// Draw the intercept uniformly from `(-pi, pi]`; otherwise zero.
    pub random_intercept: bool,
}

impl Default for PhaseRampSpec {
    fn default() -> Self {
        PhaseRampSpec {
            slope_max_rad: 0.0,
            random_intercept: false,
        }
    }
}

/// Which tones the device actually reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToneSelection {
    /// Every populated tone.
    All,
    /// The 30-of-56 pattern reported by Intel 5300-class hardware.
    Iwl5300,
    /// An explicit index list (must be a subset of the grid).
    #[serde(untagged)]
    List(Vec<i32>),
}

/// A complete receiver impairment model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverModel {
    /// Receiver identifier stamped on every emitted frame.
    pub name: String,
    pub agc: AgcPolicy,
    /// Static per-tone amplitude response over the full grid.
    pub profile_amp: Vec<f64>,
    /// Static per-tone phase response (radians) over the full grid.
    pub profile_phase: Vec<f64>,
    pub phase_ramp: PhaseRampSpec,
    pub noise: NoiseSpec,
    /// Complex moving-average width across tones (odd; 1 disables).
    pub smoothing_width: usize,
    pub tones: ToneSelection,
    /// RSSI quantization step in dB (0 disables quantization).
    pub rssi_quant_db: f64,
    /// Per-packet report drop probability.
    pub drop_prob: f64,
}

/// Names accepted by [`ReceiverModel::preset`].
pub const PRESET_NAMES: [&str; 8] = [
    "x310", "ax210", "iwl5300", "qca9300", "asus1", "asus2", "esp1", "esp2",
];

impl ReceiverModel {
    /// A neutral receiver: no AGC, flat profile, no ramp, no noise.
    pub fn neutral(name: impl Into<String>, grid: &SharedGrid) -> Self {
        ReceiverModel {
            name: name.into(),
            agc: AgcPolicy::None,
            profile_amp: vec![1.0; grid.len()],
            profile_phase: vec![0.0; grid.len()],
            phase_ramp: PhaseRampSpec::default(),
            noise: NoiseSpec::default(),
            smoothing_width: 1,
            tones: ToneSelection::All,
            rssi_quant_db: 0.0,
            drop_prob: 0.0,
        }
    }

    /// Build one of the named device-class presets on a grid.
    ///
    /// Presets capture qualitative device families (SDR reference, laptop
    /// NICs, router SoCs, microcontrollers): their AGC style, noise floor,
    /// heavy-tail behaviour, smoothing, decimation and RSSI granularity.
    pub fn preset(name: &str, grid: &SharedGrid) -> Result<Self, ReceiverError> {
        let mut model = Self::neutral(name, grid);
        let ripple = |seed: u64, amp: f64, phase: f64| fourier_profile(grid, 4, amp, phase, seed);
        match name {
            "x310" => {
                // Calibrated SDR reference: stable gain and phase.
                let (a, p) = ripple(0xa310, 0.02, 0.05);
                model.profile_amp = a;
                model.profile_phase = p;
                model.noise.amp_std = 0.003;
                model.rssi_quant_db = 0.5;
            }
            "ax210" => {
                let (a, p) = ripple(0xa210, 0.08, 0.2);
                model.profile_amp = a;
                model.profile_phase = p;
                model.agc = AgcPolicy::StepFine { step_db: 1.0 };
                model.phase_ramp = PhaseRampSpec {
                    slope_max_rad: 0.5,
                    random_intercept: true,
                };
                model.noise.amp_std = 0.004;
                model.noise.lag_corr = 0.3;
                model.smoothing_width = 3;
                model.rssi_quant_db = 1.0;
                model.drop_prob = 0.001;
            }
            "iwl5300" => {
                let (a, p) = ripple(0x5300, 0.10, 0.25);
                model.profile_amp = a;
                model.profile_phase = p;
                model.agc = AgcPolicy::StepFine { step_db: 1.0 };
                model.phase_ramp = PhaseRampSpec {
                    slope_max_rad: 0.5,
                    random_intercept: true,
                };
                model.noise.amp_std = 0.013;
                model.tones = ToneSelection::Iwl5300;
                model.rssi_quant_db = 1.0;
                model.drop_prob = 0.002;
            }
            "qca9300" => {
                let (a, p) = ripple(0x9300, 0.10, 0.25);
                model.profile_amp = a;
                model.profile_phase = p;
                model.agc = AgcPolicy::Random { spread_db: 6.0 };
                model.phase_ramp = PhaseRampSpec {
                    slope_max_rad: 0.5,
                    random_intercept: true,
                };
                model.noise.amp_std = 0.015;
                model.rssi_quant_db = 1.0;
                model.drop_prob = 0.002;
            }
            "asus1" => {
                let (a, p) = ripple(0xa5051, 0.12, 0.3);
                model.profile_amp = a;
                model.profile_phase = p;
                model.agc = AgcPolicy::StepCoarse {
                    step_db: 6.0,
                    hysteresis_db: 3.0,
                };
                model.phase_ramp = PhaseRampSpec {
                    slope_max_rad: 0.5,
                    random_intercept: true,
                };
                model.noise = NoiseSpec {
                    amp_std: 0.015,
                    lag_corr: 0.0,
                    outlier_prob: 1e-3,
                    outlier_scale: 20.0,
                };
                model.rssi_quant_db = 1.0;
                model.drop_prob = 0.002;
            }
            "asus2" => {
                let (a, p) = ripple(0xa5052, 0.12, 0.3);
                model.profile_amp = a;
                model.profile_phase = p;
                model.agc = AgcPolicy::StepCoarse {
                    step_db: 6.0,
                    hysteresis_db: 3.0,
                };
                model.phase_ramp = PhaseRampSpec {
                    slope_max_rad: 0.5,
                    random_intercept: true,
                };
                model.noise = NoiseSpec {
                    amp_std: 0.017,
                    lag_corr: 0.0,
                    outlier_prob: 5e-4,
                    outlier_scale: 12.0,
                };
                model.rssi_quant_db = 1.0;
                model.drop_prob = 0.002;
            }
            "esp1" => {
                let (a, p) = ripple(0xe501, 0.15, 0.3);
                model.profile_amp = a;
                model.profile_phase = p;
                model.agc = AgcPolicy::Random { spread_db: 6.0 };
                model.phase_ramp = PhaseRampSpec {
                    slope_max_rad: 0.5,
                    random_intercept: true,
                };
                model.noise.amp_std = 0.035;
                model.noise.lag_corr = 0.2;
                model.rssi_quant_db = 1.0;
                model.drop_prob = 0.005;
            }
            "esp2" => {
                let (a, p) = ripple(0xe502, 0.15, 0.3);
                model.profile_amp = a;
                model.profile_phase = p;
                model.agc = AgcPolicy::Random { spread_db: 6.0 };
                model.phase_ramp = PhaseRampSpec {
                    slope_max_rad: 0.5,
                    random_intercept: true,
                };
                model.noise.amp_std = 0.037;
                model.noise.lag_corr = 0.2;
                model.rssi_quant_db = 1.0;
                model.drop_prob = 0.005;
            }
            other => {
                return Err(ReceiverError::UnknownPreset {
                    name: other.to_string(),
                    known: PRESET_NAMES.join(", "),
                })
            }
        }
        Ok(model)
    }

    /// Check the model against the grid it will distort.
    pub fn validate(&self, grid: &SharedGrid) -> Result<(), ReceiverError> {
        let check = |name: &'static str, v: f64, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(ReceiverError::BadParam { name, value: v })
            }
        };
        if self.profile_amp.len() != grid.len() {
            return Err(ReceiverError::ProfileLength {
                expected: grid.len(),
                got: self.profile_amp.len(),
            });
        }
        if self.profile_phase.len() != grid.len() {
            return Err(ReceiverError::ProfileLength {
                expected: grid.len(),
                got: self.profile_phase.len(),
            });
        }
        for (&a, &p) in self.profile_amp.iter().zip(&self.profile_phase) {
            check("profile_amp", a, a.is_finite() && a > 0.0)?;
            check("profile_phase", p, p.is_finite())?;
        }
        match self.agc {
            AgcPolicy::None => {}
            AgcPolicy::StepCoarse {
                step_db,
                hysteresis_db,
            } => {
                check("step_db", step_db, step_db.is_finite() && step_db > 0.0)?;
                check(
                    "hysteresis_db",
                    hysteresis_db,
                    hysteresis_db.is_finite() && hysteresis_db >= 0.0,
                )?;
            }
            AgcPolicy::StepFine { step_db } => {
                check("step_db", step_db, step_db.is_finite() && step_db > 0.0)?;
            }
            AgcPolicy::Random { spread_db } => {
                check(
                    "spread_db",
                    spread_db,
                    spread_db.is_finite() && spread_db >= 0.0,
                )?;
            }
        }
        let n = &self.noise;
        check("amp_std", n.amp_std, n.amp_std.is_finite() && n.amp_std >= 0.0)?;
        check(
            "lag_corr",
            n.lag_corr,
            n.lag_corr.is_finite() && (0.0..1.0).contains(&n.lag_corr),
        )?;
        check(
            "outlier_prob",
            n.outlier_prob,
            n.outlier_prob.is_finite() && (0.0..=1.0).contains(&n.outlier_prob),
        )?;
        check(
            "outlier_scale",
            n.outlier_scale,
            n.outlier_scale.is_finite() && n.outlier_scale >= 1.0,
        )?;
        check(
            "slope_max_rad",
            self.phase_ramp.slope_max_rad,
            self.phase_ramp.slope_max_rad.is_finite() && self.phase_ramp.slope_max_rad >= 0.0,
        )?;
        check(
            "rssi_quant_db",
            self.rssi_quant_db,
            self.rssi_quant_db.is_finite() && self.rssi_quant_db >= 0.0,
        )?;
        check(
            "drop_prob",
            self.drop_prob,
            self.drop_prob.is_finite() && (0.0..1.0).contains(&self.drop_prob),
        )?;
        if self.smoothing_width == 0 || self.smoothing_width % 2 == 0 {
            return Err(ReceiverError::BadParam {
                name: "smoothing_width",
                value: self.smoothing_width as f64,
            });
        }
        self.reported_grid(grid)?;
        Ok(())
    }

    /// The grid of the tones this model actually reports.
    pub fn reported_grid(&self, grid: &SharedGrid) -> Result<SharedGrid, ReceiverError> {
        match &self.tones {
            ToneSelection::All => Ok(grid.clone()),
            ToneSelection::Iwl5300 => {
                let keep: Vec<i32> = IWL5300_HT20_INDICES
                    .iter()
                    .copied()
                    .filter(|m| grid.position_of(*m).is_some())
                    .collect();
                Ok(grid.subset(&keep)?)
            }
            ToneSelection::List(keep) => {
                for &m in keep {
                    if grid.position_of(m).is_none() {
                        return Err(ReceiverError::TonesNotOnGrid(GridError::Empty));
                    }
                }
                Ok(grid.subset(keep)?)
            }
        }
    }
}

/// Total received power in dB: `10 log10(sum_k |csi_k|^2)`.
pub fn compute_rssi(csi: &[Complex64]) -> Option<f64> {
    let power: f64 = csi.iter().map(|z| z.norm_sqr()).sum();
    (power > 0.0 && power.is_finite()).then(|| 10.0 * power.log10())
}

/// Quantize a dB value to multiples of `step_db` (0 disables).
pub fn quantize_db(value_db: f64, step_db: f64) -> f64 {
    if step_db > 0.0 {
        (value_db / step_db).round() * step_db
    } else {
        value_db
    }
}

/// Run the full distortion chain over an ideal stream.
///
/// Deterministic for `(stream, model, seed)`. Stochastic stages draw from
/// per-packet, per-purpose substreams, so two runs that differ only in (say)
/// the AGC policy see identical noise, ramps and drop decisions.
pub fn distort(
    stream: &IdealStream,
    model: &ReceiverModel,
    seed: u64,
) -> Result<CsiSeries, ReceiverError> {
    model.validate(&stream.grid)?;
    let full_grid = &stream.grid;
    let out_grid = model.reported_grid(full_grid)?;
    let keep: Vec<usize> = out_grid
        .indices()
        .iter()
        .map(|&m| full_grid.position_of(m).expect("subset of grid"))
        .collect();

    // Pre-factor the noise covariance once.
    let chol = if model.noise.amp_std > 0.0 && model.noise.lag_corr != 0.0 {
        let sigma = model.noise.covariance(full_grid.len());
        let chol = sigma
            .cholesky()
            .ok_or(ReceiverError::BadCovariance {
                lag_corr: model.noise.lag_corr,
            })?
            .unpack();
        Some(chol)
    } else {
        None
    };
    let sigma_c = model.noise.amp_std * std::f64::consts::SQRT_2;

    let indices_f64: Vec<f64> = full_grid.indices().iter().map(|&m| f64::from(m)).collect();
    let mut agc_state: Option<f64> = None;
    let mut frames = Vec::with_capacity(stream.csi.len());

    for (i, row_in) in stream.csi.iter().enumerate() {
        let seq = stream.seq[i];
        let ts_us = stream.ts_us[i];

        let in_power: f64 = row_in.iter().map(|z| z.norm_sqr()).sum();
        if !(in_power > 0.0 && in_power.is_finite()) {
            return Err(ReceiverError::ZeroPower { seq });
        }
        let in_db = 10.0 * in_power.log10();

        // AGC tracks every packet, even ones whose report is later dropped.
        let gain_db = match model.agc {
            AgcPolicy::None => 0.0,
            AgcPolicy::StepFine { step_db } => (-in_db / step_db).round() * step_db,
            AgcPolicy::StepCoarse {
                step_db,
                hysteresis_db,
            } => {
                let desired = (-in_db / step_db).round() * step_db;
                let g = match agc_state {
                    Some(g) if (in_db + g).abs() <= hysteresis_db => g,
                    _ => desired,
                };
                agc_state = Some(g);
                g
            }
            AgcPolicy::Random { spread_db } => {
                let mut r = rng::substream(seed, &[seq, purpose::AGC]);
                if spread_db > 0.0 {
                    r.random_range(-spread_db..=spread_db)
                } else {
                    0.0
                }
            }
        };

        if model.drop_prob > 0.0 {
            let mut r = rng::substream(seed, &[seq, purpose::DROP]);
            if r.random::<f64>() < model.drop_prob {
                continue;
            }
        }

        let gain = 10f64.powf(gain_db / 20.0);
        let mut row: Vec<Complex64> = row_in.iter().map(|z| z * gain).collect();

        // Static device profile.
        for (k, z) in row.iter_mut().enumerate() {
            *z *= Complex64::from_polar(model.profile_amp[k], model.profile_phase[k]);
        }

        // Per-packet linear phase ramp.
        if model.phase_ramp.slope_max_rad > 0.0 || model.phase_ramp.random_intercept {
            let mut r = rng::substream(seed, &[seq, purpose::RAMP]);
            let slope = if model.phase_ramp.slope_max_rad > 0.0 {
                r.random_range(-model.phase_ramp.slope_max_rad..=model.phase_ramp.slope_max_rad)
            } else {
                0.0
            };
            let intercept = if model.phase_ramp.random_intercept {
                r.random_range(-std::f64::consts::PI..std::f64::consts::PI)
            } else {
                0.0
            };
            for (k, z) in row.iter_mut().enumerate() {
                *z *= Complex64::from_polar(1.0, slope * indices_f64[k] + intercept);
            }
        }

        // Additive noise, optionally tone-correlated and heavy-tailed.
        if model.noise.amp_std > 0.0 {
            let mut r = rng::substream(seed, &[seq, purpose::NOISE]);
            let k_tones = row.len();
            let mut noise: Vec<Complex64> = (0..k_tones)
                .map(|_| {
                    let re: f64 = r.sample(rand_distr::StandardNormal);
                    let im: f64 = r.sample(rand_distr::StandardNormal);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                })
                .collect();
            if let Some(l) = &chol {
                // eta = L z with E[z z^H] = I gives E[eta eta^H] = Sigma.
                let mut shaped = vec![Complex64::new(0.0, 0.0); k_tones];
                for (i_row, s) in shaped.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..=i_row {
                        acc += noise[j] * l[(i_row, j)];
                    }
                    *s = acc;
                }
                noise = shaped;
            } else {
                for z in &mut noise {
                    *z *= sigma_c;
                }
            }
            if model.noise.outlier_prob > 0.0 {
                let mut r = rng::substream(seed, &[seq, purpose::OUTLIER]);
                if r.random::<f64>() < model.noise.outlier_prob {
                    for z in &mut noise {
                        *z *= model.noise.outlier_scale;
                    }
                }
            }
            for (z, n) in row.iter_mut().zip(&noise) {
                *z += n;
            }
        }

        // Complex moving average across tones, truncated at the edges.
        if model.smoothing_width > 1 {
            row = smooth_complex(&row, model.smoothing_width);
        }

        // Tone decimation.
        let reported: Vec<Complex64> = keep.iter().map(|&k| row[k]).collect();

        let rssi_db = quantize_db(in_db, model.rssi_quant_db);
        frames.push(CsiFrame::new(
            model.name.clone(),
            seq,
            ts_us,
            rssi_db,
            out_grid.clone(),
            reported,
        )?);
    }

    if frames.is_empty() {
        return Err(ReceiverError::AllDropped);
    }
    let mut series = CsiSeries::new(frames)?;
    series
        .meta
        .insert("receiver".into(), model.name.clone());
    series.meta.insert("seed".into(), seed.to_string());
    Ok(series)
}

/// Moving average of width `w` (odd), truncated at the edges.
fn smooth_complex(row: &[Complex64], w: usize) -> Vec<Complex64> {
    let h = w / 2;
    let n = row.len();
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(h);
            let hi = (k + h).min(n - 1);
            let sum: Complex64 = row[lo..=hi].iter().sum();
            sum / (hi - lo + 1) as f64
        })
        .collect()
}

/// Smooth low-order Fourier ripple profiles for a device: amplitude around 1
/// (relative ripple `amp_ripple`) and phase around 0 (`phase_ripple` rad).
pub fn fourier_profile(
    grid: &SharedGrid,
    harmonics: usize,
    amp_ripple: f64,
    phase_ripple: f64,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let k = grid.len();
    let mut rng = rng::substream(seed, &[purpose::PROFILE]);
    let mut amp = vec![1.0; k];
    let mut phase = vec![0.0; k];
    for h in 1..=harmonics {
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let psi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let a_h = amp_ripple / h as f64;
        let p_h = phase_ripple / h as f64;
        for (pos, (a, p)) in amp.iter_mut().zip(phase.iter_mut()).enumerate() {
            let u = pos as f64 / (k - 1).max(1) as f64;
            let arg = std::f64::consts::TAU * h as f64 * u;
            *a += a_h * (arg + theta).cos();
            *p += p_h * (arg + psi).cos();
        }
    }
    let mean = amp.iter().sum::<f64>() / k as f64;
    for a in &mut amp {
        *a /= mean;
    }
    (amp, phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{multipath_channel, PathComponent};
    use crate::grid::SubcarrierGrid;
    use crate::schedule::{apply_precoding, make_schedule, ScheduleKind};
    use approx::assert_relative_eq;

    fn stream(n: usize) -> IdealStream {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let chan = multipath_channel(
            &[
                PathComponent::from_ns(1.0, 20.0),
                PathComponent::from_ns(0.4, 180.0),
            ],
            &grid,
        )
        .unwrap();
        let kind = ScheduleKind::Constant {
            factor_re: 1.0,
            factor_im: 0.0,
        };
        let sched = make_schedule(&kind, n, 500.0, &grid, 0, false).unwrap();
        apply_precoding(&chan, &sched).unwrap()
    }

    #[test]
    fn distortion_is_deterministic_in_the_seed() {
        let s = stream(64);
        let grid = s.grid.clone();
        let model = ReceiverModel::preset("asus1", &grid).unwrap();
        let a = distort(&s, &model, 7).unwrap();
        let b = distort(&s, &model, 7).unwrap();
        let c = distort(&s, &model, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn agc_policy_change_does_not_shift_noise_or_ramp_draws() {
        // With noise disabled, a fine-stepped AGC run must equal the
        // AGC-free run scaled by a per-packet scalar: substreams for the
        // other stages are untouched by the policy change.
        let s = stream(32);
        let grid = s.grid.clone();
        let mut base = ReceiverModel::preset("qca9300", &grid).unwrap();
        base.noise = NoiseSpec::default();
        base.drop_prob = 0.0;
        let mut with_agc = base.clone();
        base.agc = AgcPolicy::None;
        with_agc.agc = AgcPolicy::StepFine { step_db: 1.0 };
        let plain = distort(&s, &base, 3).unwrap();
        let gained = distort(&s, &with_agc, 3).unwrap();
        for (fp, fg) in plain.frames.iter().zip(&gained.frames) {
            let ratio = fg.csi[0] / fp.csi[0];
            assert!(ratio.im.abs() < 1e-12, "gain must be a real scalar");
            for k in 0..fp.csi.len() {
                let r = fg.csi[k] / fp.csi[k];
                assert_relative_eq!(r.re, ratio.re, max_relative = 1e-9);
                assert!(r.im.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn step_coarse_holds_gain_inside_the_hysteresis_band() {
        // Slow 2 dB swing with a 6 dB step and 3 dB hysteresis: the gain
        // locks on the first packet and never moves.
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let n = 40;
        let csi: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                let db = 2.0 * (i as f64 / n as f64 * std::f64::consts::TAU).sin();
                let a = 10f64.powf(db / 20.0);
                vec![Complex64::new(a, 0.0); grid.len()]
            })
            .collect();
        let s = IdealStream {
            grid: grid.clone(),
            seq: (0..n as u64).collect(),
            ts_us: (0..n as u64).map(|i| i * 2000).collect(),
            csi,
        };
        let mut model = ReceiverModel::neutral("coarse", &grid);
        model.agc = AgcPolicy::StepCoarse {
            step_db: 6.0,
            hysteresis_db: 3.0,
        };
        let out = distort(&s, &model, 0).unwrap();
        let g0 = out.frames[0].csi[0].norm() / s.csi[0][0].norm();
        for (i, f) in out.frames.iter().enumerate() {
            let g = f.csi[0].norm() / s.csi[i][0].norm();
            assert_relative_eq!(g, g0, max_relative = 1e-9);
        }
    }

    #[test]
    fn rssi_reports_quantized_pre_agc_power() {
        // Unit response on 56 tones: power 56, RSSI 10 log10(56) = 17.48 dB,
        // quantized at 1 dB to 17, regardless of AGC.
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let s = IdealStream {
            grid: grid.clone(),
            seq: vec![0],
            ts_us: vec![0],
            csi: vec![vec![Complex64::new(1.0, 0.0); grid.len()]],
        };
        let mut model = ReceiverModel::neutral("rssi", &grid);
        model.agc = AgcPolicy::Random { spread_db: 6.0 };
        model.rssi_quant_db = 1.0;
        let out = distort(&s, &model, 5).unwrap();
        let expected = 10.0 * 56f64.log10();
        assert_relative_eq!(expected, 17.482, max_relative = 1e-4);
        assert_eq!(out.frames[0].rssi_db, 17.0);
    }

    #[test]
    fn decimation_reports_the_iwl_tone_subset() {
        let s = stream(4);
        let grid = s.grid.clone();
        let mut model = ReceiverModel::neutral("halftones", &grid);
        model.tones = ToneSelection::Iwl5300;
        let out = distort(&s, &model, 0).unwrap();
        let f = &out.frames[0];
        assert_eq!(f.grid.indices(), &IWL5300_HT20_INDICES);
        for (pos, &m) in f.grid.indices().iter().enumerate() {
            let full_pos = grid.position_of(m).unwrap();
            assert_eq!(f.csi[pos], s.csi[0][full_pos]);
        }
    }

    #[test]
    fn smoothing_averages_with_edge_truncation() {
        let row = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 2.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(4.0, -2.0),
        ];
        let out = smooth_complex(&row, 3);
        assert_relative_eq!(out[0].re, 1.5);
        assert_relative_eq!(out[0].im, 1.0);
        assert_relative_eq!(out[1].re, 2.0);
        assert_relative_eq!(out[3].re, 3.5);
        assert_relative_eq!(out[3].im, -1.0);
    }

    #[test]
    fn noise_amplitude_matches_the_spec_roughly() {
        let s = stream(2000);
        let grid = s.grid.clone();
        let mut model = ReceiverModel::neutral("noisy", &grid);
        model.noise.amp_std = 0.02;
        let out = distort(&s, &model, 11).unwrap();
        // For |H| >> amp_std the amplitude fluctuation is the radial noise
        // component, whose std is amp_std independent of |H|.
        let amps: Vec<f64> = out.frames.iter().map(|f| f.csi[10].norm()).collect();
        let mean = amps.iter().sum::<f64>() / amps.len() as f64;
        let var =
            amps.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (amps.len() - 1) as f64;
        let rel = var.sqrt() / 0.02;
        assert!((0.9..1.1).contains(&rel), "relative std {rel}");
    }

    #[test]
    fn drops_create_seq_gaps_at_the_configured_rate() {
        let s = stream(4000);
        let grid = s.grid.clone();
        let mut model = ReceiverModel::neutral("droppy", &grid);
        model.drop_prob = 0.05;
        let out = distort(&s, &model, 2).unwrap();
        let loss = out.loss_fraction();
        assert!((0.03..0.07).contains(&loss), "loss fraction {loss}");
    }

    #[test]
    fn unknown_preset_lists_known_names() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let err = ReceiverModel::preset("nic9999", &grid).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nic9999") && msg.contains("x310") && msg.contains("esp2"));
    }

    #[test]
    fn presets_all_validate() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        for name in PRESET_NAMES {
            let model = ReceiverModel::preset(name, &grid).unwrap();
            model.validate(&grid).unwrap();
        }
    }

    #[test]
    fn fourier_profile_has_unit_mean_and_bounded_ripple() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let (amp, phase) = fourier_profile(&grid, 4, 0.1, 0.3, 99);
        let mean = amp.iter().sum::<f64>() / amp.len() as f64;
        assert_relative_eq!(mean, 1.0, max_relative = 1e-12);
        assert!(amp.iter().all(|&a| a > 0.5 && a < 1.5));
        assert!(phase.iter().all(|&p| p.abs() < 1.0));
    }
}
