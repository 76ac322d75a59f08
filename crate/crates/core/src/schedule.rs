//! Transmit-side precoding schedules: per-packet, per-tone complex factors
//! with analytically known ground truth.
//!
//! A schedule multiplies the static channel response tone-by-tone before the
//! receiver model runs, so motion-like effects (Doppler shifts, path-length
//! sweeps, per-tone probes) are injected with exact ground truth instead of
//! being performed physically.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::StaticChannel;
use crate::consts::{SPEED_OF_LIGHT_M_S, SUBCARRIER_SPACING_HZ};
use crate::grid::SharedGrid;
use crate::rng::{self, purpose};
use crate::Complex64;

use rand::Rng;

/// Errors raised while building or applying a schedule.
#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("n_packets must be at least 1")]
    NoPackets,
    #[error("rate_pps must be finite and positive, got {value}")]
    BadRate { value: f64 },
    #[error("parameter {name} must be finite, got {value}")]
    BadParam { name: &'static str, value: f64 },
    #[error("sweep bounds must satisfy lo <= hi, got [{lo}, {hi}]")]
    BadSweepBounds { lo: f64, hi: f64 },
    #[error("period_s must be positive, got {value}")]
    BadPeriod { value: f64 },
    #[error("tone {tone} is not populated on this grid")]
    ToneNotOnGrid { tone: i32 },
    #[error("tone block [{first}, {last}] is empty on this grid")]
    EmptyToneBlock { first: i32, last: i32 },
    #[error(
        "excess path length reaches {max_m:.1} m, beyond the unambiguous {limit_m:.1} m for this \
         grid; set allow_alias to emulate it anyway"
    )]
    ExcessDelayAliases { max_m: f64, limit_m: f64 },
    #[error("schedule grid does not match the channel grid")]
    GridMismatch,
}

/// Which scalar a single-tone sweep drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepQuantity {
    /// Real amplitude factor `c`.
    Amplitude,
    /// Phase rotation `exp(j c)`, `c` in radians.
    Phase,
}

/// How the swept parameter moves across packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepShape {
    /// Independent uniform draws in `[lo, hi]` (seeded).
    Random,
    /// Evenly spaced from `lo` to `hi` across the run.
    Linear,
}

/// Parameter sweep applied to a single tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParam {
    pub quantity: SweepQuantity,
    pub lo: f64,
    pub hi: f64,
    pub shape: SweepShape,
}

/// The supported schedule families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleKind {
    /// The same complex factor on every tone of every packet.
    Constant {
        #[serde(default = "default_one")]
        factor_re: f64,
        #[serde(default)]
        factor_im: f64,
    },
    /// Broadband sinusoidal gain sweep: `g_db(t) = depth_db * sin(2 pi t / period_s)`.
    GainSweep { depth_db: f64, period_s: f64 },
    /// Static tap plus a moving second path: at time `t` the excess path
    /// length is `initial_excess_m + velocity_mps * t`, so each tone `k`
    /// receives `static_gain + dynamic_gain * exp(-j 2 pi f_k excess / c)`.
    TwoPathDoppler {
        static_gain: f64,
        dynamic_gain: f64,
        velocity_mps: f64,
        #[serde(default)]
        initial_excess_m: f64,
    },
    /// Static tap plus a second path whose excess length sweeps linearly
    /// from `start_excess_m` to `end_excess_m` over the run.
    TwoPathTof {
        static_gain: f64,
        dynamic_gain: f64,
        start_excess_m: f64,
        end_excess_m: f64,
    },
    /// Sweep one tone's amplitude or phase, leaving all others untouched.
    SingleTone { tone: i32, sweep: SweepParam },
    /// Constant complex factor on a contiguous tone block.
    ToneBlock {
        first_tone: i32,
        last_tone: i32,
        factor_re: f64,
        factor_im: f64,
    },
}

fn default_one() -> f64 {
    1.0
}

/// A fully materialized schedule: per-packet timestamps, per-packet per-tone
/// factors, the swept ground-truth parameter, and the set of untouched tones.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingSchedule {
    kind: ScheduleKind,
    grid: SharedGrid,
    /// `factors[n][k]`: complex factor for packet `n`, grid position `k`.
    factors: Vec<Vec<Complex64>>,
    /// Packet timestamps in microseconds.
    ts_us: Vec<u64>,
    /// Ground-truth swept parameter per packet (meaning depends on the kind:
    /// gain in dB, excess path length in metres, or the swept tone factor).
    params: Vec<f64>,
    /// Tones whose factor is identically one across the run.
    anchors: BTreeSet<i32>,
}

impl PrecodingSchedule {
    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn grid(&self) -> &SharedGrid {
        &self.grid
    }

    pub fn n_packets(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Vec<Complex64>] {
        &self.factors
    }

    pub fn ts_us(&self) -> &[u64] {
        &self.ts_us
    }

    /// Ground-truth swept parameter per packet; see the field docs.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Tones untouched by the schedule (usable as normalization anchors).
    pub fn anchors(&self) -> &BTreeSet<i32> {
        &self.anchors
    }

    /// Exact injected velocity, for Doppler-style schedules.
    pub fn ground_truth_velocity(&self) -> Option<f64> {
        match self.kind {
            ScheduleKind::TwoPathDoppler { velocity_mps, .. } => Some(velocity_mps),
            _ => None,
        }
    }

    /// Exact excess delay (seconds) of the moving path at packet `n`, for
    /// two-path schedules.
    pub fn excess_delay_s(&self, n: usize) -> Option<f64> {
        match self.kind {
            ScheduleKind::TwoPathDoppler { .. } | ScheduleKind::TwoPathTof { .. } => {
                self.params.get(n).map(|m| m / SPEED_OF_LIGHT_M_S)
            }
            _ => None,
        }
    }
}

/// Ideal (pre-receiver) packet stream: the precoded channel response per
/// packet, before any receiver impairment.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealStream {
    pub grid: SharedGrid,
    pub seq: Vec<u64>,
    pub ts_us: Vec<u64>,
    /// `csi[n][k]`: precoded response of packet `n` at grid position `k`.
    pub csi: Vec<Vec<Complex64>>,
}

/// Materialize a schedule on a grid.
///
/// The result is fully deterministic for `(kind, n_packets, rate_pps, seed)`;
/// only random-shaped single-tone sweeps consume the seed. Two-path
/// schedules whose excess length leaves the grid's unambiguous delay range
/// are rejected unless `allow_alias` is set.
pub fn make_schedule(
    kind: &ScheduleKind,
    n_packets: usize,
    rate_pps: f64,
    grid: &SharedGrid,
    seed: u64,
    allow_alias: bool,
) -> Result<PrecodingSchedule, ScheduleError> {
    if n_packets == 0 {
        return Err(ScheduleError::NoPackets);
    }
    if !(rate_pps.is_finite() && rate_pps > 0.0) {
        return Err(ScheduleError::BadRate { value: rate_pps });
    }
    validate_kind(kind, grid)?;

    let ts_us: Vec<u64> = (0..n_packets)
        .map(|n| ((n as f64) * 1e6 / rate_pps).round() as u64)
        .collect();
    let times_s: Vec<f64> = (0..n_packets).map(|n| n as f64 / rate_pps).collect();

    if let Some((max_m, limit_m)) = alias_excess(kind, &times_s) {
        if !allow_alias {
            return Err(ScheduleError::ExcessDelayAliases { max_m, limit_m });
        }
    }

    let k_tones = grid.len();
    let mut params = Vec::with_capacity(n_packets);
    let mut factors = Vec::with_capacity(n_packets);

    // Pre-draw random single-tone sweep values from a dedicated substream so
    // the schedule never perturbs receiver-side randomness.
    let sweep_values: Vec<f64> = match kind {
        ScheduleKind::SingleTone { sweep, .. } => {
            let mut rng = rng::substream(seed, &[purpose::JITTER, 0x5c4ed]);
            (0..n_packets)
                .map(|n| match sweep.shape {
                    SweepShape::Random => rng.random_range(sweep.lo..=sweep.hi),
                    SweepShape::Linear => linear_step(sweep.lo, sweep.hi, n, n_packets),
                })
                .collect()
        }
        _ => Vec::new(),
    };

    for n in 0..n_packets {
        let t = times_s[n];
        let (row, param) = match kind {
            ScheduleKind::Constant {
                factor_re,
                factor_im,
            } => {
                let f = Complex64::new(*factor_re, *factor_im);
                (vec![f; k_tones], 0.0)
            }
            ScheduleKind::GainSweep { depth_db, period_s } => {
                let g_db = depth_db * (2.0 * std::f64::consts::PI * t / period_s).sin();
                let f = Complex64::new(10f64.powf(g_db / 20.0), 0.0);
                (vec![f; k_tones], g_db)
            }
            ScheduleKind::TwoPathDoppler {
                static_gain,
                dynamic_gain,
                velocity_mps,
                initial_excess_m,
            } => {
                let excess_m = initial_excess_m + velocity_mps * t;
                (
                    two_path_row(grid, *static_gain, *dynamic_gain, excess_m),
                    excess_m,
                )
            }
            ScheduleKind::TwoPathTof {
                static_gain,
                dynamic_gain,
                start_excess_m,
                end_excess_m,
            } => {
                let excess_m = linear_step(*start_excess_m, *end_excess_m, n, n_packets);
                (
                    two_path_row(grid, *static_gain, *dynamic_gain, excess_m),
                    excess_m,
                )
            }
            ScheduleKind::SingleTone { tone, sweep } => {
                let pos = grid.position_of(*tone).expect("validated above");
                let mut row = vec![Complex64::new(1.0, 0.0); k_tones];
                let value = sweep_values[n];
                row[pos] = match sweep.quantity {
                    SweepQuantity::Amplitude => Complex64::new(value, 0.0),
                    SweepQuantity::Phase => Complex64::from_polar(1.0, value),
                };
                (row, value)
            }
            ScheduleKind::ToneBlock {
                first_tone,
                last_tone,
                factor_re,
                factor_im,
            } => {
                let f = Complex64::new(*factor_re, *factor_im);
                let row = grid
                    .indices()
                    .iter()
                    .map(|&m| {
                        if m >= *first_tone && m <= *last_tone {
                            f
                        } else {
                            Complex64::new(1.0, 0.0)
                        }
                    })
                    .collect();
                (row, 0.0)
            }
        };
        factors.push(row);
        params.push(param);
    }

    let anchors = grid
        .indices()
        .iter()
        .enumerate()
        .filter(|&(pos, _)| {
            factors
                .iter()
                .all(|row| (row[pos] - Complex64::new(1.0, 0.0)).norm() < 1e-12)
        })
        .map(|(_, &m)| m)
        .collect();

    Ok(PrecodingSchedule {
        kind: kind.clone(),
        grid: grid.clone(),
        factors,
        ts_us,
        params,
        anchors,
    })
}

/// Apply a schedule to a static channel: the exact pre-receiver stream.
pub fn apply_precoding(
    channel: &StaticChannel,
    schedule: &PrecodingSchedule,
) -> Result<IdealStream, ScheduleError> {
    if channel.grid() != &schedule.grid {
        return Err(ScheduleError::GridMismatch);
    }
    let response = channel.response();
    let csi = schedule
        .factors
        .iter()
        .map(|row| row.iter().zip(response).map(|(c, h)| c * h).collect())
        .collect();
    Ok(IdealStream {
        grid: schedule.grid.clone(),
        seq: (0..schedule.n_packets() as u64).collect(),
        ts_us: schedule.ts_us.clone(),
        csi,
    })
}

fn linear_step(lo: f64, hi: f64, n: usize, n_packets: usize) -> f64 {
    if n_packets <= 1 {
        lo
    } else {
        lo + (hi - lo) * (n as f64) / ((n_packets - 1) as f64)
    }
}

fn two_path_row(grid: &SharedGrid, a: f64, b: f64, excess_m: f64) -> Vec<Complex64> {
    let tau = excess_m / SPEED_OF_LIGHT_M_S;
    grid.freqs_hz()
        .iter()
        .map(|&f| {
            Complex64::new(a, 0.0)
                + Complex64::from_polar(b, -2.0 * std::f64::consts::PI * f * tau)
        })
        .collect()
}

fn validate_kind(kind: &ScheduleKind, grid: &SharedGrid) -> Result<(), ScheduleError> {
    let finite = |name: &'static str, value: f64| {
        if value.is_finite() {
            Ok(())
        } else {
            Err(ScheduleError::BadParam { name, value })
        }
    };
    match kind {
        ScheduleKind::Constant {
            factor_re,
            factor_im,
        } => {
            finite("factor_re", *factor_re)?;
            finite("factor_im", *factor_im)?;
        }
        ScheduleKind::GainSweep { depth_db, period_s } => {
            finite("depth_db", *depth_db)?;
            finite("period_s", *period_s)?;
            if *period_s <= 0.0 {
                return Err(ScheduleError::BadPeriod { value: *period_s });
            }
        }
        ScheduleKind::TwoPathDoppler {
            static_gain,
            dynamic_gain,
            velocity_mps,
            initial_excess_m,
        } => {
            finite("static_gain", *static_gain)?;
            finite("dynamic_gain", *dynamic_gain)?;
            finite("velocity_mps", *velocity_mps)?;
            finite("initial_excess_m", *initial_excess_m)?;
        }
        ScheduleKind::TwoPathTof {
            static_gain,
            dynamic_gain,
            start_excess_m,
            end_excess_m,
        } => {
            finite("static_gain", *static_gain)?;
            finite("dynamic_gain", *dynamic_gain)?;
            finite("start_excess_m", *start_excess_m)?;
            finite("end_excess_m", *end_excess_m)?;
        }
        ScheduleKind::SingleTone { tone, sweep } => {
            finite("lo", sweep.lo)?;
            finite("hi", sweep.hi)?;
            if sweep.lo > sweep.hi {
                return Err(ScheduleError::BadSweepBounds {
                    lo: sweep.lo,
                    hi: sweep.hi,
                });
            }
            if grid.position_of(*tone).is_none() {
                return Err(ScheduleError::ToneNotOnGrid { tone: *tone });
            }
        }
        ScheduleKind::ToneBlock {
            first_tone,
            last_tone,
            factor_re,
            factor_im,
        } => {
            finite("factor_re", *factor_re)?;
            finite("factor_im", *factor_im)?;
            if !grid
                .indices()
                .iter()
                .any(|&m| m >= *first_tone && m <= *last_tone)
            {
                return Err(ScheduleError::EmptyToneBlock {
                    first: *first_tone,
                    last: *last_tone,
                });
            }
        }
    }
    Ok(())
}

/// If the kind is a two-path schedule whose excess length leaves the
/// unambiguous delay range, return `(max_excess_m, limit_m)`.
fn alias_excess(kind: &ScheduleKind, times_s: &[f64]) -> Option<(f64, f64)> {
    let limit_m = SPEED_OF_LIGHT_M_S / SUBCARRIER_SPACING_HZ;
    let max_m = match kind {
        ScheduleKind::TwoPathDoppler {
            velocity_mps,
            initial_excess_m,
            ..
        } => times_s
            .iter()
            .map(|t| (initial_excess_m + velocity_mps * t).abs())
            .fold(0.0, f64::max),
        ScheduleKind::TwoPathTof {
            start_excess_m,
            end_excess_m,
            ..
        } => start_excess_m.abs().max(end_excess_m.abs()),
        _ => return None,
    };
    (max_m >= limit_m).then_some((max_m, limit_m))
}
