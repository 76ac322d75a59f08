//! Faithfulness of reported responses to a known precoded change.
//!
//! The injected factor sequence is the ground truth; frames are aligned to
//! it by sequence number, normalized against tones the schedule never
//! touches, and compared tone by tone. What remains is exactly the part of
//! the injected change the receiver failed to report.

use std::collections::BTreeSet;

use serde::Serialize;

use super::MetricsError;
use crate::frame::CsiSeries;
use crate::preprocess::{normalize_series, GainMethod};
use crate::schedule::PrecodingSchedule;

/// Mean absolute deviation from the injected factors, per tone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    /// Tone indices, in reported-grid order.
    pub tones: Vec<i32>,
    /// Mean absolute amplitude deviation per tone.
    pub amplitude: Vec<f64>,
    /// Mean absolute phase deviation per tone, radians, differences wrapped
    /// into `(-pi, pi]` before taking the absolute value.
    pub phase: Vec<f64>,
    /// Frames that entered the averages.
    pub n_frames: usize,
}

impl DeviationReport {
    /// Tone-averaged amplitude deviation.
    pub fn mean_amplitude(&self) -> f64 {
        self.amplitude.iter().sum::<f64>() / self.amplitude.len() as f64
    }

    /// Tone-averaged phase deviation.
    pub fn mean_phase(&self) -> f64 {
        self.phase.iter().sum::<f64>() / self.phase.len() as f64
    }
}

fn wrap_angle(x: f64) -> f64 {
    let d = x.rem_euclid(std::f64::consts::TAU);
    if d > std::f64::consts::PI {
        d - std::f64::consts::TAU
    } else {
        d
    }
}

/// Compare a (equalized) capture against the factors its schedule injected.
///
/// Frames are first normalized by the mean amplitude over the `anchors` —
/// tones the schedule leaves untouched — which cancels any per-packet gain
/// the receiver applied. Each frame is then matched to its packet by
/// sequence number and the per-tone deviations from the known factors are
/// averaged over frames.
pub fn response_deviation(
    series: &CsiSeries,
    schedule: &PrecodingSchedule,
    anchors: &BTreeSet<i32>,
) -> Result<DeviationReport, MetricsError> {
    if anchors.is_empty() {
        return Err(MetricsError::EmptyAnchors);
    }
    series.validate()?;
    let normalized = normalize_series(
        series,
        &GainMethod::Anchored {
            anchors: anchors.clone(),
            use_mean: true,
        },
    )?;

    let grid = normalized.grid().expect("validated series has a grid");
    let tones = grid.indices().to_vec();
    let positions: Vec<usize> = tones
        .iter()
        .map(|&m| {
            schedule
                .grid()
                .position_of(m)
                .ok_or(MetricsError::ToneNotInSchedule { tone: m })
        })
        .collect::<Result<_, _>>()?;

    let mut amp = vec![0.0; tones.len()];
    let mut phs = vec![0.0; tones.len()];
    for frame in &normalized.frames {
        let n = frame.seq as usize;
        if n >= schedule.n_packets() {
            return Err(MetricsError::UnknownPacket {
                seq: frame.seq,
                schedule_len: schedule.n_packets(),
            });
        }
        let factors = &schedule.factors()[n];
        for (t, &p) in positions.iter().enumerate() {
            let h = frame.csi[t];
            let c = factors[p];
            amp[t] += (h.norm() - c.norm()).abs();
            phs[t] += wrap_angle(h.arg() - c.arg()).abs();
        }
    }
    let n_frames = normalized.len();
    for v in amp.iter_mut().chain(phs.iter_mut()) {
        *v /= n_frames as f64;
    }

    Ok(DeviationReport {
        tones,
        amplitude: amp,
        phase: phs,
        n_frames,
    })
}
