//! Per-frame gain normalization: remove (or restore) the scalar amplitude
//! factor that AGC and transmit power impose on a frame.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::frame::{CsiFrame, CsiSeries};

/// How the per-frame scale factor is computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMethod {
    /// Divide by the mean amplitude: `H / ((1/K) sum_k |H_k|)`.
    L1,
    /// Divide by the Euclidean norm `sqrt(sum_k |H_k|^2)`.
    L2,
    /// Rescale so total power matches the reported RSSI:
    /// `H * sqrt(10^(rssi_db/10) / sum_k |H_k|^2)`.
    Rssi,
    /// Divide by the summed amplitude of the anchor tones only (tones known
    /// to be unmodified); with `use_mean`, by their mean amplitude instead.
    Anchored {
        anchors: BTreeSet<i32>,
        #[serde(default)]
        use_mean: bool,
    },
}

impl GainMethod {
    /// CLI/config name of the method.
    pub fn name(&self) -> &'static str {
        match self {
            GainMethod::L1 => "l1",
            GainMethod::L2 => "l2",
            GainMethod::Rssi => "rssi",
            GainMethod::Anchored { .. } => "anchored",
        }
    }
}

/// Normalize one frame's gain.
pub fn normalize_frame(frame: &CsiFrame, method: &GainMethod) -> Result<CsiFrame, PreprocessError> {
    let scale = match method {
        GainMethod::L1 => {
            frame.csi.iter().map(|z| z.norm()).sum::<f64>() / frame.csi.len() as f64
        }
        GainMethod::L2 => frame.power().sqrt(),
        GainMethod::Rssi => {
            let target = 10f64.powf(frame.rssi_db / 10.0);
            (frame.power() / target).sqrt()
        }
        GainMethod::Anchored { anchors, use_mean } => {
            let mut sum = 0.0;
            let mut count = 0usize;
            for (pos, &m) in frame.grid.indices().iter().enumerate() {
                if anchors.contains(&m) {
                    sum += frame.csi[pos].norm();
                    count += 1;
                }
            }
            if count == 0 {
                return Err(PreprocessError::MissingAnchors);
            }
            if *use_mean {
                sum / count as f64
            } else {
                sum
            }
        }
    };
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(PreprocessError::ZeroScale {
            method: method.name(),
            seq: frame.seq,
        });
    }
    let mut out = frame.clone();
    for z in &mut out.csi {
        *z /= scale;
    }
    Ok(out)
}

/// Normalize every frame of a series and record the method in the metadata.
pub fn normalize_series(
    series: &CsiSeries,
    method: &GainMethod,
) -> Result<CsiSeries, PreprocessError> {
    if series.is_empty() {
        return Err(PreprocessError::EmptySeries);
    }
    let frames = series
        .frames
        .iter()
        .map(|f| normalize_frame(f, method))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = series.with_frames(frames)?;
    out.meta.insert("gain_norm".into(), method.name().into());
    Ok(out)
}
