//! Gain-control sweep: drive the input power up and down and record what
//! each receiver's AGC and RSSI reporting do to the observable scales.
//!
//! Per packet and receiver, the artifact compares the true injected sweep
//! level against the receiver-reported picture: the quantized RSSI, the raw
//! reported amplitude (rescaled by whatever gain the AGC applied), the
//! RSSI-based reconstruction of the absolute amplitude, and the mean
//! amplitude after per-packet l1 normalization (constant by construction —
//! the invariance the rescue pipelines rely on).

use serde::Serialize;

use super::{setup, ArtifactWriter, ExperimentError};
use crate::config::PipelineConfig;
use crate::preprocess::{normalize_frame, GainMethod};
use crate::receiver::distort;

#[derive(Serialize)]
struct SweepRow {
    seq: u64,
    ts_us: u64,
    /// Injected sweep level (dB) for this packet.
    sweep_db: f64,
    /// True pre-receiver input power (dB) of the packet.
    input_db: f64,
    /// RSSI the receiver reported (quantized pre-gain power).
    rssi_db: f64,
    /// Mean reported amplitude, including the AGC gain.
    raw_mean_amp: f64,
    /// Mean amplitude after rescaling the frame to its RSSI power.
    rssi_rescaled_mean_amp: f64,
    /// Mean amplitude after l1 normalization (1 by construction).
    l1_mean_amp: f64,
}

#[derive(Serialize)]
struct SweepSummary {
    receiver: String,
    n_frames: usize,
    /// Mean |RSSI − true input power| in dB (bounded by the quantizer).
    mean_abs_rssi_error_db: f64,
    max_abs_rssi_error_db: f64,
    /// Spread of the raw reported amplitude across the sweep.
    raw_amp_std: f64,
    /// Spread of the l1-normalized amplitude (0 by construction).
    l1_amp_std: f64,
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}

pub(crate) fn run(
    config: &PipelineConfig,
    writer: &mut ArtifactWriter,
) -> Result<(), ExperimentError> {
    let scene = setup(config)?;
    let input_db: Vec<f64> = scene
        .ideal
        .csi
        .iter()
        .map(|row| 10.0 * row.iter().map(|z| z.norm_sqr()).sum::<f64>().log10())
        .collect();

    let mut summaries = Vec::with_capacity(scene.models.len());
    for (i, model) in scene.models.iter().enumerate() {
        let series = distort(&scene.ideal, model, scene.receiver_seed(i))?;

        let mut rows = Vec::with_capacity(series.len());
        let mut rssi_errors = Vec::with_capacity(series.len());
        let mut raw_amps = Vec::with_capacity(series.len());
        let mut l1_amps = Vec::with_capacity(series.len());
        for frame in &series.frames {
            let n = frame.seq as usize;
            let power: f64 = frame.csi.iter().map(|z| z.norm_sqr()).sum();
            let raw_mean = frame.amplitudes().iter().sum::<f64>() / frame.csi.len() as f64;
            let rssi_scale = (10f64.powf(frame.rssi_db / 10.0) / power).sqrt();
            let l1 = normalize_frame(frame, &GainMethod::L1)?;
            let l1_mean = l1.amplitudes().iter().sum::<f64>() / l1.csi.len() as f64;
            rows.push(SweepRow {
                seq: frame.seq,
                ts_us: frame.ts_us,
                sweep_db: scene.schedule.params()[n],
                input_db: input_db[n],
                rssi_db: frame.rssi_db,
                raw_mean_amp: raw_mean,
                rssi_rescaled_mean_amp: raw_mean * rssi_scale,
                l1_mean_amp: l1_mean,
            });
            rssi_errors.push((frame.rssi_db - input_db[n]).abs());
            raw_amps.push(raw_mean);
            l1_amps.push(l1_mean);
        }

        writer.write_series(&format!("capture_{}.ndjson", model.name), &series)?;
        writer.write_csv(&format!("agc_sweep_{}.csv", model.name), &rows)?;
        summaries.push(SweepSummary {
            receiver: model.name.clone(),
            n_frames: series.len(),
            mean_abs_rssi_error_db: rssi_errors.iter().sum::<f64>()
                / rssi_errors.len().max(1) as f64,
            max_abs_rssi_error_db: rssi_errors.iter().cloned().fold(0.0, f64::max),
            raw_amp_std: std_dev(&raw_amps),
            l1_amp_std: std_dev(&l1_amps),
        });
    }
    writer.write_json("agc_sweep_summary.json", &summaries)
}
