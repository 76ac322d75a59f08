//! Noise metrology: capture a static scene through every receiver, report
//! per-tone amplitude and phase moments and cross-tone correlation, then
//! repeat the moment measurement after Mahalanobis outlier filtering to
//! show how much of the heavy tail the filter removes.

use serde::Serialize;

use super::{setup, ArtifactWriter, ExperimentError};
use crate::config::PipelineConfig;
use crate::metrics::{
    chi_squared_distance_threshold, mahalanobis_filter, noise_correlation, noise_stats,
    MomentSummary,
};
use crate::receiver::distort;

#[derive(Serialize)]
struct ToneRow {
    tone: i32,
    amp_std: f64,
    amp_excess_kurtosis: f64,
    amp_std_filtered: f64,
    amp_excess_kurtosis_filtered: f64,
    phase_std: f64,
}

#[derive(Serialize)]
struct NoiseSummary {
    receiver: String,
    n_frames: usize,
    removed_frames: usize,
    mahalanobis_threshold: f64,
    /// Mean Pearson correlation between neighbouring tones' amplitudes.
    mean_lag1_correlation: f64,
    amplitude: MomentSummary,
    amplitude_filtered: MomentSummary,
    phase: MomentSummary,
    phase_filtered: MomentSummary,
}

pub(crate) fn run(
    config: &PipelineConfig,
    writer: &mut ArtifactWriter,
) -> Result<(), ExperimentError> {
    let scene = setup(config)?;
    // The config speaks percent (99.9); the chi-squared cutoff wants a fraction.
    let coverage = config.preprocessing.outlier_percentile / 100.0;

    let mut summaries = Vec::with_capacity(scene.models.len());
    for (i, model) in scene.models.iter().enumerate() {
        let series = distort(&scene.ideal, model, scene.receiver_seed(i))?;
        writer.write_series(&format!("capture_{}.ndjson", model.name), &series)?;

        let before = noise_stats(&series)?;
        let correlation = noise_correlation(&series)?;
        let dim = series.grid().expect("non-empty capture").len();
        let threshold = chi_squared_distance_threshold(dim, coverage)?;
        let (filtered, removed) = mahalanobis_filter(&series, threshold)?;
        let after = noise_stats(&filtered)?;

        let lag1: Vec<f64> = (0..dim.saturating_sub(1))
            .map(|k| correlation.matrix[k][k + 1])
            .collect();
        let mean_lag1 = lag1.iter().sum::<f64>() / lag1.len().max(1) as f64;

        let rows: Vec<ToneRow> = before
            .tones
            .iter()
            .enumerate()
            .map(|(k, &tone)| ToneRow {
                tone,
                amp_std: before.amplitude.std[k],
                amp_excess_kurtosis: before.amplitude.excess_kurtosis[k],
                amp_std_filtered: after.amplitude.std[k],
                amp_excess_kurtosis_filtered: after.amplitude.excess_kurtosis[k],
                phase_std: before.phase.std[k],
            })
            .collect();
        writer.write_csv(&format!("noise_per_tone_{}.csv", model.name), &rows)?;

        summaries.push(NoiseSummary {
            receiver: model.name.clone(),
            n_frames: series.len(),
            removed_frames: removed,
            mahalanobis_threshold: threshold,
            mean_lag1_correlation: mean_lag1,
            amplitude: before.amplitude.summary(),
            amplitude_filtered: after.amplitude.summary(),
            phase: before.phase.summary(),
            phase_filtered: after.phase.summary(),
        });
    }
    writer.write_json("noise_summary.json", &summaries)
}
