//! Doppler tracking: a two-path schedule with known velocity goes through
//! every receiver, and each capture is estimated twice — once with phase
//! detrending alone, once with gain normalization before detrending — to
//! expose how much of the velocity error is AGC-induced scale modulation.

use serde::Serialize;

use super::{setup, ArtifactWriter, ExperimentError};
use crate::config::PipelineConfig;
use crate::estimators::estimate_velocity;
use crate::frame::CsiSeries;
use crate::preprocess::{
    detrend_series, filter_series, normalize_series, DetrendMethod, GainMethod,
};
use crate::receiver::distort;

#[derive(Serialize)]
struct WindowRow {
    variant: &'static str,
    start_ts_us: u64,
    end_ts_us: u64,
    n_frames: usize,
    velocity_mps: f64,
    error_mps: f64,
}

#[derive(Serialize)]
struct VariantSummary {
    variant: &'static str,
    windows: usize,
    skipped: usize,
    median_mps: f64,
    iqr_mps: f64,
    abs_median_error_mps: f64,
}

#[derive(Serialize)]
struct DopplerSummary {
    receiver: String,
    truth_mps: f64,
    variants: Vec<VariantSummary>,
}

pub(crate) fn run(
    config: &PipelineConfig,
    writer: &mut ArtifactWriter,
) -> Result<(), ExperimentError> {
    let scene = setup(config)?;
    let truth = scene
        .schedule
        .ground_truth_velocity()
        .expect("a two-path moving schedule knows its velocity");
    let music = config
        .estimator
        .music
        .build(config.channel.center_freq_hz);
    let gain = config
        .preprocessing
        .gain
        .clone()
        .unwrap_or(GainMethod::L1);
    let detrend = config.preprocessing.detrend.unwrap_or(DetrendMethod::Ls);

    let prepare = |series: &CsiSeries, with_gain: bool| -> Result<CsiSeries, ExperimentError> {
        let mut current = if with_gain {
            normalize_series(series, &gain)?
        } else {
            series.clone()
        };
        if let Some(filter) = &config.preprocessing.filter {
            current = filter_series(&current, filter)?;
        }
        Ok(detrend_series(&current, detrend)?)
    };

    let mut summaries = Vec::with_capacity(scene.models.len());
    for (i, model) in scene.models.iter().enumerate() {
        let series = distort(&scene.ideal, model, scene.receiver_seed(i))?;
        writer.write_series(&format!("capture_{}.ndjson", model.name), &series)?;

        let mut rows = Vec::new();
        let mut variants = Vec::new();
        for (variant, with_gain) in [("detrend_only", false), ("gain_detrend", true)] {
            let prepped = prepare(&series, with_gain)?;
            let track = estimate_velocity(&prepped, &music)?;
            for window in &track.windows {
                rows.push(WindowRow {
                    variant,
                    start_ts_us: window.start_ts_us,
                    end_ts_us: window.end_ts_us,
                    n_frames: window.n_frames,
                    velocity_mps: window.velocity_mps,
                    error_mps: window.velocity_mps - truth,
                });
            }
            variants.push(VariantSummary {
                variant,
                windows: track.windows.len(),
                skipped: track.skipped,
                median_mps: track.median_mps,
                iqr_mps: track.iqr_mps,
                abs_median_error_mps: (track.median_mps - truth).abs(),
            });
        }

        writer.write_csv(&format!("doppler_windows_{}.csv", model.name), &rows)?;
        summaries.push(DopplerSummary {
            receiver: model.name.clone(),
            truth_mps: truth,
            variants,
        });
    }
    writer.write_json("doppler_summary.json", &summaries)
}
