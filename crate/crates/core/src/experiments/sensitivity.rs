//! Normalization sensitivity: sweep a single tone's injected factor and
//! measure, per reported tone, the mutual information between the swept
//! parameter and the tone's amplitude — on the raw capture and again after
//! per-packet l1 normalization. Raw captures concentrate the information on
//! the swept tone; dividing by the per-packet mean leaks it into every
//! other tone, which is exactly the coupling this experiment quantifies.

use rayon::prelude::*;
use serde::Serialize;

use super::{setup, ArtifactWriter, ExperimentError};
use crate::config::PipelineConfig;
use crate::frame::CsiSeries;
use crate::metrics::mutual_information_knn;
use crate::preprocess::{normalize_series, GainMethod};
use crate::receiver::distort;
use crate::rng::derive_seed;
use crate::schedule::ScheduleKind;

#[derive(Serialize)]
struct MiRow {
    variant: &'static str,
    tone: i32,
    mi_nats: f64,
}

#[derive(Serialize)]
struct VariantSensitivity {
    variant: &'static str,
    mi_at_swept_tone: f64,
    max_mi_other_tones: f64,
    mean_mi_other_tones: f64,
}

#[derive(Serialize)]
struct SensitivitySummary {
    receiver: String,
    swept_tone: i32,
    n_samples: usize,
    variants: Vec<VariantSensitivity>,
}

fn tone_mi(
    series: &CsiSeries,
    x: &[f64],
    k: usize,
    seed: u64,
) -> Result<Vec<f64>, ExperimentError> {
    let n_tones = series.grid().expect("non-empty capture").len();
    let amplitudes: Vec<Vec<f64>> = series.frames.iter().map(|f| f.amplitudes()).collect();
    (0..n_tones)
        .into_par_iter()
        .map(|pos| {
            let y: Vec<Vec<f64>> = amplitudes.iter().map(|row| vec![row[pos]]).collect();
            Ok(mutual_information_knn(
                x,
                &y,
                k,
                derive_seed(seed, &[pos as u64]),
            )?)
        })
        .collect()
}

pub(crate) fn run(
    config: &PipelineConfig,
    writer: &mut ArtifactWriter,
) -> Result<(), ExperimentError> {
    let scene = setup(config)?;
    let swept_tone = match scene.schedule.kind() {
        ScheduleKind::SingleTone { tone, .. } => *tone,
        other => unreachable!("validation admits only single-tone sweeps, got {other:?}"),
    };
    let k = config.estimator.mi.k;

    let mut summaries = Vec::with_capacity(scene.models.len());
    for (i, model) in scene.models.iter().enumerate() {
        let series = distort(&scene.ideal, model, scene.receiver_seed(i))?;
        writer.write_series(&format!("capture_{}.ndjson", model.name), &series)?;

        let x: Vec<f64> = series
            .frames
            .iter()
            .map(|f| scene.schedule.params()[f.seq as usize])
            .collect();
        let normalized = normalize_series(&series, &GainMethod::L1)?;

        let tones = series.grid().expect("non-empty capture").indices().to_vec();
        let mut rows = Vec::with_capacity(2 * tones.len());
        let mut variants = Vec::with_capacity(2);
        for (v, (variant, capture)) in [("raw", &series), ("l1", &normalized)]
            .into_iter()
            .enumerate()
        {
            let mi = tone_mi(
                capture,
                &x,
                k,
                derive_seed(scene.seed, &[i as u64, v as u64]),
            )?;
            for (pos, &tone) in tones.iter().enumerate() {
                rows.push(MiRow {
                    variant,
                    tone,
                    mi_nats: mi[pos],
                });
            }
            let swept_pos = tones.iter().position(|&t| t == swept_tone);
            let others: Vec<f64> = mi
                .iter()
                .enumerate()
                .filter(|&(pos, _)| Some(pos) != swept_pos)
                .map(|(_, &v)| v)
                .collect();
            variants.push(VariantSensitivity {
                variant,
                mi_at_swept_tone: swept_pos.map(|p| mi[p]).unwrap_or(f64::NAN),
                max_mi_other_tones: others.iter().cloned().fold(0.0, f64::max),
                mean_mi_other_tones: others.iter().sum::<f64>() / others.len().max(1) as f64,
            });
        }

        writer.write_csv(&format!("sensitivity_{}.csv", model.name), &rows)?;
        summaries.push(SensitivitySummary {
            receiver: model.name.clone(),
            swept_tone,
            n_samples: x.len(),
            variants,
        });
    }
    writer.write_json("sensitivity_summary.json", &summaries)
}
