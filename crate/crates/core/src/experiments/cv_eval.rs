//! Within-receiver evaluation: repeated stratified cross-validation of the
//! surrogate activity classifier on each receiver's captures, for every
//! configured feature-pipeline variant. This is the single-device baseline
//! the cross-device transfer matrix is judged against, emitted as full
//! reports (JSON) plus confusion matrices (CSV).

use serde::Serialize;

use super::{ArtifactWriter, ExperimentError};
use crate::config::PipelineConfig;
use crate::eval::{gen_activity_dataset, repeated_stratified_cv, FeaturePipeline};
use crate::rng::derive_seed;

#[derive(Serialize)]
struct CvCell {
    receiver: String,
    variant: String,
    mean_accuracy: f64,
    std_accuracy: f64,
    ci_lo: f64,
    ci_hi: f64,
    ci_degenerate: bool,
}

pub(crate) fn run(
    config: &PipelineConfig,
    writer: &mut ArtifactWriter,
) -> Result<(), ExperimentError> {
    let seed = config.seed.expect("validated config has a seed");
    let grid = config.channel.build_grid()?;
    let models = config
        .receivers
        .iter()
        .map(|r| r.resolve(&grid))
        .collect::<Result<Vec<_>, _>>()?;
    let variants: Vec<FeaturePipeline> = config
        .eval
        .variants
        .iter()
        .map(|name| FeaturePipeline::from_name(name).expect("validated variant name"))
        .collect();

    let datasets = gen_activity_dataset(
        config.eval.n_classes,
        config.eval.n_per_class,
        &models,
        seed,
    )?;

    let mut cells = Vec::new();
    for (i, dataset) in datasets.iter().enumerate() {
        for (v, variant) in variants.iter().enumerate() {
            let report = repeated_stratified_cv(
                dataset,
                config.eval.folds,
                config.eval.repeats,
                *variant,
                derive_seed(seed, &[i as u64, v as u64]),
            )?;

            let stem = format!("{}_{}", models[i].name, variant.name());
            writer.write_json(&format!("cv_report_{stem}.json"), &report)?;

            let header: Vec<String> = std::iter::once("true_class".to_string())
                .chain((0..config.eval.n_classes).map(|c| format!("predicted_{c}")))
                .collect();
            let rows: Vec<Vec<String>> = report
                .confusion
                .iter()
                .enumerate()
                .map(|(class, counts)| {
                    std::iter::once(class.to_string())
                        .chain(counts.iter().map(|c| c.to_string()))
                        .collect()
                })
                .collect();
            writer.write_csv_records(&format!("confusion_{stem}.csv"), &header, &rows)?;

            cells.push(CvCell {
                receiver: models[i].name.clone(),
                variant: variant.name().to_string(),
                mean_accuracy: report.mean,
                std_accuracy: report.std,
                ci_lo: report.ci_lo,
                ci_hi: report.ci_hi,
                ci_degenerate: report.ci_degenerate,
            });
        }
    }
    writer.write_json("cv_summary.json", &cells)
}
