//! Cross-device transfer: train a 1-NN activity classifier on one
//! receiver's captures and test on another's, over every receiver pair and
//! feature-pipeline variant, replicated across independent seeds. The
//! artifact of interest is the off-diagonal (transfer) accuracy and how
//! much per-packet gain normalization recovers of it.

use serde::Serialize;

use super::{ArtifactWriter, ExperimentError};
use crate::config::PipelineConfig;
use crate::eval::{cross_device_experiment, CrossDeviceConfig, CrossDeviceReport, FeaturePipeline};
use crate::rng::derive_seed;
use crate::util::median;

#[derive(Serialize)]
struct MatrixRow {
    seed_index: usize,
    variant: String,
    train: String,
    test: String,
    mean_accuracy: f64,
    ci_lo: f64,
    ci_hi: f64,
    ci_degenerate: bool,
}

#[derive(Serialize)]
struct VariantSummary {
    variant: String,
    per_seed_median_off_diagonal: Vec<f64>,
    median_off_diagonal: f64,
    min_off_diagonal: f64,
}

#[derive(Serialize)]
struct CrossDeviceSummary {
    receivers: Vec<String>,
    n_seeds: usize,
    n_classes: usize,
    n_per_class: usize,
    variants: Vec<VariantSummary>,
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
    let cd_config = CrossDeviceConfig {
        n_classes: config.eval.n_classes,
        n_per_class: config.eval.n_per_class,
    };

    let reports: Vec<CrossDeviceReport> = (0..config.eval.n_seeds)
        .map(|s| cross_device_experiment(&models, &variants, &cd_config, derive_seed(seed, &[s as u64])))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for (s, report) in reports.iter().enumerate() {
        for (v, variant) in report.variants.iter().enumerate() {
            for (i, train) in report.receivers.iter().enumerate() {
                for (j, test) in report.receivers.iter().enumerate() {
                    let cell = report.report(v, i, j);
                    rows.push(MatrixRow {
                        seed_index: s,
                        variant: variant.clone(),
                        train: train.clone(),
                        test: test.clone(),
                        mean_accuracy: cell.mean,
                        ci_lo: cell.ci_lo,
                        ci_hi: cell.ci_hi,
                        ci_degenerate: cell.ci_degenerate,
                    });
                }
            }
        }
    }
    writer.write_csv("cross_device_matrix.csv", &rows)?;

    let variant_summaries: Vec<VariantSummary> = variants
        .iter()
        .enumerate()
        .map(|(v, variant)| {
            let per_seed: Vec<f64> = reports.iter().map(|r| r.median_off_diagonal(v)).collect();
            let min = reports
                .iter()
                .map(|r| r.min_off_diagonal(v))
                .fold(f64::INFINITY, f64::min);
            VariantSummary {
                variant: variant.name().to_string(),
                median_off_diagonal: median(&per_seed),
                per_seed_median_off_diagonal: per_seed,
                min_off_diagonal: min,
            }
        })
        .collect();

    writer.write_json(
        "cross_device_summary.json",
        &CrossDeviceSummary {
            receivers: models.iter().map(|m| m.name.clone()).collect(),
            n_seeds: config.eval.n_seeds,
            n_classes: cd_config.n_classes,
            n_per_class: cd_config.n_per_class,
            variants: variant_summaries,
        },
    )?;
    writer.write_json("cross_device_reports.json", &reports)
}
