//! Train-on-one-receiver, test-on-another transfer matrix.
//!
//! Every receiver model observes the same precoded streams (the
//! multi-receiver capture protocol: one transmission, many listeners), so
//! any accuracy drop off the matrix diagonal is attributable to the
//! mismatch between the two distortion chains, not to different underlying
//! activity. Each pipeline variant gets the full matrix; diagonal cells
//! hold out one fifth of every class, off-diagonal cells train and test on
//! the complete aligned sets. Partition statistics are fitted per set,
//! matching the published protocol where each device's capture is
//! standardized on its own.

use ndarray::{Array3, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::cv::EvalReport;
use super::dataset::gen_activity_dataset;
use super::knn::classify_tensor;
use super::pipeline::{FeaturePipeline, FitMode};
use super::EvalError;
use crate::receiver::ReceiverModel;
use crate::rng::{derive_seed, purpose, substream};
use crate::util::median;

/// Dataset sizing for the transfer experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossDeviceConfig {
    /// Number of movement-speed classes.
    pub n_classes: usize,
    /// Examples generated per class (per receiver).
    pub n_per_class: usize,
}

impl Default for CrossDeviceConfig {
    fn default() -> Self {
        CrossDeviceConfig {
            n_classes: 4,
            n_per_class: 30,
        }
    }
}

/// Accuracy matrix over (pipeline variant, train receiver, test receiver).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossDeviceReport {
    /// Receiver names, indexing the matrix axes.
    pub receivers: Vec<String>,
    /// Pipeline variant names, indexing the outer axis.
    pub variants: Vec<String>,
    /// Number of classes in the surrogate task.
    pub n_classes: usize,
    /// `reports[variant][train_receiver][test_receiver]`.
    pub reports: Vec<Vec<Vec<EvalReport>>>,
}

impl CrossDeviceReport {
    /// The cell for (variant, train receiver, test receiver).
    ///
    /// Panics if any index is out of range.
    pub fn report(&self, variant: usize, train: usize, test: usize) -> &EvalReport {
        &self.reports[variant][train][test]
    }

    fn off_diagonal_means(&self, variant: usize) -> Vec<f64> {
        let matrix = &self.reports[variant];
        let mut means = Vec::new();
        for (i, row) in matrix.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if i != j {
                    means.push(cell.mean);
                }
            }
        }
        means
    }

    /// Worst transfer accuracy for a variant, over off-diagonal cells.
    ///
    /// Panics if the variant index is out of range.
    pub fn min_off_diagonal(&self, variant: usize) -> f64 {
        self.off_diagonal_means(variant)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Median transfer accuracy for a variant, over off-diagonal cells.
    ///
    /// Panics if the variant index is out of range.
    pub fn median_off_diagonal(&self, variant: usize) -> f64 {
        median(&self.off_diagonal_means(variant))
    }
}

/// Run the full transfer matrix for every pipeline variant.
///
/// One surrogate dataset is generated per receiver from shared precoded
/// streams; each (variant, train, test) cell scores a 1-nearest-neighbor
/// classifier and reports per-example correctness with a bootstrap
/// interval on the mean.
pub fn cross_device_experiment(
    models: &[ReceiverModel],
    variants: &[FeaturePipeline],
    config: &CrossDeviceConfig,
    seed: u64,
) -> Result<CrossDeviceReport, EvalError> {
    if models.len() < 2 {
        return Err(EvalError::TooFewReceivers { got: models.len() });
    }
    if variants.is_empty() {
        return Err(EvalError::BadParam {
            name: "variants",
            detail: "need at least one feature pipeline".into(),
        });
    }
    let held_per_class = (config.n_per_class / 5).max(1);
    let diagonal_test = config.n_classes * held_per_class;
    if diagonal_test < 10 {
        return Err(EvalError::BadParam {
            name: "n_per_class",
            detail: format!(
                "diagonal cells would hold out only {diagonal_test} examples, \
                 need at least 10 for a bootstrap interval"
            ),
        });
    }

    let datasets = gen_activity_dataset(config.n_classes, config.n_per_class, models, seed)?;
    let labels = datasets[0].labels();
    let tensors: Vec<Array3<f64>> = datasets.iter().map(|d| d.feature_tensor()).collect();
    let n_rx = models.len();

    // Held-out split per receiver for the self-test diagonal: one fifth of
    // every class (at least one example), drawn by a per-receiver shuffle.
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..n_rx)
        .map(|i| {
            let mut rng = substream(seed, &[purpose::SHUFFLE, 1000 + i as u64]);
            let mut train = Vec::new();
            let mut test = Vec::new();
            for class in 0..config.n_classes {
                let mut members: Vec<usize> = labels
                    .iter()
                    .enumerate()
                    .filter(|&(_, &label)| label == class)
                    .map(|(example, _)| example)
                    .collect();
                members.shuffle(&mut rng);
                test.extend(members.drain(..held_per_class));
                train.extend(members);
            }
            train.sort_unstable();
            test.sort_unstable();
            (train, test)
        })
        .collect();
    let everything: Vec<usize> = (0..labels.len()).collect();

    let cells: Vec<(usize, usize, usize)> = (0..variants.len())
        .flat_map(|v| (0..n_rx).flat_map(move |i| (0..n_rx).map(move |j| (v, i, j))))
        .collect();
    let per_cell: Vec<Result<EvalReport, EvalError>> = cells
        .par_iter()
        .map(|&(v, i, j)| {
            let (train_idx, test_idx): (&[usize], &[usize]) = if i == j {
                (&splits[i].0, &splits[i].1)
            } else {
                (&everything, &everything)
            };
            let train = tensors[i].select(Axis(0), train_idx);
            let test = tensors[j].select(Axis(0), test_idx);
            let (train, test) = variants[v].prepare(&train, &test, FitMode::PerSet)?;
            let train_labels: Vec<usize> = train_idx.iter().map(|&e| labels[e]).collect();
            let predicted =
                classify_tensor(&train, &train_labels, &test, config.n_classes, 1)?;
            let mut confusion = vec![vec![0usize; config.n_classes]; config.n_classes];
            let mut correctness = Vec::with_capacity(test_idx.len());
            for (&example, &guess) in test_idx.iter().zip(&predicted) {
                confusion[labels[example]][guess] += 1;
                correctness.push(if labels[example] == guess { 1.0 } else { 0.0 });
            }
            EvalReport::from_accuracies(
                models[i].name.clone(),
                models[j].name.clone(),
                correctness,
                confusion,
                derive_seed(seed, &[purpose::BOOTSTRAP, v as u64, i as u64, j as u64]),
            )
        })
        .collect();

    let mut flat = per_cell.into_iter();
    let mut reports = Vec::with_capacity(variants.len());
    for _ in variants {
        let mut matrix = Vec::with_capacity(n_rx);
        for _ in 0..n_rx {
            let mut row = Vec::with_capacity(n_rx);
            for _ in 0..n_rx {
                row.push(flat.next().expect("cell count")?);
            }
            matrix.push(row);
        }
        reports.push(matrix);
    }

    Ok(CrossDeviceReport {
        receivers: models.iter().map(|m| m.name.clone()).collect(),
        variants: variants.iter().map(|p| p.name().to_string()).collect(),
        n_classes: config.n_classes,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{SharedGrid, SubcarrierGrid};
    use crate::receiver::AgcPolicy;

    fn noisy_model(name: &str, grid: &SharedGrid) -> ReceiverModel {
        let mut model = ReceiverModel::neutral(name, grid);
        model.noise.amp_std = 0.05;
        model
    }

    #[test]
    fn matched_impairments_transfer_without_a_gap() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let models = [noisy_model("rx_a", &grid), noisy_model("rx_b", &grid)];
        let config = CrossDeviceConfig {
            n_classes: 3,
            n_per_class: 20,
        };
        let report =
            cross_device_experiment(&models, &[FeaturePipeline::Raw], &config, 31).unwrap();

        assert_eq!(report.receivers, vec!["rx_a", "rx_b"]);
        assert_eq!(report.variants, vec!["raw"]);
        assert_eq!(report.reports.len(), 1);
        assert_eq!(report.reports[0].len(), 2);
        assert_eq!(report.reports[0][1].len(), 2);
        assert_eq!(report.report(0, 0, 1).train_receiver, "rx_a");
        assert_eq!(report.report(0, 0, 1).test_receiver, "rx_b");
        // Diagonal cells hold out 4 of 20 per class.
        assert_eq!(report.report(0, 0, 0).accuracies.len(), 12);
        assert_eq!(report.report(0, 0, 1).accuracies.len(), 60);

        for side in 0..2 {
            let diag = report.report(0, side, side).mean;
            assert!(diag >= 0.6, "self accuracy {diag} on receiver {side}");
        }
        for (i, j) in [(0, 1), (1, 0)] {
            let transfer = report.report(0, i, j).mean;
            let own = report.report(0, j, j).mean;
            assert!(
                transfer >= own - 0.15,
                "matched receivers opened a gap: transfer {transfer} vs own {own}"
            );
        }
    }

    #[test]
    fn agc_mismatch_breaks_raw_transfer_and_mean_normalization_restores_it() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let mut stepped = noisy_model("rx_agc", &grid);
        stepped.agc = AgcPolicy::StepCoarse {
            step_db: 6.0,
            hysteresis_db: 3.0,
        };
        let models = [noisy_model("rx_plain", &grid), stepped];
        let config = CrossDeviceConfig {
            n_classes: 3,
            n_per_class: 20,
        };
        let variants = [FeaturePipeline::Raw, FeaturePipeline::L1ZscoreFeature];
        let report = cross_device_experiment(&models, &variants, &config, 32).unwrap();

        let raw_transfer = report.min_off_diagonal(0);
        let rescued_transfer = report.min_off_diagonal(1);
        assert!(
            raw_transfer < rescued_transfer,
            "raw {raw_transfer} vs mean-normalized {rescued_transfer}"
        );
        for side in 0..2 {
            let diag = report.report(0, side, side).mean;
            assert!(
                diag >= raw_transfer,
                "receiver {side}: self accuracy {diag} below worst transfer {raw_transfer}"
            );
        }
        assert!(
            report.median_off_diagonal(1) >= report.median_off_diagonal(0),
            "median transfer should not get worse with normalization"
        );
    }

    #[test]
    fn identical_seeds_reproduce_the_matrix_exactly() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let models = [noisy_model("rx_a", &grid), noisy_model("rx_b", &grid)];
        let config = CrossDeviceConfig {
            n_classes: 2,
            n_per_class: 25,
        };
        let variants = [FeaturePipeline::L1];
        let a = cross_device_experiment(&models, &variants, &config, 33).unwrap();
        let b = cross_device_experiment(&models, &variants, &config, 33).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn input_validation() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let one = [noisy_model("solo", &grid)];
        let config = CrossDeviceConfig::default();
        assert!(matches!(
            cross_device_experiment(&one, &[FeaturePipeline::Raw], &config, 1).unwrap_err(),
            EvalError::TooFewReceivers { got: 1 }
        ));

        let two = [noisy_model("rx_a", &grid), noisy_model("rx_b", &grid)];
        assert!(matches!(
            cross_device_experiment(&two, &[], &config, 1).unwrap_err(),
            EvalError::BadParam {
                name: "variants",
                ..
            }
        ));

        let tiny = CrossDeviceConfig {
            n_classes: 2,
            n_per_class: 10,
        };
        assert!(matches!(
            cross_device_experiment(&two, &[FeaturePipeline::Raw], &tiny, 1).unwrap_err(),
            EvalError::BadParam {
                name: "n_per_class",
                ..
            }
        ));
    }
}
