//! Repeated stratified cross validation.
//!
//! Each repeat shuffles examples within every class and deals them round
//! robin across folds, so every fold holds each class in proportion (off
//! by at most one example). Every (repeat, fold) cell trains on the other
//! folds, applies the feature pipeline leak-free (statistics fitted on the
//! training folds only), and scores a 1-nearest-neighbor classifier on the
//! held-out fold. The per-cell accuracies feed a BCa bootstrap interval.

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::bootstrap::bootstrap_bca;
use super::knn::classify_tensor;
use super::pipeline::{FeaturePipeline, FitMode};
use super::{EvalError, LabeledDataset};
use crate::rng::{derive_seed, purpose, substream};

/// Bootstrap resample count used for accuracy intervals.
const N_BOOT: usize = 10_000;
/// Percentile levels of the reported interval (a nominal 99% interval).
const CI_LEVEL: (f64, f64) = (0.5, 99.5);

/// Accuracy summary for one train/test receiver pairing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Receiver whose data trained the classifier.
    pub train_receiver: String,
    /// Receiver whose data was scored.
    pub test_receiver: String,
    /// One accuracy per evaluation unit (per fold cell in cross
    /// validation, per example in a fixed-split transfer test).
    pub accuracies: Vec<f64>,
    /// Mean accuracy.
    pub mean: f64,
    /// Sample standard deviation of `accuracies`.
    pub std: f64,
    /// Lower endpoint of the bootstrap interval on the mean.
    pub ci_lo: f64,
    /// Upper endpoint of the bootstrap interval on the mean.
    pub ci_hi: f64,
    /// Percentile levels the interval targets.
    pub ci_percentiles: (f64, f64),
    /// True when the accuracies had no spread and the interval collapsed.
    pub ci_degenerate: bool,
    /// Confusion counts, `confusion[true_class][predicted_class]`, summed
    /// over all evaluation units.
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    pub(crate) fn from_accuracies(
        train_receiver: String,
        test_receiver: String,
        accuracies: Vec<f64>,
        confusion: Vec<Vec<usize>>,
        seed: u64,
    ) -> Result<EvalReport, EvalError> {
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let std = if accuracies.len() > 1 {
            (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let ci = bootstrap_bca(&accuracies, N_BOOT, CI_LEVEL, seed)?;
        Ok(EvalReport {
            train_receiver,
            test_receiver,
            accuracies,
            mean,
            std,
            ci_lo: ci.lo,
            ci_hi: ci.hi,
            ci_percentiles: CI_LEVEL,
            ci_degenerate: ci.degenerate,
            confusion,
        })
    }
}

/// Assign each example to a fold in `0..folds`, stratified by class.
///
/// Within every class the example indices are shuffled, then dealt round
/// robin, so per-class fold counts differ by at most one. The caller is
/// responsible for ensuring every class has at least `folds` examples if
/// it needs every fold to contain every class.
pub fn stratified_folds<R: Rng>(labels: &[usize], folds: usize, rng: &mut R) -> Vec<usize> {
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &label) in labels.iter().enumerate() {
        by_class[label].push(i);
    }
    let mut assignment = vec![0usize; labels.len()];
    for members in &mut by_class {
        members.shuffle(rng);
        for (pos, &example) in members.iter().enumerate() {
            assignment[example] = pos % folds;
        }
    }
    assignment
}

/// Run `repeats` rounds of `folds`-fold stratified cross validation with a
/// 1-nearest-neighbor classifier, returning one accuracy per (repeat,
/// fold) cell. Confusion counts are summed over all cells, so each example
/// contributes `repeats` predictions.
pub fn repeated_stratified_cv(
    dataset: &LabeledDataset,
    folds: usize,
    repeats: usize,
    pipeline: FeaturePipeline,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    dataset.validate()?;
    if folds < 2 {
        return Err(EvalError::BadCvShape {
            detail: format!("need at least 2 folds, got {folds}"),
        });
    }
    if repeats == 0 {
        return Err(EvalError::BadCvShape {
            detail: "need at least 1 repeat".into(),
        });
    }
    let labels = dataset.labels();
    let mut class_counts = vec![0usize; dataset.n_classes];
    for &label in &labels {
        class_counts[label] += 1;
    }
    for (class, &count) in class_counts.iter().enumerate() {
        if count < folds {
            return Err(EvalError::ClassSmallerThanFolds {
                class,
                count,
                folds,
            });
        }
    }

    let tensor = dataset.feature_tensor();
    let assignments: Vec<Vec<usize>> = (0..repeats)
        .map(|r| {
            let mut rng = substream(seed, &[purpose::SHUFFLE, r as u64]);
            stratified_folds(&labels, folds, &mut rng)
        })
        .collect();

    let cells: Vec<(usize, usize)> = (0..repeats)
        .flat_map(|r| (0..folds).map(move |f| (r, f)))
        .collect();
    let per_cell: Vec<Result<(f64, Vec<Vec<usize>>), EvalError>> = cells
        .par_iter()
        .map(|&(repeat, fold)| {
            let assignment = &assignments[repeat];
            let train_idx: Vec<usize> = (0..labels.len())
                .filter(|&i| assignment[i] != fold)
                .collect();
            let test_idx: Vec<usize> = (0..labels.len())
                .filter(|&i| assignment[i] == fold)
                .collect();
            let train = tensor.select(Axis(0), &train_idx);
            let test = tensor.select(Axis(0), &test_idx);
            let (train, test) = pipeline.prepare(&train, &test, FitMode::TrainOnly)?;
            let train_labels: Vec<usize> =
                train_idx.iter().map(|&i| labels[i]).collect();
            let predicted = classify_tensor(&train, &train_labels, &test, dataset.n_classes, 1)?;
            let mut confusion = vec![vec![0usize; dataset.n_classes]; dataset.n_classes];
            let mut correct = 0usize;
            for (&example, &guess) in test_idx.iter().zip(&predicted) {
                confusion[labels[example]][guess] += 1;
                if labels[example] == guess {
                    correct += 1;
                }
            }
            Ok((correct as f64 / test_idx.len() as f64, confusion))
        })
        .collect();

    let mut accuracies = Vec::with_capacity(per_cell.len());
    let mut confusion = vec![vec![0usize; dataset.n_classes]; dataset.n_classes];
    for cell in per_cell {
        let (accuracy, cell_confusion) = cell?;
        accuracies.push(accuracy);
        for (row, cell_row) in confusion.iter_mut().zip(&cell_confusion) {
            for (count, &extra) in row.iter_mut().zip(cell_row) {
                *count += extra;
            }
        }
    }

    let receiver = dataset.examples[0].receiver_id.clone();
    EvalReport::from_accuracies(
        receiver.clone(),
        receiver,
        accuracies,
        confusion,
        derive_seed(seed, &[purpose::BOOTSTRAP]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::LabeledExample;
    use ndarray::Array2;
    use rand_distr::StandardNormal;

    fn synthetic(
        n_classes: usize,
        per_class: usize,
        shape: (usize, usize),
        separation: f64,
        noise: f64,
        seed: u64,
    ) -> LabeledDataset {
        let mut rng = substream(seed, &[7070]);
        let mut examples = Vec::new();
        for class in 0..n_classes {
            for _ in 0..per_class {
                let features = Array2::from_shape_fn(shape, |_| {
                    1.0 + separation * class as f64
                        + noise * rng.sample::<f64, _>(StandardNormal)
                });
                examples.push(LabeledExample {
                    features,
                    label: class,
                    receiver_id: "synthetic".into(),
                });
            }
        }
        LabeledDataset {
            examples,
            n_classes,
        }
    }

    #[test]
    fn produces_one_accuracy_per_repeat_and_fold() {
        let dataset = synthetic(3, 10, (4, 3), 1.0, 0.01, 1);
        let report = repeated_stratified_cv(&dataset, 5, 20, FeaturePipeline::Raw, 9).unwrap();
        assert_eq!(report.accuracies.len(), 100);
        // 20 repeats x 30 examples predicted once each.
        let total: usize = report.confusion.iter().flatten().sum();
        assert_eq!(total, 600);
    }

    #[test]
    fn separable_classes_score_perfectly_with_a_collapsed_interval() {
        let dataset = synthetic(3, 8, (4, 3), 1.0, 0.01, 2);
        let report = repeated_stratified_cv(&dataset, 4, 3, FeaturePipeline::Raw, 10).unwrap();
        assert_eq!(report.mean, 1.0);
        assert_eq!(report.std, 0.0);
        assert!(report.ci_degenerate);
        assert_eq!((report.ci_lo, report.ci_hi), (1.0, 1.0));
        for (class, row) in report.confusion.iter().enumerate() {
            for (guess, &count) in row.iter().enumerate() {
                assert_eq!(count, if class == guess { 24 } else { 0 });
            }
        }
    }

    #[test]
    fn label_free_features_score_at_chance() {
        // Features carry no class signal, so 4-class accuracy sits at 1/4.
        let dataset = synthetic(4, 60, (2, 3), 0.0, 1.0, 3);
        let report = repeated_stratified_cv(&dataset, 5, 10, FeaturePipeline::Raw, 11).unwrap();
        assert!(
            (report.mean - 0.25).abs() < 0.05,
            "chance-level mean {}",
            report.mean
        );
        assert!(report.ci_lo <= report.mean && report.mean <= report.ci_hi);
    }

    #[test]
    fn fold_assignment_is_a_balanced_partition() {
        let labels: Vec<usize> = [vec![0usize; 13], vec![1usize; 9], vec![2usize; 17]].concat();
        let mut rng = substream(4, &[1]);
        let assignment = stratified_folds(&labels, 4, &mut rng);
        assert_eq!(assignment.len(), labels.len());
        for n_class in 0..3 {
            let mut per_fold = [0usize; 4];
            for (i, &label) in labels.iter().enumerate() {
                if label == n_class {
                    assert!(assignment[i] < 4);
                    per_fold[assignment[i]] += 1;
                }
            }
            let lo = per_fold.iter().min().unwrap();
            let hi = per_fold.iter().max().unwrap();
            assert!(hi - lo <= 1, "class {n_class} fold counts {per_fold:?}");
        }
    }

    #[test]
    fn rejects_classes_smaller_than_the_fold_count() {
        let dataset = synthetic(2, 3, (2, 2), 1.0, 0.01, 5);
        let err = repeated_stratified_cv(&dataset, 4, 1, FeaturePipeline::Raw, 12).unwrap_err();
        assert!(matches!(
            err,
            EvalError::ClassSmallerThanFolds {
                class: 0,
                count: 3,
                folds: 4
            }
        ));
        let err = repeated_stratified_cv(&dataset, 1, 1, FeaturePipeline::Raw, 12).unwrap_err();
        assert!(matches!(err, EvalError::BadCvShape { .. }));
    }

    #[test]
    fn identical_seeds_reproduce_the_report_exactly() {
        let dataset = synthetic(3, 12, (3, 4), 0.3, 0.3, 6);
        let a = repeated_stratified_cv(&dataset, 3, 4, FeaturePipeline::L1ZscoreFeature, 13).unwrap();
        let b = repeated_stratified_cv(&dataset, 3, 4, FeaturePipeline::L1ZscoreFeature, 13).unwrap();
        assert_eq!(a, b);
        let c = repeated_stratified_cv(&dataset, 3, 4, FeaturePipeline::L1ZscoreFeature, 14).unwrap();
        assert!(a.accuracies != c.accuracies || a.ci_lo != c.ci_lo);
    }
}
