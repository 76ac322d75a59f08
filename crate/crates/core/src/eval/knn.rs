//! Nearest-neighbor classification over flattened feature tensors.

use ndarray::Array3;
use rayon::prelude::*;

use super::{EvalError, LabeledDataset};

/// Classify `test` against `train` with a k-nearest-neighbor vote.
///
/// Distances are Euclidean over the flattened (time x tone) features. With
/// `k = 1` the prediction is the nearest training example's label, equal
/// distances resolved in favor of the lower training index. With larger
/// `k` the plurality wins; vote ties go to the tied class whose best
/// representative is nearest.
pub fn knn_classify(
    train: &LabeledDataset,
    test: &LabeledDataset,
    k: usize,
) -> Result<Vec<usize>, EvalError> {
    if train.is_empty() {
        return Err(EvalError::EmptyTrainingSet);
    }
    if !test.is_empty() && train.feature_shape() != test.feature_shape() {
        return Err(EvalError::FeatureShapeMismatch {
            train: train.feature_shape(),
            test: test.feature_shape(),
        });
    }
    classify_tensor(
        &train.feature_tensor(),
        &train.labels(),
        &test.feature_tensor(),
        train.n_classes.max(test.n_classes),
        k,
    )
}

/// Tensor-level classifier shared by the evaluation protocols.
pub(crate) fn classify_tensor(
    train: &Array3<f64>,
    train_labels: &[usize],
    test: &Array3<f64>,
    n_classes: usize,
    k: usize,
) -> Result<Vec<usize>, EvalError> {
    let n_train = train.dim().0;
    if n_train == 0 {
        return Err(EvalError::EmptyTrainingSet);
    }
    if k == 0 || k > n_train {
        return Err(EvalError::BadNeighborCount { k, max: n_train });
    }
    if (train.dim().1, train.dim().2) != (test.dim().1, test.dim().2) {
        return Err(EvalError::FeatureShapeMismatch {
            train: (train.dim().1, train.dim().2),
            test: (test.dim().1, test.dim().2),
        });
    }
    let train_flat: Vec<&[f64]> = (0..n_train)
        .map(|i| {
            train
                .index_axis(ndarray::Axis(0), i)
                .to_slice()
                .expect("standard-layout tensor")
        })
        .collect();
    let flat_or_owned: Vec<Vec<f64>> = (0..test.dim().0)
        .map(|i| test.index_axis(ndarray::Axis(0), i).iter().copied().collect())
        .collect();

    let predictions = flat_or_owned
        .par_iter()
        .map(|query| {
            let mut scored: Vec<(f64, usize)> = train_flat
                .iter()
                .enumerate()
                .map(|(idx, row)| {
                    let d2: f64 = row
                        .iter()
                        .zip(query.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (d2, idx)
                })
                .collect();
            scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mut votes = vec![0usize; n_classes];
            for &(_, idx) in scored.iter().take(k) {
                votes[train_labels[idx]] += 1;
            }
            let best = *votes.iter().max().expect("at least one class");
            // First neighbor (by rank) whose class holds the top vote count.
            scored
                .iter()
                .take(k)
                .map(|&(_, idx)| train_labels[idx])
                .find(|&label| votes[label] == best)
                .expect("k >= 1")
        })
        .collect();
    Ok(predictions)
}
