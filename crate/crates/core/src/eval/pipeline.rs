//! Feature preprocessing variants for the evaluation experiments.
//!
//! The variants mirror the rescue story: `Raw` feeds amplitudes straight to
//! the classifier, `L1` divides every packet row by its own mean amplitude
//! (removing any per-packet gain exactly), `ZscoreFeature` standardizes
//! each (time, tone) cell, and `L1ZscoreFeature` chains both.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::preprocess::{fit_standardizer, StandardScope, StandardStat, StandardizationSpec};

/// Where standardization statistics come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// Fit on the training partition only and apply everywhere — the
    /// leak-free protocol used inside cross validation.
    TrainOnly,
    /// Fit separately on each partition. This deliberately standardizes
    /// test data on test statistics, replicating the published cross-device
    /// protocol where each device's capture is standardized on its own.
    PerSet,
}

/// A named preprocessing variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturePipeline {
    /// Amplitudes as reported.
    Raw,
    /// Per-packet mean-amplitude normalization.
    L1,
    /// Per-(time, tone) cell z-scoring.
    ZscoreFeature,
    /// L1 first, then cell z-scoring.
    L1ZscoreFeature,
}

impl FeaturePipeline {
    /// Stable name used in reports and config files.
    pub fn name(&self) -> &'static str {
        match self {
            FeaturePipeline::Raw => "raw",
            FeaturePipeline::L1 => "l1",
            FeaturePipeline::ZscoreFeature => "zscore_feature",
            FeaturePipeline::L1ZscoreFeature => "l1_zscore_feature",
        }
    }

    /// All variants, in rescue order.
    pub fn all() -> [FeaturePipeline; 4] {
        [
            FeaturePipeline::Raw,
            FeaturePipeline::L1,
            FeaturePipeline::ZscoreFeature,
            FeaturePipeline::L1ZscoreFeature,
        ]
    }

    /// Inverse of [`FeaturePipeline::name`].
    pub fn from_name(name: &str) -> Option<FeaturePipeline> {
        FeaturePipeline::all().into_iter().find(|p| p.name() == name)
    }

    /// Transform train and test tensors (example x time x tone).
    pub fn prepare(
        &self,
        train: &Array3<f64>,
        test: &Array3<f64>,
        mode: FitMode,
    ) -> Result<(Array3<f64>, Array3<f64>), EvalError> {
        let (l1, zscore) = match self {
            FeaturePipeline::Raw => (false, false),
            FeaturePipeline::L1 => (true, false),
            FeaturePipeline::ZscoreFeature => (false, true),
            FeaturePipeline::L1ZscoreFeature => (true, true),
        };
        let mut train = train.clone();
        let mut test = test.clone();
        if l1 {
            l1_rows(&mut train)?;
            l1_rows(&mut test)?;
        }
        if zscore {
            let spec = StandardizationSpec {
                stat: StandardStat::Zscore,
                scope: StandardScope::Feature,
            };
            let train_idx: Vec<usize> = (0..train.dim().0).collect();
            let fitted = fit_standardizer(&train, &train_idx, spec)?;
            train = fitted.apply(&train)?;
            test = match mode {
                FitMode::TrainOnly => fitted.apply(&test)?,
                FitMode::PerSet => {
                    let test_idx: Vec<usize> = (0..test.dim().0).collect();
                    fit_standardizer(&test, &test_idx, spec)?.apply(&test)?
                }
            };
        }
        Ok((train, test))
    }
}

/// Divide every (example, time) row by its mean across tones.
fn l1_rows(data: &mut Array3<f64>) -> Result<(), EvalError> {
    let (n, t, k) = data.dim();
    for e in 0..n {
        for row in 0..t {
            let mean = (0..k).map(|c| data[(e, row, c)].abs()).sum::<f64>() / k as f64;
            if mean <= 0.0 || !mean.is_finite() {
                return Err(EvalError::DegenerateFeatureRow { example: e, row });
            }
            for c in 0..k {
                data[(e, row, c)] /= mean;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    fn random_tensor(n: usize, t: usize, k: usize, seed: u64) -> Array3<f64> {
        let mut rng = substream(seed, &[99]);
        let mut data = Array3::zeros((n, t, k));
        for v in data.iter_mut() {
            *v = rng.random_range(0.5..2.0);
        }
        data
    }

    #[test]
    fn l1_rows_have_unit_mean_and_kill_per_packet_gain() {
        let base = random_tensor(3, 8, 5, 1);
        let mut scaled = base.clone();
        let mut rng = substream(2, &[99]);
        for e in 0..3 {
            for row in 0..8 {
                let g: f64 = rng.random_range(0.25..4.0);
                for c in 0..5 {
                    scaled[(e, row, c)] *= g;
                }
            }
        }
        let (a, _) = FeaturePipeline::L1
            .prepare(&base, &base, FitMode::TrainOnly)
            .unwrap();
        let (b, _) = FeaturePipeline::L1
            .prepare(&scaled, &scaled, FitMode::TrainOnly)
            .unwrap();
        for e in 0..3 {
            for row in 0..8 {
                let mean: f64 = (0..5).map(|c| a[(e, row, c)]).sum::<f64>() / 5.0;
                assert!((mean - 1.0).abs() < 1e-12);
            }
        }
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12, "gain survived l1: {x} vs {y}");
        }
    }

    #[test]
    fn train_only_fit_differs_from_per_set_fit_on_shifted_test_data() {
        // Leak detector: when the test partition is shifted, standardizing
        // it on its own statistics erases the shift, while the leak-free
        // protocol preserves it.
        let train = random_tensor(6, 4, 3, 3);
        let mut test = random_tensor(6, 4, 3, 4);
        test += 5.0;
        let (_, honest) = FeaturePipeline::ZscoreFeature
            .prepare(&train, &test, FitMode::TrainOnly)
            .unwrap();
        let (_, leaky) = FeaturePipeline::ZscoreFeature
            .prepare(&train, &test, FitMode::PerSet)
            .unwrap();
        let max_diff = honest
            .iter()
            .zip(leaky.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_diff > 1.0, "refitting on test changed nothing");
    }

    #[test]
    fn zscore_feature_standardizes_each_cell_of_the_train_set() {
        let train = random_tensor(40, 3, 2, 5);
        let (out, _) = FeaturePipeline::ZscoreFeature
            .prepare(&train, &train, FitMode::TrainOnly)
            .unwrap();
        for t in 0..3 {
            for k in 0..2 {
                let col: Vec<f64> = (0..40).map(|e| out[(e, t, k)]).collect();
                let mean = col.iter().sum::<f64>() / 40.0;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 39.0;
                assert!(mean.abs() < 1e-9, "cell mean {mean}");
                assert!((var - 1.0).abs() < 1e-9, "cell var {var}");
            }
        }
    }

    #[test]
    fn zero_rows_are_rejected() {
        let mut data = random_tensor(2, 3, 4, 6);
        for c in 0..4 {
            data[(1, 2, c)] = 0.0;
        }
        let err = FeaturePipeline::L1
            .prepare(&data, &data, FitMode::TrainOnly)
            .unwrap_err();
        assert!(matches!(
            err,
            EvalError::DegenerateFeatureRow { example: 1, row: 2 }
        ));
    }

    #[test]
    fn names_are_stable() {
        let names: Vec<&str> = FeaturePipeline::all().iter().map(|p| p.name()).collect();
        assert_eq!(names, ["raw", "l1", "zscore_feature", "l1_zscore_feature"]);
    }
}
