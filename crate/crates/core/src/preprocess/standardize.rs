//! Dataset standardization: min-max or z-score scaling at four different
//! scopes, fitted on one partition and applied to any compatible tensor.
//!
//! Datasets are `examples x time x tone` tensors. The fit-then-apply split
//! exists so evaluation code can prove it never leaks test statistics into
//! training-time scaling.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::PreprocessError;

/// The statistic family used for scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardStat {
    /// `(x - min) / (max - min)`.
    Minmax,
    /// `(x - mean) / std` (sample std).
    Zscore,
}

/// Which slice of the dataset shares one set of statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardScope {
    /// One statistic pair for the whole fit partition.
    Global,
    /// Statistics recomputed per example at apply time (stateless).
    Window,
    /// One statistic pair per tone.
    Subcarrier,
    /// One statistic pair per (time, tone) cell.
    Feature,
}

/// A standardization recipe: statistic family plus scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardizationSpec {
    pub stat: StandardStat,
    pub scope: StandardScope,
}

#[derive(Debug, Clone)]
enum State {
    Scalar {
        shift: f64,
        scale: f64,
    },
    PerTone {
        shift: Vec<f64>,
        scale: Vec<f64>,
    },
    PerCell {
        shift: Array2<f64>,
        scale: Array2<f64>,
    },
    /// Window scope: recomputed per example at apply time.
    Stateless,
}

/// A standardizer fitted on one partition.
#[derive(Debug, Clone)]
pub struct FittedStandardizer {
    spec: StandardizationSpec,
    time_len: usize,
    tone_len: usize,
    state: State,
    degenerate: usize,
}

/// Compute `(shift, scale)` for a stream of values; degenerate slices
/// (constant input) get unit scale so apply maps them to zero and the
/// inverse still restores them.
fn stats(values: impl Iterator<Item = f64> + Clone, stat: StandardStat) -> (f64, f64, bool) {
    match stat {
        StandardStat::Minmax => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for v in values {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > lo {
                (lo, hi - lo, false)
            } else {
                (lo, 1.0, true)
            }
        }
        StandardStat::Zscore => {
            let mut n = 0usize;
            let mut sum = 0.0;
            for v in values.clone() {
                n += 1;
                sum += v;
            }
            let mean = sum / n as f64;
            let var: f64 = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
            if var > 0.0 {
                (mean, var.sqrt(), false)
            } else {
                (mean, 1.0, true)
            }
        }
    }
}

/// Fit a standardizer on the examples selected by `fit_idx`.
pub fn fit_standardizer(
    data: &Array3<f64>,
    fit_idx: &[usize],
    spec: StandardizationSpec,
) -> Result<FittedStandardizer, PreprocessError> {
    let (n, t, k) = data.dim();
    if fit_idx.is_empty() || fit_idx.iter().any(|&i| i >= n) {
        return Err(PreprocessError::BadFitSelection);
    }
    let mut degenerate = 0usize;
    let state = match spec.scope {
        StandardScope::Window => State::Stateless,
        StandardScope::Global => {
            let values = fit_idx
                .iter()
                .flat_map(|&e| data.index_axis(ndarray::Axis(0), e).into_iter().copied())
                .collect::<Vec<f64>>();
            let (shift, scale, deg) = stats(values.iter().copied(), spec.stat);
            degenerate += usize::from(deg);
            State::Scalar { shift, scale }
        }
        StandardScope::Subcarrier => {
            let mut shift = Vec::with_capacity(k);
            let mut scale = Vec::with_capacity(k);
            for tone in 0..k {
                let values: Vec<f64> = fit_idx
                    .iter()
                    .flat_map(|&e| (0..t).map(move |ti| (e, ti)))
                    .map(|(e, ti)| data[(e, ti, tone)])
                    .collect();
                let (sh, sc, deg) = stats(values.iter().copied(), spec.stat);
                degenerate += usize::from(deg);
                shift.push(sh);
                scale.push(sc);
            }
            State::PerTone { shift, scale }
        }
        StandardScope::Feature => {
            let mut shift = Array2::zeros((t, k));
            let mut scale = Array2::zeros((t, k));
            for ti in 0..t {
                for tone in 0..k {
                    let values: Vec<f64> =
                        fit_idx.iter().map(|&e| data[(e, ti, tone)]).collect();
                    let (sh, sc, deg) = stats(values.iter().copied(), spec.stat);
                    degenerate += usize::from(deg);
                    shift[(ti, tone)] = sh;
                    scale[(ti, tone)] = sc;
                }
            }
            State::PerCell { shift, scale }
        }
    };
    Ok(FittedStandardizer {
        spec,
        time_len: t,
        tone_len: k,
        state,
        degenerate,
    })
}

impl FittedStandardizer {
    /// The recipe this standardizer was fitted with.
    pub fn spec(&self) -> StandardizationSpec {
        self.spec
    }

    /// Number of degenerate (constant) slices found during fitting; those
    /// slices are shifted to zero with unit scale.
    pub fn degenerate_slices(&self) -> usize {
        self.degenerate
    }

    fn check_shape(&self, data: &Array3<f64>) -> Result<(), PreprocessError> {
        let (_, t, k) = data.dim();
        if (t, k) != (self.time_len, self.tone_len) {
            return Err(PreprocessError::ShapeMismatch {
                expected: (self.time_len, self.tone_len),
                got: (t, k),
            });
        }
        Ok(())
    }

    /// Standardize a dataset with the fitted statistics.
    pub fn apply(&self, data: &Array3<f64>) -> Result<Array3<f64>, PreprocessError> {
        self.check_shape(data)?;
        let mut out = data.clone();
        match &self.state {
            State::Scalar { shift, scale } => {
                out.mapv_inplace(|v| (v - shift) / scale);
            }
            State::PerTone { shift, scale } => {
                for ((_, _, tone), v) in out.indexed_iter_mut() {
                    *v = (*v - shift[tone]) / scale[tone];
                }
            }
            State::PerCell { shift, scale } => {
                for ((_, ti, tone), v) in out.indexed_iter_mut() {
                    *v = (*v - shift[(ti, tone)]) / scale[(ti, tone)];
                }
            }
            State::Stateless => {
                let n = data.dim().0;
                for e in 0..n {
                    let window = data.index_axis(ndarray::Axis(0), e);
                    let (shift, scale, _) = stats(window.iter().copied(), self.spec.stat);
                    let mut slice = out.index_axis_mut(ndarray::Axis(0), e);
                    slice.mapv_inplace(|v| (v - shift) / scale);
                }
            }
        }
        Ok(out)
    }

    /// Undo [`apply`](Self::apply). Window scope keeps no state and cannot
    /// be inverted.
    pub fn inverse(&self, data: &Array3<f64>) -> Result<Array3<f64>, PreprocessError> {
        self.check_shape(data)?;
        let mut out = data.clone();
        match &self.state {
            State::Scalar { shift, scale } => {
                out.mapv_inplace(|v| v * scale + shift);
            }
            State::PerTone { shift, scale } => {
                for ((_, _, tone), v) in out.indexed_iter_mut() {
                    *v = *v * scale[tone] + shift[tone];
                }
            }
            State::PerCell { shift, scale } => {
                for ((_, ti, tone), v) in out.indexed_iter_mut() {
                    *v = *v * scale[(ti, tone)] + shift[(ti, tone)];
                }
            }
            State::Stateless => return Err(PreprocessError::NoInverse),
        }
        Ok(out)
    }
}
