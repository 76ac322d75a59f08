//! Mutual information between an injected parameter and the reported CSI.
//!
//! Kraskov k-nearest-neighbor estimator (algorithm 1): the k-th neighbor
//! distance in the joint space under the max-norm sets a radius per sample,
//! marginal neighbors strictly inside that radius are counted, and the
//! digamma identity turns the counts into nats. A tiny seeded jitter
//! (1e-10 of each dimension's scale) breaks ties from quantized reports
//! without moving the estimate.

use rand::Rng;
use rayon::prelude::*;
use statrs::function::gamma::digamma;

use super::MetricsError;
use crate::rng::{purpose, substream};

/// Scale factor for the duplicate-breaking jitter.
const JITTER_SCALE: f64 = 1e-10;
/// Minimum paired samples for a meaningful estimate.
const MIN_SAMPLES: usize = 100;

/// Estimate I(x; y) in nats with the k-nearest-neighbor method.
///
/// `x` holds the scalar parameter samples; `y` holds the paired responses,
/// each a vector of one or more coordinates (e.g. `[re, im]` of a reported
/// tone). The estimate is clamped at 0: independence can otherwise come out
/// a hair negative through estimator noise.
pub fn mutual_information_knn(
    x: &[f64],
    y: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<f64, MetricsError> {
    let n = x.len();
    if y.len() != n {
        return Err(MetricsError::MismatchedLengths { x: n, y: y.len() });
    }
    if n < MIN_SAMPLES {
        return Err(MetricsError::TooFewSamples {
            need: MIN_SAMPLES,
            got: n,
        });
    }
    if k == 0 || k >= n {
        return Err(MetricsError::BadNeighborCount { k, n });
    }
    let dim = y[0].len();
    if dim == 0 {
        return Err(MetricsError::EmptyDimension);
    }
    for (i, row) in y.iter().enumerate() {
        if row.len() != dim {
            return Err(MetricsError::RaggedSamples {
                index: i,
                expected: dim,
                got: row.len(),
            });
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite { what: "x" });
    }
    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite { what: "y" });
    }

    // Jitter each dimension by 1e-10 of its spread so exact duplicates
    // (quantized hardware reports) cannot produce zero radii.
    let jittered_x = jitter_dim(x, seed, 0);
    let mut jittered_y = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let col: Vec<f64> = y.iter().map(|row| row[d]).collect();
        let jcol = jitter_dim(&col, seed, 1 + d as u64);
        for (i, v) in jcol.into_iter().enumerate() {
            jittered_y[i][d] = v;
        }
    }

    let y_dist = |a: usize, b: usize| -> f64 {
        jittered_y[a]
            .iter()
            .zip(&jittered_y[b])
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    };

    let digamma_sum: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            // k-th smallest joint distance to any other sample.
            let mut joint: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (jittered_x[i] - jittered_x[j]).abs().max(y_dist(i, j)))
                .collect();
            let (_, eps, _) = joint.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
            let eps = *eps;
            let mut nx = 0usize;
            let mut ny = 0usize;
            for j in 0..n {
                if j == i {
                    continue;
                }
                if (jittered_x[i] - jittered_x[j]).abs() < eps {
                    nx += 1;
                }
                if y_dist(i, j) < eps {
                    ny += 1;
                }
            }
            digamma((nx + 1) as f64) + digamma((ny + 1) as f64)
        })
        .sum();

    let estimate = digamma(k as f64) + digamma(n as f64) - digamma_sum / n as f64;
    Ok(estimate.max(0.0))
}

/// Add uniform jitter of `JITTER_SCALE` times the dimension's spread.
fn jitter_dim(values: &[f64], seed: u64, dim: u64) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = (hi - lo).max(1.0) * JITTER_SCALE;
    let mut rng = substream(seed, &[purpose::JITTER, dim]);
    values
        .iter()
        .map(|&v| v + rng.random_range(-scale..=scale))
        .collect()
}
