//! Bias-corrected and accelerated bootstrap intervals for the mean.
//!
//! Resamples the fold accuracies with replacement, then adjusts the
//! percentile endpoints for median bias (z0, from the fraction of resample
//! means below the observed mean) and skew (acceleration, from the
//! jackknife third moment). With no bias and no skew the interval reduces
//! to the plain percentile interval.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use super::EvalError;
use crate::rng::{purpose, substream};
use crate::util::quantile_sorted;

/// A two-sided bootstrap confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BcaInterval {
    /// Lower endpoint.
    pub lo: f64,
    /// Upper endpoint.
    pub hi: f64,
    /// True when the input had no spread and the interval collapsed to the
    /// mean rather than being estimated.
    pub degenerate: bool,
}

/// BCa interval for the mean of `values` at the given percentile `level`
/// (e.g. `(0.5, 99.5)` for a nominal 99% interval).
pub fn bootstrap_bca(
    values: &[f64],
    n_boot: usize,
    level: (f64, f64),
    seed: u64,
) -> Result<BcaInterval, EvalError> {
    let k = values.len();
    if k < 10 {
        return Err(EvalError::TooFewValues { need: 10, got: k });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::BadParam {
            name: "values",
            detail: "non-finite accuracy value".into(),
        });
    }
    if n_boot < 100 {
        return Err(EvalError::BadParam {
            name: "n_boot",
            detail: format!("{n_boot} resamples is too few to estimate tail percentiles"),
        });
    }
    let (p_lo, p_hi) = level;
    if !(p_lo.is_finite() && p_hi.is_finite() && 0.0 < p_lo && p_lo < p_hi && p_hi < 100.0) {
        return Err(EvalError::BadLevel { lo: p_lo, hi: p_hi });
    }

    let mean = values.iter().sum::<f64>() / k as f64;
    let spread = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if spread.1 - spread.0 <= 1e-12 * mean.abs().max(1.0) {
        return Ok(BcaInterval {
            lo: mean,
            hi: mean,
            degenerate: true,
        });
    }

    // Bootstrap distribution of the mean.
    let mut rng = substream(seed, &[purpose::BOOTSTRAP]);
    let mut boot_means = Vec::with_capacity(n_boot);
    for _ in 0..n_boot {
        let sum: f64 = (0..k).map(|_| values[rng.random_range(0..k)]).sum();
        boot_means.push(sum / k as f64);
    }

    // Median-bias correction.
    let below = boot_means.iter().filter(|&&m| m < mean).count();
    let frac = (below as f64 / n_boot as f64)
        .clamp(1.0 / (n_boot as f64 + 1.0), n_boot as f64 / (n_boot as f64 + 1.0));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let z0 = normal.inverse_cdf(frac);

    // Acceleration from the jackknife skewness of leave-one-out means.
    let total: f64 = values.iter().sum();
    let loo: Vec<f64> = values.iter().map(|&v| (total - v) / (k as f64 - 1.0)).collect();
    let loo_mean = loo.iter().sum::<f64>() / k as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for &m in &loo {
        let d = loo_mean - m;
        num += d * d * d;
        den += d * d;
    }
    let accel = if den > 0.0 { num / (6.0 * den.powf(1.5)) } else { 0.0 };

    boot_means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let adjusted = |percentile: f64| -> f64 {
        let z = normal.inverse_cdf(percentile / 100.0);
        let shifted = z0 + z;
        let denom = 1.0 - accel * shifted;
        let p = if denom <= 0.0 {
            // Pathological skew pushes the endpoint to the distribution edge.
            if shifted >= 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            normal.cdf(z0 + shifted / denom)
        };
        quantile_sorted(&boot_means, p)
    };

    Ok(BcaInterval {
        lo: adjusted(p_lo),
        hi: adjusted(p_hi),
        degenerate: false,
    })
}
