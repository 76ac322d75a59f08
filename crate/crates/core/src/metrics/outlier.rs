//! Mahalanobis outlier filtering for heavy-tailed reporters.
//!
//! Some receivers emit occasional frames whose noise is an order of
//! magnitude above their own baseline; a handful of such frames dominates
//! every fourth-moment statistic. Each frame's amplitude vector is scored
//! by its Mahalanobis distance to the series mean and frames beyond the
//! threshold are dropped.

use nalgebra::{Cholesky, DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::MetricsError;
use crate::frame::CsiSeries;

/// Distance cutoff covering a given fraction of clean frames.
///
/// Under a Gaussian model the squared distance of a `dim`-tone amplitude
/// vector is chi-squared with `dim` degrees of freedom; this returns the
/// distance (not squared) below which a `coverage` fraction (strictly
/// between 0 and 1, e.g. `0.999`) of clean frames fall.
pub fn chi_squared_distance_threshold(dim: usize, coverage: f64) -> Result<f64, MetricsError> {
    if dim == 0 {
        return Err(MetricsError::EmptyDimension);
    }
    if !(coverage.is_finite() && 0.0 < coverage && coverage < 1.0) {
        return Err(MetricsError::BadCoverage { value: coverage });
    }
    let dist = ChiSquared::new(dim as f64).expect("positive degrees of freedom");
    Ok(dist.inverse_cdf(coverage).sqrt())
}

/// Drop frames whose amplitude vector sits beyond `threshold` Mahalanobis
/// distance from the series mean. Returns the kept series and the number of
/// frames removed.
///
/// The covariance is estimated from the full series (outliers included) and
/// regularized by `1e-6 * trace / K` on the diagonal. An infinite threshold
/// keeps everything; removing every frame is an error because an empty
/// series is not representable.
pub fn mahalanobis_filter(
    series: &CsiSeries,
    threshold: f64,
) -> Result<(CsiSeries, usize), MetricsError> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(MetricsError::BadThreshold { value: threshold });
    }
    series.validate()?;
    let k = series.grid().expect("validated series has a grid").len();
    let n = series.len();
    if n < k + 1 {
        return Err(MetricsError::TooFewSamples { need: k + 1, got: n });
    }

    let amps: Vec<DVector<f64>> = series
        .frames
        .iter()
        .map(|f| DVector::from_vec(f.amplitudes()))
        .collect();
    let mean = amps.iter().fold(DVector::zeros(k), |acc, v| acc + v) / n as f64;
    let mut cov = DMatrix::zeros(k, k);
    for v in &amps {
        let d = v - &mean;
        cov += &d * d.transpose();
    }
    cov /= (n - 1) as f64;
    let ridge = 1e-6 * cov.trace() / k as f64;
    for i in 0..k {
        cov[(i, i)] += ridge;
    }
    let chol = Cholesky::new(cov).ok_or(MetricsError::SingularCovariance)?;

    let mut kept = Vec::with_capacity(n);
    let mut removed = 0usize;
    for (frame, v) in series.frames.iter().zip(&amps) {
        let d = v - &mean;
        let dist = chol.solve(&d).dot(&d).max(0.0).sqrt();
        if dist <= threshold {
            kept.push(frame.clone());
        } else {
            removed += 1;
        }
    }
    let mut out = series.with_frames(kept)?;
    out.meta
        .insert("outlier_filter".into(), format!("mahalanobis:{threshold}"));
    Ok((out, removed))
}
