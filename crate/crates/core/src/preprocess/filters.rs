//! Per-tone time-domain amplitude filters: median, Savitzky-Golay and
//! Hampel. Filters act on the amplitude track of each tone across frames and
//! leave phases untouched (robust amplitude denoising is their job; phase
//! structure is handled by detrending and equalization).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::frame::CsiSeries;
use crate::Complex64;

/// Supported time-domain filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "filter", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterKind {
    /// Sliding median of the amplitudes.
    Median { window: usize },
    /// Savitzky-Golay local polynomial smoothing of the amplitudes.
    SavitzkyGolay { window: usize, poly: usize },
    /// Hampel outlier repair: replace amplitudes further than
    /// `nsigma * 1.4826 * MAD` from the window median by the median.
    Hampel { window: usize, nsigma: f64 },
}

fn check_window(window: usize) -> Result<(), PreprocessError> {
    if window < 3 || window % 2 == 0 {
        return Err(PreprocessError::BadWindow { window });
    }
    Ok(())
}

/// Apply a time-domain filter to every tone of a series.
///
/// Frames are treated as equally spaced in sample index; sequence gaps are
/// not re-interpolated.
pub fn filter_series(series: &CsiSeries, kind: &FilterKind) -> Result<CsiSeries, PreprocessError> {
    if series.is_empty() {
        return Err(PreprocessError::EmptySeries);
    }
    match *kind {
        FilterKind::Median { window } => check_window(window)?,
        FilterKind::SavitzkyGolay { window, poly } => {
            check_window(window)?;
            if poly >= window {
                return Err(PreprocessError::BadPolyOrder { poly, window });
            }
        }
        FilterKind::Hampel { window, nsigma } => {
            check_window(window)?;
            if !(nsigma.is_finite() && nsigma > 0.0) {
                return Err(PreprocessError::BadParam {
                    name: "nsigma",
                    value: nsigma,
                });
            }
        }
    }

    let n = series.len();
    let k = series.grid().expect("non-empty").len();
    // Column-major amplitude tracks: one Vec per tone.
    let mut tracks: Vec<Vec<f64>> = vec![Vec::with_capacity(n); k];
    for frame in &series.frames {
        for (tone, z) in frame.csi.iter().enumerate() {
            tracks[tone].push(z.norm());
        }
    }
    let filtered: Vec<Vec<f64>> = tracks
        .iter()
        .map(|track| match *kind {
            FilterKind::Median { window } => median_filter(track, window),
            FilterKind::SavitzkyGolay { window, poly } => savgol_filter(track, window, poly),
            FilterKind::Hampel { window, nsigma } => hampel_filter(track, window, nsigma),
        })
        .collect();

    let mut frames = series.frames.clone();
    for (t, frame) in frames.iter_mut().enumerate() {
        for (tone, z) in frame.csi.iter_mut().enumerate() {
            let old_amp = z.norm();
            let new_amp = filtered[tone][t];
            *z = if old_amp > 0.0 {
                *z * (new_amp / old_amp)
            } else {
                Complex64::new(new_amp, 0.0)
            };
        }
    }
    let mut out = series.with_frames(frames)?;
    out.meta.insert(
        "filter".into(),
        match kind {
            FilterKind::Median { window } => format!("median:{window}"),
            FilterKind::SavitzkyGolay { window, poly } => format!("savgol:{window}:{poly}"),
            FilterKind::Hampel { window, nsigma } => format!("hampel:{window}:{nsigma}"),
        },
    );
    Ok(out)
}

fn window_bounds(t: usize, n: usize, window: usize) -> (usize, usize) {
    let h = window / 2;
    (t.saturating_sub(h), (t + h).min(n - 1))
}

fn median_of(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn median_filter(track: &[f64], window: usize) -> Vec<f64> {
    let n = track.len();
    (0..n)
        .map(|t| {
            let (lo, hi) = window_bounds(t, n, window);
            median_of(track[lo..=hi].to_vec())
        })
        .collect()
}

fn hampel_filter(track: &[f64], window: usize, nsigma: f64) -> Vec<f64> {
    let n = track.len();
    (0..n)
        .map(|t| {
            let (lo, hi) = window_bounds(t, n, window);
            let med = median_of(track[lo..=hi].to_vec());
            let mad = median_of(track[lo..=hi].iter().map(|v| (v - med).abs()).collect());
            let sigma = 1.4826 * mad;
            if (track[t] - med).abs() > nsigma * sigma {
                med
            } else {
                track[t]
            }
        })
        .collect()
}

/// Local least-squares polynomial fit evaluated at the centre sample; the
/// window is truncated near the edges and the fit re-solved there.
fn savgol_filter(track: &[f64], window: usize, poly: usize) -> Vec<f64> {
    let n = track.len();
    (0..n)
        .map(|t| {
            let (lo, hi) = window_bounds(t, n, window);
            let len = hi - lo + 1;
            let order = poly.min(len - 1);
            // Design matrix in local coordinates centred on t.
            let design = DMatrix::from_fn(len, order + 1, |r, c| {
                ((lo + r) as f64 - t as f64).powi(c as i32)
            });
            let y = DVector::from_iterator(len, track[lo..=hi].iter().copied());
            let coeffs = (design.transpose() * &design)
                .lu()
                .solve(&(design.transpose() * y))
                .expect("normal equations are invertible for distinct samples");
            coeffs[0]
        })
        .collect()
}
