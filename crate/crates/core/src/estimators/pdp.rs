//! Delay profiles and time-of-flight differences.
//!
//! A frame's tone vector is carried into the delay domain with a unitary
//! inverse DFT. On the full 20 MHz grid the missing DC tone is interpolated
//! from its neighbours, giving a 57-point spectrum with 56.14 ns bins and a
//! 3.2 us unambiguous range. Decimated report grids are treated as uniform
//! at their median index spacing, which halves the range (1.6 us for the
//! 30-tone pattern) and folds longer delays back in — exactly the aliasing
//! a consumer of such hardware experiences.

use rustfft::FftPlanner;

use super::EstimatorError;
use crate::consts::SUBCARRIER_SPACING_HZ;
use crate::frame::CsiFrame;
use crate::Complex64;

/// Power-delay profile of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProfile {
    /// Delay per bin, seconds (`bin * bin_s`).
    pub delays_s: Vec<f64>,
    /// Power per bin (unitary transform: total power equals tone power).
    pub power: Vec<f64>,
    /// Bin width in seconds.
    pub bin_s: f64,
    /// Unambiguous delay range in seconds.
    pub range_s: f64,
}

/// Compute the power-delay profile of one frame.
pub fn compute_pdp(frame: &CsiFrame) -> Result<DelayProfile, EstimatorError> {
    let indices = frame.grid.indices();
    if indices.len() < 4 {
        return Err(EstimatorError::UnsupportedGrid {
            detail: format!("need at least 4 tones, got {}", indices.len()),
        });
    }
    let gaps: Vec<i32> = indices.windows(2).map(|w| w[1] - w[0]).collect();

    // Contiguous grid with only the DC tone missing: interpolate DC and use
    // the full span.
    let first = indices[0];
    let last = *indices.last().unwrap();
    let contiguous_with_dc_gap = first < 0
        && last > 0
        && gaps.iter().filter(|&&g| g == 2).count() == 1
        && gaps.iter().all(|&g| g == 1 || g == 2)
        && indices.binary_search(&-1).is_ok()
        && indices.binary_search(&1).is_ok();

    let (spectrum, eff_spacing_hz) = if contiguous_with_dc_gap {
        let n = (last - first + 1) as usize;
        let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
        for (pos, &m) in indices.iter().enumerate() {
            spectrum[(m - first) as usize] = frame.csi[pos];
        }
        let below = frame.csi[indices.binary_search(&-1).unwrap()];
        let above = frame.csi[indices.binary_search(&1).unwrap()];
        spectrum[(-first) as usize] = (below + above) * 0.5;
        (spectrum, SUBCARRIER_SPACING_HZ)
    } else {
        // Decimated or irregular grid: treat the reported tones as a uniform
        // grid at the median index gap.
        let mut sorted = gaps.clone();
        sorted.sort_unstable();
        let median_gap = sorted[sorted.len() / 2];
        if median_gap <= 0 {
            return Err(EstimatorError::UnsupportedGrid {
                detail: "non-increasing tone indices".into(),
            });
        }
        (
            frame.csi.clone(),
            f64::from(median_gap) * SUBCARRIER_SPACING_HZ,
        )
    };

    let n = spectrum.len();
    let mut buf = spectrum;
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    let power: Vec<f64> = buf.iter().map(|z| (z * scale).norm_sqr()).collect();
    let bin_s = 1.0 / (n as f64 * eff_spacing_hz);
    let delays_s = (0..n).map(|d| d as f64 * bin_s).collect();
    Ok(DelayProfile {
        delays_s,
        power,
        bin_s,
        range_s: 1.0 / eff_spacing_hz,
    })
}

/// Estimate the delay difference between the two strongest paths.
///
/// Peaks are circular local maxima of the profile at or above
/// `threshold * max_power`; the estimate is the minimal circular bin
/// distance between the two strongest, in seconds. Returns `Ok(None)` when
/// fewer than two qualifying peaks exist (single path, or threshold too
/// high) — the caller may retry with a lower threshold.
pub fn estimate_tof(
    pdp: &DelayProfile,
    threshold: f64,
) -> Result<Option<f64>, EstimatorError> {
    if !(threshold.is_finite() && (0.0..=1.0).contains(&threshold)) {
        return Err(EstimatorError::BadConfig {
            name: "threshold",
            value: threshold,
        });
    }
    let n = pdp.power.len();
    if n < 3 {
        return Err(EstimatorError::UnsupportedGrid {
            detail: format!("delay profile has only {n} bins"),
        });
    }
    let max_power = pdp.power.iter().cloned().fold(0.0, f64::max);
    if max_power <= 0.0 {
        return Ok(None);
    }
    let mut peaks: Vec<(usize, f64)> = (0..n)
        .filter(|&i| {
            let prev = pdp.power[(i + n - 1) % n];
            let next = pdp.power[(i + 1) % n];
            pdp.power[i] > prev && pdp.power[i] >= next
        })
        .map(|i| (i, pdp.power[i]))
        .filter(|&(_, p)| p >= threshold * max_power)
        .collect();
    if peaks.len() < 2 {
        return Ok(None);
    }
    peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let (i, j) = (peaks[0].0, peaks[1].0);
    let d = i.abs_diff(j);
    let circular = d.min(n - d);
    Ok(Some(circular as f64 * pdp.bin_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{multipath_channel, PathComponent};
    use crate::grid::SubcarrierGrid;
    use approx::assert_relative_eq;

    fn frame_from_response(grid: &crate::grid::SharedGrid, csi: Vec<Complex64>) -> CsiFrame {
        CsiFrame::new("rx", 0, 0, 0.0, grid.clone(), csi).unwrap()
    }

    #[test]
    fn full_grid_bins_are_56ns_and_range_is_3200ns() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let chan = multipath_channel(&[PathComponent::from_ns(1.0, 0.0)], &grid).unwrap();
        let pdp = compute_pdp(&frame_from_response(&grid, chan.response().to_vec())).unwrap();
        assert_eq!(pdp.power.len(), 57);
        // Oracle: 1 / (57 * 312.5 kHz) = 56.140... ns.
        assert_relative_eq!(pdp.bin_s, 1.0 / (57.0 * 312_500.0), max_relative = 1e-12);
        assert_relative_eq!(pdp.range_s, 3.2e-6, max_relative = 1e-12);
    }

    #[test]
    fn two_paths_appear_at_their_bins_and_tof_is_their_gap() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let bin_s = 1.0 / (57.0 * 312_500.0);
        let d_bins = 10usize;
        let chan = multipath_channel(
            &[
                PathComponent::from_ns(1.0, 0.0),
                PathComponent::from_ns(0.6, d_bins as f64 * bin_s * 1e9),
            ],
            &grid,
        )
        .unwrap();
        let pdp = compute_pdp(&frame_from_response(&grid, chan.response().to_vec())).unwrap();
        // Both paths dominate their exact bins.
        let argmax = pdp
            .power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 0);
        let tof = estimate_tof(&pdp, 0.1).unwrap().expect("two peaks");
        assert_relative_eq!(tof, d_bins as f64 * bin_s, max_relative = 1e-9);
    }

    #[test]
    fn unitary_transform_preserves_total_power() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let chan = multipath_channel(
            &[
                PathComponent::from_ns(0.9, 40.0),
                PathComponent::from_ns(0.4, 310.0),
            ],
            &grid,
        )
        .unwrap();
        let frame = frame_from_response(&grid, chan.response().to_vec());
        let tone_power = frame.power();
        let pdp = compute_pdp(&frame).unwrap();
        let delay_power: f64 = pdp.power.iter().sum();
        // The DC interpolation adds one synthetic tone, so compare against
        // the completed spectrum: tone power plus the interpolated bin.
        let below = frame.csi[grid.position_of(-1).unwrap()];
        let above = frame.csi[grid.position_of(1).unwrap()];
        let dc = ((below + above) * 0.5).norm_sqr();
        assert_relative_eq!(delay_power, tone_power + dc, max_relative = 1e-9);
    }

    #[test]
    fn single_path_has_no_tof_estimate() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let chan = multipath_channel(&[PathComponent::from_ns(1.0, 500.0)], &grid).unwrap();
        let pdp = compute_pdp(&frame_from_response(&grid, chan.response().to_vec())).unwrap();
        assert_eq!(estimate_tof(&pdp, 0.1).unwrap(), None);
    }

    #[test]
    fn tof_distance_is_circular() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let bin_s = 1.0 / (57.0 * 312_500.0);
        // Second path 3 bins below the wrap point: circular distance to the
        // zero-delay path is 3 bins, not 54.
        let chan = multipath_channel(
            &[
                PathComponent::from_ns(1.0, 0.0),
                PathComponent::from_ns(0.8, 54.0 * bin_s * 1e9),
            ],
            &grid,
        )
        .unwrap();
        let pdp = compute_pdp(&frame_from_response(&grid, chan.response().to_vec())).unwrap();
        let tof = estimate_tof(&pdp, 0.1).unwrap().expect("two peaks");
        assert_relative_eq!(tof, 3.0 * bin_s, max_relative = 1e-9);
    }

    #[test]
    fn decimated_grid_halves_the_unambiguous_range() {
        let grid = SubcarrierGrid::ht20_iwl5300(2.412e9).unwrap();
        let chan = multipath_channel(&[PathComponent::from_ns(1.0, 0.0)], &grid).unwrap();
        let pdp = compute_pdp(&frame_from_response(&grid, chan.response().to_vec())).unwrap();
        assert_eq!(pdp.power.len(), 30);
        assert_relative_eq!(pdp.range_s, 1.6e-6, max_relative = 1e-12);
        assert_relative_eq!(pdp.bin_s, 1.6e-6 / 30.0, max_relative = 1e-12);
    }

    #[test]
    fn threshold_hides_weak_peaks() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let bin_s = 1.0 / (57.0 * 312_500.0);
        let chan = multipath_channel(
            &[
                PathComponent::from_ns(1.0, 0.0),
                PathComponent::from_ns(0.05, 20.0 * bin_s * 1e9),
            ],
            &grid,
        )
        .unwrap();
        let pdp = compute_pdp(&frame_from_response(&grid, chan.response().to_vec())).unwrap();
        // Power ratio (0.05)^2 / 1 = 0.0025 is below a 1% threshold...
        assert_eq!(estimate_tof(&pdp, 0.01).unwrap(), None);
        // ...but visible with the threshold lowered.
        let tof = estimate_tof(&pdp, 0.001).unwrap().expect("weak peak");
        assert_relative_eq!(tof, 20.0 * bin_s, max_relative = 1e-9);
    }

    #[test]
    fn bad_threshold_is_rejected() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let chan = multipath_channel(&[PathComponent::from_ns(1.0, 0.0)], &grid).unwrap();
        let pdp = compute_pdp(&frame_from_response(&grid, chan.response().to_vec())).unwrap();
        assert!(estimate_tof(&pdp, -0.1).is_err());
        assert!(estimate_tof(&pdp, 1.5).is_err());
    }
}
