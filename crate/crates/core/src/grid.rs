//! Subcarrier grid: the frequency layout every CSI frame refers to.

use std::sync::Arc;

use thiserror::Error;

use crate::consts::{HT20_MAX_INDEX, SUBCARRIER_SPACING_HZ};

/// Errors raised when constructing or checking a [`SubcarrierGrid`].
#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid must contain at least one subcarrier")]
    Empty,
    #[error("subcarrier indices must be strictly increasing (violated at position {position})")]
    NotIncreasing { position: usize },
    #[error("centre frequency must be finite and positive, got {value}")]
    BadCenterFrequency { value: f64 },
    #[error("bandwidth must be finite and positive, got {value}")]
    BadBandwidth { value: f64 },
}

/// Frequency layout of the populated OFDM subcarriers of one channel.
///
/// A grid pins the centre frequency, the nominal channel bandwidth and the
/// ordered list of populated subcarrier indices; the absolute tone frequency
/// of index `m` is `center_freq_hz + m * SUBCARRIER_SPACING_HZ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierGrid {
    center_freq_hz: f64,
    bandwidth_hz: f64,
    indices: Vec<i32>,
    freqs_hz: Vec<f64>,
}

/// Grids are immutable and widely shared, so frames hold them by `Arc`.
pub type SharedGrid = Arc<SubcarrierGrid>;

/// The 30 subcarrier indices reported by Intel 5300-class hardware on a
/// 20 MHz channel: every other tone plus both band edges and the tones
/// adjacent to DC.
pub const IWL5300_HT20_INDICES: [i32; 30] = [
    -28, -26, -24, -22, -20, -18, -16, -14, -12, -10, -8, -6, -4, -2, -1, 1, 3, 5, 7, 9, 11, 13,
    15, 17, 19, 21, 23, 25, 27, 28,
];

impl SubcarrierGrid {
    /// Full 56-tone grid of a 20 MHz 802.11n channel: indices
    /// `-28..=-1, 1..=28` with the DC tone excluded.
    pub fn ht20(center_freq_hz: f64) -> Result<SharedGrid, GridError> {
        let indices: Vec<i32> = (-HT20_MAX_INDEX..=HT20_MAX_INDEX)
            .filter(|&m| m != 0)
            .collect();
        Self::from_indices(center_freq_hz, 20_000_000.0, indices)
    }

    /// Grid over an explicit index list, e.g. a decimated report layout.
    pub fn from_indices(
        center_freq_hz: f64,
        bandwidth_hz: f64,
        indices: Vec<i32>,
    ) -> Result<SharedGrid, GridError> {
        if !(center_freq_hz.is_finite() && center_freq_hz > 0.0) {
            return Err(GridError::BadCenterFrequency {
                value: center_freq_hz,
            });
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(GridError::BadBandwidth {
                value: bandwidth_hz,
            });
        }
        if indices.is_empty() {
            return Err(GridError::Empty);
        }
        for (i, pair) in indices.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(GridError::NotIncreasing { position: i + 1 });
            }
        }
        let freqs_hz = indices
            .iter()
            .map(|&m| center_freq_hz + f64::from(m) * SUBCARRIER_SPACING_HZ)
            .collect();
        Ok(Arc::new(SubcarrierGrid {
            center_freq_hz,
            bandwidth_hz,
            indices,
            freqs_hz,
        }))
    }

    /// Grid restricted to the subcarriers reported by Intel 5300 hardware.
    pub fn ht20_iwl5300(center_freq_hz: f64) -> Result<SharedGrid, GridError> {
        Self::from_indices(center_freq_hz, 20_000_000.0, IWL5300_HT20_INDICES.to_vec())
    }

    /// Number of populated subcarriers.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    /// True when the grid holds no subcarriers (never, post-construction).
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Channel centre frequency in hertz.
    pub fn center_freq_hz(&self) -> f64 {
        self.center_freq_hz
    }

    /// Nominal channel bandwidth in hertz.
    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    /// Populated subcarrier indices, strictly increasing.
    pub fn indices(&self) -> &[i32] {
        &self.indices
    }

    /// Absolute tone frequencies in hertz, aligned with [`indices`](Self::indices).
    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    /// Position of subcarrier index `m` within the grid, if populated.
    pub fn position_of(&self, m: i32) -> Option<usize> {
        self.indices.binary_search(&m).ok()
    }

    /// Restrict the grid to the subcarriers in `keep` (in grid order).
    pub fn subset(&self, keep: &[i32]) -> Result<SharedGrid, GridError> {
        Self::from_indices(self.center_freq_hz, self.bandwidth_hz, keep.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::HT20_TONE_COUNT;

    #[test]
    fn ht20_grid_has_56_tones_without_dc() {
        let grid = SubcarrierGrid::ht20(2.412e9).expect("standard grid");
        assert_eq!(grid.len(), HT20_TONE_COUNT);
        assert!(!grid.indices().contains(&0), "DC tone must be excluded");
        assert_eq!(grid.indices()[0], -28);
        assert_eq!(*grid.indices().last().unwrap(), 28);
    }

    #[test]
    fn ht20_frequency_span_matches_index_arithmetic() {
        // Oracle: the outermost tones sit 56 subcarrier spacings apart,
        // i.e. 56 * 312.5 kHz = 17.5 MHz.
        let grid = SubcarrierGrid::ht20(2.412e9).expect("standard grid");
        let lo = grid.freqs_hz().first().copied().unwrap();
        let hi = grid.freqs_hz().last().copied().unwrap();
        assert_eq!(hi - lo, 56.0 * SUBCARRIER_SPACING_HZ);
        assert_eq!(hi - lo, 17_500_000.0);
        // Spot-check one tone against the defining formula.
        let pos = grid.position_of(7).expect("tone 7 populated");
        assert_eq!(grid.freqs_hz()[pos], 2.412e9 + 7.0 * 312_500.0);
    }

    #[test]
    fn frequencies_track_indices_for_decimated_grids() {
        let grid = SubcarrierGrid::ht20_iwl5300(5.18e9).expect("decimated grid");
        assert_eq!(grid.len(), 30);
        for (&m, &f) in grid.indices().iter().zip(grid.freqs_hz()) {
            assert_eq!(f, 5.18e9 + f64::from(m) * SUBCARRIER_SPACING_HZ);
        }
    }

    #[test]
    fn non_increasing_indices_are_rejected() {
        let err = SubcarrierGrid::from_indices(2.412e9, 20e6, vec![-1, 1, 1]).unwrap_err();
        assert!(matches!(err, GridError::NotIncreasing { position: 2 }));
        let err = SubcarrierGrid::from_indices(2.412e9, 20e6, vec![]).unwrap_err();
        assert!(matches!(err, GridError::Empty));
    }

    #[test]
    fn bad_scalars_are_rejected() {
        assert!(SubcarrierGrid::ht20(f64::NAN).is_err());
        assert!(SubcarrierGrid::ht20(-2.4e9).is_err());
        assert!(SubcarrierGrid::from_indices(2.4e9, 0.0, vec![1]).is_err());
    }

    #[test]
    fn subset_preserves_centre_and_bandwidth() {
        let full = SubcarrierGrid::ht20(2.412e9).unwrap();
        let sub = full.subset(&IWL5300_HT20_INDICES).unwrap();
        assert_eq!(sub.center_freq_hz(), full.center_freq_hz());
        assert_eq!(sub.bandwidth_hz(), full.bandwidth_hz());
        assert_eq!(sub.len(), 30);
    }
}
