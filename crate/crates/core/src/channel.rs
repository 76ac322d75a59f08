//! Static multipath channel synthesis with exact per-tone ground truth.

use thiserror::Error;

use crate::consts::SUBCARRIER_SPACING_HZ;
use crate::grid::SharedGrid;
use crate::Complex64;

/// Errors raised while building a static channel.
#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("channel needs at least one path")]
    NoPaths,
    #[error("path {index}: delay must be finite and non-negative, got {delay_s}")]
    BadDelay { index: usize, delay_s: f64 },
    #[error("path {index}: gain must be finite")]
    BadGain { index: usize },
    #[error(
        "path {index}: delay {delay_s} s exceeds the unambiguous range {max_s} s for this grid"
    )]
    DelayOutOfRange {
        index: usize,
        delay_s: f64,
        max_s: f64,
    },
}

/// One propagation path: complex gain and absolute delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    /// Complex path gain (attenuation and phase rotation at zero frequency).
    pub gain: Complex64,
    /// Propagation delay in seconds.
    pub delay_s: f64,
}

impl PathComponent {
    /// Path with a real gain and a delay given in nanoseconds.
    pub fn from_ns(gain: f64, delay_ns: f64) -> Self {
        PathComponent {
            gain: Complex64::new(gain, 0.0),
            delay_s: delay_ns * 1e-9,
        }
    }
}

/// A frozen multipath channel: the path list plus its exact frequency
/// response over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticChannel {
    paths: Vec<PathComponent>,
    grid: SharedGrid,
    response: Vec<Complex64>,
}

impl StaticChannel {
    /// Ground-truth paths.
    pub fn paths(&self) -> &[PathComponent] {
        &self.paths
    }

    /// Grid the response is sampled on.
    pub fn grid(&self) -> &SharedGrid {
        &self.grid
    }

    /// Exact per-tone frequency response, aligned with the grid.
    pub fn response(&self) -> &[Complex64] {
        &self.response
    }
}

/// Synthesize the exact frequency response of a sum of delayed paths.
///
/// Each tone at absolute frequency `f_k` receives
/// `sum_p gain_p * exp(-j 2 pi f_k delay_p)`. Delays must stay inside the
/// unambiguous range `1 / spacing` of the grid, because beyond that the
/// sampled response is indistinguishable from a shorter delay.
pub fn multipath_channel(
    paths: &[PathComponent],
    grid: &SharedGrid,
) -> Result<StaticChannel, ChannelError> {
    if paths.is_empty() {
        return Err(ChannelError::NoPaths);
    }
    let max_delay_s = 1.0 / SUBCARRIER_SPACING_HZ;
    for (index, p) in paths.iter().enumerate() {
        if !p.delay_s.is_finite() || p.delay_s < 0.0 {
            return Err(ChannelError::BadDelay {
                index,
                delay_s: p.delay_s,
            });
        }
        if !p.gain.is_finite() {
            return Err(ChannelError::BadGain { index });
        }
        if p.delay_s >= max_delay_s {
            return Err(ChannelError::DelayOutOfRange {
                index,
                delay_s: p.delay_s,
                max_s: max_delay_s,
            });
        }
    }
    let response = grid
        .freqs_hz()
        .iter()
        .map(|&f| {
            paths
                .iter()
                .map(|p| {
                    let phase = -2.0 * std::f64::consts::PI * f * p.delay_s;
                    p.gain * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect();
    Ok(StaticChannel {
        paths: paths.to_vec(),
        grid: grid.clone(),
        response,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SubcarrierGrid;
    use approx::assert_relative_eq;

    #[test]
    fn single_path_has_linear_phase_and_flat_amplitude() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        // Oracle: a single 50 ns path yields |H| = gain everywhere and a
        // phase slope of -2 pi * spacing * delay per subcarrier index.
        let delay_s = 50e-9;
        let chan = multipath_channel(&[PathComponent::from_ns(0.8, 50.0)], &grid).unwrap();
        let expected_slope = -2.0 * std::f64::consts::PI * SUBCARRIER_SPACING_HZ * delay_s;
        for (pos, z) in chan.response().iter().enumerate() {
            assert_relative_eq!(z.norm(), 0.8, max_relative = 1e-12);
            let m = f64::from(grid.indices()[pos]);
            let f = grid.freqs_hz()[pos];
            let expected = -2.0 * std::f64::consts::PI * f * delay_s;
            // Compare angles modulo 2 pi through the complex plane.
            let diff = (z / Complex64::from_polar(0.8, expected)).arg();
            assert!(diff.abs() < 1e-9, "tone {m}: phase off by {diff}");
        }
        // Adjacent-tone phase increments all equal the slope.
        for pair in chan.response().windows(2) {
            let inc = (pair[1] / pair[0]).arg();
            // Tones straddling DC are two indices apart.
            assert!(
                (inc - expected_slope).abs() < 1e-9 || (inc - 2.0 * expected_slope).abs() < 1e-9
            );
        }
    }

    #[test]
    fn two_path_response_is_the_sum() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let p1 = PathComponent::from_ns(1.0, 0.0);
        let p2 = PathComponent::from_ns(0.5, 120.0);
        let both = multipath_channel(&[p1, p2], &grid).unwrap();
        let only1 = multipath_channel(&[p1], &grid).unwrap();
        let only2 = multipath_channel(&[p2], &grid).unwrap();
        for i in 0..grid.len() {
            let sum = only1.response()[i] + only2.response()[i];
            assert_relative_eq!(both.response()[i].re, sum.re, max_relative = 1e-12);
            assert_relative_eq!(both.response()[i].im, sum.im, max_relative = 1e-12);
        }
    }

    #[test]
    fn delays_beyond_unambiguous_range_are_rejected() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        // 1/312.5 kHz = 3.2 us.
        let err = multipath_channel(&[PathComponent::from_ns(1.0, 3200.0)], &grid).unwrap_err();
        assert!(matches!(err, ChannelError::DelayOutOfRange { index: 0, .. }));
        assert!(multipath_channel(&[PathComponent::from_ns(1.0, 3199.0)], &grid).is_ok());
    }

    #[test]
    fn zero_delay_gives_flat_real_response() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let chan = multipath_channel(&[PathComponent::from_ns(2.0, 0.0)], &grid).unwrap();
        for z in chan.response() {
            assert_relative_eq!(z.re, 2.0, max_relative = 1e-12);
            assert!(z.im.abs() < 1e-12);
        }
    }
}
