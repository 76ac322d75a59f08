//! CSI frames and frame series: the sample types every stage exchanges.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::grid::SharedGrid;
use crate::Complex64;

/// Errors raised when building or validating frames and series.
#[derive(Debug, Error)]
pub enum FrameError {
    #[error("csi length {got} does not match grid length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("csi entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("rssi_db must be finite, got {value}")]
    BadRssi { value: f64 },
    #[error("receiver_id must be non-empty")]
    EmptyReceiverId,
    #[error("series is empty")]
    EmptySeries,
    #[error("frame {position}: receiver_id {got:?} differs from series receiver {expected:?}")]
    MixedReceivers {
        position: usize,
        expected: String,
        got: String,
    },
    #[error("frame {position}: grid differs from the series grid")]
    MixedGrids { position: usize },
    #[error("frame {position}: seq {got} is not greater than previous seq {prev}")]
    SeqNotIncreasing { position: usize, prev: u64, got: u64 },
    #[error("frame {position}: ts_us {got} is earlier than previous ts_us {prev}")]
    TimeDecreasing { position: usize, prev: u64, got: u64 },
}

/// One received (or emulated) CSI estimate: complex samples over the grid
/// plus capture metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame {
    /// Identifier of the receiver that reported the frame.
    pub receiver_id: String,
    /// Packet sequence number; gaps mark dropped packets.
    pub seq: u64,
    /// Capture timestamp in microseconds from the session origin.
    pub ts_us: u64,
    /// Reported RSSI in dB (possibly quantized by the receiver).
    pub rssi_db: f64,
    /// Frequency layout the samples refer to.
    pub grid: SharedGrid,
    /// Complex channel estimate per populated subcarrier, in grid order.
    pub csi: Vec<Complex64>,
}

impl CsiFrame {
    /// Build a frame, checking every invariant.
    pub fn new(
        receiver_id: impl Into<String>,
        seq: u64,
        ts_us: u64,
        rssi_db: f64,
        grid: SharedGrid,
        csi: Vec<Complex64>,
    ) -> Result<Self, FrameError> {
        let frame = CsiFrame {
            receiver_id: receiver_id.into(),
            seq,
            ts_us,
            rssi_db,
            grid,
            csi,
        };
        frame.validate()?;
        Ok(frame)
    }

    /// Check the frame invariants: non-empty receiver id, sample count
    /// matching the grid, and finite samples and RSSI.
    pub fn validate(&self) -> Result<(), FrameError> {
        if self.receiver_id.is_empty() {
            return Err(FrameError::EmptyReceiverId);
        }
        if self.csi.len() != self.grid.len() {
            return Err(FrameError::LengthMismatch {
                expected: self.grid.len(),
                got: self.csi.len(),
            });
        }
        if let Some(index) = self.csi.iter().position(|z| !z.is_finite()) {
            return Err(FrameError::NonFinite { index });
        }
        if !self.rssi_db.is_finite() {
            return Err(FrameError::BadRssi {
                value: self.rssi_db,
            });
        }
        Ok(())
    }

    /// Per-tone amplitudes `|csi_k|`.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.csi.iter().map(|z| z.norm()).collect()
    }

    /// Per-tone phases `arg(csi_k)` in `(-pi, pi]`.
    pub fn phases(&self) -> Vec<f64> {
        self.csi.iter().map(|z| z.arg()).collect()
    }

    /// Total power `sum_k |csi_k|^2`.
    pub fn power(&self) -> f64 {
        self.csi.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// An ordered capture from a single receiver, plus free-form metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsiSeries {
    /// Frames ordered by sequence number.
    pub frames: Vec<CsiFrame>,
    /// Processing provenance and session metadata (sorted for stable output).
    pub meta: BTreeMap<String, String>,
}

impl CsiSeries {
    /// Build a series from frames, checking the series invariants.
    pub fn new(frames: Vec<CsiFrame>) -> Result<Self, FrameError> {
        let series = CsiSeries {
            frames,
            meta: BTreeMap::new(),
        };
        series.validate()?;
        Ok(series)
    }

    /// Check the series invariants: non-empty, homogeneous receiver and
    /// grid, strictly increasing `seq`, non-decreasing `ts_us`, and every
    /// frame valid on its own.
    pub fn validate(&self) -> Result<(), FrameError> {
        let first = self.frames.first().ok_or(FrameError::EmptySeries)?;
        for (position, frame) in self.frames.iter().enumerate() {
            frame.validate()?;
            if frame.receiver_id != first.receiver_id {
                return Err(FrameError::MixedReceivers {
                    position,
                    expected: first.receiver_id.clone(),
                    got: frame.receiver_id.clone(),
                });
            }
            if frame.grid != first.grid {
                return Err(FrameError::MixedGrids { position });
            }
            if position > 0 {
                let prev = &self.frames[position - 1];
                if frame.seq <= prev.seq {
                    return Err(FrameError::SeqNotIncreasing {
                        position,
                        prev: prev.seq,
                        got: frame.seq,
                    });
                }
                if frame.ts_us < prev.ts_us {
                    return Err(FrameError::TimeDecreasing {
                        position,
                        prev: prev.ts_us,
                        got: frame.ts_us,
                    });
                }
            }
        }
        Ok(())
    }

    /// Receiver identifier shared by all frames.
    pub fn receiver_id(&self) -> Option<&str> {
        self.frames.first().map(|f| f.receiver_id.as_str())
    }

    /// Grid shared by all frames.
    pub fn grid(&self) -> Option<&SharedGrid> {
        self.frames.first().map(|f| &f.grid)
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// True when the series holds no frames.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Fraction of sequence numbers missing between the first and last frame.
    pub fn loss_fraction(&self) -> f64 {
        if self.frames.len() < 2 {
            return 0.0;
        }
        let first = self.frames.first().unwrap().seq;
        let last = self.frames.last().unwrap().seq;
        let expected = (last - first + 1) as f64;
        1.0 - self.frames.len() as f64 / expected
    }

    /// Clone the series with new frames but the same metadata.
    pub fn with_frames(&self, frames: Vec<CsiFrame>) -> Result<Self, FrameError> {
        let series = CsiSeries {
            frames,
            meta: self.meta.clone(),
        };
        series.validate()?;
        Ok(series)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SubcarrierGrid;

    fn grid() -> SharedGrid {
        SubcarrierGrid::ht20(2.412e9).unwrap()
    }

    fn flat_frame(seq: u64, ts_us: u64) -> CsiFrame {
        let g = grid();
        let csi = vec![Complex64::new(1.0, 0.0); g.len()];
        CsiFrame::new("rx0", seq, ts_us, -40.0, g, csi).unwrap()
    }

    #[test]
    fn frame_length_mismatch_is_rejected() {
        let g = grid();
        let err = CsiFrame::new("rx0", 0, 0, -40.0, g, vec![Complex64::new(1.0, 0.0); 55])
            .unwrap_err();
        assert!(matches!(
            err,
            FrameError::LengthMismatch {
                expected: 56,
                got: 55
            }
        ));
    }

    #[test]
    fn non_finite_samples_are_rejected() {
        let g = grid();
        let mut csi = vec![Complex64::new(1.0, 0.0); g.len()];
        csi[3] = Complex64::new(f64::NAN, 0.0);
        let err = CsiFrame::new("rx0", 0, 0, -40.0, g, csi).unwrap_err();
        assert!(matches!(err, FrameError::NonFinite { index: 3 }));
    }

    #[test]
    fn series_requires_strictly_increasing_seq() {
        let frames = vec![flat_frame(0, 0), flat_frame(1, 2000), flat_frame(1, 4000)];
        let err = CsiSeries::new(frames).unwrap_err();
        assert!(matches!(
            err,
            FrameError::SeqNotIncreasing {
                position: 2,
                prev: 1,
                got: 1
            }
        ));
    }

    #[test]
    fn series_rejects_mixed_receivers() {
        let mut f1 = flat_frame(1, 2000);
        f1.receiver_id = "rx1".into();
        let err = CsiSeries::new(vec![flat_frame(0, 0), f1]).unwrap_err();
        assert!(matches!(err, FrameError::MixedReceivers { position: 1, .. }));
    }

    #[test]
    fn loss_fraction_counts_gaps() {
        // Sequences 0, 1, 4 span 5 slots with 3 present: 40% loss.
        let frames = vec![flat_frame(0, 0), flat_frame(1, 2000), flat_frame(4, 8000)];
        let series = CsiSeries::new(frames).unwrap();
        assert!((series.loss_fraction() - 0.4).abs() < 1e-12);
    }
}
