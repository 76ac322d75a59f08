//! Parameter estimators operating on preprocessed CSI: subspace-based
//! velocity estimation across packets, and delay-profile/time-of-flight
//! estimation across tones.

mod music;
mod pdp;

pub use music::{
    estimate_velocity, music_spectrum, velocity_grid, MusicConfig, Pseudospectrum, VelocityTrack,
    WindowVelocity,
};
pub use pdp::{compute_pdp, estimate_tof, DelayProfile};

use thiserror::Error;

/// Errors raised by the estimators.
#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("need at least {need} frames, got {got}")]
    TooFewFrames { need: usize, got: usize },
    #[error("parameter {name} is invalid: {value}")]
    BadConfig { name: &'static str, value: f64 },
    #[error("velocity grid is empty")]
    EmptyVelocityGrid,
    #[error("window timestamps must span a positive duration")]
    DegenerateTimestamps,
    #[error("all {total} windows were skipped (loss above threshold)")]
    AllWindowsSkipped { total: usize },
    #[error("frames in one window must share a grid")]
    MixedGrids,
    #[error("unsupported grid for delay profiles: {detail}")]
    UnsupportedGrid { detail: String },
}
