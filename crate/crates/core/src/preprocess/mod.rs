//! Preprocessing: the transforms a sensing pipeline applies between raw CSI
//! and feature extraction.
//!
//! The submodules cover per-frame phase detrending, per-frame gain
//! normalization, per-receiver profile extraction and equalization,
//! dataset-level standardization, and per-tone time-domain filtering.

mod detrend;
mod filters;
mod gain;
mod profile;
mod standardize;

pub use detrend::{detrend_frame, detrend_series, unwrap_phases, DetrendMethod};
pub use filters::{filter_series, FilterKind};
pub use gain::{normalize_frame, normalize_series, GainMethod};
pub use profile::{
    encode_profile, equalize_frame, equalize_series, extract_profile, extract_profile_with,
    read_profile, stability_score, write_profile, ReceiverProfile,
};
pub use standardize::{
    fit_standardizer, FittedStandardizer, StandardScope, StandardStat, StandardizationSpec,
};

use thiserror::Error;

use crate::frame::FrameError;

/// Errors raised by preprocessing stages.
#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("need at least {need} tones, got {got}")]
    TooFewTones { need: usize, got: usize },
    #[error("series is empty")]
    EmptySeries,
    #[error("{method} normalization scale is zero for seq {seq}")]
    ZeroScale { method: &'static str, seq: u64 },
    #[error("no anchor tone is present on the frame grid")]
    MissingAnchors,
    #[error("frame grid does not match the profile grid")]
    GridMismatch,
    #[error("profile amplitude is zero at tone {tone}; cannot equalize")]
    ZeroProfileAmp { tone: i32 },
    #[error("phase average is degenerate at tone {tone} (dispersed residual phases)")]
    DegeneratePhase { tone: i32 },
    #[error("stability score needs at least two profiles, got {got}")]
    NeedTwoProfiles { got: usize },
    #[error(
        "profiles {i} and {j} have non-positive similarity {score}; the geometric stability \
         score is undefined"
    )]
    NonPositiveSimilarity { i: usize, j: usize, score: f64 },
    #[error("filter window must be odd and at least 3, got {window}")]
    BadWindow { window: usize },
    #[error("polynomial order {poly} must be smaller than window {window}")]
    BadPolyOrder { poly: usize, window: usize },
    #[error("parameter {name} is invalid: {value}")]
    BadParam { name: &'static str, value: f64 },
    #[error("dataset shape {got:?} does not match the fitted shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("fit selection is empty or out of range")]
    BadFitSelection,
    #[error("per-example standardization keeps no state; its inverse is undefined")]
    NoInverse,
    #[error("profile file error: {0}")]
    ProfileIo(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}
