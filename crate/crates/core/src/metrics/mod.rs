//! Receiver metrology.
//!
//! Quantifies what a receiver does to the channel state it reports:
//! per-tone noise moments and cross-tone correlation of a static capture,
//! faithfulness of the reported response to a known precoded change,
//! mutual-information sensitivity of the report to the injected parameter,
//! and Mahalanobis outlier filtering for heavy-tailed reporters.

mod deviation;
mod mi;
mod noise;
mod outlier;

pub use deviation::{response_deviation, DeviationReport};
pub use mi::mutual_information_knn;
pub use noise::{noise_correlation, noise_stats, ChannelMoments, CorrelationReport, MomentSummary, NoiseReport};
pub use outlier::{chi_squared_distance_threshold, mahalanobis_filter};

use thiserror::Error;

/// Errors from the metrology operations.
#[derive(Debug, Error)]
pub enum MetricsError {
    /// Not enough samples for the requested statistic.
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    /// Paired inputs differ in length.
    #[error("paired inputs differ in length: {x} vs {y}")]
    MismatchedLengths { x: usize, y: usize },
    /// The neighbor count is invalid for the sample size.
    #[error("neighbor count k = {k} must satisfy 1 <= k < n = {n}")]
    BadNeighborCount { k: usize, n: usize },
    /// An input sample is not finite.
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    /// A sample vector is empty where at least one dimension is required.
    #[error("samples must have at least one dimension")]
    EmptyDimension,
    /// Sample vectors have inconsistent dimensions.
    #[error("sample {index} has dimension {got}, expected {expected}")]
    RaggedSamples {
        index: usize,
        expected: usize,
        got: usize,
    },
    /// The anchor set for a deviation measurement is empty.
    #[error("anchor set is empty")]
    EmptyAnchors,
    /// A frame's sequence number is outside the schedule.
    #[error("frame seq {seq} is beyond the schedule of {schedule_len} packets")]
    UnknownPacket { seq: u64, schedule_len: usize },
    /// A reported tone does not exist in the reference schedule's grid.
    #[error("tone {tone} is not in the schedule grid")]
    ToneNotInSchedule { tone: i32 },
    /// The amplitude covariance stayed singular after regularization.
    #[error("amplitude covariance is singular even after regularization")]
    SingularCovariance,
    /// An invalid distance threshold or percentile.
    #[error("bad threshold {value}: must be nonnegative (infinity allowed)")]
    BadThreshold { value: f64 },
    /// An invalid coverage fraction for a chi-squared cutoff.
    #[error("coverage {value} must lie strictly between 0 and 1")]
    BadCoverage { value: f64 },
    /// A preprocessing step inside a metric failed.
    #[error(transparent)]
    Preprocess(#[from] crate::preprocess::PreprocessError),
    /// The series itself is malformed.
    #[error(transparent)]
    Frame(#[from] crate::frame::FrameError),
}
