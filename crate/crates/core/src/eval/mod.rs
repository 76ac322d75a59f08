//! Statistical evaluation harness.
//!
//! A surrogate classification task stands in for over-the-air activity
//! recordings: every receiver model distorts the same ideal precoded
//! streams, a 1-nearest-neighbor classifier plays the role of the learned
//! model, and the evaluation protocol — repeated stratified cross
//! validation, BCa bootstrap intervals, and the ordered train-on-one,
//! test-on-another device matrix — measures how much of the class signal
//! each receiver's distortion chain destroys and how much preprocessing
//! brings back.

mod bootstrap;
mod cross_device;
mod cv;
mod dataset;
mod knn;
mod pipeline;

pub use bootstrap::{bootstrap_bca, BcaInterval};
pub use cross_device::{cross_device_experiment, CrossDeviceConfig, CrossDeviceReport};
pub use cv::{repeated_stratified_cv, stratified_folds, EvalReport};
pub use dataset::{gen_activity_dataset, LabeledDataset, LabeledExample};
pub use knn::knn_classify;
pub use pipeline::{FeaturePipeline, FitMode};

use thiserror::Error;

/// Errors from dataset generation and evaluation.
#[derive(Debug, Error)]
pub enum EvalError {
    /// A classification dataset needs at least two classes.
    #[error("need at least 2 classes, got {got}")]
    TooFewClasses { got: usize },
    /// A class has too few examples for the requested protocol.
    #[error("class {class} has {got} examples, need at least {need}")]
    TooFewExamples {
        class: usize,
        got: usize,
        need: usize,
    },
    /// An example's label is outside the declared class range.
    #[error("example {index} has label {label}, expected < {n_classes}")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        n_classes: usize,
    },
    /// Example feature tensors are not all the same shape.
    #[error("example {index} has shape {got:?}, expected {expected:?}")]
    HeterogeneousShapes {
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// The dataset has no examples at all.
    #[error("dataset is empty")]
    EmptyDataset,
    /// Classification needs a non-empty training set.
    #[error("training set is empty")]
    EmptyTrainingSet,
    /// Train and test features disagree in shape.
    #[error("train features are {train:?} but test features are {test:?}")]
    FeatureShapeMismatch {
        train: (usize, usize),
        test: (usize, usize),
    },
    /// The neighbor count is invalid.
    #[error("neighbor count k = {k} must satisfy 1 <= k <= {max}")]
    BadNeighborCount { k: usize, max: usize },
    /// Cross validation needs every class to have at least as many examples as folds.
    #[error("class {class} has {count} examples, fewer than {folds} folds")]
    ClassSmallerThanFolds {
        class: usize,
        count: usize,
        folds: usize,
    },
    /// Fold or repeat counts that make no sense.
    #[error("bad cross-validation shape: {detail}")]
    BadCvShape { detail: String },
    /// The bootstrap needs a minimum number of values.
    #[error("bootstrap needs at least {need} values, got {got}")]
    TooFewValues { need: usize, got: usize },
    /// Bootstrap percentile levels must satisfy 0 < lo < hi < 100.
    #[error("bad percentile levels ({lo}, {hi})")]
    BadLevel { lo: f64, hi: f64 },
    /// A cross-device experiment needs at least two receivers.
    #[error("need at least 2 receiver models, got {got}")]
    TooFewReceivers { got: usize },
    /// A receiver model cannot produce fixed-shape feature tensors.
    #[error("receiver {name} cannot be used for dataset generation: {detail}")]
    UnsupportedReceiver { name: String, detail: String },
    /// A generic invalid parameter.
    #[error("bad parameter {name}: {detail}")]
    BadParam { name: &'static str, detail: String },
    /// A feature row had no energy to normalize by.
    #[error("example {example}, row {row}: zero mean amplitude, cannot normalize")]
    DegenerateFeatureRow { example: usize, row: usize },
    /// Errors bubbling up from the emulation stack.
    #[error(transparent)]
    Schedule(#[from] crate::schedule::ScheduleError),
    #[error(transparent)]
    Receiver(#[from] crate::receiver::ReceiverError),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
    #[error(transparent)]
    Preprocess(#[from] crate::preprocess::PreprocessError),
    #[error(transparent)]
    Frame(#[from] crate::frame::FrameError),
}
