//! Surrogate activity datasets.
//!
//! Each class is a distinct moving-path velocity injected by precoding;
//! every receiver model distorts the identical ideal stream of every
//! example, so any accuracy difference between receivers is caused by the
//! distortion chain alone. Features are the per-packet amplitude matrix
//! (time x tone); phase is deliberately discarded to mirror amplitude-only
//! classifiers.

use ndarray::{Array2, Array3};

use super::EvalError;
use crate::channel::{multipath_channel, PathComponent};
use crate::consts::DEFAULT_CENTER_FREQ_HZ;
use crate::grid::SubcarrierGrid;
use crate::receiver::{distort, ReceiverModel, ToneSelection};
use crate::rng::{derive_seed, purpose, substream};
use crate::schedule::{apply_precoding, make_schedule, ScheduleKind};
use rand::Rng;

/// Packets (= feature rows) per example.
const PACKETS_PER_EXAMPLE: usize = 200;
/// Packet rate of the emulated captures.
const PACKET_RATE_PPS: f64 = 200.0;
/// Velocity of the slowest class, m/s.
const BASE_VELOCITY_MPS: f64 = 0.4;
/// Velocity spacing between classes, m/s.
const VELOCITY_STEP_MPS: f64 = 0.3;
/// Gain of the static path.
const STATIC_GAIN: f64 = 1.0;
/// Gain of the moving path.
const DYNAMIC_GAIN: f64 = 0.6;

/// One labeled feature tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    /// Amplitude features, time x tone.
    pub features: Array2<f64>,
    /// Class id in `0..n_classes`.
    pub label: usize,
    /// Receiver that produced the features.
    pub receiver_id: String,
}

/// A labeled dataset from one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    /// Examples in class-major order, aligned across receivers.
    pub examples: Vec<LabeledExample>,
    /// Number of distinct classes.
    pub n_classes: usize,
}

impl LabeledDataset {
    /// Check shape homogeneity and class coverage.
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.examples.is_empty() {
            return Err(EvalError::EmptyDataset);
        }
        if self.n_classes < 2 {
            return Err(EvalError::TooFewClasses {
                got: self.n_classes,
            });
        }
        let expected = self.examples[0].features.dim();
        let mut counts = vec![0usize; self.n_classes];
        for (i, ex) in self.examples.iter().enumerate() {
            if ex.features.dim() != expected {
                return Err(EvalError::HeterogeneousShapes {
                    index: i,
                    expected,
                    got: ex.features.dim(),
                });
            }
            if ex.label >= self.n_classes {
                return Err(EvalError::LabelOutOfRange {
                    index: i,
                    label: ex.label,
                    n_classes: self.n_classes,
                });
            }
            counts[ex.label] += 1;
        }
        if let Some((class, &got)) = counts.iter().enumerate().find(|&(_, &c)| c < 2) {
            return Err(EvalError::TooFewExamples {
                class,
                got,
                need: 2,
            });
        }
        Ok(())
    }

    /// Feature shape `(time, tone)` shared by every example.
    pub fn feature_shape(&self) -> (usize, usize) {
        self.examples[0].features.dim()
    }

    /// All features stacked into an example x time x tone tensor.
    pub fn feature_tensor(&self) -> Array3<f64> {
        let (t, k) = self.feature_shape();
        let mut out = Array3::zeros((self.examples.len(), t, k));
        for (i, ex) in self.examples.iter().enumerate() {
            out.index_axis_mut(ndarray::Axis(0), i).assign(&ex.features);
        }
        out
    }

    /// Labels in example order.
    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Number of examples.
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    /// Whether the dataset has no examples.
    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// The subset at `idx`, preserving order.
    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
            n_classes: self.n_classes,
        }
    }
}

/// Ground-truth velocity of a class, m/s.
pub(crate) fn class_velocity(class: usize) -> f64 {
    BASE_VELOCITY_MPS + VELOCITY_STEP_MPS * class as f64
}

/// Generate one dataset per receiver model.
///
/// Class `c` injects a two-path schedule moving at `0.4 + 0.3 c` m/s;
/// examples within a class differ by a random initial excess length (which
/// also varies the absolute input power, exercising gain control). All
/// receivers distort the identical ideal stream of each example with
/// independent noise. Receivers that drop packets or decimate tones would
/// break the fixed feature shape and are rejected.
pub fn gen_activity_dataset(
    n_classes: usize,
    n_per_class: usize,
    models: &[ReceiverModel],
    seed: u64,
) -> Result<Vec<LabeledDataset>, EvalError> {
    if n_classes < 2 {
        return Err(EvalError::TooFewClasses { got: n_classes });
    }
    if n_per_class < 2 {
        return Err(EvalError::TooFewExamples {
            class: 0,
            got: n_per_class,
            need: 2,
        });
    }
    if models.is_empty() {
        return Err(EvalError::BadParam {
            name: "models",
            detail: "at least one receiver model is required".into(),
        });
    }
    let grid = SubcarrierGrid::ht20(DEFAULT_CENTER_FREQ_HZ)?;
    for model in models {
        model.validate(&grid)?;
        if model.drop_prob > 0.0 {
            return Err(EvalError::UnsupportedReceiver {
                name: model.name.clone(),
                detail: format!(
                    "drop_prob {} would make the time dimension ragged",
                    model.drop_prob
                ),
            });
        }
        if !matches!(model.tones, ToneSelection::All) {
            return Err(EvalError::UnsupportedReceiver {
                name: model.name.clone(),
                detail: "tone decimation would make the tone dimension ragged".into(),
            });
        }
    }

    let channel = multipath_channel(&[PathComponent::from_ns(1.0, 0.0)], &grid)?;

    let mut datasets: Vec<LabeledDataset> = models
        .iter()
        .map(|_| LabeledDataset {
            examples: Vec::with_capacity(n_classes * n_per_class),
            n_classes,
        })
        .collect();

    for class in 0..n_classes {
        for example in 0..n_per_class {
            let ctx = [purpose::DATASET, class as u64, example as u64];
            let ex_seed = derive_seed(seed, &ctx);
            let mut ex_rng = substream(seed, &ctx);
            let kind = ScheduleKind::TwoPathDoppler {
                static_gain: STATIC_GAIN,
                dynamic_gain: DYNAMIC_GAIN,
                velocity_mps: class_velocity(class),
                initial_excess_m: ex_rng.random_range(1.0..5.0),
            };
            let schedule = make_schedule(
                &kind,
                PACKETS_PER_EXAMPLE,
                PACKET_RATE_PPS,
                &grid,
                ex_seed,
                false,
            )?;
            let stream = apply_precoding(&channel, &schedule)?;

            for (ri, model) in models.iter().enumerate() {
                let dseed = derive_seed(
                    seed,
                    &[
                        purpose::DATASET,
                        class as u64,
                        example as u64,
                        1000 + ri as u64,
                    ],
                );
                let series = distort(&stream, model, dseed)?;
                let mut features = Array2::zeros((series.len(), grid.len()));
                for (row, frame) in series.frames.iter().enumerate() {
                    for (col, z) in frame.csi.iter().enumerate() {
                        features[(row, col)] = z.norm();
                    }
                }
                datasets[ri].examples.push(LabeledExample {
                    features,
                    label: class,
                    receiver_id: model.name.clone(),
                });
            }
        }
    }

    for ds in &datasets {
        ds.validate()?;
    }
    Ok(datasets)
}
