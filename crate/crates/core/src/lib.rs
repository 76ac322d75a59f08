//! Ground-truth-aware laboratory for Wi-Fi channel-state-information (CSI)
//! sensing pipelines.
//!
//! The crate emulates an OFDM channel whose per-subcarrier response is known
//! exactly, applies transmit-side precoding so that motion-like effects are
//! injected with analytic ground truth, distorts the result with configurable
//! receiver impairments (AGC, per-device amplitude/phase profiles, packet
//! phase ramps, correlated noise, smoothing, tone decimation), and then
//! provides the downstream machinery a sensing stack needs: preprocessing,
//! velocity and time-of-flight estimators, noise/faithfulness metrology, and
//! a statistics-aware evaluation harness.
//!
//! Everything is deterministic for a given `(config, seed)` pair.

pub mod channel;
pub mod config;
pub mod consts;
pub mod estimators;
pub mod eval;
pub mod experiments;
pub mod frame;
pub mod grid;
pub mod metrics;
pub mod ndjson;
pub mod preprocess;
pub mod receiver;
pub mod rng;
pub mod schedule;
pub(crate) mod util;

pub use frame::{CsiFrame, CsiSeries};
pub use grid::{SharedGrid, SubcarrierGrid};

/// Complex sample type used throughout the crate.
pub type Complex64 = num_complex::Complex<f64>;
