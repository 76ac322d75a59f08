//! Subspace-based velocity estimation across packets.
//!
//! Packets are rows, tones are snapshots: the sample covariance across a
//! window of packets has a signal subspace spanned by the temporal steering
//! vectors of the static and moving components. Scanning a velocity grid
//! with `a(v)_n = exp(-j 2 pi f_c v t_n / c)` and measuring the distance to
//! the noise subspace yields a pseudospectrum whose peaks sit at the path
//! velocities — with the sign convention that a growing excess path length
//! (injected phase `-2 pi f_k excess(t) / c`) maps to positive `v`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::EstimatorError;
use crate::consts::SPEED_OF_LIGHT_M_S;
use crate::frame::{CsiFrame, CsiSeries};
use crate::util;
use crate::Complex64;

/// Configuration of the velocity estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicConfig {
    /// Packets per analysis window.
    pub window_len: usize,
    /// Dimension of the signal subspace (static + moving components).
    pub n_sources: usize,
    /// Velocity scan grid in m/s.
    pub velocities: Vec<f64>,
    /// Carrier frequency used in the steering vectors.
    pub carrier_freq_hz: f64,
    /// Exclude `|v| <= dead_zone_mps` when picking the moving peak, so the
    /// static ridge at zero never wins.
    pub dead_zone_mps: f64,
    /// Skip windows whose sequence-loss fraction exceeds this.
    pub max_loss: f64,
}

impl MusicConfig {
    /// Defaults: 50-packet windows, two sources, ±3 m/s grid at 1 mm/s,
    /// 0.05 m/s dead zone, 20% loss tolerance.
    pub fn for_carrier(carrier_freq_hz: f64) -> Self {
        MusicConfig {
            window_len: 50,
            n_sources: 2,
            velocities: velocity_grid(-3.0, 3.0, 0.001),
            carrier_freq_hz,
            dead_zone_mps: 0.05,
            max_loss: 0.2,
        }
    }

    fn validate(&self) -> Result<(), EstimatorError> {
        if self.velocities.is_empty() {
            return Err(EstimatorError::EmptyVelocityGrid);
        }
        if self.n_sources == 0 || self.n_sources + 2 > self.window_len {
            return Err(EstimatorError::BadConfig {
                name: "n_sources",
                value: self.n_sources as f64,
            });
        }
        if !(self.carrier_freq_hz.is_finite() && self.carrier_freq_hz > 0.0) {
            return Err(EstimatorError::BadConfig {
                name: "carrier_freq_hz",
                value: self.carrier_freq_hz,
            });
        }
        if !(self.dead_zone_mps.is_finite() && self.dead_zone_mps >= 0.0) {
            return Err(EstimatorError::BadConfig {
                name: "dead_zone_mps",
                value: self.dead_zone_mps,
            });
        }
        if !(self.max_loss.is_finite() && (0.0..1.0).contains(&self.max_loss)) {
            return Err(EstimatorError::BadConfig {
                name: "max_loss",
                value: self.max_loss,
            });
        }
        Ok(())
    }
}

/// Inclusive uniform velocity grid from `lo` to `hi` with step `step`.
pub fn velocity_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && hi >= lo, "invalid velocity grid");
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Pseudospectrum over the velocity grid for one window of frames.
#[derive(Debug, Clone)]
pub struct Pseudospectrum {
    /// Scanned velocities (copied from the config).
    pub velocities: Vec<f64>,
    /// Pseudospectrum power per velocity.
    pub power: Vec<f64>,
    /// Covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

impl Pseudospectrum {
    /// Velocity of the strongest peak outside the dead zone.
    pub fn peak_outside(&self, dead_zone_mps: f64) -> Option<f64> {
        self.velocities
            .iter()
            .zip(&self.power)
            .filter(|(v, _)| v.abs() > dead_zone_mps)
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(v, _)| *v)
    }
}

/// Compute the pseudospectrum of one window of frames.
///
/// Timestamps are taken relative to the window's first frame, so absolute
/// session time never enters the steering vectors.
pub fn music_spectrum(
    frames: &[CsiFrame],
    cfg: &MusicConfig,
) -> Result<Pseudospectrum, EstimatorError> {
    cfg.validate()?;
    let m = frames.len();
    if m < cfg.n_sources + 2 {
        return Err(EstimatorError::TooFewFrames {
            need: cfg.n_sources + 2,
            got: m,
        });
    }
    let grid = &frames[0].grid;
    if frames.iter().any(|f| &f.grid != grid) {
        return Err(EstimatorError::MixedGrids);
    }
    let t0 = frames[0].ts_us;
    let times_s: Vec<f64> = frames.iter().map(|f| (f.ts_us - t0) as f64 * 1e-6).collect();
    if times_s.iter().skip(1).all(|&t| t == 0.0) {
        return Err(EstimatorError::DegenerateTimestamps);
    }

    let k = grid.len();
    // Sample covariance across packets: R = X X^H / K, rows are packets.
    let x = DMatrix::from_fn(m, k, |r, c| frames[r].csi[c]);
    let r = (&x * x.adjoint()) / Complex64::new(k as f64, 0.0);
    let eig = SymmetricEigen::new(r);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    // Signal eigenvectors, conjugated once: the pseudospectrum denominator
    // uses the noise projector through the complement identity
    // |E_n^H a|^2 = |a|^2 - |E_s^H a|^2 (the eigenbasis is orthonormal),
    // which needs only n_sources dot products per grid point.
    let p = cfg.n_sources;
    let signal_conj: Vec<Vec<Complex64>> = order[..p]
        .iter()
        .map(|&col| (0..m).map(|row| eig.eigenvectors[(row, col)].conj()).collect())
        .collect();

    let beta: Vec<f64> = times_s
        .iter()
        .map(|&t| -2.0 * std::f64::consts::PI * cfg.carrier_freq_hz * t / SPEED_OF_LIGHT_M_S)
        .collect();

    let power: Vec<f64> = cfg
        .velocities
        .iter()
        .map(|&v| {
            let steering: Vec<Complex64> =
                beta.iter().map(|&b| Complex64::from_polar(1.0, b * v)).collect();
            let mut signal_energy = 0.0;
            for evec in &signal_conj {
                let dot: Complex64 = evec
                    .iter()
                    .zip(&steering)
                    .map(|(e, a)| e * a)
                    .sum();
                signal_energy += dot.norm_sqr();
            }
            let noise_energy = (m as f64 - signal_energy).max(1e-300);
            1.0 / noise_energy
        })
        .collect();

    Ok(Pseudospectrum {
        velocities: cfg.velocities.clone(),
        power,
        eigenvalues,
    })
}

/// Velocity estimate of one analysis window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowVelocity {
    pub start_ts_us: u64,
    pub end_ts_us: u64,
    pub n_frames: usize,
    pub velocity_mps: f64,
}

/// Windowed velocity track over a series.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityTrack {
    pub windows: Vec<WindowVelocity>,
    /// Windows skipped because their loss fraction exceeded the threshold.
    pub skipped: usize,
    pub median_mps: f64,
    pub iqr_mps: f64,
}

/// Estimate the moving-path velocity over consecutive windows of a series.
///
/// The series should already be preprocessed (detrended, gain-normalized)
/// by the caller; this function only windows, scans and aggregates.
pub fn estimate_velocity(
    series: &CsiSeries,
    cfg: &MusicConfig,
) -> Result<VelocityTrack, EstimatorError> {
    cfg.validate()?;
    if series.len() < cfg.window_len {
        return Err(EstimatorError::TooFewFrames {
            need: cfg.window_len,
            got: series.len(),
        });
    }
    let chunks: Vec<&[CsiFrame]> = series
        .frames
        .chunks(cfg.window_len)
        .filter(|c| c.len() == cfg.window_len)
        .collect();
    let total = chunks.len();

    // Windows are independent; scan them in parallel but keep their order.
    let results: Vec<Option<WindowVelocity>> = chunks
        .par_iter()
        .map(|window| {
            let first = window.first().unwrap();
            let last = window.last().unwrap();
            let span = (last.seq - first.seq + 1) as f64;
            let loss = 1.0 - window.len() as f64 / span;
            if loss > cfg.max_loss {
                return Ok(None);
            }
            let spectrum = music_spectrum(window, cfg)?;
            let velocity = spectrum
                .peak_outside(cfg.dead_zone_mps)
                .ok_or(EstimatorError::EmptyVelocityGrid)?;
            Ok(Some(WindowVelocity {
                start_ts_us: first.ts_us,
                end_ts_us: last.ts_us,
                n_frames: window.len(),
                velocity_mps: velocity,
            }))
        })
        .collect::<Result<_, EstimatorError>>()?;

    let windows: Vec<WindowVelocity> = results.into_iter().flatten().collect();
    let skipped = total - windows.len();
    if windows.is_empty() {
        return Err(EstimatorError::AllWindowsSkipped { total });
    }
    let velocities: Vec<f64> = windows.iter().map(|w| w.velocity_mps).collect();
    Ok(VelocityTrack {
        median_mps: util::median(&velocities),
        iqr_mps: util::iqr(&velocities),
        windows,
        skipped,
    })
}
