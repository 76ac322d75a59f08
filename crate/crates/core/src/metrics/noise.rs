//! Noise moments and cross-tone correlation of static captures.
//!
//! Operates on an equalized, gain-normalized series recorded under a
//! constant channel, so every fluctuation left is the receiver's own. Phase
//! statistics are taken on residuals around the per-tone circular mean,
//! which keeps tones that sit near the ±π cut out of trouble.

use serde::Serialize;

use super::MetricsError;
use crate::frame::CsiSeries;
use crate::util::quantile_sorted;

/// Minimum number of frames for any moment estimate.
const MIN_SAMPLES: usize = 8;

/// Tone-averaged view of one moment set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSummary {
    /// Mean per-tone sample standard deviation.
    pub std: f64,
    /// Mean per-tone interquartile range.
    pub iqr: f64,
    /// Mean per-tone adjusted Fisher-Pearson skewness.
    pub skewness: f64,
    /// Mean per-tone excess kurtosis (sample-adjusted).
    pub excess_kurtosis: f64,
}

/// Per-tone moments of one signal channel (amplitude or phase).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelMoments {
    /// Sample standard deviation per tone.
    pub std: Vec<f64>,
    /// Interquartile range per tone (linear-interpolated quartiles).
    pub iqr: Vec<f64>,
    /// Adjusted Fisher-Pearson skewness per tone.
    pub skewness: Vec<f64>,
    /// Excess kurtosis per tone (sample-adjusted).
    pub excess_kurtosis: Vec<f64>,
    /// Tones whose track had no spread; their moments are reported as 0.
    pub degenerate: Vec<i32>,
}

impl ChannelMoments {
    /// Average each moment across tones.
    pub fn summary(&self) -> MomentSummary {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        MomentSummary {
            std: mean(&self.std),
            iqr: mean(&self.iqr),
            skewness: mean(&self.skewness),
            excess_kurtosis: mean(&self.excess_kurtosis),
        }
    }
}

/// Noise report for a static capture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseReport {
    /// Tone indices, in grid order.
    pub tones: Vec<i32>,
    /// Frames that entered the statistics.
    pub n_samples: usize,
    /// Amplitude-channel moments.
    pub amplitude: ChannelMoments,
    /// Phase-channel moments (residuals around the circular mean).
    pub phase: ChannelMoments,
}

/// Cross-tone Pearson correlation of amplitude fluctuations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    /// Tone indices, in grid order.
    pub tones: Vec<i32>,
    /// Correlation matrix, row-major, unit diagonal.
    pub matrix: Vec<Vec<f64>>,
    /// Tones with zero variance; their off-diagonal entries are 0.
    pub degenerate: Vec<i32>,
}

/// `(std, iqr, skewness, excess_kurtosis, degenerate)` of one track.
///
/// Skewness and kurtosis use the sample-adjusted (bias-corrected) forms;
/// a track with no spread reports all four as 0 and sets the flag.
fn moments(xs: &[f64]) -> (f64, f64, f64, f64, bool) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2.sqrt() <= 1e-12 * mean.abs().max(1.0) {
        return (0.0, 0.0, 0.0, 0.0, true);
    }
    let std = (m2 * n / (n - 1.0)).sqrt();
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let g1 = m3 / m2.powf(1.5);
    let skew = g1 * (n * (n - 1.0)).sqrt() / (n - 2.0);
    let g2 = m4 / (m2 * m2) - 3.0;
    let kurt = ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
    (std, iqr, skew, kurt, false)
}

/// Map an angle difference into `(-pi, pi]`.
fn wrap_angle(x: f64) -> f64 {
    let d = x.rem_euclid(std::f64::consts::TAU);
    if d > std::f64::consts::PI {
        d - std::f64::consts::TAU
    } else {
        d
    }
}

/// Per-tone amplitude tracks, `tracks[tone][frame]`.
fn amplitude_tracks(series: &CsiSeries) -> Vec<Vec<f64>> {
    let k = series.frames[0].csi.len();
    let mut tracks = vec![Vec::with_capacity(series.len()); k];
    for frame in &series.frames {
        for (t, z) in frame.csi.iter().enumerate() {
            tracks[t].push(z.norm());
        }
    }
    tracks
}

fn check_static_series(series: &CsiSeries) -> Result<(), MetricsError> {
    series.validate()?;
    if series.len() < MIN_SAMPLES {
        return Err(MetricsError::TooFewSamples {
            need: MIN_SAMPLES,
            got: series.len(),
        });
    }
    Ok(())
}

/// Per-tone and tone-averaged noise moments of a static capture.
pub fn noise_stats(series: &CsiSeries) -> Result<NoiseReport, MetricsError> {
    check_static_series(series)?;
    let grid = series.grid().expect("validated series has a grid");
    let tones = grid.indices().to_vec();

    let mut amp = ChannelMoments {
        std: Vec::new(),
        iqr: Vec::new(),
        skewness: Vec::new(),
        excess_kurtosis: Vec::new(),
        degenerate: Vec::new(),
    };
    let mut phs = amp.clone();

    for (t, &tone) in tones.iter().enumerate() {
        let amps: Vec<f64> = series.frames.iter().map(|f| f.csi[t].norm()).collect();
        let (s, q, g, k, deg) = moments(&amps);
        amp.std.push(s);
        amp.iqr.push(q);
        amp.skewness.push(g);
        amp.excess_kurtosis.push(k);
        if deg {
            amp.degenerate.push(tone);
        }

        // Residuals around the circular mean, wrapped into (-pi, pi].
        let (mut re, mut im) = (0.0, 0.0);
        let angles: Vec<f64> = series.frames.iter().map(|f| f.csi[t].arg()).collect();
        for &a in &angles {
            re += a.cos();
            im += a.sin();
        }
        let mean_angle = im.atan2(re);
        let residuals: Vec<f64> = angles.iter().map(|&a| wrap_angle(a - mean_angle)).collect();
        let (s, q, g, k, deg) = moments(&residuals);
        phs.std.push(s);
        phs.iqr.push(q);
        phs.skewness.push(g);
        phs.excess_kurtosis.push(k);
        if deg {
            phs.degenerate.push(tone);
        }
    }

    Ok(NoiseReport {
        tones,
        n_samples: series.len(),
        amplitude: amp,
        phase: phs,
    })
}

/// Pearson correlation of per-tone amplitude fluctuations.
pub fn noise_correlation(series: &CsiSeries) -> Result<CorrelationReport, MetricsError> {
    check_static_series(series)?;
    let grid = series.grid().expect("validated series has a grid");
    let tones = grid.indices().to_vec();
    let tracks = amplitude_tracks(series);
    let n = series.len() as f64;

    let centered: Vec<Vec<f64>> = tracks
        .iter()
        .map(|xs| {
            let mean = xs.iter().sum::<f64>() / n;
            xs.iter().map(|&x| x - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|d| d.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let track_scale: Vec<f64> = tracks
        .iter()
        .map(|xs| (xs.iter().map(|x| x.abs()).fold(0.0, f64::max)).max(1.0))
        .collect();

    let k = tones.len();
    let mut matrix = vec![vec![0.0; k]; k];
    let mut degenerate = Vec::new();
    let live: Vec<bool> = (0..k)
        .map(|t| {
            let ok = norms[t] > 1e-12 * track_scale[t];
            if !ok {
                degenerate.push(tones[t]);
            }
            ok
        })
        .collect();
    for i in 0..k {
        matrix[i][i] = 1.0;
        for j in (i + 1)..k {
            if live[i] && live[j] {
                let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
                matrix[i][j] = r;
                matrix[j][i] = r;
            }
        }
    }

    Ok(CorrelationReport {
        tones,
        matrix,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{multipath_channel, PathComponent};
    use crate::frame::CsiFrame;
    use crate::grid::SubcarrierGrid;
    use crate::receiver::{distort, AgcPolicy, NoiseSpec, ReceiverModel};
    use crate::rng::substream;
    use crate::schedule::{apply_precoding, make_schedule, ScheduleKind};
    use crate::Complex64;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn series_from_amp_tracks(tracks: &[Vec<f64>]) -> CsiSeries {
        // tracks[tone][frame]; two-plus tones on a small custom grid.
        let k = tracks.len();
        let indices: Vec<i32> = (0..k as i32).map(|t| t - (k as i32) / 2).map(|t| if t >= 0 { t + 1 } else { t }).collect();
        let grid = SubcarrierGrid::from_indices(2.412e9, 20e6, indices).unwrap();
        let n = tracks[0].len();
        let frames = (0..n)
            .map(|f| {
                let csi: Vec<Complex64> = (0..k).map(|t| Complex64::new(tracks[t][f], 0.0)).collect();
                CsiFrame::new("rx", f as u64, f as u64 * 1000, 0.0, grid.clone(), csi).unwrap()
            })
            .collect();
        CsiSeries::new(frames).unwrap()
    }

    fn static_noisy_series(noise: NoiseSpec, n_packets: usize, seed: u64) -> CsiSeries {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let chan = multipath_channel(&[PathComponent::from_ns(1.0, 0.0)], &grid).unwrap();
        let schedule = make_schedule(
            &ScheduleKind::Constant {
                factor_re: 1.0,
                factor_im: 0.0,
            },
            n_packets,
            1000.0,
            &grid,
            seed,
            false,
        )
        .unwrap();
        let stream = apply_precoding(&chan, &schedule).unwrap();
        let model = ReceiverModel {
            noise,
            ..ReceiverModel::neutral("noisy", &grid)
        };
        distort(&stream, &model, seed).unwrap()
    }

    #[test]
    fn constant_series_reports_zero_moments_with_flags() {
        let tracks = vec![vec![0.7; 64], vec![1.3; 64]];
        let report = noise_stats(&series_from_amp_tracks(&tracks)).unwrap();
        assert_eq!(report.amplitude.std, vec![0.0, 0.0]);
        assert_eq!(report.amplitude.iqr, vec![0.0, 0.0]);
        assert_eq!(report.amplitude.skewness, vec![0.0, 0.0]);
        assert_eq!(report.amplitude.excess_kurtosis, vec![0.0, 0.0]);
        assert_eq!(report.amplitude.degenerate.len(), 2);
        // Phases are constant too (real positive samples).
        assert_eq!(report.phase.degenerate.len(), 2);
    }

    #[test]
    fn gaussian_track_has_near_zero_skew_and_kurtosis() {
        // Oracle: standard errors sqrt(6/n) and sqrt(24/n); at n = 1e5 a
        // |skew| < 0.03 and |kurtosis| < 0.06 band is ~4 standard errors.
        let mut rng = substream(11, &[1]);
        let n = 100_000;
        let tracks: Vec<Vec<f64>> = (0..2)
            .map(|_| {
                (0..n)
                    .map(|_| 1.0 + 0.1 * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let report = noise_stats(&series_from_amp_tracks(&tracks)).unwrap();
        let s = report.amplitude.summary();
        assert!(s.skewness.abs() < 0.03, "skew {}", s.skewness);
        assert!(s.excess_kurtosis.abs() < 0.06, "kurt {}", s.excess_kurtosis);
        // std of 0.1 and the Gaussian IQR oracle 2 * 0.6745 * sigma.
        assert_relative_eq!(s.std, 0.1, max_relative = 0.02);
        assert_relative_eq!(s.iqr, 2.0 * 0.674_489_75 * 0.1, max_relative = 0.03);
    }

    #[test]
    fn moments_shift_and_scale_as_documented() {
        let mut rng = substream(12, &[1]);
        let base: Vec<f64> = (0..4000)
            .map(|_| 2.0 + 0.3 * rng.sample::<f64, _>(StandardNormal).powi(3))
            .collect();
        let shifted: Vec<f64> = base.iter().map(|x| x + 5.0).collect();
        let scaled: Vec<f64> = base.iter().map(|x| x * 3.0).collect();
        let (s0, q0, g0, k0, _) = moments(&base);
        let (s1, q1, g1, k1, _) = moments(&shifted);
        let (s2, q2, g2, k2, _) = moments(&scaled);
        // Shift leaves every moment alone.
        assert_relative_eq!(s0, s1, max_relative = 1e-9);
        assert_relative_eq!(q0, q1, max_relative = 1e-9);
        assert_relative_eq!(g0, g1, max_relative = 1e-6);
        assert_relative_eq!(k0, k1, max_relative = 1e-6);
        // Positive scale moves std/IQR linearly, not shape.
        assert_relative_eq!(s2, 3.0 * s0, max_relative = 1e-9);
        assert_relative_eq!(q2, 3.0 * q0, max_relative = 1e-9);
        assert_relative_eq!(g2, g0, max_relative = 1e-9);
        assert_relative_eq!(k2, k0, max_relative = 1e-9);
    }

    #[test]
    fn outlier_mixture_is_heavy_tailed() {
        let series = static_noisy_series(
            NoiseSpec {
                amp_std: 0.015,
                lag_corr: 0.0,
                outlier_prob: 1e-3,
                outlier_scale: 20.0,
            },
            10_000,
            21,
        );
        let report = noise_stats(&series).unwrap();
        let kurt = report.amplitude.summary().excess_kurtosis;
        assert!(kurt > 10.0, "excess kurtosis {kurt}");
    }

    #[test]
    fn too_few_frames_is_an_error() {
        let tracks = vec![vec![1.0; 5], vec![2.0; 5]];
        let err = noise_stats(&series_from_amp_tracks(&tracks)).unwrap_err();
        assert!(matches!(err, MetricsError::TooFewSamples { need: 8, got: 5 }));
    }

    #[test]
    fn independent_tones_decorrelate() {
        let mut rng = substream(13, &[1]);
        let tracks: Vec<Vec<f64>> = (0..16)
            .map(|_| {
                (0..10_000)
                    .map(|_| 1.0 + 0.02 * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let report = noise_correlation(&series_from_amp_tracks(&tracks)).unwrap();
        let mut max_off = 0.0f64;
        for i in 0..16 {
            assert_eq!(report.matrix[i][i], 1.0);
            for j in 0..16 {
                assert_relative_eq!(report.matrix[i][j], report.matrix[j][i]);
                assert!(report.matrix[i][j].abs() <= 1.0);
                if i != j {
                    max_off = max_off.max(report.matrix[i][j].abs());
                }
            }
        }
        // Sampling-error oracle: |rho| ~ 1/sqrt(n) = 0.01 per pair.
        assert!(max_off < 0.05, "max off-diagonal {max_off}");
    }

    #[test]
    fn band_correlated_noise_shows_its_lag_one_coefficient() {
        // The emulator injects complex noise with tone covariance
        // 2 sigma^2 rho^|i-j|; the amplitude fluctuation of a flat unit
        // channel inherits exactly rho at lag 1.
        let series = static_noisy_series(
            NoiseSpec {
                amp_std: 0.02,
                lag_corr: 0.6,
                outlier_prob: 0.0,
                outlier_scale: 1.0,
            },
            10_000,
            22,
        );
        let report = noise_correlation(&series).unwrap();
        let k = report.tones.len();
        let lag1: f64 = (0..k - 1).map(|i| report.matrix[i][i + 1]).sum::<f64>() / (k - 1) as f64;
        assert!((lag1 - 0.6).abs() < 0.03, "lag-1 correlation {lag1}");
    }

    #[test]
    fn identical_tracks_give_the_all_ones_matrix() {
        let mut rng = substream(14, &[1]);
        let shared: Vec<f64> = (0..200)
            .map(|_| 1.0 + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let tracks = vec![shared.clone(), shared.clone(), shared];
        let report = noise_correlation(&series_from_amp_tracks(&tracks)).unwrap();
        for row in &report.matrix {
            for &v in row {
                assert_relative_eq!(v, 1.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn zero_variance_tone_is_flagged_and_zeroed() {
        let mut rng = substream(15, &[1]);
        let live: Vec<f64> = (0..100)
            .map(|_| 1.0 + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let tracks = vec![live.clone(), vec![2.0; 100], live];
        let report = noise_correlation(&series_from_amp_tracks(&tracks)).unwrap();
        assert_eq!(report.degenerate, vec![report.tones[1]]);
        assert_eq!(report.matrix[1][0], 0.0);
        assert_eq!(report.matrix[1][2], 0.0);
        assert_eq!(report.matrix[1][1], 1.0);
        // The live pair still correlates perfectly.
        assert_relative_eq!(report.matrix[0][2], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn agc_is_irrelevant_after_normalization_but_smoothing_is_not() {
        // Sanity wiring check: a fine-step AGC receiver with zero noise has
        // exactly zero amplitude spread after l1 normalization.
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let chan = multipath_channel(&[PathComponent::from_ns(1.0, 30.0)], &grid).unwrap();
        let schedule = make_schedule(
            &ScheduleKind::Constant {
                factor_re: 1.0,
                factor_im: 0.0,
            },
            64,
            1000.0,
            &grid,
            5,
            false,
        )
        .unwrap();
        let stream = apply_precoding(&chan, &schedule).unwrap();
        let model = ReceiverModel {
            agc: AgcPolicy::StepFine { step_db: 1.0 },
            ..ReceiverModel::neutral("agc-only", &grid)
        };
        let distorted = distort(&stream, &model, 5).unwrap();
        let normalized = crate::preprocess::normalize_series(
            &distorted,
            &crate::preprocess::GainMethod::L1,
        )
        .unwrap();
        let report = noise_stats(&normalized).unwrap();
        assert_eq!(report.amplitude.degenerate.len(), grid.len());
    }
}
