//! Receiver profiles: the static per-tone amplitude/phase signature of a
//! device, estimated from quiescent captures, and its uses (equalization,
//! cross-session stability scoring).

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    detrend_frame, normalize_frame, DetrendMethod, GainMethod, PreprocessError,
};
use crate::frame::{CsiFrame, CsiSeries};
use crate::grid::{SharedGrid, SubcarrierGrid};
use crate::Complex64;

/// Static per-tone response of one receiver, averaged over quiescent frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverProfile {
    /// Receiver the profile belongs to.
    pub receiver_id: String,
    /// Grid the profile is sampled on.
    pub grid: SharedGrid,
    /// Mean amplitude per tone.
    pub amp: Vec<f64>,
    /// Mean residual phase per tone (radians), circular mean.
    pub phase: Vec<f64>,
    /// Number of frames averaged.
    pub n_frames: usize,
}

impl ReceiverProfile {
    /// The profile as complex factors `amp_k * exp(j phase_k)`.
    pub fn factors(&self) -> Vec<Complex64> {
        self.amp
            .iter()
            .zip(&self.phase)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect()
    }
}

/// Extract a profile with the default pipeline: two-point edge detrending
/// and mean-amplitude (l1) gain normalization per frame.
pub fn extract_profile(
    series: &CsiSeries,
    n_frames: Option<usize>,
) -> Result<ReceiverProfile, PreprocessError> {
    extract_profile_with(series, n_frames, DetrendMethod::Pads, &GainMethod::L1)
}

/// Extract a profile with explicit detrend/gain choices.
///
/// Each of the first `n_frames` frames (all, if `None`) is detrended and
/// gain-normalized, then the amplitudes are averaged arithmetically and the
/// phases circularly (`arg` of the summed unit phasors, which is immune to
/// wrap-around at ±pi).
pub fn extract_profile_with(
    series: &CsiSeries,
    n_frames: Option<usize>,
    detrend: DetrendMethod,
    gain: &GainMethod,
) -> Result<ReceiverProfile, PreprocessError> {
    if series.is_empty() {
        return Err(PreprocessError::EmptySeries);
    }
    let take = n_frames.unwrap_or(series.len()).min(series.len());
    if take == 0 {
        return Err(PreprocessError::EmptySeries);
    }
    let grid = series.grid().expect("non-empty").clone();
    let k = grid.len();
    let mut amp_acc = vec![0.0f64; k];
    let mut phasor_acc = vec![Complex64::new(0.0, 0.0); k];
    for frame in &series.frames[..take] {
        let f = normalize_frame(&detrend_frame(frame, detrend)?, gain)?;
        for (pos, z) in f.csi.iter().enumerate() {
            amp_acc[pos] += z.norm();
            let a = z.norm();
            if a > 0.0 {
                phasor_acc[pos] += z / a;
            }
        }
    }
    let amp: Vec<f64> = amp_acc.iter().map(|a| a / take as f64).collect();
    let mut phase = Vec::with_capacity(k);
    for (pos, acc) in phasor_acc.iter().enumerate() {
        // A tiny resultant means the residual phases are dispersed over the
        // circle and no meaningful mean exists.
        if acc.norm() / (take as f64) < 1e-3 {
            return Err(PreprocessError::DegeneratePhase {
                tone: grid.indices()[pos],
            });
        }
        phase.push(acc.arg());
    }
    Ok(ReceiverProfile {
        receiver_id: series.receiver_id().expect("non-empty").to_string(),
        grid,
        amp,
        phase,
        n_frames: take,
    })
}

/// Divide one frame by the profile: `H_k / (amp_k exp(j phase_k))`.
pub fn equalize_frame(
    frame: &CsiFrame,
    profile: &ReceiverProfile,
) -> Result<CsiFrame, PreprocessError> {
    if frame.grid != profile.grid {
        return Err(PreprocessError::GridMismatch);
    }
    if let Some(pos) = profile.amp.iter().position(|&a| a <= 0.0) {
        return Err(PreprocessError::ZeroProfileAmp {
            tone: profile.grid.indices()[pos],
        });
    }
    let mut out = frame.clone();
    for (pos, z) in out.csi.iter_mut().enumerate() {
        *z /= Complex64::from_polar(profile.amp[pos], profile.phase[pos]);
    }
    Ok(out)
}

/// Equalize every frame of a series against a profile.
pub fn equalize_series(
    series: &CsiSeries,
    profile: &ReceiverProfile,
) -> Result<CsiSeries, PreprocessError> {
    if series.is_empty() {
        return Err(PreprocessError::EmptySeries);
    }
    let frames = series
        .frames
        .iter()
        .map(|f| equalize_frame(f, profile))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = series.with_frames(frames)?;
    out.meta
        .insert("equalized_against".into(), profile.receiver_id.clone());
    Ok(out)
}

/// Cross-session stability score: the geometric mean of all pairwise cosine
/// similarities between profiles, `(prod_{i<j} S_ij)^(2/(n(n-1)))`, where
/// `S_ij = Re<p_i, p_j> / (|p_i| |p_j|)` over the complex profile vectors.
///
/// A non-positive pairwise similarity makes the geometric mean undefined and
/// is reported as an error (it means the profiles disagree fundamentally).
pub fn stability_score(profiles: &[ReceiverProfile]) -> Result<f64, PreprocessError> {
    if profiles.len() < 2 {
        return Err(PreprocessError::NeedTwoProfiles {
            got: profiles.len(),
        });
    }
    let vectors: Vec<Vec<Complex64>> = profiles.iter().map(|p| p.factors()).collect();
    for w in profiles.windows(2) {
        if w[0].grid != w[1].grid {
            return Err(PreprocessError::GridMismatch);
        }
    }
    let norms: Vec<f64> = vectors
        .iter()
        .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let n = profiles.len();
    let mut log_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let dot: Complex64 = vectors[i]
                .iter()
                .zip(&vectors[j])
                .map(|(a, b)| a * b.conj())
                .sum();
            let score = dot.re / (norms[i] * norms[j]);
            if score <= 0.0 {
                return Err(PreprocessError::NonPositiveSimilarity { i, j, score });
            }
            log_sum += score.ln();
            pairs += 1;
        }
    }
    Ok((log_sum / pairs as f64).exp())
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    receiver_id: String,
    center_freq_hz: f64,
    bandwidth_hz: f64,
    sc_idx: Vec<i32>,
    amp: Vec<f64>,
    phase: Vec<f64>,
    n_frames: usize,
}

/// Encode a profile in the JSON sidecar format.
pub fn encode_profile(profile: &ReceiverProfile) -> String {
    let file = ProfileFile {
        receiver_id: profile.receiver_id.clone(),
        center_freq_hz: profile.grid.center_freq_hz(),
        bandwidth_hz: profile.grid.bandwidth_hz(),
        sc_idx: profile.grid.indices().to_vec(),
        amp: profile.amp.clone(),
        phase: profile.phase.clone(),
        n_frames: profile.n_frames,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("profile serializes");
    text.push('\n');
    text
}

/// Persist a profile as a JSON sidecar file.
pub fn write_profile(profile: &ReceiverProfile, path: &Path) -> Result<(), PreprocessError> {
    std::fs::write(path, encode_profile(profile))
        .map_err(|e| PreprocessError::ProfileIo(e.to_string()))
}

/// Load a profile written by [`write_profile`].
pub fn read_profile(path: &Path) -> Result<ReceiverProfile, PreprocessError> {
    let file = File::open(path).map_err(|e| PreprocessError::ProfileIo(e.to_string()))?;
    let data: ProfileFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| PreprocessError::ProfileIo(e.to_string()))?;
    let grid = SubcarrierGrid::from_indices(data.center_freq_hz, data.bandwidth_hz, data.sc_idx)
        .map_err(|e| PreprocessError::ProfileIo(e.to_string()))?;
    if data.amp.len() != grid.len() || data.phase.len() != grid.len() {
        return Err(PreprocessError::ProfileIo(format!(
            "profile arrays ({} amp, {} phase) do not match grid length {}",
            data.amp.len(),
            data.phase.len(),
            grid.len()
        )));
    }
    Ok(ReceiverProfile {
        receiver_id: data.receiver_id,
        grid,
        amp: data.amp,
        phase: data.phase,
        n_frames: data.n_frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::CsiFrame;
    use approx::assert_relative_eq;

    fn series_with_profile(amp_ripple: f64, phase_ripple: f64, n: usize) -> CsiSeries {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let frames = (0..n)
            .map(|i| {
                let csi = grid
                    .indices()
                    .iter()
                    .map(|&m| {
                        let u = f64::from(m) / 28.0;
                        Complex64::from_polar(
                            1.0 + amp_ripple * (2.0 * u).cos(),
                            phase_ripple * (3.0 * u).sin() + 0.2 * f64::from(m) + 0.5,
                        )
                    })
                    .collect();
                CsiFrame::new("dev", i as u64, i as u64 * 2000, -40.0, grid.clone(), csi)
                    .unwrap()
            })
            .collect();
        CsiSeries::new(frames).unwrap()
    }

    #[test]
    fn profile_amp_has_unit_mean_under_l1() {
        let s = series_with_profile(0.2, 0.1, 8);
        let p = extract_profile(&s, None).unwrap();
        let mean = p.amp.iter().sum::<f64>() / p.amp.len() as f64;
        assert_relative_eq!(mean, 1.0, max_relative = 1e-12);
        assert_eq!(p.n_frames, 8);
    }

    #[test]
    fn equalizing_by_the_own_profile_flattens_the_frame() {
        let s = series_with_profile(0.2, 0.15, 10);
        let p = extract_profile(&s, None).unwrap();
        // Detrend + normalize a frame the same way, then equalize: the
        // result must be flat (amp constant, phase residual ~0).
        let f = normalize_frame(
            &detrend_frame(&s.frames[0], DetrendMethod::Pads).unwrap(),
            &GainMethod::L1,
        )
        .unwrap();
        let eq = equalize_frame(&f, &p).unwrap();
        let amps = eq.amplitudes();
        let mean = amps.iter().sum::<f64>() / amps.len() as f64;
        for a in &amps {
            assert_relative_eq!(*a, mean, max_relative = 1e-6);
        }
        for z in &eq.csi {
            assert!(z.arg().abs() < 1e-6);
        }
    }

    #[test]
    fn identical_profiles_score_one() {
        let s = series_with_profile(0.2, 0.15, 5);
        let p1 = extract_profile(&s, None).unwrap();
        let p2 = extract_profile(&s, None).unwrap();
        let score = stability_score(&[p1, p2]).unwrap();
        assert_relative_eq!(score, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn dissimilar_profiles_score_below_one() {
        let s1 = series_with_profile(0.2, 0.15, 5);
        let s2 = series_with_profile(0.05, -0.4, 5);
        let p1 = extract_profile(&s1, None).unwrap();
        let p2 = extract_profile(&s2, None).unwrap();
        let score = stability_score(&[p1.clone(), p2]).unwrap();
        assert!(score < 0.999, "score {score}");
        let err = stability_score(&[p1]).unwrap_err();
        assert!(matches!(err, PreprocessError::NeedTwoProfiles { got: 1 }));
    }

    #[test]
    fn profile_round_trips_through_the_sidecar_file() {
        let s = series_with_profile(0.1, 0.1, 4);
        let p = extract_profile(&s, Some(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.json");
        write_profile(&p, &path).unwrap();
        let back = read_profile(&path).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn opposed_profiles_are_rejected() {
        let grid = SubcarrierGrid::ht20(2.412e9).unwrap();
        let base = ReceiverProfile {
            receiver_id: "a".into(),
            grid: grid.clone(),
            amp: vec![1.0; grid.len()],
            phase: vec![0.0; grid.len()],
            n_frames: 1,
        };
        let mut flipped = base.clone();
        flipped.phase = vec![std::f64::consts::PI; grid.len()];
        let err = stability_score(&[base, flipped]).unwrap_err();
        assert!(matches!(err, PreprocessError::NonPositiveSimilarity { .. }));
    }
}
