//! Time-of-flight sweep: the excess path length moves linearly through the
//! run while each receiver watches, and the per-packet delay estimate is
//! compared against the known truth — once on the raw capture and once
//! after equalizing with a profile extracted from a separate static
//! calibration capture of the same receiver.

use serde::Serialize;

use super::{setup, ArtifactWriter, ExperimentError};
use crate::config::PipelineConfig;
use crate::estimators::{compute_pdp, estimate_tof};
use crate::preprocess::{encode_profile, equalize_series, extract_profile};
use crate::receiver::distort;
use crate::rng::derive_seed;
use crate::schedule::{apply_precoding, make_schedule, ScheduleKind};

/// Packets in the internal static calibration capture.
const CALIBRATION_PACKETS: usize = 1000;

#[derive(Serialize)]
struct TofRow {
    seq: u64,
    ts_us: u64,
    truth_ns: f64,
    /// Raw-capture estimate; empty when no second path was resolvable.
    raw_ns: Option<f64>,
    raw_error_ns: Option<f64>,
    /// Equalized-capture estimate.
    equalized_ns: Option<f64>,
    equalized_error_ns: Option<f64>,
}

#[derive(Serialize)]
struct ProfileRow {
    tone: i32,
    amplitude: f64,
    phase_rad: f64,
}

#[derive(Serialize)]
struct TofSummary {
    receiver: String,
    n_frames: usize,
    raw_estimates: usize,
    equalized_estimates: usize,
    /// Mean |error| over the frames where both pipelines produced an
    /// estimate, so the comparison is paired.
    raw_mean_abs_error_ns: f64,
    equalized_mean_abs_error_ns: f64,
}

pub(crate) fn run(
    config: &PipelineConfig,
    writer: &mut ArtifactWriter,
) -> Result<(), ExperimentError> {
    let scene = setup(config)?;
    let threshold = config.estimator.pdp.threshold;

    // Static calibration stream: same channel, unit precoding.
    let calibration_schedule = make_schedule(
        &ScheduleKind::Constant {
            factor_re: 1.0,
            factor_im: 0.0,
        },
        CALIBRATION_PACKETS,
        config.schedule.rate_pps,
        &scene.grid,
        derive_seed(scene.seed, &[0xca1]),
        false,
    )?;
    let calibration_ideal = apply_precoding(&scene.channel, &calibration_schedule)?;

    let mut summaries = Vec::with_capacity(scene.models.len());
    for (i, model) in scene.models.iter().enumerate() {
        let calibration = distort(
            &calibration_ideal,
            model,
            derive_seed(scene.seed, &[i as u64, 1]),
        )?;
        let profile = extract_profile(&calibration, None)?;

        let series = distort(&scene.ideal, model, scene.receiver_seed(i))?;
        let equalized = equalize_series(&series, &profile)?;
        writer.write_series(&format!("capture_{}.ndjson", model.name), &series)?;

        let mut rows = Vec::with_capacity(series.len());
        let mut paired: Vec<(f64, f64)> = Vec::new();
        let mut raw_count = 0usize;
        let mut eq_count = 0usize;
        for (frame, frame_eq) in series.frames.iter().zip(&equalized.frames) {
            let truth_s = scene
                .schedule
                .excess_delay_s(frame.seq as usize)
                .expect("a two-path delay sweep knows its excess delay");
            let truth_ns = truth_s * 1e9;
            let raw = estimate_tof(&compute_pdp(frame)?, threshold)?;
            let eq = estimate_tof(&compute_pdp(frame_eq)?, threshold)?;
            let raw_ns = raw.map(|s| s * 1e9);
            let eq_ns = eq.map(|s| s * 1e9);
            raw_count += raw_ns.is_some() as usize;
            eq_count += eq_ns.is_some() as usize;
            if let (Some(r), Some(e)) = (raw_ns, eq_ns) {
                paired.push(((r - truth_ns).abs(), (e - truth_ns).abs()));
            }
            rows.push(TofRow {
                seq: frame.seq,
                ts_us: frame.ts_us,
                truth_ns,
                raw_ns,
                raw_error_ns: raw_ns.map(|v| v - truth_ns),
                equalized_ns: eq_ns,
                equalized_error_ns: eq_ns.map(|v| v - truth_ns),
            });
        }

        let profile_rows: Vec<ProfileRow> = profile
            .grid
            .indices()
            .iter()
            .zip(profile.amp.iter().zip(&profile.phase))
            .map(|(&tone, (&amplitude, &phase_rad))| ProfileRow {
                tone,
                amplitude,
                phase_rad,
            })
            .collect();

        writer.write_csv(&format!("tof_track_{}.csv", model.name), &rows)?;
        writer.write_csv(&format!("tof_profile_{}.csv", model.name), &profile_rows)?;
        // The same profile as a loadable sidecar, so captures from this or
        // other runs can be equalized externally.
        writer.put(
            &format!("profile_{}.json", model.name),
            encode_profile(&profile).as_bytes(),
        )?;

        let n_paired = paired.len().max(1) as f64;
        summaries.push(TofSummary {
            receiver: model.name.clone(),
            n_frames: series.len(),
            raw_estimates: raw_count,
            equalized_estimates: eq_count,
            raw_mean_abs_error_ns: paired.iter().map(|p| p.0).sum::<f64>() / n_paired,
            equalized_mean_abs_error_ns: paired.iter().map(|p| p.1).sum::<f64>() / n_paired,
        });
    }
    writer.write_json("tof_summary.json", &summaries)
}
