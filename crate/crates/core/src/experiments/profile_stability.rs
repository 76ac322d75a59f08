//! Profile stability: extract each receiver's static nonlinearity profile
//! from several independent sessions of the same scene and score how well
//! the profiles agree (mean cosine similarity of their complex factors).

use serde::Serialize;

use super::{setup, ArtifactWriter, ExperimentError};
use crate::config::PipelineConfig;
use crate::preprocess::{extract_profile, stability_score, ReceiverProfile};
use crate::receiver::distort;
use crate::rng::derive_seed;

/// Independent capture sessions per receiver.
const N_SESSIONS: usize = 5;

#[derive(Serialize)]
struct SessionRow {
    receiver: String,
    session: usize,
    tone: i32,
    amplitude: f64,
    phase_rad: f64,
}

#[derive(Serialize)]
struct StabilitySummary {
    receiver: String,
    n_sessions: usize,
    n_packets: usize,
    stability: f64,
}

pub(crate) fn run(
    config: &PipelineConfig,
    writer: &mut ArtifactWriter,
) -> Result<(), ExperimentError> {
    let scene = setup(config)?;

    let mut rows = Vec::new();
    let mut summaries = Vec::with_capacity(scene.models.len());
    for (i, model) in scene.models.iter().enumerate() {
        let mut profiles: Vec<ReceiverProfile> = Vec::with_capacity(N_SESSIONS);
        for session in 0..N_SESSIONS {
            let series = distort(
                &scene.ideal,
                model,
                derive_seed(scene.seed, &[i as u64, session as u64]),
            )?;
            profiles.push(extract_profile(&series, None)?);
        }

        for (session, profile) in profiles.iter().enumerate() {
            for (pos, &tone) in profile.grid.indices().iter().enumerate() {
                rows.push(SessionRow {
                    receiver: model.name.clone(),
                    session,
                    tone,
                    amplitude: profile.amp[pos],
                    phase_rad: profile.phase[pos],
                });
            }
        }
        summaries.push(StabilitySummary {
            receiver: model.name.clone(),
            n_sessions: N_SESSIONS,
            n_packets: scene.schedule.n_packets(),
            stability: stability_score(&profiles)?,
        });
    }

    writer.write_csv("profile_sessions.csv", &rows)?;
    writer.write_json("profile_stability_summary.json", &summaries)
}
