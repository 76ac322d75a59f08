//! Column documentation for every CSV artifact the runners emit. A run's
//! output directory gets a `csv_schema.json` covering exactly the CSV files
//! it wrote, so downstream tooling never has to guess a column's meaning.

use serde::Serialize;

#[derive(Serialize)]
pub(crate) struct ColumnDoc {
    pub name: &'static str,
    pub description: &'static str,
}

#[derive(Serialize)]
pub(crate) struct SchemaEntry {
    /// File name or `*` pattern the entry applies to.
    pub pattern: &'static str,
    pub columns: &'static [ColumnDoc],
}

const fn col(name: &'static str, description: &'static str) -> ColumnDoc {
    ColumnDoc { name, description }
}

pub(crate) const SCHEMA: &[SchemaEntry] = &[
    SchemaEntry {
        pattern: "agc_sweep_*.csv",
        columns: &[
            col("seq", "packet sequence number"),
            col("ts_us", "capture timestamp, microseconds"),
            col("sweep_db", "injected sweep level for this packet, dB"),
            col("input_db", "true pre-receiver input power, dB"),
            col("rssi_db", "receiver-reported RSSI (quantized pre-gain power), dB"),
            col("raw_mean_amp", "mean reported amplitude, including the AGC gain"),
            col(
                "rssi_rescaled_mean_amp",
                "mean amplitude after rescaling the frame to its RSSI power",
            ),
            col("l1_mean_amp", "mean amplitude after l1 normalization (1 by construction)"),
        ],
    },
    SchemaEntry {
        pattern: "doppler_windows_*.csv",
        columns: &[
            col("variant", "preprocessing variant: detrend_only or gain_detrend"),
            col("start_ts_us", "first frame timestamp in the window, microseconds"),
            col("end_ts_us", "last frame timestamp in the window, microseconds"),
            col("n_frames", "frames in the window"),
            col("velocity_mps", "estimated path velocity, m/s"),
            col("error_mps", "estimate minus ground-truth velocity, m/s"),
        ],
    },
    SchemaEntry {
        pattern: "tof_track_*.csv",
        columns: &[
            col("seq", "packet sequence number"),
            col("ts_us", "capture timestamp, microseconds"),
            col("truth_ns", "true excess delay of the moving path, ns"),
            col("raw_ns", "delay estimate on the raw capture, ns (empty: unresolved)"),
            col("raw_error_ns", "raw estimate minus truth, ns"),
            col("equalized_ns", "delay estimate after profile equalization, ns"),
            col("equalized_error_ns", "equalized estimate minus truth, ns"),
        ],
    },
    SchemaEntry {
        pattern: "tof_profile_*.csv",
        columns: &[
            col("tone", "subcarrier index"),
            col("amplitude", "extracted profile amplitude (mean-normalized)"),
            col("phase_rad", "extracted profile phase, radians"),
        ],
    },
    SchemaEntry {
        pattern: "profile_sessions.csv",
        columns: &[
            col("receiver", "receiver name"),
            col("session", "independent capture session index"),
            col("tone", "subcarrier index"),
            col("amplitude", "extracted profile amplitude"),
            col("phase_rad", "extracted profile phase, radians"),
        ],
    },
    SchemaEntry {
        pattern: "noise_per_tone_*.csv",
        columns: &[
            col("tone", "subcarrier index"),
            col("amp_std", "amplitude standard deviation"),
            col("amp_excess_kurtosis", "amplitude excess kurtosis"),
            col("amp_std_filtered", "amplitude std after Mahalanobis filtering"),
            col(
                "amp_excess_kurtosis_filtered",
                "amplitude excess kurtosis after Mahalanobis filtering",
            ),
            col("phase_std", "phase-residual standard deviation, radians"),
        ],
    },
    SchemaEntry {
        pattern: "faithfulness_*.csv",
        columns: &[
            col("tone", "subcarrier index"),
            col("anchor", "true when the schedule leaves this tone untouched"),
            col("mean_abs_amp_deviation", "mean |reported minus injected| amplitude"),
            col(
                "mean_abs_phase_deviation_rad",
                "mean |reported minus injected| phase, radians (wrapped)",
            ),
        ],
    },
    SchemaEntry {
        pattern: "sensitivity_*.csv",
        columns: &[
            col("variant", "feature variant: raw or l1"),
            col("tone", "subcarrier index"),
            col(
                "mi_nats",
                "mutual information between the swept parameter and this tone's amplitude, nats",
            ),
        ],
    },
    SchemaEntry {
        pattern: "cross_device_matrix.csv",
        columns: &[
            col("seed_index", "replication index (seed offset)"),
            col("variant", "feature-pipeline variant name"),
            col("train", "receiver the classifier was fitted on"),
            col("test", "receiver the classifier was tested on"),
            col("mean_accuracy", "mean accuracy of the cell"),
            col("ci_lo", "lower BCa bootstrap confidence bound"),
            col("ci_hi", "upper BCa bootstrap confidence bound"),
            col("ci_degenerate", "true when the interval collapsed to a point"),
        ],
    },
    SchemaEntry {
        pattern: "confusion_*.csv",
        columns: &[
            col("true_class", "true class label"),
            col("predicted_<c>", "times the class was predicted as class c"),
        ],
    },
];

/// Does `name` match `pattern` (one optional `*` wildcard)?
pub(crate) fn matches(pattern: &str, name: &str) -> bool {
    match pattern.split_once('*') {
        Some((prefix, suffix)) => {
            name.len() >= prefix.len() + suffix.len()
                && name.starts_with(prefix)
                && name.ends_with(suffix)
        }
        None => pattern == name,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patterns_match_prefix_and_suffix() {
        assert!(matches("agc_sweep_*.csv", "agc_sweep_x310.csv"));
        assert!(matches("profile_sessions.csv", "profile_sessions.csv"));
        assert!(!matches("agc_sweep_*.csv", "agc_sweep_.json"));
        assert!(!matches("tof_track_*.csv", "tof_profile_x310.csv"));
        // The name must be long enough to contain both halves.
        assert!(!matches("confusion_*.csv", "confusion.csv"));
    }
}
