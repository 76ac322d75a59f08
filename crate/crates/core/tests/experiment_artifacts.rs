//! End-to-end artifact checks for every experiment runner: each one must
//! validate its config, execute, and leave a coherent, manifested artifact
//! directory behind, with headline numbers pointing the right way.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use csilab::config::config_from_value;
use csilab::experiments::run_experiment;

fn read_json(dir: &Path, name: &str) -> Value {
    let bytes = fs::read(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"));
    serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("parsing {name}: {e}"))
}

fn run(config: Value) -> (tempfile::TempDir, Vec<String>) {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = config;
    config["output_dir"] = json!(tmp.path().to_str().unwrap());
    let config = config_from_value(config).expect("test config parses");
    let summary = run_experiment(&config).expect("experiment runs");
    let manifest = read_json(tmp.path(), "manifest.json");
    let listed: Vec<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap().to_string())
        .collect();
    assert_eq!(listed, summary.files, "manifest and summary disagree");
    for name in &listed {
        assert!(tmp.path().join(name).exists(), "{name} listed but missing");
    }
    (tmp, listed)
}

#[test]
fn agc_sweep_shows_l1_flattening_the_gain_wobble() {
    let (dir, files) = run(json!({
        "experiment": "agc_sweep",
        "seed": 21,
        "schedule": {
            "kind": { "kind": "gain_sweep", "depth_db": 6.0, "period_s": 0.5 },
            "n_packets": 250,
            "rate_pps": 250.0
        },
        "receivers": [ { "preset": "x310" }, { "preset": "qca9300" } ]
    }));
    assert!(files.contains(&"agc_sweep_x310.csv".to_string()));
    assert!(files.contains(&"capture_qca9300.ndjson".to_string()));

    let summary = read_json(dir.path(), "agc_sweep_summary.json");
    for entry in summary.as_array().unwrap() {
        let raw = entry["raw_amp_std"].as_f64().unwrap();
        let l1 = entry["l1_amp_std"].as_f64().unwrap();
        assert!(
            l1 < raw / 5.0,
            "{}: l1 std {l1} should collapse the swept raw std {raw}",
            entry["receiver"]
        );
        assert!(entry["mean_abs_rssi_error_db"].as_f64().unwrap().is_finite());
    }
}

#[test]
fn profile_stability_scores_static_sessions_near_one() {
    let (dir, files) = run(json!({
        "experiment": "profile_stability",
        "seed": 22,
        "schedule": {
            "kind": { "kind": "constant" },
            "n_packets": 400,
            "rate_pps": 500.0
        },
        "receivers": [ { "preset": "x310" }, { "preset": "esp1" } ]
    }));
    assert!(files.contains(&"profile_sessions.csv".to_string()));

    let summary = read_json(dir.path(), "profile_stability_summary.json");
    for entry in summary.as_array().unwrap() {
        let s = entry["stability"].as_f64().unwrap();
        assert!(
            (0.9..=1.0).contains(&s),
            "{}: stability {s} out of the static-session range",
            entry["receiver"]
        );
        assert_eq!(entry["n_sessions"], 5);
    }
}

#[test]
fn noise_run_reports_tail_reduction_after_filtering() {
    let (dir, files) = run(json!({
        "experiment": "noise",
        "seed": 23,
        "schedule": {
            "kind": { "kind": "constant" },
            "n_packets": 400,
            "rate_pps": 500.0
        },
        "receivers": [ {
            "preset": "asus1",
            "noise": { "amp_std": 0.015, "lag_corr": 0.0, "outlier_prob": 0.02, "outlier_scale": 20.0 }
        } ]
    }));
    assert!(files.contains(&"noise_per_tone_asus1.csv".to_string()));

    let summary = read_json(dir.path(), "noise_summary.json");
    let entry = &summary.as_array().unwrap()[0];
    let before = entry["amplitude"]["excess_kurtosis"].as_f64().unwrap();
    let after = entry["amplitude_filtered"]["excess_kurtosis"].as_f64().unwrap();
    assert!(
        after < before,
        "filtering should shrink the tail: {before} -> {after}"
    );
    let removed = entry["removed_frames"].as_u64().unwrap();
    assert!(removed < entry["n_frames"].as_u64().unwrap());
}

#[test]
fn faithfulness_run_reports_small_deviation_for_a_clean_receiver() {
    let (dir, files) = run(json!({
        "experiment": "faithfulness",
        "seed": 24,
        "schedule": {
            "kind": {
                "kind": "single_tone",
                "tone": 7,
                "sweep": { "quantity": "amplitude", "lo": 0.5, "hi": 1.5, "shape": "linear" }
            },
            "n_packets": 200,
            "rate_pps": 250.0
        },
        "receivers": [ { "preset": "x310" } ]
    }));
    assert!(files.contains(&"faithfulness_x310.csv".to_string()));

    let summary = read_json(dir.path(), "faithfulness_summary.json");
    let entry = &summary.as_array().unwrap()[0];
    let amp_dev = entry["mean_amp_deviation"].as_f64().unwrap();
    assert!(
        amp_dev < 0.05,
        "a calibrated receiver should track the injected response, got {amp_dev}"
    );
}

#[test]
fn sensitivity_run_concentrates_information_on_the_swept_tone() {
    let (dir, files) = run(json!({
        "experiment": "sensitivity",
        "seed": 25,
        "schedule": {
            "kind": {
                "kind": "single_tone",
                "tone": -5,
                "sweep": { "quantity": "amplitude", "lo": 0.6, "hi": 1.4, "shape": "random" }
            },
            "n_packets": 150,
            "rate_pps": 250.0
        },
        "receivers": [ { "preset": "x310" } ]
    }));
    assert!(files.contains(&"sensitivity_x310.csv".to_string()));

    let summary = read_json(dir.path(), "sensitivity_summary.json");
    let entry = &summary.as_array().unwrap()[0];
    assert_eq!(entry["swept_tone"], -5);
    for variant in entry["variants"].as_array().unwrap() {
        let at_swept = variant["mi_at_swept_tone"].as_f64().unwrap();
        let max_other = variant["max_mi_other_tones"].as_f64().unwrap();
        assert!(
            at_swept > max_other,
            "{}: MI {at_swept} at the swept tone should dominate {max_other}",
            variant["variant"]
        );
    }
}

#[test]
fn cross_device_run_shows_l1_transfer_beating_raw() {
    let (dir, files) = run(json!({
        "experiment": "cross_device",
        "seed": 26,
        "receivers": [
            { "preset": "x310" },
            { "preset": "qca9300", "drop_prob": 0.0 }
        ],
        "eval": {
            "n_classes": 2,
            "n_per_class": 25,
            "n_seeds": 2,
            "variants": ["raw", "l1"]
        }
    }));
    assert!(files.contains(&"cross_device_matrix.csv".to_string()));
    assert!(files.contains(&"cross_device_reports.json".to_string()));

    let summary = read_json(dir.path(), "cross_device_summary.json");
    assert_eq!(summary["n_seeds"], 2);
    let variants = summary["variants"].as_array().unwrap();
    let median = |name: &str| -> f64 {
        variants
            .iter()
            .find(|v| v["variant"] == name)
            .unwrap_or_else(|| panic!("variant {name} missing"))["median_off_diagonal"]
            .as_f64()
            .unwrap()
    };
    assert!(
        median("l1") >= median("raw"),
        "per-packet normalization should not hurt transfer: raw {} vs l1 {}",
        median("raw"),
        median("l1")
    );

    // 2 seeds x 2 variants x 4 ordered train/test pairs.
    let matrix = fs::read_to_string(dir.path().join("cross_device_matrix.csv")).unwrap();
    assert_eq!(matrix.lines().count(), 1 + 16);
}
