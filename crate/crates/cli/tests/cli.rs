use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use afm_cli::commands::{self, Execution};
use afm_cli::config::ExperimentConfig;
use afm_cli::verify::{self, SNAPSHOT_KEYS};
use afm_core::clip::ClipRegion;
use afm_core::Vector;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn afm(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_afm"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{
    "problem": {"id": "max_affine"},
    "optimizer": {"method": "afm", "variant": "yogi"},
    "schedule": {"family": "power", "eta0": 0.05, "p": 0.6},
    "noise": {"kind": "gaussian", "params": {"sigma": 0.1}},
    "iterations": 200,
    "stride": 50,
    "seeds": [3, 4]
}"#;

#[test]
fn run_writes_the_documented_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let (code, _, err) = afm(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");

    let text = fs::read_to_string(out.join("trajectory_seed3.jsonl")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    for (i, line) in lines.iter().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), SNAPSHOT_KEYS.len());
        for key in SNAPSHOT_KEYS {
            assert!(obj.contains_key(key), "missing {key}");
        }
        assert_eq!(obj["k"], 50 * i as u64);
        assert!(obj["t"].is_null());
        assert!(obj["gap"].is_f64());
    }
    let first = lines[0];
    let positions: Vec<usize> = SNAPSHOT_KEYS
        .iter()
        .map(|k| first.find(&format!("\"{k}\":")).unwrap())
        .collect();
    let sorted = {
        let mut p = positions.clone();
        p.sort_unstable();
        p
    };
    assert_eq!(positions, sorted);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["problem"], "max_affine");
    assert_eq!(summary["optimizer"], "yogi");
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(summary["seeds"].as_array().unwrap().len(), 2);
    assert_eq!(summary["seeds"][1]["trajectory"], "trajectory_seed4.jsonl");
    assert_eq!(summary["aggregate"]["runs"], 2);
}

#[test]
fn same_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let read = |sub: &str| {
        let out = dir.path().join(sub);
        let (code, _, err) = afm(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        fs::read(out.join("trajectory_seed4.jsonl")).unwrap()
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn parallel_matches_serial() {
    let cfg = ExperimentConfig::from_json(SMALL).unwrap();
    let p = cfg.problem.build().unwrap();
    let a = commands::execute(&cfg, p.as_ref(), Execution::Serial).unwrap();
    let b = commands::execute(&cfg, p.as_ref(), Execution::Parallel).unwrap();
    for ((sa, oa, _), (sb, ob, _)) in a.iter().zip(&b) {
        assert_eq!(sa, sb);
        assert_eq!(oa, ob);
    }
}

#[test]
fn seed_list_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let (code, _, err) = afm(&[
        "run",
        "--config",
        &cfg,
        "--seed-list",
        "7,8,9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    for s in [7, 8, 9] {
        assert!(out.join(format!("trajectory_seed{s}.jsonl")).exists());
    }
    assert!(!out.join("trajectory_seed3.jsonl").exists());
}

#[test]
fn sweep_has_one_row_per_point_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        "\"seeds\"",
        "\"grid\": {\"eta0\": [0.01, 0.05, 0.1], \"tau1\": [0.5, 1.0]}, \"seeds\"",
    );
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let (code, _, err) = afm(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let mut reader = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        [
            "eta0",
            "tau1",
            "tau2",
            "seed",
            "status",
            "final_f",
            "final_gap",
            "surrogate_gap",
            "stationary_dist"
        ]
    );
    assert_eq!(reader.records().count(), 12);
}

#[test]
fn empty_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("\"seeds\"", "\"grid\": {\"eta0\": []}, \"seeds\"");
    let cfg = write_config(dir.path(), &text);
    let (code, _, _) = afm(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(afm(&["run", "--config", missing.to_str().unwrap()]).0, 3);

    let cfg = write_config(dir.path(), "{\"problem\": ");
    assert_eq!(afm(&["run", "--config", &cfg]).0, 2);

    let constant = SMALL.replace(
        r#"{"family": "power", "eta0": 0.05, "p": 0.6}"#,
        r#"{"family": "constant", "eta0": 0.01}"#,
    );
    let cfg = write_config(dir.path(), &constant);
    let out = dir.path().join("out");
    let (code, _, err) = afm(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("eta_log_k_vanishes"), "{err}");
    let (code, _, err) = afm(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--override-schedule-check",
    ]);
    assert_eq!(code, 0, "{err}");

    let loose = SMALL.replace("\"yogi\"}", "\"adam\", \"tau2\": 5.0}");
    let cfg = write_config(dir.path(), &loose);
    let (code, _, err) = afm(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(err.contains("warning"), "{err}");
    let (code, _, _) = afm(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--strict",
    ]);
    assert_eq!(code, 2);

    // A file where the output directory should go.
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = blocker.join("out");
    assert_eq!(
        afm(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]).0,
        3
    );
}

#[test]
fn verify_fails_with_exit_one() {
    // The gap-monotonicity invariant does not hold, so verify reports it.
    let (code, stdout, _) = afm(&["verify", "--invariants-only"]);
    assert_eq!(code, 1);
    assert!(stdout.contains("PASS clip/nonexpansive"));
    assert!(stdout.contains("FAIL analysis/final_gap_nonincreasing"));
}

#[test]
fn simulate_di_writes_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = configs().join("di.json");
    let (code, stdout, err) = afm(&[
        "simulate-di",
        "--config",
        cfg.to_str().unwrap(),
        "--seed-list",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("violations 0"), "{stdout}");
    let text = fs::read_to_string(out.join("di_seed0.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["t"], 0.0);
    assert!(out.join("di_summary.json").exists());
}

#[test]
fn shipped_configs_parse_and_validate() {
    for name in ["l1_adam", "sweep", "di", "adamc_heavy_tail"] {
        let cfg = ExperimentConfig::load(&configs().join(format!("{name}.json"))).unwrap();
        cfg.validate(false, true).unwrap();
    }
}

/// Ball clip that always rescales to the sphere, dropping the `min(1, ·)`.
fn sphere_clip(g: &[f64], c: f64, region: ClipRegion) -> afm_core::Result<Vector> {
    match region {
        ClipRegion::Ball => {
            let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(g.iter()
                .map(|v| if n > 0.0 { v * c / n } else { 0.0 })
                .collect())
        }
        ClipRegion::Box => afm_core::clip::clip(g, c, region),
    }
}

#[test]
fn broken_clip_is_caught() {
    let good = verify::clip_checks(afm_core::clip::clip, 2000);
    assert!(good.iter().all(|c| c.passed), "{good:?}");
    let bad = verify::clip_checks(sphere_clip, 2000);
    let nonexpansive = bad.iter().find(|c| c.id == "clip/nonexpansive").unwrap();
    assert!(!nonexpansive.passed);
    assert!(!verify::a4_with(sphere_clip).passed);
}
