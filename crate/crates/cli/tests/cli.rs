use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bess(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bess"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = bess(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn checksums(dir: &Path) -> Vec<(String, String)> {
    let manifest = read_json(dir.join("manifest.json"));
    manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| {
            (
                a["path"].as_str().unwrap().to_string(),
                a["sha256"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

/// A two-day scenario keeps training runs short.
fn short_scenario(dir: &Path) -> PathBuf {
    let base = dir.join("base.json");
    std::fs::write(
        &base,
        r#"{"grid": {"slot_length_hours": 1.0, "slot_count": 48}, "city": null,
            "weather_calendar": ["OL", "CH"]}"#,
    )
    .unwrap();
    let out = dir.join("scn");
    ok(&["--out", path_str(&out), "--config", path_str(&base), "scenario", "--bs", "office"]);
    out.join("scenario.json")
}

#[test]
fn scenario_writes_calibrated_month() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    ok(&["--out", path_str(&out), "scenario", "--bs", "resident", "--city", "shanghai"]);
    let text = std::fs::read_to_string(out.join("demand.csv")).unwrap();
    let values: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 720);
    let mean = values.iter().sum::<f64>() / 720.0;
    let peak = values.iter().copied().fold(0.0, f64::max);
    assert!((mean - 44.6 / (0.049 * 720.0)).abs() < 1e-9);
    assert!((peak - 23.1 / 16.08).abs() < 1e-9);
    let cfg = read_json(out.join("scenario.json"));
    assert_eq!(cfg["weather_calendar"].as_array().unwrap().len(), 30);
    assert_eq!(checksums(&out).len(), 5);
}

#[test]
fn custom_calendar_length_is_checked() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("thirty.json");
    let codes: Vec<&str> = ["CH", "PM", "OL"].iter().cycle().take(30).copied().collect();
    std::fs::write(&good, serde_json::to_string(&codes).unwrap()).unwrap();
    ok(&["--out", path_str(&tmp.path().join("a")), "scenario", "--calendar", path_str(&good)]);

    let bad = tmp.path().join("short.json");
    std::fs::write(&bad, serde_json::to_string(&codes[..29]).unwrap()).unwrap();
    let out = bess(&["--out", path_str(&tmp.path().join("b")), "scenario", "--calendar", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_names_are_validation_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = path_str(tmp.path());
    assert_eq!(bess(&["--out", o, "scenario", "--city", "atlantis"]).status.code(), Some(1));
    assert_eq!(bess(&["--out", o, "evaluate", "--policy", "random"]).status.code(), Some(1));
    assert_eq!(bess(&["--out", o, "frobnicate"]).status.code(), Some(1));
}

#[test]
fn missing_checkpoint_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bess(&[
        "--out",
        path_str(tmp.path()),
        "evaluate",
        "--policy",
        "dqn",
        "--checkpoint",
        path_str(&tmp.path().join("absent.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_episode_training_writes_untrained_net() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = short_scenario(tmp.path());
    let out = tmp.path().join("t");
    ok(&["--out", path_str(&out), "--seed", "4", "train", "--scenario", path_str(&scn), "--episodes", "0"]);
    let ck = read_json(out.join("checkpoint.json"));
    assert_eq!(ck["sizes"], serde_json::json!([8, 64, 64, 9]));
    let log = std::fs::read_to_string(out.join("training_log.csv")).unwrap();
    assert_eq!(log.trim(), "episode,total_cost,total_reward,epsilon,loss_mean");
}

#[test]
fn commands_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = short_scenario(tmp.path());
    let run = |tag: &str| {
        let t = tmp.path().join(format!("train-{tag}"));
        ok(&["--out", path_str(&t), "--seed", "11", "train", "--scenario", path_str(&scn), "--episodes", "4", "--batch", "16"]);
        let e = tmp.path().join(format!("eval-{tag}"));
        ok(&[
            "--out",
            path_str(&e),
            "evaluate",
            "--scenario",
            path_str(&scn),
            "--policy",
            "dqn",
            "--checkpoint",
            path_str(&t.join("checkpoint.json")),
        ]);
        (checksums(&t), checksums(&e))
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn evaluate_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = short_scenario(tmp.path());
    let grid = tmp.path().join("grid");
    let greedy = tmp.path().join("greedy");
    ok(&["--out", path_str(&grid), "evaluate", "--scenario", path_str(&scn), "--policy", "grid_only"]);
    ok(&["--out", path_str(&greedy), "evaluate", "--scenario", path_str(&scn), "--policy", "greedy"]);

    let eval = read_json(grid.join("evaluation.json"));
    assert_eq!(eval["row"]["ratio"].as_f64(), Some(0.0));
    let eval = read_json(greedy.join("evaluation.json"));
    let row = &eval["row"];
    let sum = row["energy"].as_f64().unwrap() + row["demand"].as_f64().unwrap() + row["investment"].as_f64().unwrap();
    assert!((sum - row["total"].as_f64().unwrap()).abs() < 1e-12);

    let slots = std::fs::read_to_string(greedy.join("slots.csv")).unwrap();
    assert!(slots.starts_with("slot,d,g,b,tilde_b,p,p_max,soc,soe,dod,ce,cd,cu,reward,curtailed\n"));
    assert_eq!(slots.lines().count(), 49);

    let rep = tmp.path().join("rep");
    ok(&["--out", path_str(&rep), "report", path_str(&greedy)]);
    let table = std::fs::read_to_string(rep.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    let roi = std::fs::read_to_string(rep.join("roi.csv")).unwrap();
    let fields: Vec<&str> = roi.lines().nth(1).unwrap().split(',').collect();
    let saving: f64 = fields[3].parse().unwrap();
    let value: f64 = fields[4].parse().unwrap();
    assert!((value - 12.0 * saving / 11160.0).abs() < 1e-12);
    let classes = std::fs::read_to_string(rep.join("supply_by_class.csv")).unwrap();
    assert_eq!(classes.lines().count(), 1 + 48);

    ok(&["--out", path_str(&tmp.path().join("rep2")), "report", path_str(&greedy), path_str(&grid)]);
}
