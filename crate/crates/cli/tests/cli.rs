use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lanewatch(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lanewatch"))
        .args(args)
        .current_dir(dir)
        .env_remove("LANEWATCH_SEED")
        .output()
        .unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/golden").join(name)
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn help_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = lanewatch(&["run", "--help"], dir.path());
    let help = text(&out.stdout);
    for needle in ["--csv-trim-zeros", "--lenient", "--config", "(default 0.3)", "[behavior.oscillation_window]"] {
        assert!(help.contains(needle), "missing {needle}");
    }
    assert!(text(&lanewatch(&["simulate", "--help"], dir.path()).stdout).contains("--kind"));
}

#[test]
fn run_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let det = fixture("detections.jsonl");
    let lane = fixture("lane.json");
    let out = lanewatch(
        &["run", "--detections", det.to_str().unwrap(), "--lane-truth", lane.to_str().unwrap(), "--csv", "o.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(
        text(&out.stdout).trim(),
        "frames processed: 486, tracks created: 1, alarms fired: distracted=0 impaired=1"
    );
    let csv = fs::read_to_string(dir.path().join("o.csv")).unwrap();
    assert!(csv.ends_with("485,0,car,915,579,0.20,1,Steady,3,IMPAIRED DRIVER AHEAD\n"));
}

#[test]
fn missing_detection_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let lane = fixture("lane.json");
    let out = lanewatch(
        &["run", "--detections", "nope.jsonl", "--lane-truth", lane.to_str().unwrap(), "--csv", "o.csv"],
        dir.path(),
    );
    assert!(!out.status.success());
    let err = text(&out.stderr);
    assert!(err.contains("I/O error") && err.contains("nope.jsonl"), "{err}");
}

#[test]
fn invalid_parameter_fails_before_processing() {
    let dir = tempfile::tempdir().unwrap();
    let det = fixture("detections.jsonl");
    let lane = fixture("lane.json");
    let out = lanewatch(
        &[
            "run", "--detections", det.to_str().unwrap(), "--lane-truth", lane.to_str().unwrap(),
            "--csv", "o.csv", "--alpha", "1.5",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("invalid config"));
    assert!(!dir.path().join("o.csv").exists());
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |n: &str| {
        vec![
            "simulate".to_string(), "--kind".into(), "impaired".into(), "--frames".into(), "400".into(),
            "--amplitude".into(), "30".into(), "--period".into(), "120".into(), "--seed".into(), "7".into(),
            "--noise".into(), "1".into(), "--out-detections".into(), format!("{n}.jsonl"),
            "--out-lane".into(), format!("{n}.json"),
        ]
    };
    for n in ["a", "b"] {
        let a = args(n);
        let out = lanewatch(&a.iter().map(String::as_str).collect::<Vec<_>>(), dir.path());
        assert!(out.status.success(), "{}", text(&out.stderr));
    }
    let read = |f: &str| fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.jsonl"), read("b.jsonl"));
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(text(&read("a.jsonl")).lines().count(), 400);
}

#[test]
fn nominal_without_noise_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let out = lanewatch(
        &["simulate", "--kind", "nominal", "--noise", "0", "--frames", "20", "--out-detections", "n.jsonl"],
        dir.path(),
    );
    assert!(out.status.success());
    let log = fs::read_to_string(dir.path().join("n.jsonl")).unwrap();
    let xs: Vec<f64> = log
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["bbox"][0].as_f64().unwrap())
        .collect();
    assert!(xs.iter().all(|&x| x == xs[0]));
}

#[test]
fn invalid_scenario_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = lanewatch(
        &["simulate", "--kind", "impaired", "--period", "1", "--out-detections", "x.jsonl"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("period"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("lw.toml"),
        format!(
            "[input]\ndetections = {:?}\nlane_truth = {:?}\n\n[output]\ncsv = \"from_file.csv\"\ncsv_trim_zeros = true\n\n\
             [behavior]\nsign_change_limit = 4\n",
            fixture("detections.jsonl"),
            fixture("lane.json")
        ),
    )
    .unwrap();
    let out = lanewatch(&["--config", "lw.toml", "run"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("from_file.csv")).unwrap();
    assert!(csv.ends_with("485,0,car,915,579,0.2,1,Steady,3,\n"), "{csv}");

    let out = lanewatch(&["run", "--config", "lw.toml", "--csv", "flag.csv", "--sign-change-limit", "3"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("flag.csv")).unwrap();
    assert!(csv.ends_with("485,0,car,915,579,0.2,1,Steady,3,IMPAIRED DRIVER AHEAD\n"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[behavior]\nlateral_windw = 30\n").unwrap();
    let out = lanewatch(&["--config", "bad.toml", "run"], dir.path());
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("bad.toml"));
}

#[test]
fn seed_environment_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), "[scenario]\nseed = 1\nnoise_px = 2.0\nframes = 30\n").unwrap();
    let sim = |env: Option<&str>, out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_lanewatch"));
        cmd.args(["--config", "s.toml", "simulate", "--out-detections", out]).current_dir(dir.path());
        match env {
            Some(v) => cmd.env("LANEWATCH_SEED", v),
            None => cmd.env_remove("LANEWATCH_SEED"),
        };
        assert!(cmd.output().unwrap().status.success());
        fs::read(dir.path().join(out)).unwrap()
    };
    let file_seed = sim(None, "a.jsonl");
    let env_seed = sim(Some("99"), "b.jsonl");
    assert_ne!(file_seed, env_seed);
    let out = lanewatch(&["simulate", "--seed", "99", "--noise", "2", "--frames", "30", "--out-detections", "c.jsonl"], dir.path());
    assert!(out.status.success());
    assert_eq!(env_seed, fs::read(dir.path().join("c.jsonl")).unwrap());
}
