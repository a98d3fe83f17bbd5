use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn teamtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teamtrack")).args(args).env_remove("TEAMTRACK_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth_light(dir: &Path) {
    let o = teamtrack(&["--quiet", "synth", "--preset", "light", "-o", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

fn write_config(dir: &Path, seq: &Path, prompts: &str) -> String {
    let path = dir.join("run.json");
    let text = format!(
        r#"{{"scenario": {{"sequence": {seq:?}}}, "prompts": {prompts}, "output": {out:?}}}"#,
        seq = seq.to_str().unwrap(),
        out = dir.join("out").to_str().unwrap()
    );
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const LIGHT_PROMPTS: &str = r#"[{"x": 70, "y": 130, "team": "team1"}, {"x": 150, "y": 112, "team": "team2"}]"#;

#[test]
fn synth_writes_frames_and_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("light");
    let o = teamtrack(&["synth", "--preset", "light", "-o", seq.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("125 frames and 250 ground-truth rows"));
    let ppm =
        fs::read_dir(&seq).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "ppm"));
    assert_eq!(ppm.count(), 125);
    assert_eq!(fs::read_to_string(seq.join("gt.jsonl")).unwrap().lines().count(), 250);
}

#[test]
fn synth_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = teamtrack(&["synth", "--preset", "crowded", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("light, heavy, longterm"), "{}", stderr(&o));

    let file = dir.path().join("plain-file");
    fs::write(&file, "x").unwrap();
    let o = teamtrack(&["synth", "--preset", "light", "-o", file.join("sub").to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));

    let bad_spec = dir.path().join("spec.json");
    fs::write(&bad_spec, r#"{"name": "x"}"#).unwrap();
    let o = teamtrack(&["synth", "--spec", bad_spec.to_str().unwrap(), "-o", dir.path().join("s").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn track_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    synth_light(&seq);
    let cfg = write_config(dir.path(), &seq, LIGHT_PROMPTS);
    let o = teamtrack(&["track", "--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    let track = fs::read_to_string(out.join("track.jsonl")).unwrap();
    assert_eq!(track.lines().count(), 250);
    let first: serde_json::Value = serde_json::from_str(track.lines().next().unwrap()).unwrap();
    for key in ["frame", "player", "team", "status", "bbox", "confidence", "ms"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    assert!(out.join("events.jsonl").exists());

    let log = out.join("track.jsonl");
    let o = teamtrack(&["eval", log.to_str().unwrap(), seq.join("gt.jsonl").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    for section in ["Computational Performance", "Tracking Accuracy", "Robustness", "Occlusion Events"] {
        assert!(table.contains(section), "{table}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["tsr"], 100.0);
    assert_eq!(report["performance"]["memory_mb"], serde_json::Value::Null);
}

#[test]
fn track_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    synth_light(&seq);

    let cfg = write_config(dir.path(), &seq, r#"[{"x": 900, "y": 10, "team": "team1"}]"#);
    let o = teamtrack(&["track", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("prompt 0 at (900, 10)"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), &seq, r#"[{"x": 5, "y": 5, "team": "team1"}]"#);
    let o = teamtrack(&["track", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("prompt 0"), "{}", stderr(&o));

    fs::remove_file(seq.join("gt.jsonl")).unwrap();
    let cfg = write_config(dir.path(), &seq, LIGHT_PROMPTS);
    let o = teamtrack(&["track", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("oracle segmenter"), "{}", stderr(&o));

    let extra = dir.path().join("extra.json");
    fs::write(&extra, r#"{"scenario": {"preset": "light"}, "prompts": [], "output": "o", "speed": 2}"#).unwrap();
    assert_eq!(code(&teamtrack(&["track", "--config", extra.to_str().unwrap()])), 2);
    assert_eq!(code(&teamtrack(&["track", "--config", dir.path().join("none.json").to_str().unwrap()])), 1);
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, format!(r#"{{"scenario": {{"preset": "light"}}, "prompts": {LIGHT_PROMPTS}, "output": "o"}}"#))
        .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_teamtrack"))
        .args(["track", "--config", cfg.to_str().unwrap()])
        .env("TEAMTRACK_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("TEAMTRACK_THREADS"));
    let o = Command::new(env!("CARGO_BIN_EXE_teamtrack"))
        .args(["--quiet", "track", "--config", cfg.to_str().unwrap()])
        .env("TEAMTRACK_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    assert!(fs::read_to_string(dir.path().join("o/run.json")).unwrap().contains("\"light\""));
}

#[test]
fn eval_errors() {
    let dir = tempfile::tempdir().unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden");
    // a ground truth one frame short of the log
    let gt: Vec<&str> = Vec::from_iter(include_str!("fixtures/golden/gt.jsonl").lines());
    let short = dir.path().join("short.jsonl");
    fs::write(&short, gt[..gt.len() - 2].join("\n")).unwrap();
    let o = teamtrack(&[
        "eval",
        golden.join("track.jsonl").to_str().unwrap(),
        short.to_str().unwrap(),
        "-o",
        dir.path().join("r.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let o = teamtrack(&["eval", dir.path().join("missing.jsonl").to_str().unwrap(), short.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn golden_report_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden");
    let report = dir.path().join("report.json");
    let o = teamtrack(&[
        "--quiet",
        "eval",
        golden.join("track.jsonl").to_str().unwrap(),
        golden.join("gt.jsonl").to_str().unwrap(),
        "-o",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(report).unwrap(), fs::read(golden.join("report.json")).unwrap());
}

#[test]
fn repro_runs_and_validates_its_argument() {
    let dir = tempfile::tempdir().unwrap();
    let o = teamtrack(&["repro", "longterm", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("PASS off-screen duration 15"), "{out}");
    assert!(!out.contains("FAIL"));
    assert_eq!(code(&teamtrack(&["repro", "derby"])), 2);
}
