use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spagent"));
    for var in ["SPAGENT_SEED", "SPAGENT_PROVIDER", "SPAGENT_OUTPUT", "SPAGENT_BUDGET", "RUST_LOG"] {
        c.env_remove(var);
    }
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("spagent.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn plan_config(dir: &Path) -> PathBuf {
    write_config(
        dir,
        &format!(
            "[provider]\nkind = \"scripted\"\nfixture = {:?}\n[paths]\nknowledge = {:?}\noutput = \"out\"\n",
            fixture("plan_fixture.json"),
            fixture("plan_knowledge.jsonl")
        ),
    )
}

#[test]
fn scripted_plan_dispatches_tiers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = plan_config(dir.path());
    let request = fixture("plan_request.json");
    let args = ["--config", cfg.to_str().unwrap(), "plan", "--request", request.to_str().unwrap()];
    let o = run(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report_path = dir.path().join("out/plan_report.json");
    let report = read_json(&report_path);
    let subtasks = report["details"]["run"]["chain"]["subtasks"].as_array().unwrap();
    let tiers: Vec<&str> = subtasks.iter().map(|s| s["complexity"].as_str().unwrap()).collect();
    assert_eq!(tiers, ["Simple", "Moderate", "Complex"]);
    let calls: Vec<u64> =
        subtasks.iter().map(|s| s["solution"]["retrieval_calls"].as_u64().unwrap()).collect();
    assert_eq!(calls[0], 0);
    assert_eq!(calls[1], 1);
    assert!((1..=3).contains(&calls[2]));
    assert_eq!(report["ledger"]["chat.rate-complexity"], 3);

    let first = std::fs::read(&report_path).unwrap();
    assert_eq!(code(&run(dir.path(), &args)), 0);
    assert_eq!(std::fs::read(&report_path).unwrap(), first);
}

#[test]
fn missing_knowledge_path_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[paths]\nknowledge = \"missing.jsonl\"\n");
    let request = fixture("plan_request.json");
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "plan", "--request", request.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("paths.knowledge"));
}

#[test]
fn aborted_plan_writes_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    std::fs::write(
        &script,
        r#"{"entries": [{"matcher": {"contains": "Task: decompose"}, "response": "1. a (depends: none)"}]}"#,
    )
    .unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("[provider]\nkind = \"scripted\"\nfixture = {script:?}\n[paths]\noutput = \"out\"\n"),
    );
    let request = fixture("plan_request.json");
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "plan", "--request", request.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let report = read_json(&dir.path().join("out/plan_report.json"));
    assert_eq!(report["status"], "aborted");
    assert_eq!(report["details"]["run"]["outcome"]["status"], "aborted");
}

/// Generates data once per test; cheap enough to repeat.
fn gen_data(dir: &Path, out: &str) -> Output {
    run(dir, &["--out-dir", out, "gen-data"])
}

#[test]
fn gen_data_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&gen_data(dir.path(), "a")), 0);
    assert_eq!(code(&gen_data(dir.path(), "b")), 0);
    for rel in ["models/ngram2.slpm", "knowledge.jsonl", "corpus.txt", "scenes/detector/manifest.json", "scenes/detector/frame_0007.iq"] {
        let a = std::fs::read(dir.path().join("a").join(rel)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(rel)).unwrap();
        assert_eq!(a, b, "{rel}");
    }
    let ra = read_json(&dir.path().join("a/gen-data_report.json"));
    let rb = read_json(&dir.path().join("b/gen-data_report.json"));
    assert_eq!(ra["details"]["model_id"], rb["details"]["model_id"]);
    assert_eq!(ra["details"]["scr_check"], "pass");
    assert!(ra["metrics"]["gen-data.scene.supervised_f1"].as_f64().unwrap() >= 0.9);
}

fn codec_setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&gen_data(dir.path(), "data")), 0);
    let cfg = write_config(dir.path(), "[paths]\nmodels = \"data/models\"\noutput = \"out\"\n");
    (dir, cfg)
}

#[test]
fn compress_sweep_reports_per_k_table() {
    let (dir, cfg) = codec_setup();
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "compress", "--sweep"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("out/compress_report.json"));
    let blocks = report["metrics"]["compress.blocks"].as_f64().unwrap();
    assert!(blocks >= 30.0);
    for k in [1, 2] {
        assert_eq!(report["metrics"][format!("compress.k{k}.verified")].as_f64().unwrap(), blocks);
        assert!(report["metrics"][format!("compress.k{k}.ce_mean")].as_f64().unwrap() > 1.0);
    }
    assert_eq!(report["table"][0][0], "K");
}

#[test]
fn compress_round_trip_and_tamper() {
    let (dir, cfg) = codec_setup();
    let cfg = cfg.to_str().unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(&input, "The sea was calm. A small boat drifted near the buoy.\n").unwrap();
    let model = dir.path().join("data/models/ngram2.slpm");
    let o = run(
        dir.path(),
        &["--config", cfg, "compress", "--input", "in.txt", "--model", model.to_str().unwrap(), "--context-len", "2", "--output", "in.slrc"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(dir.path(), &["decompress", "--input", "in.slrc", "--model-dir", "data/models", "--output", "back.txt"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&input).unwrap(), std::fs::read(dir.path().join("back.txt")).unwrap());

    let mut bytes = std::fs::read(dir.path().join("in.slrc")).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x10;
    std::fs::write(dir.path().join("bad.slrc"), &bytes).unwrap();
    let o = run(dir.path(), &["decompress", "--input", "bad.slrc", "--model-dir", "data/models", "--output", "x.txt"]);
    assert_eq!(code(&o), 3);

    let o = run(dir.path(), &["decompress", "--input", "in.slrc", "--output", "x.txt"]);
    assert_eq!(code(&o), 2, "no model directory configured");
}

#[test]
fn empty_input_reports_na() {
    let (dir, cfg) = codec_setup();
    std::fs::write(dir.path().join("empty.txt"), b"").unwrap();
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "compress", "--input", "empty.txt", "--output", "e.slrc"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("n/a"));
    let report = read_json(&dir.path().join("out/compress_report.json"));
    assert!(report["metrics"]["compress.ce"].is_null());
    let o = run(dir.path(), &["decompress", "--input", "e.slrc", "--model-dir", "data/models", "--output", "e.txt"]);
    assert_eq!(code(&o), 0);
    assert!(std::fs::read(dir.path().join("e.txt")).unwrap().is_empty());
}

#[test]
fn optimize_sphere_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[optimizer]\nruns = 4\n");
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "--out-dir", "out", "optimize", "--objective", "sphere"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("out/optimize_report.json"));
    let methods: Vec<&str> = report["table"].as_array().unwrap()[1..].iter().map(|r| r[0].as_str().unwrap()).collect();
    assert_eq!(methods, ["hybrid", "de", "sa"]);
    assert_eq!(report["details"]["runs"]["hybrid"].as_array().unwrap().len(), 4);
    assert!(report["metrics"]["optimize.hybrid.best_mean"].as_f64().unwrap() <= 0.0);
}

#[test]
fn optimize_detection_persists_best_theta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[optimizer]\nruns = 1\nbudget = 20\n[optimizer.scene]\nn_frames = 40\nframe_len = 512\n");
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "--out-dir", "out", "optimize", "--objective", "detection"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("out/optimize_report.json"));
    assert_eq!(report["details"]["best"]["theta"].as_array().unwrap().len(), 3);
    let score = report["details"]["best"]["score"].as_f64().unwrap();
    assert!((0.0..=11.0).contains(&score));
}

#[test]
fn budget_below_initial_design_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--budget", "4", "optimize"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn supervised_detection_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--out-dir", "out", "detect", "--mode", "supervised"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("out/detect_report.json"));
    assert!(report["metrics"]["detect.supervised.f1"].as_f64().unwrap() >= 0.9);
    assert!(report["metrics"]["detect.supervised.acc"].as_f64().is_some());
}

#[test]
fn fewshot_always_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "[provider]\nkind = \"scripted\"\nfixture = {:?}\n[detector.scene]\nn_frames = 20\nframe_len = 512\n",
            fixture("always_target.json")
        ),
    );
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "--out-dir", "out", "detect", "--mode", "fewshot"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = &read_json(&dir.path().join("out/detect_report.json"))["metrics"];
    assert_eq!(m["detect.fewshot.pd"], 1.0);
    assert_eq!(m["detect.fewshot.pfa"], 1.0);
    // 3 target and 3 clutter test frames: precision 1/2, recall 1.
    assert!((m["detect.fewshot.f1"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn unknown_mode_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["detect", "--mode", "psychic"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn flag_beats_env_beats_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n[optimizer]\nruns = 1\nbudget = 20\n");
    let cfg = cfg.to_str().unwrap();
    let seed_of = |extra_env: Option<&str>, flag: Option<&str>| {
        let mut c = bin();
        c.current_dir(dir.path()).args(["--config", cfg, "--out-dir", "out"]);
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        if let Some(e) = extra_env {
            c.env("SPAGENT_SEED", e);
        }
        assert!(c.arg("optimize").output().unwrap().status.success());
        read_json(&dir.path().join("out/optimize_report.json"))["config"]["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(None, None), 1);
    assert_eq!(seed_of(Some("2"), None), 2);
    assert_eq!(seed_of(Some("2"), Some("3")), 3);
}

#[test]
fn report_verb_renders_text() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["--out-dir", "out", "detect"])), 0);
    let o = run(dir.path(), &["report", "out/detect_report.json"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("detect report"));
}
