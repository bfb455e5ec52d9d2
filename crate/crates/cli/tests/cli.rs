use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn oodkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oodkit")).args(args).output().expect("spawn oodkit")
}

fn ok(args: &[&str]) -> Output {
    let out = oodkit(args);
    assert!(
        out.status.success(),
        "oodkit {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small synthetic benchmark with two seeds.
fn synth(dir: &Path) -> PathBuf {
    let out = dir.join("data");
    ok(&[
        "synth", "--out", p(&out), "--seeds", "3,4", "--classes", "4", "--dim", "12", "--per-class", "40",
        "--test-per-class", "10", "--ood-count", "30",
    ]);
    out.join("manifest.json")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(oodkit(&["--help"]).status.code(), Some(0));
    assert_eq!(oodkit(&["--version"]).status.code(), Some(0));
    assert_eq!(oodkit(&["eval", "--help"]).status.code(), Some(0));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let m = p(&manifest);
    let out = p(dir.path());
    assert_eq!(oodkit(&["eval", "--bogus"]).status.code(), Some(1));
    assert_eq!(oodkit(&["eval", "--manifest", m, "--variant", "nope"]).status.code(), Some(1));
    assert_eq!(oodkit(&["eval", "--manifest", m, "--out", out, "--tpr-level", "1.5"]).status.code(), Some(1));
    assert_eq!(oodkit(&["eval", "--manifest", m, "--out", out, "--seeds", "99"]).status.code(), Some(1));
    assert_eq!(oodkit(&["fit", "--manifest", m, "--out", out, "--variant", "msp"]).status.code(), Some(1));
    // missing inputs are data errors
    let missing = dir.path().join("missing.json");
    assert_eq!(oodkit(&["eval", "--manifest", p(&missing)]).status.code(), Some(2));
    let msp = oodkit(&["eval", "--manifest", m, "--out", out, "--variant", "msp"]);
    assert_eq!(msp.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&msp.stderr).contains("test_id_logits"));
    // a container cut short is a data error
    let train = dir.path().join("data/seed-3/train.oode");
    let bytes = fs::read(&train).unwrap();
    fs::write(&train, &bytes[..bytes.len() / 2]).unwrap();
    assert_eq!(oodkit(&["eval", "--manifest", m, "--out", out]).status.code(), Some(2));
}

#[test]
fn thread_cap_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let bad = Command::new(env!("CARGO_BIN_EXE_oodkit"))
        .args(["eval", "--manifest", p(&manifest), "--out", p(dir.path())])
        .env("OODKIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let good = Command::new(env!("CARGO_BIN_EXE_oodkit"))
        .args(["eval", "--manifest", p(&manifest), "--out", p(dir.path())])
        .env("OODKIT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(good.status.code(), Some(0));
}

#[test]
fn synth_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path());
    synth(b.path());
    for f in ["seed-3/train.oode", "seed-3/test_ood.oode", "seed-4/test_id.oode", "seed-4/train.meta.json"] {
        assert_eq!(fs::read(a.path().join("data").join(f)).unwrap(), fs::read(b.path().join("data").join(f)).unwrap());
    }
}

#[test]
fn eval_reports_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = dir.path().join("eval");
    let args = ["eval", "--manifest", p(&manifest), "--out", p(&out), "--variant", "maha,maha-marginal,euclidean"];
    ok(&args);
    let first = (fs::read(out.join("report.json")).unwrap(), fs::read(out.join("report.csv")).unwrap());
    let again = Command::new(env!("CARGO_BIN_EXE_oodkit")).args(args).env("OODKIT_THREADS", "1").output().unwrap();
    assert!(again.status.success());
    assert_eq!(fs::read(out.join("report.json")).unwrap(), first.0);
    assert_eq!(fs::read(out.join("report.csv")).unwrap(), first.1);
}

#[test]
fn eval_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = dir.path().join("eval");
    ok(&["eval", "--manifest", p(&manifest), "--out", p(&out), "--variant", "maha,euclidean"]);
    let r = json(&out.join("report.json"));
    assert_eq!(r["dataset"], "synthetic");
    assert_eq!(r["seeds"], serde_json::json!([3, 4]));
    assert_eq!(r["config"]["subcommand"], "eval");
    assert_eq!(r["config"]["variants"], serde_json::json!(["maha", "euclidean"]));
    let variants = r["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 2);
    for v in variants {
        assert_eq!(v["per_seed"].as_array().unwrap().len(), 2);
        for key in ["auroc", "aupr_ood", "fpr95_ood", "fpr95_id"] {
            let x = v["mean"][key].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&x), "{key} = {x}");
            assert!(v["std"][key].as_f64().unwrap() >= 0.0);
        }
    }
    assert!(variants[0]["mean"]["auroc"].as_f64().unwrap() > variants[1]["mean"]["auroc"].as_f64().unwrap());
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("variant,seed,auroc,aupr_ood,fpr95_ood,fpr95_id,"));
    // two seeds plus mean and std, per variant
    assert_eq!(lines.len(), 1 + 2 * 4);
}

#[test]
fn fit_then_score_matches_direct_scoring() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let fit = dir.path().join("fit");
    let out = ok(&["fit", "--manifest", p(&manifest), "--out", p(&fit), "--seeds", "3"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("K=4 d=12"));
    let det = fit.join("detector-seed3.oodd");
    let bytes = fs::read(&det).unwrap();
    ok(&["fit", "--manifest", p(&manifest), "--out", p(&fit), "--seeds", "3"]);
    assert_eq!(fs::read(&det).unwrap(), bytes, "refit must be byte-identical");

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["score", "--manifest", p(&manifest), "--out", p(&a), "--seeds", "3", "--detector", p(&det)]);
    ok(&["score", "--manifest", p(&manifest), "--out", p(&b), "--seeds", "3"]);
    let (sa, sb) = (json(&a.join("scores-maha-seed3.json")), json(&b.join("scores-maha-seed3.json")));
    assert_eq!(sa["id_scores"], sb["id_scores"]);
    assert_eq!(sa["ood_scores"], sb["ood_scores"]);
    assert_eq!(sa["id_scores"].as_array().unwrap().len(), 40);
    assert_eq!(sa["ood_scores"].as_array().unwrap().len(), 30);

    // a stored classwise detector serves the other variants too
    ok(&["eval", "--manifest", p(&manifest), "--out", p(&a), "--seeds", "3", "--detector", p(&det),
         "--variant", "maha-marginal"]);
    ok(&["eval", "--manifest", p(&manifest), "--out", p(&b), "--seeds", "3", "--variant", "maha-marginal"]);
    let (ra, rb) = (json(&a.join("report.json")), json(&b.join("report.json")));
    assert_eq!(ra["variants"], rb["variants"]);
}

#[test]
fn euclidean_fit_reports_bypassed_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = ok(&["fit", "--manifest", p(&manifest), "--out", p(dir.path()), "--variant", "euclidean"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("covariance bypassed"));
    let summary = json(&dir.path().join("fit.json"));
    assert_eq!(summary["detectors"][0]["covariance"], "bypassed");
}

#[test]
fn diagnose_writes_geometry_and_terms() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = dir.path().join("diag");
    ok(&["diagnose", "--manifest", p(&manifest), "--out", p(&out), "--emit", "json,csv,svg", "--max-components", "8"]);
    let g = json(&out.join("geometry.json"));
    assert_eq!(g["seed"], 3);
    assert_eq!(g["geometry"]["classes"], 4);
    assert!(g["subspace_energy"].as_f64().unwrap() > 0.9);
    let csv = fs::read_to_string(out.join("terms.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "role,1,2,3,4,5,6,7,8");
    // OOD rows come first
    assert_eq!(lines.len(), 1 + 30 + 40);
    assert!(lines[1..31].iter().all(|l| l.starts_with("ood,")));
    assert!(lines[31..].iter().all(|l| l.starts_with("id,")));
    let svg = fs::read_to_string(out.join("terms.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<line").count(), 2);
}

#[test]
fn diagnose_respects_emit() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = dir.path().join("diag");
    ok(&["diagnose", "--manifest", p(&manifest), "--out", p(&out), "--emit", "json"]);
    assert!(out.join("geometry.json").exists());
    assert!(!out.join("terms.csv").exists());
    assert!(!out.join("terms.svg").exists());
}

#[test]
fn sweep_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let out = dir.path().join("sweep");
    ok(&["sweep", "--manifest", p(&manifest), "--out", p(&out), "--fractions", "0.5,1.0"]);
    let s = json(&out.join("sweep.json"));
    let series = s["series"].as_array().unwrap();
    assert_eq!(series.len(), 2);
    assert_eq!(series[0]["variant"], "maha");
    assert_eq!(series[1]["variant"], "maha-marginal");
    assert_eq!(series[0]["points"][1]["fraction"], 1.0);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    // 2 variants x 2 fractions x (2 seeds + mean + std)
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 4);
    assert_eq!(oodkit(&["sweep", "--manifest", p(&manifest), "--out", p(&out), "--fractions", "0"]).status.code(), Some(1));
    assert_eq!(oodkit(&["sweep", "--manifest", p(&manifest), "--out", p(&out), "--variant", "llr"]).status.code(), Some(1));
}

#[test]
fn llr_runs_on_text_files() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let mut m = json(&manifest);
    let write = |name: &str, lines: &[&str]| {
        fs::write(dir.path().join("data").join(name), lines.join("\n") + "\n").unwrap();
    };
    write("train.txt", &["book a flight to paris", "set an alarm for six", "book a table for two"]);
    write("test_id.txt", &["book a flight", "set an alarm"]);
    write("test_ood.txt", &["what is the meaning of life", "sing me a song"]);
    let files = m["runs"][0]["files"].as_object_mut().unwrap();
    files.insert("train_text".into(), "train.txt".into());
    files.insert("test_id_text".into(), "test_id.txt".into());
    files.insert("test_ood_text".into(), "test_ood.txt".into());
    fs::write(&manifest, serde_json::to_string_pretty(&m).unwrap()).unwrap();
    let out = dir.path().join("llr");
    ok(&["eval", "--manifest", p(&manifest), "--out", p(&out), "--seeds", "3", "--variant", "llr"]);
    let r = json(&out.join("report.json"));
    assert_eq!(r["variants"][0]["variant"], "llr");
    assert_eq!(r["variants"][0]["mean"]["auroc"], 1.0);
}

#[test]
fn msp_report_has_the_embedding_schema() {
    use oodkit_core::dataio::{write_set, ContentKind, EmbeddingSet, Role};
    use oodkit_core::linalg::Matrix;

    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path());
    let logits = |rows: usize, confident: bool| {
        let data: Vec<f64> = (0..rows)
            .flat_map(|i| {
                let top = if confident { 8.0 } else { 0.5 } + (i % 3) as f64 * 0.1;
                [top, 0.0, -1.0, 0.25]
            })
            .collect();
        Matrix::new(rows, 4, data).unwrap()
    };
    let id = EmbeddingSet::new(logits(40, true), None, Role::TestId, "test").unwrap();
    let ood = EmbeddingSet::new(logits(30, false), None, Role::TestOod, "test").unwrap();
    write_set(&dir.path().join("data/id.logits"), &id, ContentKind::Logits).unwrap();
    write_set(&dir.path().join("data/ood.logits"), &ood, ContentKind::Logits).unwrap();
    let mut m = json(&manifest);
    let files = m["runs"][0]["files"].as_object_mut().unwrap();
    files.insert("test_id_logits".into(), "id.logits".into());
    files.insert("test_ood_logits".into(), "ood.logits".into());
    fs::write(&manifest, serde_json::to_string_pretty(&m).unwrap()).unwrap();

    let (a, b) = (dir.path().join("msp"), dir.path().join("maha"));
    ok(&["eval", "--manifest", p(&manifest), "--out", p(&a), "--seeds", "3", "--variant", "msp"]);
    ok(&["eval", "--manifest", p(&manifest), "--out", p(&b), "--seeds", "3"]);
    let (ra, rb) = (json(&a.join("report.json")), json(&b.join("report.json")));
    let keys = |v: &Value| -> Vec<String> { v.as_object().unwrap().keys().cloned().collect() };
    assert_eq!(keys(&ra), keys(&rb));
    assert_eq!(keys(&ra["variants"][0]), keys(&rb["variants"][0]));
    assert_eq!(keys(&ra["variants"][0]["mean"]), keys(&rb["variants"][0]["mean"]));
    assert_eq!(ra["variants"][0]["mean"]["auroc"], 1.0);
    let header = |d: &Path| fs::read_to_string(d.join("report.csv")).unwrap().lines().next().unwrap().to_owned();
    assert_eq!(header(&a), header(&b));
}
