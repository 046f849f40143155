use std::ffi::OsStr;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini")
}

fn cli<I, S>(run: &Path, args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_chronoeval"))
        .arg("--run")
        .arg(run)
        .args(args)
        .output()
        .expect("spawn chronoeval")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn ingest(run: &Path) {
    ok(cli(run, ["ingest", "--root"].map(OsStr::new).into_iter().chain([fixture().join("corpus").as_os_str()])));
}

fn attach(run: &Path, kind: &str, file: &Path) {
    ok(cli(run, [OsStr::new("attach"), "--kind".as_ref(), kind.as_ref(), "--file".as_ref(), file.as_os_str()]));
}

fn sidecar(kind: &str) -> PathBuf {
    fixture().join(format!("sidecars/{kind}.jsonl"))
}

fn config() -> PathBuf {
    fixture().join("endpoints.toml")
}

#[test]
fn full_replay_run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ingest(&run);
    for kind in ["styles", "faces", "annotations"] {
        attach(&run, kind, &sidecar(kind));
    }
    let cfg = config();
    let style = ok(cli(&run, ["style", "run", "--bootstrap", "1000"]));
    assert!(style.contains("sdxl/1910s: VSD 0.70 monochrome"), "{style}");
    ok(cli(&run, [OsStr::new("anachronism"), "propose".as_ref(), "--endpoints".as_ref(), cfg.as_os_str()]));
    ok(cli(&run, [OsStr::new("anachronism"), "verify".as_ref(), "--endpoints".as_ref(), cfg.as_os_str()]));
    let score = ok(cli(&run, ["anachronism", "score", "--top-k", "3"]));
    assert!(score.contains("human agreement"), "{score}");
    ok(cli(&run, [OsStr::new("demographics"), "run".as_ref(), "--baseline-endpoint".as_ref(), cfg.as_os_str()]));
    ok(cli(&run, [OsStr::new("validate"), "mae".as_ref(), "--reference".as_ref(), fixture().join("validation/reference.csv").as_os_str()]));
    ok(cli(&run, [OsStr::new("validate"), "agreement".as_ref(), "--other".as_ref(), sidecar("faces_other").as_os_str()]));
    ok(cli(&run, ["report"]));

    for f in ["report.json", "report.md", "vsd.csv", "anachronism_scores.csv", "anachronism_rankings.csv", "deviations.csv"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let report = json(&run.join("report.json"));
    let top = report["anachronism"]["top_frequency"]["sdxl"].as_array().unwrap();
    assert_eq!(top.len(), 3);
    assert!(report["validation"]["mae"]["aggregate"].is_number());
    assert_eq!(report["validation"]["agreement"]["race"]["n"], report["validation"]["agreement"]["gender"]["n"]);
    let state = json(&run.join("run.json"));
    assert_eq!(state["outputs"]["report"], "report.json");
    assert!(!run.join("run.lock").exists());
}

#[test]
fn style_run_without_style_sidecar_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ingest(&run);
    attach(&run, "faces", &sidecar("faces"));
    let out = cli(&run, ["style", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("styles or embeddings"), "{}", stderr(&out));
}

#[test]
fn orphan_sidecar_row_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ingest(&run);
    let bad = dir.path().join("faces.jsonl");
    fs::write(&bad, "{\"image_id\": \"sdxl/1910s/unknown/0\", \"faces\": []}\n").unwrap();
    let out = cli(&run, [OsStr::new("attach"), "--kind".as_ref(), "faces".as_ref(), "--file".as_ref(), bad.as_os_str()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sdxl/1910s/unknown/0"), "{}", stderr(&out));
    assert!(!run.join("sidecars/faces.jsonl").exists());
}

#[test]
fn replay_miss_exits_with_endpoint_code() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ingest(&run);
    let text = fs::read_to_string(config()).unwrap().replace("cache_dir = \"cache\"", "cache_dir = \"empty\"");
    let cfg = dir.path().join("endpoints.toml");
    fs::write(&cfg, text).unwrap();
    let out = cli(&run, [OsStr::new("anachronism"), "propose".as_ref(), "--endpoints".as_ref(), cfg.as_os_str(), "--replay".as_ref()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn unknown_endpoint_in_roles_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ingest(&run);
    let cfg = dir.path().join("endpoints.toml");
    fs::write(&cfg, fs::read_to_string(config()).unwrap().replace("proposer = \"gpt-4o\"", "proposer = \"nobody\"")).unwrap();
    let out = cli(&run, [OsStr::new("anachronism"), "propose".as_ref(), "--endpoints".as_ref(), cfg.as_os_str()]);
    assert_ne!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("nobody"), "{}", stderr(&out));
}

#[test]
fn held_lock_blocks_a_second_command() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ingest(&run);
    fs::write(run.join("run.lock"), "").unwrap();
    let out = cli(&run, ["style", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("run.lock"), "{}", stderr(&out));
}

#[test]
fn probe_path_matches_the_label_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let labelled = dir.path().join("labelled");
    ingest(&labelled);
    attach(&labelled, "styles", &sidecar("styles"));
    ok(cli(&labelled, ["style", "run", "--bootstrap", "500"]));

    let probed = dir.path().join("probed");
    ingest(&probed);
    attach(&probed, "embeddings", &sidecar("embeddings"));
    let missing = cli(&probed, ["style", "run"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("--probe-train"), "{}", stderr(&missing));
    let f = fixture();
    ok(cli(
        &probed,
        [
            OsStr::new("style"),
            "run".as_ref(),
            "--bootstrap".as_ref(),
            "500".as_ref(),
            "--probe-train".as_ref(),
            f.join("probe/train_embeddings.jsonl").as_os_str(),
            f.join("probe/train_labels.jsonl").as_os_str(),
        ],
    ));
    assert!(probed.join("probe.json").is_file());
    let a = json(&labelled.join("style.json"));
    let b = json(&probed.join("style.json"));
    assert_eq!(a["labels"], b["labels"]);
    assert_eq!(a["results"], b["results"]);
    assert_eq!(b["probe"]["train"]["accuracy"], 1.0);
}

#[test]
fn compare_marks_style_changes() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base");
    ingest(&base);
    attach(&base, "styles", &sidecar("styles"));
    ok(cli(&base, ["style", "run", "--bootstrap", "500"]));

    // A mitigated run in which every 1950s photograph became a painting.
    let flipped: String = fs::read_to_string(sidecar("styles"))
        .unwrap()
        .lines()
        .map(|l| {
            if l.contains("/1950s/") {
                l.replace("photography", "painting")
            } else {
                l.to_string()
            }
        })
        .map(|l| l + "\n")
        .collect();
    let file = dir.path().join("styles.jsonl");
    fs::write(&file, flipped).unwrap();
    let mitigated = dir.path().join("mitigated");
    ingest(&mitigated);
    attach(&mitigated, "styles", &file);
    ok(cli(&mitigated, ["style", "run", "--bootstrap", "500"]));

    ok(cli(&base, [OsStr::new("report"), "--compare".as_ref(), mitigated.as_os_str()]));
    let report = json(&base.join("report.json"));
    assert_eq!(report["comparison"]["other_run"], "mitigated");
    let md = fs::read_to_string(base.join("report.md")).unwrap();
    assert!(md.contains("painting"), "{md}");

    let not_a_run = dir.path().join("nothing");
    fs::create_dir(&not_a_run).unwrap();
    let out = cli(&base, [OsStr::new("report"), "--compare".as_ref(), not_a_run.as_os_str()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn explicit_estimates_feed_mae() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ingest(&run);
    let f = fixture();
    let text = ok(cli(
        &run,
        [
            OsStr::new("validate"),
            "mae".as_ref(),
            "--reference".as_ref(),
            f.join("validation/reference.csv").as_os_str(),
            "--estimates".as_ref(),
            f.join("validation/estimates.csv").as_os_str(),
        ],
    ));
    // Gender cells are off by 3.5 points, the six race groups by 1.25.
    assert!(text.contains("male: 3.50"), "{text}");
    assert!(text.contains("White: 1.25"), "{text}");
    let v = json(&run.join("validation.json"));
    let aggregate = v["mae"]["aggregate"].as_f64().unwrap();
    assert!((aggregate - (2.0 * 3.5 + 6.0 * 1.25) / 8.0).abs() < 1e-12, "{aggregate}");
}

#[test]
fn report_on_empty_run_fails() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ingest(&run);
    let out = cli(&run, ["report"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn manifest_validate_accepts_the_bundled_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("manifest.json");
    let status = Command::new(env!("CARGO_BIN_EXE_chronoeval"))
        .args([OsStr::new("manifest"), "build".as_ref(), "--out".as_ref(), out.as_os_str()])
        .output()
        .unwrap();
    ok(status);
    let m = json(&out);
    assert_eq!(m["categories"].as_array().unwrap().len(), 20);
    let check = Command::new(env!("CARGO_BIN_EXE_chronoeval"))
        .args([OsStr::new("manifest"), "validate".as_ref(), out.as_os_str()])
        .output()
        .unwrap();
    ok(check);
}
