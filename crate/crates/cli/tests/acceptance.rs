//! Acceptance criterion 7: end-to-end determinism of `evaluate`.
//!
//! The same synthetic manifest is evaluated three times — twice with one
//! worker, once with eight — and the report and proposal files must come
//! out byte-identical every time.

use std::path::Path;
use std::process::Command;

use tempfile::tempdir;

fn run_ok(args: &[&str]) {
    let output = Command::new(env!("CARGO_BIN_EXE_rgbdg"))
        .args(args)
        .output()
        .expect("binary runs");
    assert_eq!(
        output.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn evaluate(manifest: &Path, report: &Path, proposals: &Path, workers: &str) {
    run_ok(&[
        "evaluate",
        "--manifest",
        manifest.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
        "--proposals-out",
        proposals.to_str().unwrap(),
        "--workers",
        workers,
    ]);
}

#[test]
fn criterion_7_evaluate_is_deterministic_across_reruns_and_worker_counts() {
    let dir = tempdir().unwrap();
    let scenes = dir.path().join("scenes");
    run_ok(&[
        "synth",
        "--preset",
        "depth-critical",
        "--count",
        "6",
        "--seed",
        "11",
        "--noise",
        "0.02",
        "--out",
        scenes.to_str().unwrap(),
    ]);
    let manifest = scenes.join("manifest.json");

    let mut outputs = Vec::new();
    for (tag, workers) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let report = dir.path().join(format!("report-{tag}.json"));
        let proposals = dir.path().join(format!("props-{tag}.jsonl"));
        evaluate(&manifest, &report, &proposals, workers);
        outputs.push((
            std::fs::read(&report).unwrap(),
            std::fs::read(&proposals).unwrap(),
        ));
    }

    assert_eq!(outputs[0], outputs[1], "rerun with --workers 1 must be byte-identical");
    assert_eq!(outputs[0], outputs[2], "--workers 8 must not change any output byte");
    assert!(!outputs[0].0.is_empty() && !outputs[0].1.is_empty());
    println!("criterion 7 — evaluate determinism across reruns and worker counts: PASS");
}
