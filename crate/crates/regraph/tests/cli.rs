use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use regraph::report;
use tempfile::TempDir;

fn regraph(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regraph"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = regraph(args, cwd);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/tree")
}

#[test]
fn synth_train_match_eval() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        &[
            "synth",
            "--families",
            "12",
            "--variants",
            "3",
            "--op-swap",
            "0.1",
            "--seed",
            "4",
            "--out",
            "cands.json",
            "--queries-out",
            "queries.json",
        ],
        d,
    );
    ok(
        &[
            "vectorize",
            "--input",
            "cands.json",
            "queries.json",
            "--out-dir",
            "data",
        ],
        d,
    );
    assert!(d.join("data/dataset.jsonl").is_file());
    assert!(d.join("data/op_file.json").is_file());

    fs::write(
        d.join("train.yaml"),
        "dataset_path: data/dataset.jsonl\noutput_dir: run\ndim: 16\nrounds: 2\nembed_dim: 8\nepochs: 3\n",
    )
    .unwrap();
    let stdout = ok(&["train", "--config", "train.yaml"], d);
    assert!(stdout.contains("trained 3 epochs"), "{stdout}");
    assert_eq!(
        fs::read_to_string(d.join("run/train_log.jsonl"))
            .unwrap()
            .lines()
            .count(),
        3
    );

    let match_args = [
        "match",
        "--model",
        "run/model.json",
        "--op-file",
        "data/op_file.json",
        "--target",
        "queries.json",
        "--candidate",
        "cands.json",
        "--topk",
        "3",
        "--out",
        "report.csv",
    ];
    ok(&match_args, d);
    let rows = report::read_csv(&d.join("report.csv")).unwrap();
    assert_eq!(rows.len(), 12 * 3);
    let header = fs::read_to_string(d.join("report.csv")).unwrap();
    assert!(header.starts_with("target_function,rank,candidate_function,candidate_address,score,flags\n"));

    let stdout = ok(
        &[
            "eval",
            "retrieval",
            "--model",
            "run/model.json",
            "--op-file",
            "data/op_file.json",
            "--target",
            "queries.json",
            "--candidate",
            "cands.json",
            "--k",
            "1,5",
            "--repeat",
            "1",
            "--json",
            "eval.json",
        ],
        d,
    );
    assert!(stdout.contains("Recall@1"), "{stdout}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("eval.json")).unwrap()).unwrap();
    let r5 = json["recall_at"]["5"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&r5));

    fs::write(
        d.join("table.json"),
        r#"{"cells":[{"source":"O0-ARM","target":"O3-ARM","before":[0.239],"after":[0.676]}]}"#,
    )
    .unwrap();
    let stdout = ok(&["eval", "improvement", "--input", "table.json"], d);
    assert!(stdout.contains("183%"), "{stdout}");
}

#[test]
fn fixture_preprocess_then_match() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let root = fixture_root();
    ok(
        &[
            "preprocess",
            "--root",
            root.to_str().unwrap(),
            "--out",
            "graphs",
            "--work-dir",
            "work",
        ],
        d,
    );
    let x86 = "graphs/openplc__x86__O0__openplc.json";
    let arm = "graphs/openplc__arm__O3__openplc.json";
    ok(&["vectorize", "--input", "graphs", "--out-dir", "data"], d);
    fs::write(
        d.join("train.yaml"),
        "dataset_path: data/dataset.jsonl\noutput_dir: run\ndim: 8\nrounds: 1\nembed_dim: 4\nepochs: 1\n",
    )
    .unwrap();
    ok(&["train", "--config", "train.yaml"], d);
    ok(
        &[
            "match",
            "--model",
            "run/model.json",
            "--op-file",
            "data/op_file.json",
            "--target",
            x86,
            "--candidate",
            arm,
            "--out",
            "report.csv",
        ],
        d,
    );
    let rows = report::read_csv(&d.join("report.csv")).unwrap();
    let block: Vec<_> = rows
        .iter()
        .filter(|r| r.target_function == "__time_sub")
        .collect();
    assert_eq!(block.len(), 5);
    assert_eq!(block[0].candidate_function, "__time_sub");
    assert!(block.windows(2).all(|w| w[0].score >= w[1].score));
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = regraph(&["match", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = regraph(
        &[
            "match",
            "--model",
            "m",
            "--op-file",
            "o",
            "--target",
            "t",
            "--candidate",
            "c",
            "--out",
            "r",
            "--topk",
            "0",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(regraph(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn domain_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let out = regraph(&["train", "--config", "missing.yaml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("config not found"), "{stderr}");

    fs::write(
        dir.path().join("bad.yaml"),
        "dataset_path: d\noutput_dir: o\nlearning_rat: 0.1\n",
    )
    .unwrap();
    let out = regraph(&["train", "--config", "bad.yaml"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let out = regraph(&["preprocess", "--root", "nowhere", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
