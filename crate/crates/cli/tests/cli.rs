use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = r#"{
  "model": {"d_model": 8, "ae_hidden": 8, "epochs": 3, "seed": 4},
  "semantic": {"dim": 16, "seed": 1}
}"#;

fn cadren(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cadren"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cadren(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, rel: &str) -> Vec<u8> {
    std::fs::read(dir.join(rel)).unwrap()
}

/// Generates data and trains a small model inside a fresh directory.
fn workspace() -> TempDir {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("small.json"), SMALL).unwrap();
    let out = ok(d, &["gen-data", "--graphs", "12", "--val", "2", "--test", "4", "--seed", "3", "--out", "data"]);
    assert!(out.contains("#BG"));
    ok(
        d,
        &[
            "--config", "small.json", "train", "--data", "data/dataset.jsonl", "--split", "data/split.json", "--out", "model",
        ],
    );
    tmp
}

#[test]
fn pipeline_writes_expected_artifacts() {
    let tmp = workspace();
    let d = tmp.path();
    for f in ["data/dataset.jsonl", "data/split.json", "data/manifest.json", "model/model.ckpt", "model/model.ckpt.json", "model/manifest.json"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let log = String::from_utf8(read(d, "model/train_log.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("epoch,train_loss,val_ndcg20"));
    assert_eq!(log.lines().count(), 4);
    let manifest: Value = serde_json::from_slice(&read(d, "model/manifest.json")).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seeds"]["model"], 4);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert!(manifest["outputs"][0]["sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn eval_oracle_and_model_reports() {
    let tmp = workspace();
    let d = tmp.path();
    let data = ["--data", "data/dataset.jsonl", "--split", "data/split.json"];

    let mut args = vec!["eval", "--oracle", "--out", "oracle"];
    args.extend(data);
    ok(d, &args);
    let reports: Value = serde_json::from_slice(&read(d, "oracle/report.json")).unwrap();
    let oracle = &reports[0];
    assert_eq!(oracle["method"], "Oracle");
    assert_eq!(oracle["cells"].as_array().unwrap().len(), 8);
    for cell in oracle["cells"].as_array().unwrap() {
        assert_eq!(cell["ndcg"], 1.0);
    }

    let mut args = vec!["eval", "--checkpoint", "model/model.ckpt", "--baselines", "--out", "report"];
    args.extend(data);
    let table = ok(d, &args);
    for m in ["CADReN", "PR", "PPR"] {
        assert!(table.contains(m), "{table}");
    }
    let reports: Value = serde_json::from_slice(&read(d, "report/report.json")).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 3);

    let mut args = vec!["baseline", "--method", "ppr", "--on", "val"];
    args.extend(data);
    assert!(ok(d, &args).contains("PPR"));
}

#[test]
fn infer_returns_top_k_rows() {
    let tmp = workspace();
    let d = tmp.path();
    let line = String::from_utf8(read(d, "data/dataset.jsonl")).unwrap();
    let g: Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    let id = g["id"].as_str().unwrap();
    let n = g["nodes"].as_array().unwrap().len();
    let ca: Vec<&str> = g["pairs"][0]["ca"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let ca = ca.join(",");
    for (k, want) in [("20", n.min(20)), ("500", n)] {
        let out = ok(
            d,
            &["infer", "--data", "data/dataset.jsonl", "--checkpoint", "model/model.ckpt", "--graph", id, "--ca", &ca, "--top-k", k],
        );
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["ranking"].as_array().unwrap().len(), want);
    }
}

#[test]
fn failures_exit_with_code_two() {
    let tmp = workspace();
    let d = tmp.path();
    let out = cadren(
        d,
        &["infer", "--data", "data/dataset.jsonl", "--checkpoint", "model/model.ckpt", "--graph", "nope", "--ca", "x"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    let out = cadren(d, &["stats", "--data", "missing.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stats_reports_merged_row() {
    let tmp = workspace();
    let out = ok(tmp.path(), &["stats", "--data", "data/dataset.jsonl", "--name", "A", "--merge"]);
    assert!(out.contains("A-M") && out.contains("A-S"), "{out}");
}

#[test]
fn manifests_reproduce_outputs() {
    let tmp = workspace();
    let d = tmp.path();
    let files = ["data/dataset.jsonl", "data/split.json", "model/model.ckpt", "model/model.ckpt.json", "model/train_log.csv", "model/manifest.json"];
    let before: Vec<Vec<u8>> = files.iter().map(|f| read(d, f)).collect();
    ok(d, &["--config", "data/manifest.json", "gen-data"]);
    ok(d, &["--config", "model/manifest.json", "train"]);
    for (f, bytes) in files.iter().zip(&before) {
        assert_eq!(&read(d, f), bytes, "{f} changed on rerun");
    }
}

#[test]
fn serve_answers_without_touching_files() {
    let tmp = workspace();
    let d = tmp.path();
    let watched = ["data/dataset.jsonl", "data/split.json", "model/model.ckpt", "model/model.ckpt.json"];
    let before: Vec<Vec<u8>> = watched.iter().map(|f| read(d, f)).collect();
    let mut child = Command::new(env!("CARGO_BIN_EXE_cadren"))
        .current_dir(d)
        .env("RUST_LOG", "info")
        .args(["serve", "--data", "data/dataset.jsonl", "--checkpoint", "model/model.ckpt", "--port", "0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("server exited").unwrap();
        if let Some(rest) = line.split("listening on http://").nth(1) {
            break rest.trim().to_string();
        }
    };
    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(stream, "GET /graphs HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    let body = resp.split("\r\n\r\n").nth(1).unwrap();
    let graphs: Value = serde_json::from_str(body).unwrap();
    assert_eq!(graphs.as_array().unwrap().len(), 12);
    for (f, bytes) in watched.iter().zip(&before) {
        assert_eq!(&read(d, f), bytes, "{f} modified by serve");
    }
}
