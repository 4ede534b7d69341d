//! End-to-end tests of the CLI pipelines through `cli::run`.

use clap::Parser;
use tempfile::TempDir;

use kv_retention::cli::{error_record, exit_code, run, Cli};
use kv_retention::error::Error;

fn kvr(args: &[&str]) -> Result<(), Error> {
    let mut full = vec!["kvr"];
    full.extend_from_slice(args);
    run(Cli::try_parse_from(full).unwrap())
}

fn write(dir: &TempDir, name: &str, contents: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

fn read(dir: &TempDir, name: &str) -> String {
    std::fs::read_to_string(dir.path().join(name)).unwrap()
}

#[test]
fn select_fast_path_passes_through_top_k() {
    let dir = TempDir::new().unwrap();
    let scores = write(&dir, "s.json", r#"{"n":4,"scores":[0.1,5.0,3.0,4.0]}"#);
    // n=4, L=1, H=1, d=2
    let values = write(
        &dir,
        "v.json",
        r#"{"n":4,"L":1,"H":1,"d":2,"dtype":"f64","values":[1,0,0,1,1,1,-1,0]}"#,
    );
    let out = dir.path().join("out.json");
    kvr(&[
        "select",
        "--scores",
        &scores,
        "--values",
        &values,
        "--k",
        "2",
        "--lambda",
        "0",
        "--out",
        out.to_str().unwrap(),
    ])
    .unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&read(&dir, "out.json")).unwrap();
    assert_eq!(parsed["retained"], serde_json::json!([1, 3]));
    assert_eq!(parsed["schema"], "kvr/v1");
    assert_eq!(parsed["n"], 4);
}

#[test]
fn select_rejects_mismatched_inputs_with_validation_code() {
    let dir = TempDir::new().unwrap();
    let scores = write(&dir, "s.json", r#"{"n":2,"scores":[0.1,5.0]}"#);
    let values = write(
        &dir,
        "v.json",
        r#"{"n":1,"L":1,"H":1,"d":2,"dtype":"f64","values":[1,0]}"#,
    );
    let out = dir.path().join("out.json");
    let err = kvr(&[
        "select", "--scores", &scores, "--values", &values, "--k", "1", "--lambda", "0.5",
        "--out", out.to_str().unwrap(),
    ])
    .unwrap_err();
    assert_eq!(exit_code(&err), 4);
    let record: serde_json::Value = serde_json::from_str(&error_record(&err)).unwrap();
    assert_eq!(record["error"], "shape_mismatch");
    assert!(!out.exists(), "no output on failure");
}

#[test]
fn unreadable_input_gets_io_exit_code() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out.json");
    let err = kvr(&[
        "select", "--scores", "/nonexistent/s.json", "--values", "/nonexistent/v.json",
        "--k", "1", "--lambda", "0", "--out", out.to_str().unwrap(),
    ])
    .unwrap_err();
    assert_eq!(exit_code(&err), 2);
}

#[test]
fn simulate_emits_trajectory_and_stats() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("traj.csv");
    let stats = dir.path().join("stats.json");
    kvr(&[
        "simulate",
        "--prefill-len", "1000",
        "--decode-steps", "256",
        "--budget", "64",
        "--policy", "never",
        "--out-csv", csv.to_str().unwrap(),
        "--out-stats", stats.to_str().unwrap(),
    ])
    .unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&read(&dir, "stats.json")).unwrap();
    assert_eq!(parsed["peak_cache"], 320);
    assert_eq!(parsed["mean_decode_cache"], 192.5);
    assert_eq!(parsed["end_of_prefill_cache"], 64);
    let csv_text = read(&dir, "traj.csv");
    assert!(csv_text.starts_with("step,length\n0,64\n1,65\n"));
    assert_eq!(csv_text.lines().count(), 258); // header + prefill row + 256 steps
}

#[test]
fn split_manifest_partitions_id_file() {
    let dir = TempDir::new().unwrap();
    let ids: String = (0..100).map(|i| format!("prob-{i:03}\n")).collect();
    let ids_path = write(&dir, "ids.txt", &ids);
    let out = dir.path().join("manifest.json");
    kvr(&["split", "--ids", &ids_path, "--out", out.to_str().unwrap()]).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&read(&dir, "manifest.json")).unwrap();
    let dev = parsed["dev_ids"].as_array().unwrap().len();
    let confirm = parsed["confirm_ids"].as_array().unwrap().len();
    assert_eq!(dev + confirm, 100);
    assert_eq!(parsed["convention"], "md5-be128-mod5/v1");
    assert_eq!(parsed["counts"]["dev"], dev);
}

fn synthetic_records() -> String {
    // 8 problems x 2 models x 1 budget x 2 methods x 3 seeds; the
    // treatment flips two problems per model from wrong to right.
    let mut lines = String::new();
    for model in ["qwen7b", "llama8b"] {
        for problem in 0..8 {
            for seed in 0..3 {
                for method in ["treat", "base"] {
                    let base_correct = problem % 3 == 0;
                    let correct = if method == "treat" {
                        base_correct || problem % 4 == 1
                    } else {
                        base_correct
                    };
                    lines.push_str(&serde_json::json!({
                        "problem_id": format!("p{problem}"),
                        "model": model,
                        "budget": 128,
                        "method": method,
                        "seed": seed,
                        "correct": correct,
                        "extracted": true,
                        "mean_cache": 130.0,
                        "peak_cache": 150,
                    }).to_string());
                    lines.push('\n');
                }
            }
        }
    }
    lines
}

#[test]
fn analyze_confirm_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let records = write(&dir, "records.jsonl", &synthetic_records());
    for out in ["cells_a.json", "cells_b.json"] {
        kvr(&[
            "analyze", "confirm",
            "--records", &records,
            "--treatment", "treat",
            "--baseline", "base",
            "--n-boot", "2000",
            "--rng-seed", "7",
            "--out", dir.path().join(out).to_str().unwrap(),
            "--emit-plot-data", dir.path().join(format!("{out}.csv")).to_str().unwrap(),
        ])
        .unwrap();
    }
    assert_eq!(read(&dir, "cells_a.json"), read(&dir, "cells_b.json"));
    assert_eq!(read(&dir, "cells_a.json.csv"), read(&dir, "cells_b.json.csv"));

    let parsed: serde_json::Value = serde_json::from_str(&read(&dir, "cells_a.json")).unwrap();
    let cells = parsed["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
    for cell in cells {
        // 2 of 8 problems improve by a full point
        assert!((cell["delta_pp"].as_f64().unwrap() - 25.0).abs() < 1e-9);
        assert_eq!(cell["n_problems"], 8);
    }
    let csv = read(&dir, "cells_a.json.csv");
    assert!(csv.starts_with("cell,delta_pp,ci_lo,ci_hi,p,pass\n"));
}

#[test]
fn decide_replays_ingested_confirmation_cells() {
    let dir = TempDir::new().unwrap();
    let cells = write(
        &dir,
        "cells.json",
        r#"{"cells":[
            {"model":"qwen7b","budget":64,"delta_pp":1.56,"ci95":[-0.89,4.01],"p":0.20},
            {"model":"qwen7b","budget":128,"delta_pp":4.79,"ci95":[1.67,7.92],"p":0.0022},
            {"model":"llama8b","budget":64,"delta_pp":2.23,"ci95":[0.56,3.90],"p":0.0054},
            {"model":"llama8b","budget":128,"delta_pp":-0.22,"ci95":[-2.45,2.01],"p":0.86}
        ]}"#,
    );
    let out = dir.path().join("verdict.json");
    kvr(&["decide", "--cells", &cells, "--out", out.to_str().unwrap()]).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&read(&dir, "verdict.json")).unwrap();
    assert_eq!(parsed["branch"], "A");
    assert_eq!(parsed["guard"], "registered");
    assert!((parsed["guard_mean_delta_pp"].as_f64().unwrap() - 1.005).abs() < 1e-9);

    let out2 = dir.path().join("verdict_sym.json");
    kvr(&[
        "decide", "--cells", &cells, "--symmetric-guard", "--out", out2.to_str().unwrap(),
    ])
    .unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&read(&dir, "verdict_sym.json")).unwrap();
    assert_eq!(parsed["branch"], "A");
    assert_eq!(parsed["guard"], "symmetric");
}

#[test]
fn analyze_probe_replays_grid() {
    let dir = TempDir::new().unwrap();
    let mut cells = Vec::new();
    for (model, budget, lambda, delta, n) in [
        ("qwen7b", 64, 0.5, 0.5, 201), ("qwen7b", 128, 0.5, 4.0, 201),
        ("llama8b", 64, 0.5, 0.0, 201), ("llama8b", 128, 0.5, -1.5, 201),
        ("qwen7b", 64, 1.0, -1.0, 201), ("qwen7b", 128, 1.0, 1.0, 201),
        ("llama8b", 64, 1.0, 0.0, 201), ("llama8b", 128, 1.0, -2.0, 201),
        ("qwen7b", 64, 1.5, 2.5, 200), ("qwen7b", 128, 1.5, 1.0, 164),
        ("llama8b", 64, 1.5, -1.9, 196), ("llama8b", 128, 1.5, 0.0, 201),
    ] {
        cells.push(serde_json::json!({
            "model": model, "budget": budget, "lambda": lambda, "delta_pp": delta, "n": n
        }));
    }
    let table = write(&dir, "probe.json", &serde_json::json!({ "cells": cells }).to_string());
    let out = dir.path().join("probe_out.json");
    kvr(&["analyze", "probe", "--table", &table, "--out", out.to_str().unwrap()]).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&read(&dir, "probe_out.json")).unwrap();
    assert_eq!(parsed["winner_lambda"], 0.5);
    assert_eq!(
        parsed["excluded_ranking"],
        serde_json::json!([0.5, 1.5, 1.0])
    );
}

#[test]
fn malformed_cells_file_gets_schema_exit_code() {
    let dir = TempDir::new().unwrap();
    let cells = write(&dir, "cells.json", "{not json");
    let err = kvr(&["decide", "--cells", &cells]).unwrap_err();
    assert_eq!(exit_code(&err), 3);
}
