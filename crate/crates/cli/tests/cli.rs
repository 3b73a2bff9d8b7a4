use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_conjdense"));
    cmd.env_remove("CONJDENSE_OUT_DIR");
    cmd
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("conjdense-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn help_documents_every_subcommand_and_flag() {
    let out = bin().arg("--help").output().unwrap();
    let text = stdout(&out);
    for sub in ["metrics", "independence", "conjugate", "towers", "run"] {
        assert!(text.contains(sub), "missing {sub}");
    }
    let flags = [
        ("metrics", &["--left", "--right", "--basis", "--window"][..]),
        ("independence", &["--window", "--delta", "--seed", "--trials"][..]),
        ("conjugate", &["--epsilon", "--k", "--window", "--resolution-log2", "--seed", "--trials"][..]),
        ("towers", &["--height", "--sets", "--k", "--perturb"][..]),
        ("run", &["--config", "--out-dir", "CONJDENSE_OUT_DIR"][..]),
    ];
    for (sub, names) in flags {
        let text = stdout(&bin().args([sub, "--help"]).output().unwrap());
        for name in names {
            assert!(text.contains(name), "{sub} help lacks {name}");
        }
    }
}

#[test]
fn run_demo_reproduces_golden_record() {
    let dir = scratch("golden");
    let out = bin()
        .args(["run", "--config"])
        .arg(repo().join("configs/demo.json"))
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let produced = std::fs::read(dir.join("demo.record.json")).unwrap();
    let golden = std::fs::read(repo().join("configs/demo.record.json")).unwrap();
    assert!(produced == golden, "record differs from configs/demo.record.json");
    let csv = std::fs::read_to_string(dir.join("demo.deviations.csv")).unwrap();
    assert!(csv.starts_with("u,v,m,t_side,v_side,deviation\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 7);
    assert!(stderr(&out).contains("stage conjugacy"));
}

#[test]
fn output_directory_env_override() {
    let dir = scratch("env");
    let out = bin()
        .env("CONJDENSE_OUT_DIR", &dir)
        .args(["run", "--format", "csv", "--config"])
        .arg(repo().join("configs/demo.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.join("demo.deviations.csv").exists());
    assert!(!dir.join("demo.record.json").exists());
}

#[test]
fn invalid_config_reports_field() {
    let dir = scratch("invalid");
    let config = dir.join("bad.json");
    std::fs::write(
        &config,
        r#"{"resolution_log2": 1, "k": 1, "epsilon": "1/2", "window": 1, "independence_window": 2,
            "seed": 0, "trials": 1, "map": "hash", "q": [[{"0": 0}]]}"#,
    )
    .unwrap();
    let out = bin().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("atoms unrealizable") && err.contains("resolution_log2"), "{err}");
}

#[test]
fn metrics_row_on_four_cells() {
    let dir = scratch("metrics");
    std::fs::write(dir.join("p.json"), r#"{"resolution": 4, "forward": [0, 1, 2, 3]}"#).unwrap();
    std::fs::write(dir.join("r.json"), r#"{"resolution": 4, "forward": [1, 2, 3, 0]}"#).unwrap();
    std::fs::write(dir.join("basis.json"), r#"{"sets": [{"resolution": 4, "cells": [0, 1]}]}"#).unwrap();
    let out = bin()
        .current_dir(&dir)
        .args(["metrics", "--left", "p.json", "--right", "r.json", "--basis", "basis.json", "--window", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("d,a,tau_W,W"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "1/2");
    assert_eq!(row[1], "1/16");
    assert_eq!(row[3], "1");
}

#[test]
fn independence_report_is_json() {
    let out = bin()
        .args(["independence", "--resolution-log2", "10", "--window", "1", "--delta", "1/20", "--seed", "5"])
        .args(["--trials", "8"])
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["cardinality"], 3);
    assert_eq!(report["target"], "1/20");
    assert!(report["deviation"].as_str().unwrap().contains('/'));
    let success = report["success"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if success { 0 } else { 1 }));
}

#[test]
fn conjugate_writes_certificate_and_table() {
    let dir = scratch("conjugate");
    let out = bin()
        .args(["conjugate", "--epsilon", "1/2", "--k", "0", "--window", "2", "--resolution-log2", "12"])
        .args(["--seed", "1", "--trials", "16", "--out-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", stderr(&out));
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("conjugate.certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["ledger"]["eps2"], "1/40");
    assert_eq!(cert["bound_holds"], true);
    let csv = std::fs::read_to_string(dir.join("conjugate.deviations.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 5);
}

#[test]
fn towers_certificate_for_level_unions() {
    let dir = scratch("towers");
    // cyclic shift on 64 cells, height 4: levels are residues mod 4
    let union: Vec<usize> = (0..64).filter(|x| x % 4 == 1 || x % 4 == 2).collect();
    let sets = serde_json::json!([{ "resolution": 64, "cells": union }]);
    std::fs::write(dir.join("sets.json"), sets.to_string()).unwrap();
    let out = bin()
        .current_dir(&dir)
        .args(["towers", "--height", "4", "--sets", "sets.json", "--k", "4", "--perturb", "0", "--swaps", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let cert: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(cert["accuracy_a"], "0/1");
    assert_eq!(cert["b"], "1/64");
    assert_eq!(cert["b_eff"], "0/1");
    assert_eq!(cert["pass"], true);

    // one stray cell: accuracy 1/64 is not below 1/100
    let mut noisy: Vec<usize> = (0..64).filter(|x| x % 4 == 1).collect();
    noisy.insert(0, 0);
    let sets = serde_json::json!([{ "resolution": 64, "cells": noisy }]);
    std::fs::write(dir.join("noisy.json"), sets.to_string()).unwrap();
    let out = bin()
        .current_dir(&dir)
        .args(["towers", "--height", "4", "--sets", "noisy.json", "--k", "100", "--perturb", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("accuracy"));
}
