use std::path::PathBuf;

use conjdense::harness::{emit_reports, run_experiment, ExperimentConfig, ReportFormat, RunRecord};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("conjdense-pipeline-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn demo_record_matches_golden_bytes() {
    let config = ExperimentConfig::load(&configs().join("demo.json")).unwrap();
    let record = run_experiment(&config).unwrap();
    let golden = std::fs::read_to_string(configs().join("demo.record.json")).unwrap();
    assert_eq!(record.to_json().unwrap(), golden);
    assert!(record.all_pass());
    assert_eq!(serde_json::from_str::<RunRecord>(&golden).unwrap(), record);
}

#[test]
fn emitted_reports_have_canonical_shape() {
    let config = ExperimentConfig::load(&configs().join("towers.json")).unwrap();
    let record = run_experiment(&config).unwrap();
    let dir = scratch("emit");
    let written = emit_reports(&record, &dir, &[ReportFormat::Json, ReportFormat::Csv]).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["towers.record.json", "towers.deviations.csv", "towers.chain.csv"]);

    let json = std::fs::read_to_string(dir.join("towers.record.json")).unwrap();
    assert!(json.ends_with("}\n") && !json.contains('\r'));
    assert_eq!(serde_json::from_str::<RunRecord>(&json).unwrap(), record);
    let chain = std::fs::read_to_string(dir.join("towers.chain.csv")).unwrap();
    assert!(chain.starts_with("name,value,bound,strict,holds\n"));
    assert_eq!(chain.lines().count(), 5);

    let towers = record.towers.as_ref().unwrap();
    assert!(towers.rank_one.verdict);
    let cert = towers.openness.as_ref().unwrap();
    assert!(cert.b_eff_within_b && cert.pass);
    assert_eq!(record.verdicts.get("openness_chain"), Some(&cert.chain_holds));
}

#[test]
fn same_config_same_hash_different_seed_different_hash() {
    let config = ExperimentConfig::load(&configs().join("demo.json")).unwrap();
    let a = run_experiment(&config).unwrap();
    let mut other = config.clone();
    other.seed += 1;
    let b = run_experiment(&other).unwrap();
    assert_eq!(a.content_hash, run_experiment(&config).unwrap().content_hash);
    assert_ne!(a.content_hash, b.content_hash);
}
