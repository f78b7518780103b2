use std::fs;

use spikewave::experiments::{run_experiment, ExperimentKind, ExperimentSpec, Scale};
use spikewave::io::{read_json, read_table, sha256_hex, Manifest};

#[test]
fn experiment_manifest_matches_the_files_written() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec::new(ExperimentKind::Fig4Profiles);
    let manifest = run_experiment(&spec, dir.path()).unwrap();
    let reread: Manifest = read_json(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(manifest, reread);
    assert_eq!(manifest.experiment, "fig4-profiles");
    for f in &manifest.files {
        let bytes = fs::read(dir.path().join(&f.path)).unwrap();
        assert_eq!(bytes.len() as u64, f.bytes);
        assert_eq!(sha256_hex(&bytes), f.sha256);
    }
    let csv = manifest.files.iter().find(|f| f.path.ends_with(".csv")).unwrap();
    let table = read_table(&dir.path().join(&csv.path)).unwrap();
    assert_eq!(table.header, ["xi", "nu", "sigma"]);
    assert!(table.rows.iter().all(|r| r.iter().all(|x| x.parse::<f64>().is_ok())));
}

#[test]
fn kinds_parse_from_their_names() {
    for kind in ExperimentKind::ALL {
        assert_eq!(kind.name().parse::<ExperimentKind>().unwrap(), kind);
    }
    assert!("fig10".parse::<ExperimentKind>().is_err());
}

#[test]
fn oversized_scale_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new(ExperimentKind::Fig2Bump);
    spec.scale = Scale { n: Some(1_000_000), ..Default::default() };
    let err = run_experiment(&spec, dir.path()).unwrap_err();
    assert_eq!(err.class(), spikewave::error::ErrorClass::Config);
}
