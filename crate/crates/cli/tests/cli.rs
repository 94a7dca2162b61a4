use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use prophunt::circuit::load_schedule;
use prophunt::code::make_rotated_surface;

fn prophunt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prophunt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn deff_of_transposed_baseline_is_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = prophunt(
        dir.path(),
        &["baseline", "--code", "surface:3", "--start", "nz-transposed", "--out", "bad.json"],
    );
    assert!(o.status.success(), "{o:?}");
    assert!(dir.path().join("bad.json.manifest.json").exists());
    let o = prophunt(dir.path(), &["deff", "--code", "surface:3", "--schedule", "bad.json"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "2");
    let o = prophunt(dir.path(), &["deff", "--code", "surface:3", "--schedule", "nz"]);
    assert_eq!(stdout(&o).trim(), "3");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = prophunt(dir.path(), &["deff", "--code", "nope.json", "--schedule", "nz"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
    let o = prophunt(dir.path(), &["deff", "--code", "surface:3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = prophunt(dir.path(), &["simulate", "--code", "surface:3", "--schedule", "nz", "--shots", "0"]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(dir.path().join("broken.json"), "{").unwrap();
    let o = prophunt(dir.path(), &["deff", "--code", "surface:3", "--schedule", "broken.json"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn optimize_from_good_schedule_applies_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = prophunt(
        dir.path(),
        &[
            "optimize", "--code", "surface:3", "--start", "nz", "--iters", "1", "--samples", "40", "--seed", "1",
            "--workers", "1", "--out", "run",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/iteration_000.json")).unwrap()).unwrap();
    assert_eq!(report["applied"].as_array().unwrap().len(), 0);
    let code = Arc::new(make_rotated_surface(3).unwrap());
    let s = load_schedule(dir.path().join("run/final_schedule.json"), code).unwrap();
    assert_eq!(s, prophunt::circuit::nz_schedule(3).unwrap());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/manifest.json")).unwrap()).unwrap();
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outputs.contains(&"run/final_schedule.json"));
    assert!(outputs.contains(&"run/iteration_000.json"));
}

#[test]
fn optimize_is_reproducible_with_one_worker() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = prophunt(
            dir.path(),
            &[
                "optimize", "--code", "surface:3", "--start", "coloration", "--iters", "3", "--samples", "100",
                "--seed", "4", "--workers", "1", "--out", out,
            ],
        );
        assert!(o.status.success(), "{o:?}");
    }
    let a = std::fs::read(dir.path().join("a/final_schedule.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/final_schedule.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn simulate_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = prophunt(
        dir.path(),
        &["simulate", "--code", "surface:3", "--schedule", "nz", "--shots", "20000", "--seed", "3", "--out", "s.csv"],
    );
    assert!(o.status.success(), "{o:?}");
    let mut r = csv::Reader::from_path(dir.path().join("s.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["schedule", "basis", "p", "shots", "failures", "rate", "ci_low", "ci_high"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows[..2] {
        let rate: f64 = row[5].parse().unwrap();
        let lo: f64 = row[6].parse().unwrap();
        let hi: f64 = row[7].parse().unwrap();
        assert!(lo <= rate && rate <= hi);
    }
    assert!(dir.path().join("s.csv.manifest.json").exists());
}

#[test]
fn zne_table_has_one_row_per_range() {
    let dir = tempfile::tempdir().unwrap();
    let o = prophunt(
        dir.path(),
        &["zne", "--lambda", "2", "--budget", "20000", "--seeds", "4", "--out", "z.csv"],
    );
    assert!(o.status.success(), "{o:?}");
    let mut r = csv::Reader::from_path(dir.path().join("z.csv")).unwrap();
    assert_eq!(r.records().count(), 3);
    let o = prophunt(dir.path(), &["zne", "--ranges", "9,7,5/9,8.5,8", "--seeds", "2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 2);
    let o = prophunt(dir.path(), &["zne", "--lambda", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scan_and_wcnf_export() {
    let dir = tempfile::tempdir().unwrap();
    let o = prophunt(
        dir.path(),
        &["scan", "--code", "surface:3", "--schedule", "nz-transposed", "--samples", "10", "--out", "scan.csv"],
    );
    assert!(o.status.success(), "{o:?}");
    let mut r = csv::Reader::from_path(dir.path().join("scan.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|row| &row[4] == "found"));
    let o = prophunt(
        dir.path(),
        &["export-wcnf", "--code", "surface:3", "--schedule", "nz-transposed", "--samples", "4", "--out", "w"],
    );
    assert!(o.status.success(), "{o:?}");
    let files: Vec<_> = std::fs::read_dir(dir.path().join("w"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "wcnf"))
        .collect();
    assert!(!files.is_empty());
    for f in files {
        let text = std::fs::read_to_string(f.path()).unwrap();
        prophunt::minweight::WcnfModel::parse_dimacs(&text).unwrap();
    }
}

#[test]
fn dem_and_stim_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = prophunt(
        dir.path(),
        &["dem", "--code", "surface:3", "--schedule", "nz", "--basis", "x", "--out", "m.dem"],
    );
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(dir.path().join("m.dem")).unwrap();
    assert!(text.lines().all(|l| l.starts_with("error(")));
    assert!(dir.path().join("m.dem.provenance.json").exists());
    let o = prophunt(dir.path(), &["stim", "--code", "surface:3", "--schedule", "nz", "--out", "c.stim"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("c.stim")).unwrap();
    assert!(text.contains("DETECTOR") && text.contains("OBSERVABLE_INCLUDE"));
    let o = prophunt(dir.path(), &["stim", "--code", "surface:3", "--schedule", "nz", "--basis", "both", "--out", "c.stim"]);
    assert_eq!(o.status.code(), Some(2));
}
