use std::path::{Path, PathBuf};

use isoshell::cli_io::run_cli;
use isoshell::density_field::DensityField;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("cfg.json");
    std::fs::write(&p, body).unwrap();
    p
}

const TINY: &str = r#"{
  "analysis_spans": [8, 8],
  "design_spans": [4, 4],
  "termination": {"max_iterations": 6},
  "fairing": {"resolution": [60, 60]}
}"#;

#[test]
fn optimize_writes_all_outputs_and_fair_reuses_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("run");
    let code = run_cli(["isoshell", "optimize", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--checkpoint-every", "3"]);
    assert_eq!(code, 0);
    for f in ["config.json", "history.csv", "field.json", "mesh.vtk", "curves.json", "contours.svg", "checkpoint_003.json", "checkpoint_006.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let vtk = std::fs::read_to_string(out.join("mesh.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0"));
    assert!(vtk.contains("SCALARS density double 1"));

    // the echoed config reproduces the run
    let echo = out.join("config.json");
    let again = dir.path().join("again");
    assert_eq!(run_cli(["isoshell", "optimize", "--config", echo.to_str().unwrap(), "--out", again.to_str().unwrap()]), 0);
    assert_eq!(std::fs::read_to_string(again.join("history.csv")).unwrap(), csv);

    let field = DensityField::<f64>::load_json(&out.join("field.json")).unwrap();
    assert_eq!(field.tau, 2.0);
    let faired = dir.path().join("faired");
    let code = run_cli(["isoshell", "fair", "--field", out.join("field.json").to_str().unwrap(), "--out", faired.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(faired.join("curves.json").exists() && faired.join("contours.svg").exists());
}

#[test]
fn check_gradients_and_export_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    assert_eq!(run_cli(["isoshell", "check-gradients", "--config", cfg.to_str().unwrap(), "--samples", "4"]), 0);
    let out = dir.path().join("geo");
    assert_eq!(run_cli(["isoshell", "export-geometry", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let vtk = std::fs::read_to_string(out.join("geometry.vtk")).unwrap();
    assert!(vtk.contains("POINTS 81 double") && vtk.contains("CELLS 64 320"));
    assert!(out.join("surface.json").exists());
}

#[test]
fn bad_configs_fail_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"material": {"nu": 0.6}}"#);
    assert_eq!(run_cli(["isoshell", "optimize", "--config", cfg.to_str().unwrap()]), 2);
    let cfg = write_config(dir.path(), r#"{"geometry": {"file": "missing.json"}}"#);
    assert_eq!(run_cli(["isoshell", "export-geometry", "--config", cfg.to_str().unwrap()]), 2);
    assert_eq!(run_cli(["isoshell", "optimize", "--threads", "0", "--config", cfg.to_str().unwrap()]), 2);
}

#[test]
fn shipped_configs_are_valid() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let cfg = isoshell::cli_io::load_config(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        cfg.surface::<f64>().unwrap();
        n += 1;
    }
    assert!(n >= 7);
}
