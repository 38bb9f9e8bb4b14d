use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cavlab::records::{read_csv, HEADER};
use cavlab::LabError;

fn cavlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavlab"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .expect("run cavlab")
}

fn config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_GRID: &str = r#"{
  "fem": {"h": 0.1},
  "experiment": {"positions": [[0.3, 0.5], [0.6, 0.6]], "fractions": [0.03, 0.07], "d0_values": [2, 1]}
}"#;

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"fem": {"h": 0.1, "mesh_size": 3}}"#);
    let out = cavlab(dir.path(), &["measure", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mesh_size"));
}

#[test]
fn bad_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"datum": {"preset": "swirl"}}"#);
    assert_eq!(cavlab(dir.path(), &["measure", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(cavlab(dir.path(), &["mesh", "--h", "-1"]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(cavlab(dir.path(), &["mesh", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn cavity_touching_the_wall_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"cavity": {"kind": "circle", "center": [0.95, 0.5], "radius": 0.1}, "fem": {"h": 0.1}}"#);
    assert_eq!(cavlab(dir.path(), &["measure", "--config", &cfg]).status.code(), Some(3));
    assert_eq!(cavlab(dir.path(), &["mesh", "--config", &cfg]).status.code(), Some(3));
}

#[test]
fn error_classes_map_to_exit_codes() {
    assert_eq!(LabError::Config(String::new()).exit_code(), 2);
    assert_eq!(LabError::Io(String::new()).exit_code(), 2);
    assert_eq!(LabError::Geometry(String::new()).exit_code(), 3);
    assert_eq!(LabError::Solver(String::new()).exit_code(), 4);
}

#[test]
fn mesh_and_solve_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"cavity": {"kind": "circle", "center": [0.5, 0.5], "radius": 0.15}, "fem": {"h": 0.1}}"#);
    assert!(cavlab(dir.path(), &["mesh", "--config", &cfg]).status.success());
    let mesh = fs::read_to_string(dir.path().join("out/mesh.txt")).unwrap();
    let head: Vec<&str> = mesh.lines().next().unwrap().split_whitespace().collect();
    assert_eq!([head[0], head[2], head[4]], ["vertices", "triangles", "edges"]);

    assert!(cavlab(dir.path(), &["solve", "--config", &cfg]).status.success());
    let nodal = fs::read_to_string(dir.path().join("out/nodal.txt")).unwrap();
    assert!(nodal.lines().filter(|l| !l.starts_with('#')).all(|l| l.split_whitespace().count() == 5));
    for t in ["traction.txt", "traction_cavity.txt"] {
        let text = fs::read_to_string(dir.path().join("out").join(t)).unwrap();
        assert!(text.lines().filter(|l| !l.starts_with('#')).all(|l| l.split_whitespace().count() == 3));
    }
}

fn grid_rows(dir: &Path, cfg: &str) -> Vec<cavlab::ExperimentRecord> {
    let out = cavlab(dir, &["grid", "--config", cfg, "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.join("out/grid.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), HEADER.join(","));
    read_csv(text.as_bytes()).unwrap()
}

#[test]
fn grid_is_deterministic_and_calibrates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL_GRID);
    let a = grid_rows(dir.path(), &cfg);
    let b = grid_rows(dir.path(), &cfg);
    assert_eq!(a.len(), 8);
    for (x, y) in a.iter().zip(&b) {
        let strip = |r: &cavlab::ExperimentRecord| {
            let mut r = r.clone();
            r.wall_ms = 0.0;
            r
        };
        assert_eq!(strip(x), strip(y));
    }
    assert!(a.iter().all(|r| r.lower <= r.area_frac && r.area_frac <= r.upper));
    assert!(dir.path().join("out/grid.svg").exists());

    let out = cavlab(dir.path(), &["calibrate", "--config", &cfg]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("out/calibration.txt")).unwrap();
    assert!(text.contains("K_hat") && text.contains("sandwich 100.0%"));

    assert!(cavlab(dir.path(), &["plot", "--overlay"]).status.success());
    let svg = fs::read_to_string(dir.path().join("out/scatter.svg")).unwrap();
    assert_eq!(cavlab::svg::marker_count(&svg), 8);
    assert!(svg.contains(r#"class="upper""#));
}

#[test]
fn fixed_constants_are_used_as_given() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"cavity": {"kind": "circle", "center": [0.5, 0.5], "radius": 0.15}, "fem": {"h": 0.1}}"#);
    let out = cavlab(dir.path(), &["measure", "--config", &cfg, "--k", "2", "--c", "3"]);
    assert!(out.status.success());
    let r = &read_csv(fs::File::open(dir.path().join("out/measure.csv")).unwrap()).unwrap()[0];
    assert!((r.upper - 2.0 * r.ratio).abs() <= 1e-15);
    assert!((r.lower - 3.0 * r.ratio * r.ratio * r.w0 / r.gnorm2).abs() <= 1e-12 * r.lower);
}
