use std::path::Path;
use std::process::{Command, Output};

use homogl::io::FieldFile;

fn homogl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homogl")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
        .parse()
        .unwrap()
}

#[test]
fn cell_of_identity_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = homogl(&["cell", "--material", "identity", "--grid", "16", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<Vec<f64>> = stdout(&o).lines().map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    for f in ["a0.csv", "chi1.hgl", "chi2.hgl"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn cell_of_laminate_matches_means() {
    let o = homogl(&["cell", "--material", "laminate:2,1", "--grid", "32"]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<Vec<f64>> = stdout(&o).lines().map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    // harmonic mean of 2 + sin is sqrt(3); arithmetic mean is 2
    let (a11, a22) = (rows[0][0], rows[1][1]);
    assert!((a11 - 3f64.sqrt()).abs() < 1e-2 || (a22 - 3f64.sqrt()).abs() < 1e-2, "{rows:?}");
    assert!((a11 - 2.0).abs() < 1e-2 || (a22 - 2.0).abs() < 1e-2, "{rows:?}");
}

#[test]
fn minimize_then_vortex_and_unfold() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("u.hgl");
    let f = field.to_str().unwrap();
    let o = homogl(&["minimize", "--grid", "33", "--delta", "0.5", "--epsilon", "0.2", "--degree", "1", "--tol", "1e-7", "--out", f]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}{}", String::from_utf8_lossy(&o.stderr));
    assert!(value(&text, "energy") > 0.0);
    assert!(value(&text, "max_modulus") <= 1.0 + 1e-12);
    let u = FieldFile::read(&field).unwrap();
    assert_eq!((u.nx, u.ny, u.components), (33, 33, 2));

    let o = homogl(&["minimize", "--grid", "33", "--delta", "0.5", "--epsilon", "0.2", "--tol", "1e-7", "--seed-file", f, "--out", f]);
    assert_eq!(o.status.code(), Some(0));
    assert!(value(&stdout(&o), "iterations") <= 1.0, "a converged seed needs no steps");

    let o = homogl(&["vortex", "--field", f, "--epsilon", "0.2", "--degree", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "center_x,center_y,radius,degree,lambda");
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1].split(',').nth(3), Some("1"));
    assert_eq!(homogl(&["vortex", "--field", f, "--epsilon", "0.2", "--degree", "2"]).status.code(), Some(2));

    let o = homogl(&["unfold", "--field", f, "--delta", "0.5", "--cell-grid", "16"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    assert!(csv.starts_with("anchor_x,anchor_y,g1_re,g1_im,g2_re,g2_im,c1_re,c1_im,c2_re,c2_im,residual\n"));
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 11));
}

#[test]
fn annulus_of_identity_is_the_pure_angle() {
    let dir = tempfile::tempdir().unwrap();
    let lift = dir.path().join("lift.hgl");
    let o = homogl(&[
        "annulus", "--alpha", "0.5", "--beta", "2", "--kappa", "-2", "--field", "identity", "--ntheta", "32", "--out",
        lift.to_str().unwrap(),
    ]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    let exact = 2.0 * std::f64::consts::PI * 4.0 * 4f64.ln();
    assert!((value(&text, "mu") - exact).abs() < 1e-8 * exact, "{text}");
    let f = FieldFile::read(&lift).unwrap();
    assert_eq!((f.nx, f.ny, f.components), (17, 32, 1));
    assert!((f.origin[0] - 0.5f64.ln()).abs() < 1e-15);
    assert!((f.h * 16.0 - 4f64.ln()).abs() < 1e-12);
}

#[test]
fn annulus_competitor_reports_excess() {
    let o = homogl(&["annulus", "--alpha", "0.25", "--beta", "2", "--field", "laminate:2,1", "--ntheta", "64", "--competitor", "--out", "/dev/null"]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(value(&text, "excess") >= 0.0);
    assert!(value(&text, "competitor_energy") >= value(&text, "mu"));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "grid = 65\nno_such_key = 1\n").unwrap();
    let o = homogl(&["--config", cfg.to_str().unwrap(), "cell"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_key"));
    assert_eq!(homogl(&["vortex", "--field", "/nonexistent.hgl", "--epsilon", "0.1"]).status.code(), Some(1));
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn empty_report_says_no_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "# nothing to sweep\n");
    let out = dir.path().join("out");
    let o = homogl(&["--config", &cfg, "report", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no runs"));
    assert!(out.join("energy.csv").exists() && out.join("mu.csv").exists());
}

#[test]
fn sweep_writes_tables_and_respects_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid = 65\ncell_grid = 16\ndegree = 1\ndeltas = 0.5, 0.45\nepsilons.1 = 0.2\nepsilons.2 = 0.1\n");
    let out = dir.path().join("sweep");
    let o = homogl(&["--config", &cfg, "--set", "material=laminate:2,1", "sweep", "--out", out.to_str().unwrap()]);
    let text = stdout(&o);
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{text}");
    assert_eq!(o.status.code() == Some(0), text.contains("converged: yes"));
    assert!(text.contains("material: laminate:2,1"));
    for f in ["energy.csv", "exterior_mass.csv", "residual.csv", "vortices.csv", "a0.csv", "stages.csv", "u_n1.hgl", "u_n2.hgl"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let energy = std::fs::read_to_string(out.join("energy.csv")).unwrap();
    assert_eq!(energy.lines().count(), 3);
}
