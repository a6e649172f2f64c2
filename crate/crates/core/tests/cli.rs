use std::path::Path;
use std::process::{Command, Output};

use gllod::io::{write_csv_file, ErrorRow};

fn gllod(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gllod"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const FIXED_POINT: &str = "kappa = 6\nfield_amplitude = 0\nu_level = 3\na_level = 3\nfine_level = 3\n\
                           lod = off\ninit = constant\ninit_value = 1\noutput_dir = fp\n";

#[test]
fn solve_fixed_point_writes_two_energy_rows() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.txt"), FIXED_POINT).unwrap();
    let o = gllod(&["solve", "--config", "c.txt"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("fp/energy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("fp/u.glf").exists() && dir.path().join("fp/a.glf").exists());
    let energies = gllod::io::read_energy_csv(&csv).unwrap();
    assert!(energies.iter().all(|e| e.abs() <= 1e-13));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gllod(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(gllod(&["solve"], dir.path()).status.code(), Some(1));
    assert_eq!(gllod(&["--help"], dir.path()).status.code(), Some(0));

    std::fs::write(dir.path().join("bad.txt"), "kappa = 6\ncolour = blue\n").unwrap();
    let o = gllod(&["solve", "--config", "bad.txt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(gllod(&["info", "--config", "missing.txt"], dir.path()).status.code(), Some(2));

    std::fs::write(dir.path().join("short.txt"), "kappa = 6\nu_level = 3\na_level = 3\nlod = off\nmax_steps = 1\n").unwrap();
    let o = gllod(&["solve", "--config", "short.txt"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no convergence"));
}

#[test]
fn plot_draws_one_polyline_per_kappa_and_a_cubic_guide() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<ErrorRow> = [6.0, 12.0]
        .iter()
        .flat_map(|&kappa| {
            (2..6u32).map(move |level| {
                let h = 0.5f64.powi(level as i32);
                let e = kappa * h.powi(3);
                ErrorRow {
                    kappa,
                    level,
                    mesh_size: h,
                    err_l2_u: e,
                    err_h1k_u: e,
                    err_l2_a: e,
                    err_h1_a: e,
                    err_energy: e,
                }
            })
        })
        .collect();
    write_csv_file(&dir.path().join("rates.csv"), &rows).unwrap();
    let o = gllod(&["plot", "rates.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("rates.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(r#"data-slope="3""#));
}

#[test]
fn plot_energy_history() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.txt"), FIXED_POINT).unwrap();
    assert_eq!(gllod(&["solve", "--config", "c.txt"], dir.path()).status.code(), Some(0));
    let o = gllod(&["plot", "fp/energy.csv", "--output", "e.svg"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("e.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
}

#[test]
fn check_prints_one_line_per_suite() {
    let dir = tempfile::tempdir().unwrap();
    let o = gllod(&["check"], dir.path());
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn info_reports_sizes_and_worker_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.txt"), "u_level = 3\na_level = 5\nfine_level = 5\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gllod"))
        .args(["info", "--config", "c.txt"])
        .current_dir(dir.path())
        .env("GLLOD_WORKERS", "3")
        .output()
        .unwrap();
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0));
    assert!(text.contains("81 complex dofs"), "{text}");
    assert!(text.contains("workers 3"), "{text}");
    assert!(text.contains("lod = on"));
}
