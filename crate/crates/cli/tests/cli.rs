use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const FRINGES: &str = r#"
kind = "fringes"
lambda_nm = 876.1
pump_wavelength_nm = 795.0
seed = 11
trials = 2000

[converter]
qe = 0.5

[scan]
x_start_nm = 0.0
x_stop_nm = 1300.0
points = 40
"#;

fn freqhop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqhop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fringes_writes_table_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "f.toml", FRINGES);
    let out = dir.path().join("out");
    let o = freqhop(&["fringes", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("fringes.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("index,x_nm,volts,phi_rad,psi_rad,p_D_A"));
    assert!(header.ends_with("n_DBAR_B"));
    assert_eq!(csv.lines().count(), 41);
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"ir_period_nm\""));
    assert!(stdout(&o).contains("ir_visibility"));
}

#[test]
fn analytic_only_drops_count_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "f.toml", FRINGES);
    let out = dir.path().join("out");
    let o = freqhop(&["fringes", "--config", &cfg, "--out", out.to_str().unwrap(), "--analytic-only"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("fringes.csv")).unwrap();
    assert!(!csv.lines().next().unwrap().contains("n_D_A"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "f.toml", FRINGES);
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = freqhop(&["fringes", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        files.push((
            fs::read(out.join("fringes.csv")).unwrap(),
            fs::read(out.join("summary.json")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "f.toml", FRINGES);
    let read = |seed: &str| {
        let out = dir.path().join(format!("s{seed}"));
        let o = freqhop(&["fringes", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success());
        fs::read_to_string(out.join("summary.json")).unwrap()
    };
    let s5 = read("5");
    assert!(s5.contains("\"seed\": 5"));
    assert_ne!(s5, read("6"));
}

#[test]
fn unknown_key_exits_with_config_status() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.toml", &FRINGES.replace("points = 40", "points = 40\nstepz = 2"));
    let o = freqhop(&["fringes", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("stepz"), "{err}");
    assert!(err.contains("line"), "{err}");
}

#[test]
fn kind_must_match_subcommand() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "f.toml", FRINGES);
    let o = freqhop(&["hbt", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fringes"));
}

#[test]
fn missing_file_is_a_config_error() {
    let o = freqhop(&["ebit", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_post_selection_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "e.toml",
        "kind = \"ebit\"\nlambda_nm = 876.1\npump_wavelength_nm = 795.0\n\
         [converter]\ntheta_rad = 0.0\n[ebit]\nalpha = [1.0, 0.0]\nbeta = [0.0, 0.0]\n",
    );
    let o = freqhop(&["ebit", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn hbt_single_photon_has_no_coincidences() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "h.toml",
        "kind = \"hbt_nonlinear\"\nlambda_nm = 876.1\npump_wavelength_nm = 795.0\nseed = 2\ntrials = 20000\n\
         [converter]\nqe = 0.5\n[hbt]\npair = 1\n",
    );
    let out = dir.path().join("out");
    let o = freqhop(&["hbt", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("hbt.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("D_1&DBAR_1,") && l.ends_with(",0")), "{csv}");
}

#[test]
fn qe_curve_marks_overlay_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "q.toml",
        "kind = \"qe_curve\"\nlambda_nm = 876.1\npump_wavelength_nm = 795.0\n\
         [crystal]\ncalibration_qe = 1.0\ncalibration_intensity_gw_cm2 = 200.0\n\
         [qe_curve]\nintensity_start_gw_cm2 = 0.0\nintensity_stop_gw_cm2 = 200.0\npoints = 5\n",
    );
    let out = dir.path().join("out");
    let o = freqhop(&["qe-curve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("qe_curve.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.ends_with(",model")).count(), 5);
    assert_eq!(csv.lines().filter(|l| l.ends_with(",anchor")).count(), 1);
    assert_eq!(csv.lines().filter(|l| l.ends_with(",experiment")).count(), 2);
}

#[test]
fn replay_prints_bounds() {
    let dir = TempDir::new().unwrap();
    let o = freqhop(&["replay-counts", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("linear_ir: N = 100000, N_A = 1015, N_B = 1223, N_C = 0, g2 <= 8.05e-2"), "{text}");
    assert!(text.contains("g2 <= 1.48e-1"));
    assert!(text.contains("g2 <= 5.32e-2"));

    let o = freqhop(&["replay-counts", "--counts", "100,0,5,0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bundled_configs_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = TempDir::new().unwrap();
    for (file, cmd) in [
        ("fringes.toml", "fringes"),
        ("single_shot.toml", "fringes"),
        ("hbt_linear.toml", "hbt"),
        ("hbt_nonlinear.toml", "hbt"),
        ("qe_curve.toml", "qe-curve"),
        ("ebit.toml", "ebit"),
    ] {
        let cfg = root.join(file);
        let out = dir.path().join(file);
        let o = freqhop(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--trials", "1000"]);
        assert!(o.status.success(), "{file}: {}", stderr(&o));
    }
}
