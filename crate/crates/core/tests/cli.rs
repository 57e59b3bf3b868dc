use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mfbm(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mfbm"));
    cmd.args(args).arg("--out").arg(dir.join("out"));
    if let Some(text) = config {
        let path = dir.join("run.toml");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn eigs_writes_bundles_and_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfbm(&["eigs"], Some("[truncation]\nm0 = 4\nn0 = 8\n"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    for m in 0..=4 {
        assert!(o.join(format!("eigensystem_m{m}.json")).exists());
    }
    assert!(!o.join("eigensystem_m5.json").exists());
    let rows = read_csv(&o.join("convergence.csv"));
    assert_eq!(rows[0], ["m", "n", "grid_coarse", "grid_fine", "lambda", "rel_step"]);
    for r in &rows[1..] {
        assert_eq!((r[2].as_str(), r[3].as_str()), ("64", "128"));
        let n: usize = r[1].parse().unwrap();
        if n <= 8 {
            assert!(r[5].parse::<f64>().unwrap() < 1e-4, "{r:?}");
        }
    }
}

#[test]
fn covcheck_pass_fault_and_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let small = "[covcheck]\nradii = 5\nm_max = 3\n";
    let ok = mfbm(&["covcheck"], Some(small), dir.path());
    assert_eq!(ok.status.code(), Some(0));
    let rows = read_csv(&dir.path().join("out/covcheck.csv"));
    assert_eq!(rows.len(), 1 + 2 * 3 * 4 * 25);

    let bad = mfbm(&["covcheck", "--perturb-gamma"], Some(small), dir.path());
    assert_eq!(bad.status.code(), Some(1));
    let err = String::from_utf8_lossy(&bad.stderr);
    let rec: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(rec["error"], "check_failed");
    assert!(rec["message"].as_str().unwrap().contains("max relative residual"));

    let empty = mfbm(&["covcheck"], Some("[covcheck]\nradii = 0\n"), dir.path());
    assert_eq!(empty.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfbm(&["eigs"], Some("[params]\nhurts = 0.5\n"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    let rec: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap();
    assert_eq!(rec["error"], "config");
    assert_eq!(rec["exit_code"], 2);
    assert_eq!(mfbm(&["bogus"], None, dir.path()).status.code(), Some(2));
    assert_eq!(mfbm(&["eigs", "--config", "/nonexistent.toml"], None, dir.path()).status.code(), Some(2));
}

#[test]
fn simulate_cholesky_three_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[simulate]\nmethod = \"cholesky\"\npoints = [[0.5, 0.0], [0.0, 0.5], [0.3, 0.3]]\n";
    let out = mfbm(&["simulate"], Some(cfg), dir.path());
    assert!(out.status.success());
    let rows = read_csv(&dir.path().join("out/sample_cholesky_r0.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0], ["x1", "x2", "value"]);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/sample_cholesky_r0.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 1);
}

#[test]
fn simulate_kl_reproducible_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[grid]\nnystrom = 32\n[simulate]\nstep = 0.5\n";
    let read = |d: &Path| fs::read(d.join("out/sample_kl_r0.csv")).unwrap();
    assert!(mfbm(&["simulate"], Some(cfg), dir.path()).status.success());
    let a = read(dir.path());
    assert!(mfbm(&["simulate"], Some(cfg), dir.path()).status.success());
    assert_eq!(a, read(dir.path()));
    assert!(mfbm(&["simulate", "--seed", "2"], Some(cfg), dir.path()).status.success());
    assert_ne!(a, read(dir.path()));
}

#[test]
fn simulate_spectral_bands_add_up() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[simulate]\nmethod = \"spectral\"\nstep = 0.25\nbands = [[1.0, 10.0], [10.0, 100.0]]\n";
    let out = mfbm(&["simulate"], Some(cfg), dir.path());
    assert!(out.status.success());
    let rows = read_csv(&dir.path().join("out/band_variance.csv"));
    assert!(rows.len() > 10);
    for r in &rows[1..] {
        assert!(r[4].parse::<f64>().unwrap() < 1e-2, "{r:?}");
    }
    assert!(dir.path().join("out/sample_spectral_b1_r0.csv").exists());
}

#[test]
fn rkhs_norm_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfbm(&["rkhs-norm"], Some("[grid]\nnystrom = 48\n"), dir.path());
    assert!(out.status.success());
    let norms = read_csv(&dir.path().join("out/rkhs_norms.csv"));
    assert_eq!(norms.len(), 4);
    for r in &norms[1..] {
        let rel: f64 = r[4].parse().unwrap();
        assert!(rel < 0.1, "{r:?}");
    }
    let mem = fs::read_to_string(dir.path().join("out/membership.csv")).unwrap();
    assert!(mem.contains("diverging") && mem.contains("converged"));
}

#[test]
fn limits_local_lil_five_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[limits]\nexample = \"local_lil\"\nschedule = [0.25, 0.125, 0.0625, 0.03125, 0.015625]\nshells = 64\n";
    let out = mfbm(&["limits"], Some(cfg), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("out/limits_local_lil.csv"));
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0][..6], ["example", "scale", "attract_excess", "attract_supdist", "enter_dist", "functional_sup"]);
    assert!(rows[1..].iter().all(|r| r[0] == "local_lil" && r[8] == "1"));
    assert!(dir.path().join("out/limits_local_lil.svg").exists());
    assert!(!dir.path().join("out/modulus.csv").exists());
}

#[test]
fn limits_resolution_error_reports_scale() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[limits]\nschedule = [0.25]\nmax_members = 2\nshells = 32\nmodulus_grid = 9\nmodulus_scales = [0.01]\n";
    let out = mfbm(&["limits"], Some(cfg), dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("resolution") && err.contains("scale 0.01"), "{err}");
}
