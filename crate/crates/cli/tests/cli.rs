use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use epflow_core::csv::{read_table, Table};

fn epflow(cmd: &str, config: &str, dir: &Path, extra: &[&str], env: &[(&str, &str)]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    let mut c = Command::new(env!("CARGO_BIN_EXE_epflow"));
    c.arg(cmd).arg("--config").arg(&cfg).arg("--out").arg(dir).args(extra).env_remove("EPFLOW_THREADS");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn table(path: &Path) -> Table {
    read_table(&fs::read_to_string(path).unwrap()).unwrap()
}

const ROTATION: &str = "[model]\nname = \"rotation\"\nomega = 1.0\n";

#[test]
fn rate_matches_closed_form_for_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let out = epflow("rate", &format!("{ROTATION}[rate]\nsigma_step = 0.05\n"), dir.path(), &[], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let cgf = table(&dir.path().join("cgf.csv"));
    let (alphas, e) = (cgf.column("alpha").unwrap(), cgf.column("e").unwrap());
    for (a, v) in alphas.iter().zip(&e) {
        // e(α) = 1 − √(1 + 4α(1 − α)) for ω = 1.
        let exact = 1.0 - (1.0 + 4.0 * a * (1.0 - a)).sqrt();
        assert!((v - exact).abs() < 1e-10, "alpha {a}: {v} vs {exact}");
    }

    let rate = table(&dir.path().join("rate.csv"));
    let (sig, es) = (rate.column("sigma").unwrap(), rate.column("e_star").unwrap());
    let at = |s: f64| es[sig.iter().position(|x| (x - s).abs() < 1e-9).unwrap()];
    assert!((at(0.0) - (2f64.sqrt() - 1.0)).abs() < 1e-3, "{}", at(0.0));
    assert!(at(2.0).abs() < 1e-3, "{}", at(2.0));
    assert!((at(-2.0) - 2.0).abs() < 1e-3, "{}", at(-2.0));
    for (s, v) in sig.iter().zip(&es) {
        if let Some(k) = sig.iter().position(|x| (x + s).abs() < 1e-9) {
            assert!((v - es[k] + s).abs() < 1e-9, "sigma {s}");
        }
    }
    assert!(cgf.metadata.iter().any(|m| m.starts_with("model.name")));
}

#[test]
fn admissible_rasters_contain_unit_segment_at_p_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[admissible]\nk_b = [0.33, 0.49]\nh_b = [0.75, 1.5]\nalpha_points = 31\np_points = 21\np_min = 0.0\np_max = 4.0\n";
    let out = epflow("admissible", cfg, dir.path(), &[], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for panel in 1..=2 {
        let t = table(&dir.path().join(format!("raster_{panel}.csv")));
        assert_eq!(t.rows.len(), 31 * 21);
        let (a, p, ok) = (t.column("alpha").unwrap(), t.column("p").unwrap(), t.column("admissible").unwrap());
        for k in 0..a.len() {
            if (p[k] - 2.0).abs() < 1e-12 && (0.0..=1.0).contains(&a[k]) {
                assert_eq!(ok[k], 1.0, "panel {panel} alpha {}", a[k]);
            }
            if p[k] <= 1.0 {
                assert_eq!(ok[k], 0.0);
            }
        }
    }
}

#[test]
fn simulate_output_is_thread_count_independent() {
    let cfg = format!(
        "{ROTATION}[simulate]\neps = 0.5\ndt = 1e-2\nhorizon = 1.0\nn_paths = 300\nseed = 4\ninit = \"mu0\"\nalphas = [0.5]\n"
    );
    let one = tempfile::tempdir().unwrap();
    let two = tempfile::tempdir().unwrap();
    let out = epflow("simulate", &cfg, one.path(), &["--threads", "1"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = epflow("simulate", &cfg, two.path(), &[], &[("EPFLOW_THREADS", "3")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["paths.csv", "mgf.csv", "histogram.csv", "moments.csv"] {
        let a = fs::read(one.path().join(f)).unwrap();
        let b = fs::read(two.path().join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    assert_eq!(table(&one.path().join("paths.csv")).rows.len(), 300);
}

#[test]
fn seed_override_changes_paths() {
    let cfg = format!("{ROTATION}[simulate]\neps = 0.5\ndt = 5e-3\nhorizon = 0.5\nn_paths = 50\nseed = 4\n");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(epflow("simulate", &cfg, a.path(), &[], &[]).status.success());
    assert!(epflow("simulate", &cfg, b.path(), &["--seed", "5"], &[]).status.success());
    let pa = table(&a.path().join("paths.csv")).column("S_ito").unwrap();
    let pb = table(&b.path().join("paths.csv")).column("S_ito").unwrap();
    assert_ne!(pa, pb);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = epflow("rate", &format!("{ROTATION}[rate]\nsigma_stp = 0.05\n"), dir.path(), &[], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma_stp"));

    let out = epflow("spectrum", &format!("{ROTATION}[rate]\n"), dir.path(), &[], &[]);
    assert_eq!(out.status.code(), Some(1));

    let out = epflow("rate", "[model]\nname = \"spiral\"\n[rate]\n", dir.path(), &[], &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_guard_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{ROTATION}[spectrum]\neps = 0.05\nbox_lo = -5.0\nbox_hi = 5.0\nn = 32\n");
    let out = epflow("spectrum", &cfg, dir.path(), &[], &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("spectrum.csv").exists());
}

#[test]
fn spectrum_writes_positive_eigenvector() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{ROTATION}[spectrum]\nalpha = 0.5\neps = 0.5\neigvec = true\n");
    let out = epflow("spectrum", &cfg, dir.path(), &[], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = table(&dir.path().join("spectrum.csv"));
    let lambda = s.column("lambda").unwrap()[0];
    assert!((lambda - (1.0 - 2f64.sqrt())).abs() < 5e-3, "{lambda}");
    let psi = table(&dir.path().join("eigvec.csv")).column("psi").unwrap();
    assert!(psi.iter().all(|v| *v >= -1e-8));
}
