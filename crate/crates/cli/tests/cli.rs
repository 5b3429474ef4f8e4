use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bumpy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bumpy")).args(args).output().expect("binary runs")
}

/// Runs with `--out` inside a fresh temporary directory.
fn run_config(config: &Path, extra: &[&str]) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap().to_string();
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.as_str()];
    args.extend_from_slice(extra);
    (bumpy(&args), dir)
}

fn write_config(dir: &Path, src: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, src).unwrap();
    p
}

fn report(dir: &Path) -> String {
    fs::read_to_string(dir.join("report.txt")).unwrap()
}

/// Numeric rows of a dump, skipping `#` lines.
fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn libration_has_no_neat_time() {
    let (out, dir) = run_config(&configs().join("design_libration.toml"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no neat time"));
    let r = report(dir.path());
    assert!(r.contains("condition neat times exist: FAIL"), "{r}");
    assert!(r.contains("result = hypothesis violation: no neat time (exit 2)"), "{r}");
    assert!(dir.path().join("manifest.txt").exists());
}

#[test]
fn sigma_scan_matches_zero_energy_times() {
    let (out, dir) = run_config(&configs().join("sigma_indefinite.toml"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let events = rows(&dir.path().join("matrices/sigma_events.tsv"));
    let zeros = rows(&dir.path().join("matrices/zero_energy_times.tsv"));
    assert!(zeros.len() >= 2);
    assert_eq!(events.len(), zeros.len());
    for (e, z) in events.iter().zip(&zeros) {
        assert_eq!(e[0], 0.0);
        assert!((0.5 * (e[1] + e[2]) - z[0]).abs() <= 1e-8);
    }
    // With V = 0 the fiber energy is H, so these are the H = 0 times.
    for s in rows(&dir.path().join("matrices/trajectory_samples.tsv")) {
        assert!((s[1] - s[2]).abs() <= 1e-12 * (1.0 + s[1].abs()));
    }
}

#[test]
fn design_dumps_are_deterministic() {
    let cfg = configs().join("design_anisotropic.toml");
    let (a, da) = run_config(&cfg, &[]);
    let (b, db) = run_config(&cfg, &[]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(b.status.code(), Some(0));
    let names: Vec<_> = fs::read_dir(da.path().join("matrices")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(names.len() >= 10);
    for n in names {
        let x = fs::read(da.path().join("matrices").join(&n)).unwrap();
        let y = fs::read(db.path().join("matrices").join(&n)).unwrap();
        assert_eq!(x, y, "{n:?}");
    }
    assert_eq!(report(da.path()), report(db.path()));
    let r = report(da.path());
    assert!(r.contains("condition return map of H + u reaches the target: PASS"), "{r}");
    // A different seed picks a different direction.
    let (_, dc) = run_config(&cfg, &["--seed", "8"]);
    assert_ne!(
        fs::read(da.path().join("matrices/direction.tsv")).unwrap(),
        fs::read(dc.path().join("matrices/direction.tsv")).unwrap()
    );
}

#[test]
fn repeated_eigenvalue_k_loses_the_antisymmetric_direction() {
    let (out, dir) = run_config(&configs().join("controllability_repeated.toml"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert!(r.contains("condition brackets up to depth 3 span sp(2d): FAIL (rank 9 of 10)"), "{r}");
    assert!(r.contains("condition K(0) lies outside the exceptional set: FAIL"), "{r}");
    let sv = rows(&dir.path().join("matrices/span_singular_values.tsv"));
    // 3 basis matrices times W_0..W_3 give 12 columns in R^16.
    assert_eq!(sv.len(), 12);
    assert!(sv[8][0] > 1e-9 * sv[0][0]);
    assert!(sv[9][0] <= 1e-9 * sv[0][0]);
    let brackets = rows(&dir.path().join("matrices/brackets.tsv"));
    assert_eq!(brackets.len(), 3 * 4);
    assert_eq!(brackets[0].len(), 2 + 16);
}

#[test]
fn analyze_orbit_dumps_a_symplectic_return_map() {
    let (out, dir) = run_config(&configs().join("analyze_harmonic.toml"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let l = rows(&dir.path().join("matrices/return_map.tsv"));
    assert_eq!((l.len(), l[0].len()), (2, 2));
    let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
    assert!((det - 1.0).abs() <= 1e-9);
    // Rotation by 2 pi omega with omega = 1.3.
    let tr = l[0][0] + l[1][1];
    assert!((tr - 2.0 * (2.0 * std::f64::consts::PI * 1.3).cos()).abs() <= 1e-8, "{tr}");
}

#[test]
fn normal_form_task_reports_every_condition() {
    let (out, dir) = run_config(&configs().join("normal_form_nonconvex.toml"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r.matches("condition normal form: ").count(), 5);
    assert!(!r.contains("FAIL"));
    assert!(r.contains("normal form D = diag(+1, -1)"));
    let k = rows(&dir.path().join("matrices/normal_form_k.tsv"));
    assert_eq!(k.len(), 21);
    assert_eq!(k[0].len(), 2 + 4);
}

#[test]
fn verify_subset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[run]\ntask = \"verify\"\nseed = 0\n\n[verify]\ncriteria = [4, 5, 9]\n");
    let (out, od) = run_config(&cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(od.path());
    assert_eq!(r.matches(": PASS").count(), 3);
    assert!(r.contains("verification: 3 of 3 criteria passed"));
}

#[test]
fn verify_on_the_model_zoo_passes() {
    let (out, dir) = run_config(&configs().join("verify.toml"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(report(dir.path()).contains("verification: 10 of 10 criteria passed"));
}

#[test]
fn randomized_tasks_need_a_seed() {
    let (out, _) = run_config(&configs().join("controllability_repeated.toml"), &["--task", "verify"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[run]\ntask = \"analyze-orbit\"\n\n[model]\nkind = \"harmonic\"\nomega = \"fast\"\n");
    let (out, _) = run_config(&cfg, &[]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("config line 6"), "{err}");
    let cfg = write_config(dir.path(), "[run]\ntask = \"analyze-orbit\"\n[model\n");
    let (out, _) = run_config(&cfg, &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config line 3"));
}

#[test]
fn usage_errors_exit_3_and_help_exits_0() {
    assert_eq!(bumpy(&["--bogus"]).status.code(), Some(3));
    assert_eq!(bumpy(&["--task", "fly"]).status.code(), Some(3));
    assert_eq!(bumpy(&["--task", "verify", "--seed", "0", "--tol-scale", "-1"]).status.code(), Some(3));
    assert_eq!(bumpy(&["--config", "/nonexistent/run.toml"]).status.code(), Some(3));
    assert_eq!(bumpy(&[]).status.code(), Some(3));
    let help = bumpy(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("--tol-scale"));
    assert_eq!(bumpy(&["--version"]).status.code(), Some(0));
}

#[test]
fn tol_scale_and_task_override_reach_the_manifest() {
    let (out, dir) = run_config(&configs().join("normal_form_nonconvex.toml"), &["--task", "analyze-orbit", "--tol-scale", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let m = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(m.contains("task = analyze-orbit"));
    assert!(m.contains("tolerance closure = 1e-7"), "{m}");
    assert!(m.contains("exit status = 0"));
}
