//! End-to-end checks of the experiment runners and the binary.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use num_complex::Complex64;
use phasegate::cli;
use phasegate::config::ExperimentConfig;
use phasegate::krotov::ControlField;

const SHORT: &str = r#"
[atoms]
e1_au = 0.643
ea_au = 1.0
mass_au = 1000.0
mu0_au = 1.0

[trap]
omega_au = 1.0e-3
distance_a0 = 8.0

[interaction]
depth_omega = 100.0

[grid]
r_min_a0 = 2.0
r_max_a0 = 14.0
n_points = 64

[time]
duration_tv = 0.1
steps_per_period = 20

[krotov]
alpha_fraction = 0.2
max_iterations = 8
convergence_delta_f = 0.0

[run]
mode = "reduced"
"#;

fn short() -> ExperimentConfig {
    ExperimentConfig::from_toml(SHORT).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phasegate"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

const ARTIFACTS: [&str; 7] =
    ["report.txt", "report.csv", "convergence.csv", "pulse.csv", "spectrum.csv", "populations.csv", "phase_trace.csv"];

#[test]
fn identical_configs_give_identical_artifacts() {
    let cfg = short();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cli::run_optimize(&cfg, a.path(), None).unwrap();
    cli::run_optimize(&cfg, b.path(), None).unwrap();
    for name in ARTIFACTS {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
        let head = String::from_utf8(x).unwrap();
        assert!(head.starts_with(&format!("# config-hash: {}", cfg.hash)), "{name} lacks the provenance line");
    }
}

#[test]
fn zero_iterations_report_the_guess() {
    let mut cfg = short();
    cfg.krotov.max_iterations = 0;
    let out = cli::optimize(&cfg, None).unwrap();
    let setup = cli::build_setup(&cfg, cfg.mode).unwrap();
    let guess = cli::guess_field(&cfg);
    let mut prop = cfg.propagator.clone();
    prop.dt = guess.dt;
    let direct = setup.report(&setup.objective().propagate_all(&guess, &prop).unwrap()).unwrap();
    assert_eq!(out.record.field, guess);
    assert!((out.report.fidelity - direct.fidelity).abs() < 1e-14);
    assert!((out.report.chi - direct.chi).abs() < 1e-14);
    assert!((out.report.f00 - direct.f00).abs() < 1e-14);
}

#[test]
fn single_value_sweep_matches_optimize() {
    let text = format!("{SHORT}\n[sweep]\ngate_time_tv = [0.1]\n");
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let pts = cli::run_sweep(&cfg, dir.path(), None).unwrap();
    let single = cli::optimize(&short(), None).unwrap();
    let swept = pts[0].outcome.as_ref().unwrap();
    assert_eq!(swept.report, single.report);
    assert_eq!(swept.record.field, single.record.field);
    let table = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn failed_point_is_recorded_and_sweep_continues() {
    // A tiny series cap makes the deepest well unpropagatable.
    let text = format!("{}\n[propagator]\nmax_order = 48\n\n[sweep]\nc3_depth_omega = [10.0, 20.0, 1.0e6]\n", SHORT.replace("[interaction]\ndepth_omega = 100.0\n", ""));
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let pts = cli::run_sweep(&cfg, dir.path(), None).unwrap();
    assert!(pts[0].outcome.is_ok() && pts[1].outcome.is_ok());
    assert!(pts[2].outcome.is_err());
    let table = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[2].contains("failed"));
    assert!(rows[0].ends_with("max_iterations") && rows[1].ends_with("max_iterations"));
}

#[test]
fn resume_starts_from_saved_pulse() {
    let cfg = short();
    let dir = tempfile::tempdir().unwrap();
    let first = cli::run_optimize(&cfg, dir.path(), None).unwrap();
    let resumed = cli::run_optimize(&cfg, &dir.path().join("again"), Some(&dir.path().join("pulse.csv"))).unwrap();
    assert!((resumed.record.iterations[0].f - first.record.final_fidelity()).abs() < 1e-9);
    assert!(resumed.record.final_fidelity() >= first.record.final_fidelity() - 1e-10);
}

#[test]
fn zero_field_crosscheck_is_free_evolution() {
    let cfg = short();
    let field = ControlField::zero(cfg.duration, cfg.dt);
    let c = cli::crosscheck_field(&cfg, &field).unwrap();
    assert!(c.delta().abs() < 1e-12);
    let setup = cli::build_setup(&cfg, cfg.mode).unwrap();
    let (t, e0, e1) = (cfg.duration, setup.e0(), cfg.params.e1);
    let phi_t = setup.phi_t();
    let z = |phase: f64| Complex64::from_polar(1.0, phase);
    let tau = z(-(PI + phi_t)) * z(-e0 * t) + z(-phi_t) * z(-(e1 + e0) * t) * 2.0 + 1.0;
    assert!((c.f_full - tau.re / 4.0).abs() < 1e-9, "{} vs {}", c.f_full, tau.re / 4.0);
}

#[test]
fn detuned_full_model_is_reported() {
    let cfg = short();
    let out = cli::optimize(&cfg, None).unwrap();
    let mut shifted = cfg.clone();
    shifted.params.e_a += 0.05;
    let c = cli::crosscheck_field(&shifted, &out.record.field).unwrap();
    assert!(c.f_full.is_finite() && c.f_reduced.is_finite());
    assert!((c.f_full - out.report.fidelity).abs() > 1e-4);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), SHORT);
    let ok = bin().args(["estimate", good.to_str().unwrap()]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("t_int_pi_fs"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, SHORT.replace("mass_au = 1000.0", "mass_au = 1000.0\nmass_amu = 1.0")).unwrap();
    let code = bin().args(["optimize", bad.to_str().unwrap()]).output().unwrap().status.code();
    assert_eq!(code, Some(2));

    let coarse = dir.path().join("coarse.toml");
    std::fs::write(&coarse, SHORT.replace("steps_per_period = 20", "steps_per_period = 8")).unwrap();
    assert_eq!(bin().args(["optimize", coarse.to_str().unwrap()]).output().unwrap().status.code(), Some(2));

    let capped = dir.path().join("capped.toml");
    std::fs::write(&capped, format!("{SHORT}\n[propagator]\nmax_order = 4\n")).unwrap();
    let out = dir.path().join("out");
    let code = bin().args(["optimize", capped.to_str().unwrap(), "--out", out.to_str().unwrap()]).output().unwrap().status.code();
    assert_eq!(code, Some(3));
}

#[test]
fn binary_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out = dir.path().join("out");
    let run = bin()
        .args(["optimize", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2"])
        .output()
        .unwrap();
    assert!(run.status.success());
    for name in ARTIFACTS {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let pulse = out.join("pulse.csv");
    let cc = bin()
        .args(["crosscheck", cfg.to_str().unwrap(), "--pulse", pulse.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(cc.status.success());
    assert!(out.join("crosscheck.txt").exists());
    let eig = bin().args(["eigenstates", cfg.to_str().unwrap(), "--count", "5", "--out", out.to_str().unwrap()]).output().unwrap();
    assert!(eig.status.success());
    let csv = std::fs::read_to_string(out.join("eigenstates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 5);
    assert!(csv.lines().nth(1).unwrap().starts_with("n,energy_hartree,psi_1"));
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().and_then(|e| e.to_str()) == Some("toml") {
            ExperimentConfig::from_path(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}
