//! End-to-end behaviour of the `coldamp` binary: exit codes, artifacts,
//! manifests, overrides and reproducibility.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coldamp::spectral::{PsdUnit, SpectrumFit};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn coldamp(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_coldamp"));
    cmd.current_dir(dir).args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("COLDAMP_")) {
        cmd.env_remove(k);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Short simulate run: two gains, one trajectory exported as CSV.
const SDE_ENV: &[(&str, &str)] = &[
    ("COLDAMP_SIMULATION__DURATION", "2e3"),
    ("COLDAMP_SIMULATION__DT", "0.05"),
    ("COLDAMP_SIMULATION__TRAJECTORIES", "2"),
    ("COLDAMP_SWEEP__VALUES", "1e2, g_opt"),
];

#[test]
fn lists_bundled_scenarios() {
    let tmp = TempDir::new().unwrap();
    let o = coldamp(tmp.path(), &["list-scenarios"], &[]);
    assert!(o.status.success());
    let out = stdout(&o);
    for name in ["figure2", "figure3", "sde", "ringdown"] {
        assert!(out.contains(name), "{out}");
    }
}

#[test]
fn bundled_scenarios_validate() {
    let tmp = TempDir::new().unwrap();
    for name in ["figure2", "figure3", "sde", "ringdown"] {
        let o = coldamp(tmp.path(), &["validate", name], &[]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert!(stdout(&o).contains("valid: scenario"));
    }
}

#[test]
fn figure2_writes_budget_columns_and_reaches_the_minimum() {
    let tmp = TempDir::new().unwrap();
    let o = coldamp(tmp.path(), &["run", "figure2", "--out", "f2"], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("f2/budget.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    for col in ["n_c", "n_imp", "n_tot", "product", "product_closed_form", "n_ba", "gamma_meas_hz"] {
        assert!(header.contains(&col), "{header:?}");
    }
    let pi = header.iter().position(|c| *c == "product").unwrap();
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 101);
    let min = rows.iter().map(|r| r[pi]).fold(f64::INFINITY, f64::min);
    assert!((min - 5.0).abs() < 0.2, "{min}");
}

#[test]
fn manifest_lists_every_output_with_its_hash() {
    let tmp = TempDir::new().unwrap();
    let o = coldamp(tmp.path(), &["run", "figure3", "--out", "f3", "--seed", "9"], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("f3");
    let m = json(&dir.join("manifest.json"));
    assert_eq!(m["scenario"], "figure3");
    assert_eq!(m["mode"], "cooling-sweep");
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config_source"], "bundled:figure3");
    assert!(m["timestamp"].as_str().unwrap().ends_with('Z'));
    assert!(m["overrides"].as_array().unwrap().iter().any(|v| v == "scenario.seed (--seed)"));
    let outputs = m["outputs"].as_array().unwrap();
    let mut listed: Vec<String> = outputs.iter().map(|e| e["path"].as_str().unwrap().to_string()).collect();
    for e in outputs {
        let bytes = fs::read(dir.join(e["path"].as_str().unwrap())).unwrap();
        assert_eq!(e["bytes"], bytes.len() as u64);
        assert_eq!(e["sha256"], hex::encode(Sha256::digest(&bytes)));
    }
    let mut on_disk: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    listed.sort();
    on_disk.sort();
    assert_eq!(listed, on_disk);
}

#[test]
fn simulation_is_byte_reproducible_across_runs_and_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let a = coldamp(tmp.path(), &["run", "sde", "--out", "a"], SDE_ENV);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = coldamp(tmp.path(), &["run", "sde", "--out", "b", "--threads", "2"], SDE_ENV);
    assert!(b.status.success(), "{}", stderr(&b));
    let c = coldamp(tmp.path(), &["run", "sde", "--out", "c", "--seed", "2"], SDE_ENV);
    assert!(c.status.success(), "{}", stderr(&c));
    let ma = json(&tmp.path().join("a/manifest.json"));
    let mb = json(&tmp.path().join("b/manifest.json"));
    let mc = json(&tmp.path().join("c/manifest.json"));
    assert_eq!(ma["outputs"], mb["outputs"]);
    assert!(ma["outputs"].as_array().unwrap().iter().any(|e| e["path"] == "trajectory_p00_t00.csv"));
    let a_traj = fs::read(tmp.path().join("a/trajectory_p00_t00.csv")).unwrap();
    let b_traj = fs::read(tmp.path().join("b/trajectory_p00_t00.csv")).unwrap();
    let c_traj = fs::read(tmp.path().join("c/trajectory_p00_t00.csv")).unwrap();
    assert_eq!(a_traj, b_traj);
    assert_ne!(a_traj, c_traj);
    assert_ne!(ma["outputs"], mc["outputs"]);
}

#[test]
fn environment_override_is_applied_and_recorded() {
    let tmp = TempDir::new().unwrap();
    let o = coldamp(tmp.path(), &["run", "figure2", "--out", "f2"], &[("COLDAMP_SWEEP__POINTS", "11")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("f2/budget.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    let m = json(&tmp.path().join("f2/manifest.json"));
    assert!(m["overrides"].as_array().unwrap().iter().any(|v| v == "sweep.points (environment)"), "{m}");
}

#[test]
fn empty_sweeps_are_rejected_without_output() {
    let tmp = TempDir::new().unwrap();
    let o = coldamp(tmp.path(), &["run", "figure2", "--out", "e1"], &[("COLDAMP_SWEEP__POINTS", "0")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sweep is empty"), "{}", stderr(&o));
    assert!(!tmp.path().join("e1").exists());

    let cfg = fs::read_to_string("scenarios/figure3.cfg").unwrap();
    let cfg = cfg
        .lines()
        .filter(|l| !["start", "stop", "points", "scale"].iter().any(|k| l.starts_with(k)))
        .collect::<Vec<_>>()
        .join("\n")
        + "\nvalues =\n";
    write(tmp.path(), "empty.cfg", &cfg);
    let o = coldamp(tmp.path(), &["run", "empty.cfg", "--out", "e2"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sweep.values") && stderr(&o).contains("sweep is empty"), "{}", stderr(&o));
    assert!(!tmp.path().join("e2").exists());
}

#[test]
fn coarse_step_names_the_key_and_the_limit_once() {
    let tmp = TempDir::new().unwrap();
    let o = coldamp(tmp.path(), &["validate", "sde"], &[("COLDAMP_SIMULATION__DT", "0.5")]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("simulation.dt") && err.contains("dt*omega_m"), "{err}");
    assert!(err.contains("COLDAMP_SIMULATION__DT"), "{err}");
    assert_eq!(err.matches("dt*omega_m").count(), 1, "{err}");
}

#[test]
fn overspecified_ideality_warns_with_both_derivations() {
    let tmp = TempDir::new().unwrap();
    let cfg = "[scenario]\nname = comp\nmode = analytic-budget\n\
               [oscillator]\nfrequency = 4.3e6\nlinewidth = 5.7\nmass = 2e-11\ntemperature = 4\n\
               [cavity]\nkappa_0 = 440e6\nkappa_ex = 630e6\nsplitting = 360e6\nwavelength = 780e-9\n\
               [readout]\ng0 = 19e3\neta_d = 0.8\npower = 1e-6\nideality = 0.9\n\
               [sweep]\nparameter = power\nstart = 1e-7\nstop = 1e-5\npoints = 5\n";
    write(tmp.path(), "comp.cfg", cfg);
    let o = coldamp(tmp.path(), &["validate", "comp.cfg"], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("warning:") && err.contains("readout.ideality"), "{err}");
    assert!(err.contains("stated ideality 0.9") && err.contains("eta_c*eta_d"), "{err}");
}

#[test]
fn configuration_errors_map_to_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let o = coldamp(tmp.path(), &["run", "missing.cfg"], &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("missing.cfg"));

    write(tmp.path(), "bad.cfg", "[scenario]\nname = x\nmode = analytic-budget\nbogus line\n");
    let o = coldamp(tmp.path(), &["validate", "bad.cfg"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let fig2 = fs::read_to_string("scenarios/figure2.cfg").unwrap();
    write(tmp.path(), "unknown.cfg", &fig2.replace("[readout]", "[readout]\ncolour = blue"));
    let o = coldamp(tmp.path(), &["validate", "unknown.cfg"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("readout.colour") && stderr(&o).contains("unknown key"), "{}", stderr(&o));

    let o = coldamp(tmp.path(), &["run", "figure2", "--threads", "0"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_path_that_is_a_file_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "taken", "x");
    let o = coldamp(tmp.path(), &["run", "figure2", "--out", "taken"], &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn locked_output_directory_is_refused_and_left_alone() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("busy");
    fs::create_dir(&dir).unwrap();
    write(&dir, ".coldamp.lock", "");
    write(&dir, "keep.txt", "mine");
    let o = coldamp(tmp.path(), &["run", "figure2", "--out", "busy"], &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("in use"), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(dir.join("keep.txt")).unwrap(), "mine");
    assert!(!dir.join("budget.csv").exists());
}

#[test]
fn unstable_loop_is_a_physics_error_and_removes_partial_output() {
    let tmp = TempDir::new().unwrap();
    // A quarter-period delay turns the filtered loop into anti-damping: the
    // first point (gain 0) completes and writes, the second diverges.
    let cfg = "[scenario]\nname = unstable\nmode = simulate\n\
               [oscillator]\nunits = scaled\ndamping_ratio = 1e-3\n\
               [budget]\nn_tot = 10\nn_imp = 1e-3\n\
               [feedback]\nloop = filtered\ndelay = 1.5707963267948966\n\
               [simulation]\ndt = 0.05\nduration = 3e4\nburn_in = 1e4\n\
               [sweep]\nparameter = gain\nvalues = 0, 1e2\n";
    write(tmp.path(), "unstable.cfg", cfg);
    let o = coldamp(tmp.path(), &["run", "unstable.cfg", "--out", "u"], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).to_lowercase().contains("unstable"), "{}", stderr(&o));
    assert!(!tmp.path().join("u").exists());
}

#[test]
fn fit_mode_recovers_a_synthetic_line() {
    let tmp = TempDir::new().unwrap();
    let (f0, gamma_hz) = (1000.0, 2.0);
    let line = SpectrumFit::analytic(
        std::f64::consts::TAU * f0,
        std::f64::consts::TAU * gamma_hz,
        50.0,
        1.0,
        PsdUnit::Arbitrary,
    );
    let mut csv = String::from("freq_hz,psd\n");
    for i in 0..2001 {
        let f = f0 - 50.0 + 0.05 * i as f64;
        csv.push_str(&format!("{f:.16e},{:.16e}\n", line.model(std::f64::consts::TAU * f)));
    }
    write(tmp.path(), "line.csv", &csv);
    let cfg = "[scenario]\nname = fit\nmode = fit\n\
               [input]\npsd = line.csv\n\
               [spectral]\nwindow_lo = 960\nwindow_hi = 1040\n";
    write(tmp.path(), "fit.cfg", cfg);
    let o = coldamp(tmp.path(), &["run", "fit.cfg", "--out", "fit"], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&tmp.path().join("fit/fit.json"));
    let text = r.to_string();
    assert!(r["input_file_sha256"].as_str().is_some_and(|h| h.len() == 64), "{text}");
    let model = fs::read_to_string(tmp.path().join("fit/model.csv")).unwrap();
    assert_eq!(model.lines().next(), Some("freq_hz,psd,model"));
    for row in model.lines().skip(1) {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[2] / v[1] - 1.0).abs() < 1e-6, "{row}");
    }
}

#[test]
fn calibration_input_errors_carry_line_numbers() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "split.csv", "kappa_hz,transmission\n4.8e8,0.5\nnot,a number\n");
    let cfg = "[scenario]\nname = s\nmode = calibrate\n\
               [calibration]\nmethod = splitting\n\
               [input]\ndata = split.csv\n";
    write(tmp.path(), "s.cfg", cfg);
    let o = coldamp(tmp.path(), &["run", "s.cfg", "--out", "s"], &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!tmp.path().join("s").exists());
}

#[test]
fn config_reference_document_is_current() {
    let tmp = TempDir::new().unwrap();
    let o = coldamp(tmp.path(), &["config-reference"], &[]);
    assert!(o.status.success());
    let doc = fs::read_to_string("../../docs/config-reference.md").unwrap();
    assert_eq!(stdout(&o), doc, "regenerate with `coldamp config-reference > docs/config-reference.md`");
}
