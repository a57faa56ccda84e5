//! Execution of each scenario mode.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use coldamp::calibration::{
    calibrate_g0, fit_mode_splitting, fit_ringdown_with, g0_from_spring, lock_in_energy, CalibrationReport,
};
use coldamp::model::{
    ground_state_conditions, minimum_occupancy, optimal_photon_number, phonon_occupancy_at_gain, product_closed_form,
    record_on_resonance,
};
use coldamp::NoiseBudget;
use coldamp::sde::{simulate, simulate_ringdown, stationary_variance, LoopModel, Trajectory};
use coldamp::spectral::{
    extract_occupancies, fit_lorentzian_with, integrate_variance, phonon_from_spectrum, welch_psd, FitReport, Psd,
    PsdUnit,
};
use coldamp::units::{hz_to_rad, rad_to_hz};

use crate::error::CliError;
use crate::run::ArtifactWriter;
use crate::scenario::{
    BudgetScenario, CalibrateScenario, CoolingScenario, Export, FitScenario, Params, Readout, RingdownScenario,
    Scenario, SimulateScenario, SweepParameter,
};

/// Runs the scenario, writing the selected artifacts; returns summary lines.
pub fn execute(sc: &Scenario, w: &mut ArtifactWriter) -> Result<Vec<String>, CliError> {
    match &sc.params {
        Params::AnalyticBudget(p) => analytic_budget(sc, p, w),
        Params::CoolingSweep(p) => cooling_sweep(sc, p, w),
        Params::Simulate(p) => simulate_points(sc, p, w),
        Params::Ringdown(p) => ringdown(sc, p, w),
        Params::Fit(p) => fit(sc, p, w),
        Params::Calibrate(p) => calibrate(sc, p, w),
    }
}

fn e(v: f64) -> String {
    format!("{v:.12e}")
}

/// Comma-separated table built row by row.
struct Csv(String);

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv(header.join(",") + "\n")
    }

    fn row(&mut self, cells: &[String]) {
        self.0.push_str(&cells.join(","));
        self.0.push('\n');
    }
}

fn budget_json(b: &NoiseBudget) -> Value {
    let mut v = serde_json::to_value(b).expect("budget serializes");
    v["gamma_meas_hz"] = json!(rad_to_hz(b.gamma_meas));
    v["gamma_th_hz"] = json!(rad_to_hz(b.gamma_th));
    v["gamma_m_hz"] = json!(rad_to_hz(b.gamma_m));
    v["rate_ratio"] = json!(b.gamma_meas / b.gamma_th);
    v
}

fn analytic_budget(sc: &Scenario, p: &BudgetScenario, w: &mut ArtifactWriter) -> Result<Vec<String>, CliError> {
    let op = p.readout.operating_point();
    let base = p.readout.inputs()?;
    let (param, values) = match &p.sweep {
        Some((param, v)) => (*param, v.clone()),
        None => (SweepParameter::PhotonNumber, vec![base.n_c]),
    };
    let power = match &p.readout {
        Readout::Component { chain, .. } => Some((chain.input_power, base.n_c)),
        Readout::Effective { .. } => None,
    };
    let mut header = vec!["n_c"];
    if power.is_some() {
        header.push("power_w");
    }
    header.extend([
        "n_imp",
        "n_tot",
        "product",
        "product_closed_form",
        "n_ba",
        "n_ba_ex",
        "n_imp_shot",
        "gamma_meas_hz",
        "gamma_th_hz",
    ]);
    let mut csv = Csv::new(&header);
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        let inputs = p.readout.inputs_at(param, v)?;
        let b = NoiseBudget::assemble(&inputs)?;
        let mut row = vec![e(inputs.n_c)];
        if let Some((p0, n0)) = power {
            // Photon number is linear in power.
            let pw = if param == SweepParameter::Power { v } else { p0 * inputs.n_c / n0 };
            row.push(e(pw));
        }
        row.extend([
            e(b.n_imp),
            e(b.n_tot),
            e(b.product),
            e(b.product_closed_form.unwrap_or(f64::NAN)),
            e(b.n_ba),
            e(b.n_ba_ex),
            e(b.n_imp_shot),
            e(rad_to_hz(b.gamma_meas)),
            e(rad_to_hz(b.gamma_th)),
        ]);
        csv.row(&row);
        if best.is_none_or(|(_, _, pb)| b.product < pb) {
            best = Some((i, inputs.n_c, b.product));
        }
    }
    let n_opt = optimal_photon_number(&base);
    let optimum = if n_opt.is_finite() {
        let mut o = json!({
            "n_c": n_opt,
            "product": product_closed_form(&base.with_photons(n_opt)),
        });
        if let Some((p0, n0)) = power {
            o["power_w"] = json!(p0 * n_opt / n0);
        }
        o
    } else {
        json!({ "n_c": null, "note": "no extraneous imprecision: the product decreases monotonically with n_c" })
    };
    let (bi, bn, bp) = best.expect("sweep is non-empty");
    let mut summary = json!({
        "sweep": { "parameter": param.name(), "points": values.len() },
        "grid_minimum": { "index": bi, "n_c": bn, "product": bp },
        "optimum": optimum,
    });
    if let Some(op) = op {
        let b = NoiseBudget::assemble(&op)?;
        summary["operating_point"] = json!({
            "inputs": op,
            "budget": budget_json(&b),
            "ground_state": ground_state_conditions(&b),
        });
    }
    if sc.wants("budget.csv") {
        w.write("budget.csv", csv.0.as_bytes())?;
    }
    if sc.wants("summary.json") {
        w.write_json("summary.json", &summary)?;
    }
    let mut lines = vec![format!("grid minimum product {bp:.4} at n_c = {bn:.4e}")];
    if n_opt.is_finite() {
        lines.push(format!("closed-form optimum n_c = {n_opt:.4e}"));
    }
    Ok(lines)
}

fn cooling_sweep(sc: &Scenario, p: &CoolingScenario, w: &mut ArtifactWriter) -> Result<Vec<String>, CliError> {
    let b = &p.budget;
    let mut csv = Csv::new(&[
        "gamma_eff_hz",
        "gain",
        "n_m",
        "n_m_plus_half",
        "thermal_part",
        "imprecision_part",
        "record_on_resonance",
        "squashed",
    ]);
    let mut best: Option<(f64, f64)> = None;
    for &g in &p.gains {
        let thermal = (b.force_occupancy() + 0.5) / (1.0 + g);
        let imprecision = b.n_imp * g * g / (1.0 + g);
        let n_m = phonon_occupancy_at_gain(b, g);
        let rec = record_on_resonance(b, g);
        csv.row(&[
            e(rad_to_hz((1.0 + g) * b.gamma_m)),
            e(g),
            e(n_m),
            e(thermal + imprecision),
            e(thermal),
            e(imprecision),
            e(rec),
            (rec < b.n_imp).to_string(),
        ]);
        if best.is_none_or(|(_, nb)| n_m < nb) {
            best = Some((g, n_m));
        }
    }
    let m = minimum_occupancy(b);
    let (bg, bn) = best.expect("sweep is non-empty");
    let summary = json!({
        "sweep": { "parameter": p.parameter.name(), "points": p.gains.len() },
        "grid_minimum": {
            "gain": bg,
            "gamma_eff_hz": rad_to_hz((1.0 + bg) * b.gamma_m),
            "n_m": bn,
            "n_m_plus_half": bn + 0.5,
        },
        "optimum": {
            "gain": m.g_fb_opt,
            "gamma_eff_hz": rad_to_hz((1.0 + m.g_fb_opt) * b.gamma_m),
            "n_m": m.n_m_min,
            "n_m_plus_half": m.n_m_min + 0.5,
            "gain_asymptotic": m.g_fb_opt_asymptotic,
            "n_m_asymptotic": m.n_m_min_asymptotic,
            "asymptotic_valid": m.asymptotic_valid,
        },
        "budget": budget_json(b),
        "ground_state": ground_state_conditions(b),
    });
    if sc.wants("cooling.csv") {
        w.write("cooling.csv", csv.0.as_bytes())?;
    }
    if sc.wants("summary.json") {
        w.write_json("summary.json", &summary)?;
    }
    Ok(vec![
        format!(
            "grid minimum n_m = {bn:.4} at gamma_eff = {:.4e} Hz",
            rad_to_hz((1.0 + bg) * b.gamma_m)
        ),
        format!(
            "optimum n_m = {:.4} at gain {:.4e} (gamma_eff = {:.4e} Hz)",
            m.n_m_min,
            m.g_fb_opt,
            rad_to_hz((1.0 + m.g_fb_opt) * b.gamma_m)
        ),
    ])
}

/// Seed of sweep point `i`; point 0 uses the scenario seed itself.
pub fn point_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn export_trajectories(
    w: &mut ArtifactWriter,
    trajs: &[Trajectory],
    export: Export,
    count: usize,
    prefix: &str,
) -> Result<(), CliError> {
    for (k, t) in trajs.iter().take(count).enumerate() {
        let mut buf = Vec::new();
        match export {
            Export::Csv => {
                t.write_csv(&mut buf)?;
                w.write(&format!("{prefix}_t{k:02}.csv"), &buf)?;
            }
            Export::Binary => {
                t.write_binary(&mut buf)?;
                w.write(&format!("{prefix}_t{k:02}.bin"), &buf)?;
            }
            Export::None => {}
        }
    }
    Ok(())
}

/// Welch spectrum of one channel averaged over trajectories.
fn ensemble_psd(trajs: &[Trajectory], pick: fn(&Trajectory) -> &[f64], seg: usize, overlap: f64) -> Result<Psd<f64>, CliError> {
    let mut acc: Option<Psd<f64>> = None;
    for t in trajs {
        let p = welch_psd(pick(t), t.sample_rate(), seg, overlap)?;
        acc = Some(match acc {
            None => p,
            Some(mut a) => {
                a.value.iter_mut().zip(&p.value).for_each(|(x, y)| *x += y);
                a.n_averages += p.n_averages;
                a
            }
        });
    }
    let mut a = acc.ok_or(coldamp::Error::EmptyInput)?;
    let m = trajs.len() as f64;
    a.value.iter_mut().for_each(|v| *v /= m);
    Ok(Psd::new(a.freq, a.value, a.n_averages, PsdUnit::NormalizedPosition)?)
}

/// Mean of `psd` over `[lo, hi]` Hz, or the bin nearest the center when the
/// band holds no bin.
fn band_mean(psd: &Psd<f64>, lo: f64, hi: f64) -> f64 {
    let r = psd.window_indices(lo, hi);
    if r.is_empty() {
        let c = 0.5 * (lo + hi);
        let i = psd
            .freq
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - c).abs().total_cmp(&(b.1 - c).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        return psd.value[i];
    }
    let n = r.len() as f64;
    psd.value[r].iter().sum::<f64>() / n
}

fn simulate_points(sc: &Scenario, p: &SimulateScenario, w: &mut ArtifactWriter) -> Result<Vec<String>, CliError> {
    let osc = p.base.osc;
    let b = p.base.budget;
    let two_zp = 8.0 / osc.gamma_m;
    let f_m = rad_to_hz(osc.omega_m);
    let g_opt = (b.n_imp > 0.0).then(|| minimum_occupancy(&b).g_fb_opt);
    let mut points = Vec::new();
    let mut lines = Vec::new();
    for (i, &g) in p.gains.iter().enumerate() {
        let mut cfg = p.point(g);
        cfg.seed = point_seed(sc.seed, i);
        let trajs = simulate(&cfg)?;
        if sc.wants("trajectories") {
            export_trajectories(w, &trajs, p.export, p.export_trajectories, &format!("trajectory_p{i:02}"))?;
        }
        let ge = cfg.gamma_eff();
        let n = trajs.iter().map(Trajectory::len).min().unwrap_or(0);
        let fs = trajs[0].sample_rate();
        // Band around resonance where the record is compared with its floor.
        let half_rad = (ge / 4.0).min(osc.omega_m / 20.0);
        // Default segment: 10 linewidths, and at least 4 bins across the band.
        let seg_time = (10.0 * std::f64::consts::TAU / ge).max(4.0 * std::f64::consts::TAU / half_rad);
        let seg = p
            .spectral
            .segment_length
            .unwrap_or_else(|| (seg_time * fs).ceil() as usize)
            .clamp(16.min(n), n);
        let psd_x = ensemble_psd(&trajs, |t| &t.u, seg, p.spectral.overlap)?;
        let psd_y = ensemble_psd(&trajs, |t| &t.y, seg, p.spectral.overlap)?;
        if sc.wants("psd") {
            for (name, psd) in [("x", &psd_x), ("y", &psd_y)] {
                let mut buf = Vec::new();
                psd.write_csv(&mut buf)?;
                w.write(&format!("psd_{name}_p{i:02}.csv"), &buf)?;
            }
        }
        let n_m_psd = 0.5 * (integrate_variance(&psd_x) - 1.0);
        let var: f64 = trajs
            .iter()
            .map(|t| t.u.iter().map(|u| u * u).sum::<f64>() / t.len() as f64)
            .sum::<f64>()
            / trajs.len() as f64;
        let n_m_var = 0.5 * (var - 1.0);
        let theory = phonon_occupancy_at_gain(&b, g);
        let discrete = stationary_variance(&cfg).map(|v| 0.5 * (v - 1.0));
        let half = rad_to_hz(half_rad);
        let rec_sim = band_mean(&psd_y, f_m - half, f_m + half) / two_zp;
        let rec_theory = record_on_resonance(&b, g);
        let mut point = json!({
            "gain": g,
            "gamma_eff_hz": rad_to_hz(ge),
            "seed": cfg.seed,
            "trajectories": trajs.len(),
            "samples_per_trajectory": n,
            "segment_length": seg,
            "n_averages": psd_x.n_averages,
            "n_m_theory": theory,
            "n_m_discrete": discrete,
            "n_m_psd": n_m_psd,
            "n_m_variance": n_m_var,
            "relative_deviation": n_m_psd / theory - 1.0,
            "n_imp": b.n_imp,
            "record_on_resonance_theory": rec_theory,
            "record_on_resonance_sim": rec_sim,
            "squashed_theory": rec_theory < b.n_imp,
            "squashed_sim": rec_sim < b.n_imp,
        });
        if p.spectral.fit {
            let window = p.spectral.window.unwrap_or_else(|| {
                let h = 10.0 * rad_to_hz(ge);
                ((f_m - h).max(psd_y.freq[0]), f_m + h)
            });
            match fit_lorentzian_with(&psd_y, window, &p.spectral.options) {
                Ok(f) => {
                    let report = FitReport::new(&psd_y, window, &p.spectral.options, &f);
                    if sc.wants("fits") {
                        w.write(&format!("fit_p{i:02}.json"), (report.to_json() + "\n").as_bytes())?;
                    }
                    let ph = phonon_from_spectrum(&f, &osc, 0.0)?;
                    point["fit"] = json!({
                        "gamma_eff_hz": rad_to_hz(f.gamma_eff),
                        "n_m_in_loop": ph.n_m,
                        "sigma": ph.sigma,
                        "squashing_artifact": ph.squashing_artifact,
                        "structured_residuals": f.structured_residuals,
                    });
                }
                Err(err) => point["fit_error"] = json!(err.to_string()),
            }
        }
        lines.push(format!(
            "gain {g:.4e}: n_m simulated {n_m_psd:.4} vs closed form {theory:.4} ({:+.2}%), record at resonance {rec_sim:.3e} (floor {:.3e})",
            100.0 * (n_m_psd / theory - 1.0),
            b.n_imp
        ));
        points.push(point);
    }
    let summary = json!({
        "loop": match p.base.loop_model { LoopModel::Ideal => "ideal", LoopModel::Filtered => "filtered" },
        "integrator": format!("{:?}", p.base.integrator),
        "dt": p.base.dt,
        "duration": p.base.duration,
        "burn_in": p.base.burn_in,
        "record_stride": p.base.record_stride,
        "g_opt": g_opt,
        "budget": budget_json(&b),
        "points": points,
    });
    if sc.wants("summary.json") {
        w.write_json("summary.json", &summary)?;
    }
    Ok(lines)
}

fn ringdown(sc: &Scenario, p: &RingdownScenario, w: &mut ArtifactWriter) -> Result<Vec<String>, CliError> {
    let mut cfg = p.sim;
    cfg.seed = sc.seed;
    let trajs = simulate_ringdown(&cfg, p.drive_frequency, p.drive_off)?;
    let fit = fit_ringdown_with(&trajs, p.demod_frequency, p.bandwidth, &p.options)?;
    if sc.wants("trajectories") {
        export_trajectories(w, &trajs, p.export, p.export_trajectories, "trajectory")?;
    }
    if sc.wants("envelope.csv") {
        let n = trajs.iter().map(Trajectory::len).min().unwrap_or(0);
        let dt = trajs[0].dt();
        let mut energy = vec![0.0; n];
        for t in &trajs {
            let env = lock_in_energy(&t.y[..n], dt, p.demod_frequency, p.bandwidth);
            energy.iter_mut().zip(env).for_each(|(a, v)| *a += v);
        }
        let m = trajs.len() as f64;
        let step = n.div_ceil(10_000).max(1);
        let mut csv = Csv::new(&["t", "energy"]);
        for k in (0..n).step_by(step) {
            csv.row(&[e(trajs[0].t[k]), e(energy[k] / m)]);
        }
        w.write("envelope.csv", csv.0.as_bytes())?;
    }
    let truth = cfg.osc.gamma_m;
    let report = CalibrationReport {
        method: "ringdown".into(),
        estimate: rad_to_hz(fit.gamma_m),
        uncertainty: rad_to_hz(fit.sigma),
        windows: vec![("fit_s".into(), (fit.start, fit.end))],
        input_hashes: Vec::new(),
        details: json!({
            "gamma_m_rad_s": fit.gamma_m,
            "e_folding_time_s": fit.e_folding_time(),
            "configured_gamma_m_hz": rad_to_hz(truth),
            "relative_error": fit.gamma_m / truth - 1.0,
            "fit": fit,
        }),
    };
    if sc.wants("ringdown.json") {
        w.write("ringdown.json", (report.to_json() + "\n").as_bytes())?;
    }
    Ok(vec![format!(
        "gamma_m/2pi = {:.6e} ± {:.1e} Hz (configured {:.6e} Hz, {:+.2}%)",
        rad_to_hz(fit.gamma_m),
        rad_to_hz(fit.sigma),
        rad_to_hz(truth),
        100.0 * (fit.gamma_m / truth - 1.0)
    )])
}

fn read_input(path: &Path) -> Result<(Vec<u8>, String), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let hash = hex::encode(Sha256::digest(&bytes));
    Ok((bytes, hash))
}

fn fit(sc: &Scenario, p: &FitScenario, w: &mut ArtifactWriter) -> Result<Vec<String>, CliError> {
    let (bytes, hash) = read_input(&p.input.path)?;
    let psd = Psd::read_csv(&bytes[..], p.input.n_averages, p.input.unit)?;
    let f = fit_lorentzian_with(&psd, p.window, &p.options)?;
    let report = FitReport::new(&psd, p.window, &p.options, &f);
    let mut out = json!({ "input": p.input.path.display().to_string(), "input_file_sha256": hash, "report": report });
    if let Some(osc) = &p.osc {
        match extract_occupancies(&f, osc, p.g0) {
            Ok(o) => {
                out["occupancies"] = json!(o);
                out["phonon"] = json!(phonon_from_spectrum(&f, osc, p.g0)?);
            }
            Err(err) => out["occupancies_error"] = json!(err.to_string()),
        }
    }
    if sc.wants("fit.json") {
        w.write_json("fit.json", &out)?;
    }
    if sc.wants("model.csv") {
        let mut csv = Csv::new(&["freq_hz", "psd", "model"]);
        for i in psd.window_indices(p.window.0, p.window.1) {
            csv.row(&[e(psd.freq[i]), e(psd.value[i]), e(f.model(hz_to_rad(psd.freq[i])))]);
        }
        w.write("model.csv", csv.0.as_bytes())?;
    }
    Ok(vec![format!(
        "center {:.6e} Hz, linewidth {:.4e} Hz, peak {:.4e}, floor {:.4e}",
        rad_to_hz(f.omega_center),
        rad_to_hz(f.gamma_eff),
        f.peak,
        f.floor
    )])
}

/// Two-column numeric CSV with the given header.
fn read_pairs(bytes: &[u8], header: &str, path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CliError::io(path.display(), e))?;
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("").trim();
    if first != header {
        return Err(CliError::Io(format!(
            "{}: line 1: expected header `{header}`, found `{first}`",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [a, b] => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some(p) => out.push(p),
            None => {
                return Err(CliError::Io(format!(
                    "{}: line {}: expected two numbers, found `{line}`",
                    path.display(),
                    i + 2
                )))
            }
        }
    }
    Ok(out)
}

fn calibrate(sc: &Scenario, p: &CalibrateScenario, w: &mut ArtifactWriter) -> Result<Vec<String>, CliError> {
    let report = match p {
        CalibrateScenario::Tone {
            input,
            tone,
            n_th,
            peak_window,
            tone_window,
        } => {
            let (bytes, hash) = read_input(&input.path)?;
            let psd = Psd::read_csv(&bytes[..], input.n_averages, input.unit)?;
            let c = calibrate_g0(&psd, tone, *n_th, *peak_window, *tone_window)?;
            CalibrationReport {
                method: "tone".into(),
                estimate: rad_to_hz(c.g0),
                uncertainty: rad_to_hz(c.sigma),
                windows: vec![("peak_hz".into(), *peak_window), ("tone_hz".into(), *tone_window)],
                input_hashes: vec![hash],
                details: json!({ "g0_rad_s": c.g0, "result": c, "tone": tone, "n_th": n_th }),
            }
        }
        CalibrateScenario::Spring { data, cav, power } => {
            let (bytes, hash) = read_input(data)?;
            let pts: Vec<(f64, f64)> = read_pairs(&bytes, "transmission,shift_hz", data)?
                .into_iter()
                .map(|(t, s)| (t, hz_to_rad(s)))
                .collect();
            let c = g0_from_spring(&pts, cav, *power)?;
            CalibrationReport {
                method: "spring".into(),
                estimate: rad_to_hz(c.g0),
                uncertainty: rad_to_hz(c.sigma),
                windows: Vec::new(),
                input_hashes: vec![hash],
                details: json!({
                    "g0_rad_s": c.g0,
                    "detunings_hz": c.detunings.iter().map(|d| rad_to_hz(*d)).collect::<Vec<_>>(),
                    "sensitivities": c.sensitivities,
                    "power_w": power,
                }),
            }
        }
        CalibrateScenario::Splitting { data } => {
            let (bytes, hash) = read_input(data)?;
            let pts: Vec<(f64, f64)> = read_pairs(&bytes, "kappa_hz,transmission", data)?
                .into_iter()
                .map(|(k, t)| (hz_to_rad(k), t))
                .collect();
            let f = fit_mode_splitting(&pts)?;
            CalibrationReport {
                method: "splitting".into(),
                estimate: rad_to_hz(f.gamma_split),
                uncertainty: rad_to_hz(f.sigma_gamma()),
                windows: Vec::new(),
                input_hashes: vec![hash],
                details: json!({
                    "kappa_0_hz": rad_to_hz(f.kappa_0),
                    "sigma_kappa_0_hz": rad_to_hz(f.sigma_kappa_0),
                    "gamma_split_hz": rad_to_hz(f.gamma_split),
                    "fit": f,
                }),
            }
        }
        CalibrateScenario::Ringdown {
            trajectories,
            demod_frequency,
            bandwidth,
            options,
        } => {
            let mut trajs = Vec::new();
            let mut hashes = Vec::new();
            for path in trajectories {
                let (bytes, hash) = read_input(path)?;
                let t = if path.extension().is_some_and(|x| x == "bin") {
                    Trajectory::read_binary(&bytes[..])?
                } else {
                    Trajectory::read_csv(&bytes[..])?
                };
                trajs.push(t);
                hashes.push(hash);
            }
            let f = fit_ringdown_with(&trajs, *demod_frequency, *bandwidth, options)?;
            CalibrationReport {
                method: "ringdown".into(),
                estimate: rad_to_hz(f.gamma_m),
                uncertainty: rad_to_hz(f.sigma),
                windows: vec![("fit_s".into(), (f.start, f.end))],
                input_hashes: hashes,
                details: json!({ "gamma_m_rad_s": f.gamma_m, "e_folding_time_s": f.e_folding_time(), "fit": f }),
            }
        }
    };
    if sc.wants("calibration.json") {
        w.write("calibration.json", (report.to_json() + "\n").as_bytes())?;
    }
    let what = match p {
        CalibrateScenario::Splitting { .. } => "gamma/2pi",
        CalibrateScenario::Ringdown { .. } => "gamma_m/2pi",
        _ => "g0/2pi",
    };
    Ok(vec![format!(
        "{} {what} = {:.6e} ± {:.2e} Hz",
        p.method(),
        report.estimate,
        report.uncertainty
    )])
}
