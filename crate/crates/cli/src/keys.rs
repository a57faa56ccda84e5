//! Registry of every configuration key, used for unknown-key detection and
//! to generate the configuration reference page.

pub struct KeySpec {
    pub section: &'static str,
    pub key: &'static str,
    /// Unit or value type shown in the reference.
    pub unit: &'static str,
    pub doc: &'static str,
}

const fn k(section: &'static str, key: &'static str, unit: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { section, key, unit, doc }
}

pub const SECTIONS: &[(&str, &str)] = &[
    ("scenario", "Scenario identity and run mode."),
    ("output", "Where artifacts go and which ones to write."),
    ("oscillator", "Mechanical mode. Frequencies in Hz, converted to rad/s internally."),
    ("cavity", "Optical mode doublet, used by component-form budgets and spring calibration."),
    ("readout", "Measurement chain. Either the effective form (c0, ideality, n_c) or the component form (g0, eta_d, power with a [cavity] section)."),
    ("budget", "Occupancy totals for feedback and simulation scenarios."),
    ("feedback", "Cold-damping loop."),
    ("simulation", "Time-domain integration settings."),
    ("spectral", "Welch estimation and Lorentzian fitting."),
    ("sweep", "Swept parameter. Log spacing by default; `values` gives an explicit list instead."),
    ("ringdown", "Shuttered-drive ringdown and lock-in settings."),
    ("input", "External data files, resolved relative to the configuration file."),
    ("calibration", "Parameter-extraction settings."),
];

pub const KEYS: &[KeySpec] = &[
    k("scenario", "name", "string", "Scenario name, used for the default output directory."),
    k("scenario", "mode", "analytic-budget | cooling-sweep | simulate | ringdown | fit | calibrate", "What the scenario runs."),
    k("scenario", "seed", "u64", "Base seed of every random stream (default 0). Overridden by `--seed`."),
    k("scenario", "description", "string", "Free text shown by `list-scenarios`."),
    k("output", "dir", "path", "Output directory (default `out/<name>`). Overridden by `--out`."),
    k("output", "artifacts", "list", "Subset of the mode's artifacts to write (default all)."),
    k("oscillator", "units", "physical | scaled", "`scaled` sets Ω_m = 1 and measures time in 1/Ω_m; Hz-valued keys are then cycles per time unit."),
    k("oscillator", "damping_ratio", "1", "Γ_m/Ω_m in scaled units (default 1e-3)."),
    k("oscillator", "frequency", "Hz", "Mechanical frequency Ω_m/2π."),
    k("oscillator", "linewidth", "Hz", "Intrinsic energy damping rate Γ_m/2π."),
    k("oscillator", "mass", "kg", "Effective mass (default 1 in scaled units)."),
    k("oscillator", "temperature", "K", "Bath temperature; sets n_th unless `n_th` is given."),
    k("oscillator", "x_zp", "m", "Zero-point amplitude; derived from mass when absent."),
    k("oscillator", "n_th", "1", "Thermal occupancy override."),
    k("cavity", "kappa_0", "Hz", "Intrinsic decay rate κ₀/2π."),
    k("cavity", "kappa_ex", "Hz", "External coupling rate κ_ex/2π."),
    k("cavity", "linewidth", "Hz", "Total decay rate κ/2π; use with `eta_c` instead of kappa_0/kappa_ex."),
    k("cavity", "eta_c", "1", "Coupling efficiency κ_ex/κ."),
    k("cavity", "splitting", "Hz", "Mode splitting γ/2π (default 0)."),
    k("cavity", "wavelength", "m", "Optical wavelength."),
    k("cavity", "detuning", "Hz", "Laser detuning Δ/2π (default 0)."),
    k("readout", "g0", "Hz", "Vacuum coupling rate g₀/2π."),
    k("readout", "eta_d", "1", "Detection efficiency."),
    k("readout", "power", "W", "Injected power."),
    k("readout", "taper", "1", "Taper throughput entering the ideality consistency check (default 1)."),
    k("readout", "c0", "1", "Single-photon cooperativity C₀ (effective form)."),
    k("readout", "c0_ex", "1", "Excess cooperativity C₀ᵉˣ (default 0)."),
    k("readout", "ideality", "1", "Readout ideality ξ (effective form, or explicit override in component form)."),
    k("readout", "n_imp_ex", "1", "Extraneous imprecision occupancy (default 0)."),
    k("readout", "n_fb", "1", "Feedback-actuator noise occupancy (default 0)."),
    k("readout", "n_c", "1", "Intracavity photon number of the operating point (effective form)."),
    k("budget", "n_tot", "1", "Total bath occupancy n_th + n_ba + n_ba_ex."),
    k("budget", "n_imp", "1", "Total imprecision occupancy."),
    k("budget", "n_fb", "1", "Feedback-actuator noise occupancy (default 0)."),
    k("feedback", "gain", "1", "Open-loop gain g_fb (default 0)."),
    k("feedback", "delay", "s", "Loop delay (default 3π/2Ω_m)."),
    k("feedback", "bandpass_center", "Hz", "Bandpass center (default Ω_m/2π)."),
    k("feedback", "bandpass_width", "Hz", "Bandpass width (default Ω_m/2π)."),
    k("feedback", "loop", "ideal | filtered", "Velocity feedback at every frequency, or bandpass plus delay line (default filtered)."),
    k("simulation", "dt", "s", "Integration step; dt·Ω_m ≤ 0.05."),
    k("simulation", "duration", "s", "Total simulated time including burn-in."),
    k("simulation", "burn_in", "s", "Discarded initial span."),
    k("simulation", "trajectories", "count", "Independent trajectories per point (default 1)."),
    k("simulation", "integrator", "symplectic | exact", "Time stepper (default symplectic)."),
    k("simulation", "initial", "rest | stationary", "Initial state (default rest)."),
    k("simulation", "record_stride", "count", "Keep every n-th step, block-averaging the record (default 1)."),
    k("simulation", "drive_amplitude", "1", "Ringdown drive as resonant amplitude in units of x_zp."),
    k("simulation", "zero_point", "bool", "Include the zero-point term in the thermal force (default true)."),
    k("simulation", "export", "csv | binary | none", "Trajectory export format (default csv)."),
    k("simulation", "export_trajectories", "count", "Number of trajectories exported per point (default 1)."),
    k("spectral", "segment_length", "samples", "Welch segment length (default: 10 linewidths and at least 4 bins across the resonance band, min(Γ_eff/4, Ω_m/20) either side)."),
    k("spectral", "overlap", "1", "Welch segment overlap fraction in [0, 0.9] (default 0.5)."),
    k("spectral", "fit", "bool", "Fit a Lorentzian to each simulated record (default false)."),
    k("spectral", "window_lo", "Hz", "Fit window lower edge."),
    k("spectral", "window_hi", "Hz", "Fit window upper edge."),
    k("spectral", "weighting", "uniform | chi-square", "Fit residual weighting (default uniform)."),
    k("spectral", "max_iterations", "count", "Fit iteration cap (default 200)."),
    k("spectral", "tolerance", "1", "Relative step convergence threshold (default 1e-9)."),
    k("sweep", "parameter", "n_c | power | gamma_eff | gain", "Swept quantity."),
    k("sweep", "start", "per parameter", "First value."),
    k("sweep", "stop", "per parameter", "Last value."),
    k("sweep", "points", "count", "Number of points (≥ 1)."),
    k("sweep", "scale", "log | linear", "Spacing (default log)."),
    k("sweep", "values", "list", "Explicit values; gains accept `g_opt` with an optional factor, e.g. `10g_opt`."),
    k("ringdown", "drive_frequency", "Hz", "Drive frequency (default Ω_m/2π)."),
    k("ringdown", "drive_off", "s", "Shutter time."),
    k("ringdown", "demod_frequency", "Hz", "Lock-in reference (default drive frequency)."),
    k("ringdown", "bandwidth", "Hz", "Lock-in low-pass bandwidth."),
    k("ringdown", "fit_start", "s", "Fit start (default: automatic)."),
    k("ringdown", "fit_end", "s", "Fit end (default: automatic)."),
    k("input", "psd", "path", "PSD CSV `freq_hz,psd`."),
    k("input", "psd_unit", "normalized | displacement | frequency | voltage | arbitrary", "Unit of the PSD values (default arbitrary)."),
    k("input", "n_averages", "count", "Averages behind the PSD (default 1)."),
    k("input", "trajectories", "list of paths", "Trajectory CSV files `t,u,y,f_fb`."),
    k("input", "data", "path", "Two-column CSV for spring (`transmission,shift_hz`) or splitting (`kappa_hz,transmission`) calibration."),
    k("calibration", "method", "tone | spring | splitting | ringdown", "Calibration procedure."),
    k("calibration", "beta", "rad", "Phase-modulation depth."),
    k("calibration", "tone_frequency", "Hz", "Modulation frequency Ω_cal/2π."),
    k("calibration", "transfer_ratio", "1", "Detector transfer ratio |G(Ω_cal)/G(Ω_m)|."),
    k("calibration", "n_th", "1", "Thermal occupancy during the tone measurement."),
    k("calibration", "peak_lo", "Hz", "Mechanical window lower edge (default Ω_m − 5Γ)."),
    k("calibration", "peak_hi", "Hz", "Mechanical window upper edge (default Ω_m + 5Γ)."),
    k("calibration", "tone_lo", "Hz", "Tone window lower edge."),
    k("calibration", "tone_hi", "Hz", "Tone window upper edge."),
];

pub fn lookup(section: &str, key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|s| s.section == section && s.key == key)
}

/// Markdown reference of all sections and keys.
pub fn reference_markdown() -> String {
    let mut out = String::from(
        "# Configuration reference\n\n\
         Generated by `coldamp config-reference`. Files are INI-style: `[section]` headers, \
         `key = value` lines, `;` or `#` comments. Frequencies are in Hz, powers in W, \
         temperatures in K and times in s. Any key can be overridden from the environment as \
         `COLDAMP_<SECTION>__<KEY>`, e.g. `COLDAMP_SWEEP__POINTS=51`.\n",
    );
    for (section, doc) in SECTIONS {
        out.push_str(&format!("\n## [{section}]\n\n{doc}\n\n| key | unit / type | description |\n|---|---|---|\n"));
        for s in KEYS.iter().filter(|s| s.section == *section) {
            out.push_str(&format!("| `{}` | {} | {} |\n", s.key, s.unit, s.doc));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_has_a_documented_section_and_is_unique() {
        for (i, s) in KEYS.iter().enumerate() {
            assert!(SECTIONS.iter().any(|(n, _)| *n == s.section), "{}", s.section);
            assert!(KEYS[..i].iter().all(|o| o.section != s.section || o.key != s.key), "{}.{}", s.section, s.key);
        }
    }
}
