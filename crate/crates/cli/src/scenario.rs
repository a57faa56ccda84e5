//! Typed scenarios built from a parsed configuration.

use std::path::{Path, PathBuf};

use coldamp::calibration::{CalibrationTone, RingdownOptions};
use coldamp::model::{budget_inputs, component_ideality, minimum_occupancy, thermal_occupancy, BudgetInputs};
use coldamp::{CavityParams, FeedbackSettings, MeasurementChain, NoiseBudget, OscillatorParams};
use coldamp::sde::{InitialState, Integrator, LoopModel, SimConfig, SimWarning};
use coldamp::spectral::{FitOptions, PsdUnit, Weighting};
use coldamp::units::hz_to_rad;
use coldamp::Error;

use crate::config::{Config, Diagnostic, Reader};
use crate::keys;

/// Relative disagreement between a stated and a derived ideality above
/// which `validate` warns.
pub const IDEALITY_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    AnalyticBudget,
    CoolingSweep,
    Simulate,
    Ringdown,
    Fit,
    Calibrate,
}

impl Mode {
    pub const NAMES: &'static [&'static str] =
        &["analytic-budget", "cooling-sweep", "simulate", "ringdown", "fit", "calibrate"];

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "analytic-budget" => Mode::AnalyticBudget,
            "cooling-sweep" => Mode::CoolingSweep,
            "simulate" => Mode::Simulate,
            "ringdown" => Mode::Ringdown,
            "fit" => Mode::Fit,
            "calibrate" => Mode::Calibrate,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::AnalyticBudget => "analytic-budget",
            Mode::CoolingSweep => "cooling-sweep",
            Mode::Simulate => "simulate",
            Mode::Ringdown => "ringdown",
            Mode::Fit => "fit",
            Mode::Calibrate => "calibrate",
        }
    }

    /// Artifact kinds a mode can write; `output.artifacts` selects a subset.
    pub fn artifacts(self) -> &'static [&'static str] {
        match self {
            Mode::AnalyticBudget => &["budget.csv", "summary.json"],
            Mode::CoolingSweep => &["cooling.csv", "summary.json"],
            Mode::Simulate => &["trajectories", "psd", "fits", "summary.json"],
            Mode::Ringdown => &["envelope.csv", "trajectories", "ringdown.json"],
            Mode::Fit => &["fit.json", "model.csv"],
            Mode::Calibrate => &["calibration.json"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    PhotonNumber,
    Power,
    GammaEff,
    Gain,
}

impl SweepParameter {
    fn from_name(s: &str) -> Self {
        match s {
            "n_c" => SweepParameter::PhotonNumber,
            "power" => SweepParameter::Power,
            "gamma_eff" => SweepParameter::GammaEff,
            _ => SweepParameter::Gain,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::PhotonNumber => "n_c",
            SweepParameter::Power => "power",
            SweepParameter::GammaEff => "gamma_eff",
            SweepParameter::Gain => "gain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Export {
    Csv,
    Binary,
    None,
}

/// Readout description for budget evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Readout {
    /// `(ξ, C₀, C₀ᵉˣ, n_c)` given directly; `n_c` of the operating point may be absent.
    Effective { inputs: BudgetInputs<f64>, has_operating_point: bool },
    /// Derived from cavity and measurement chain at the given power.
    Component {
        osc: OscillatorParams,
        cav: CavityParams,
        chain: MeasurementChain,
    },
}

impl Readout {
    /// Budget inputs at the operating point.
    pub fn inputs(&self) -> coldamp::Result<BudgetInputs<f64>> {
        match self {
            Readout::Effective { inputs, .. } => Ok(*inputs),
            Readout::Component { osc, cav, chain } => budget_inputs(osc, cav, chain),
        }
    }

    pub fn operating_point(&self) -> Option<BudgetInputs<f64>> {
        match self {
            Readout::Effective {
                has_operating_point: false,
                ..
            } => None,
            _ => self.inputs().ok(),
        }
    }

    /// Budget inputs with the swept quantity set to `value`.
    pub fn inputs_at(&self, parameter: SweepParameter, value: f64) -> coldamp::Result<BudgetInputs<f64>> {
        match (parameter, self) {
            (SweepParameter::Power, Readout::Component { osc, cav, chain }) => {
                budget_inputs(osc, cav, &chain.with_power(value))
            }
            _ => Ok(self.inputs()?.with_photons(value)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BudgetScenario {
    pub readout: Readout,
    pub sweep: Option<(SweepParameter, Vec<f64>)>,
}

#[derive(Debug, Clone)]
pub struct CoolingScenario {
    pub budget: NoiseBudget,
    /// Feedback gains of the sweep points.
    pub gains: Vec<f64>,
    pub parameter: SweepParameter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSettings {
    pub segment_length: Option<usize>,
    pub overlap: f64,
    pub fit: bool,
    /// Fit window (Hz); defaults per point to `Ω_m ± 10 Γ_eff`.
    pub window: Option<(f64, f64)>,
    pub options: FitOptions<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulateScenario {
    /// Settings shared by every point; the gain is replaced per point.
    pub base: SimConfig,
    pub gains: Vec<f64>,
    pub spectral: SpectralSettings,
    pub export: Export,
    pub export_trajectories: usize,
}

impl SimulateScenario {
    pub fn point(&self, gain: f64) -> SimConfig {
        let mut c = self.base;
        c.fb = c.fb.with_gain(gain);
        c
    }
}

#[derive(Debug, Clone)]
pub struct RingdownScenario {
    pub sim: SimConfig,
    /// Drive frequency (rad/s).
    pub drive_frequency: f64,
    /// Shutter time (s).
    pub drive_off: f64,
    /// Lock-in reference (rad/s).
    pub demod_frequency: f64,
    /// Lock-in bandwidth (Hz).
    pub bandwidth: f64,
    pub options: RingdownOptions,
    pub export: Export,
    pub export_trajectories: usize,
}

#[derive(Debug, Clone)]
pub struct PsdInput {
    pub path: PathBuf,
    pub n_averages: usize,
    pub unit: PsdUnit,
}

#[derive(Debug, Clone)]
pub struct FitScenario {
    pub input: PsdInput,
    pub window: (f64, f64),
    pub options: FitOptions<f64>,
    /// Needed to express the fit as occupancies.
    pub osc: Option<OscillatorParams>,
    /// Coupling rate (rad/s) for frequency-noise spectra.
    pub g0: f64,
}

#[derive(Debug, Clone)]
pub enum CalibrateScenario {
    Tone {
        input: PsdInput,
        tone: CalibrationTone,
        n_th: f64,
        peak_window: (f64, f64),
        tone_window: (f64, f64),
    },
    Spring {
        data: PathBuf,
        cav: CavityParams,
        power: f64,
    },
    Splitting {
        data: PathBuf,
    },
    Ringdown {
        trajectories: Vec<PathBuf>,
        demod_frequency: f64,
        bandwidth: f64,
        options: RingdownOptions,
    },
}

impl CalibrateScenario {
    pub fn method(&self) -> &'static str {
        match self {
            CalibrateScenario::Tone { .. } => "tone",
            CalibrateScenario::Spring { .. } => "spring",
            CalibrateScenario::Splitting { .. } => "splitting",
            CalibrateScenario::Ringdown { .. } => "ringdown",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Params {
    AnalyticBudget(BudgetScenario),
    CoolingSweep(CoolingScenario),
    Simulate(Box<SimulateScenario>),
    Ringdown(Box<RingdownScenario>),
    Fit(FitScenario),
    Calibrate(CalibrateScenario),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub mode: Mode,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub artifacts: Vec<&'static str>,
    pub params: Params,
}

impl Scenario {
    pub fn wants(&self, artifact: &str) -> bool {
        self.artifacts.contains(&artifact)
    }
}

/// Outcome of building a scenario: the scenario when there were no errors,
/// plus every error and warning found.
#[derive(Debug, Clone, Default)]
pub struct Validation {
    pub scenario: Option<Scenario>,
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Builds and checks a scenario. Relative input paths resolve against
/// `base_dir`.
pub fn build(cfg: &Config, base_dir: &Path) -> Validation {
    let mut b = Builder {
        r: Reader::new(cfg),
        warnings: Vec::new(),
        base_dir,
    };
    for (s, k, e) in cfg.entries() {
        if keys::lookup(s, k).is_none() {
            let msg = if keys::SECTIONS.iter().any(|(n, _)| *n == s) {
                "unknown key".to_string()
            } else {
                format!("unknown section [{s}]")
            };
            b.r.diags.push(Diagnostic::field(s, k, Some(&e.origin), msg));
        }
    }
    let scenario = b.scenario();
    let errors = std::mem::take(&mut b.r.diags);
    Validation {
        scenario: if errors.is_empty() { scenario } else { None },
        errors,
        warnings: b.warnings,
    }
}

/// Config key that a core `InvalidParameter` name refers to.
fn sim_key(name: &str) -> (&'static str, &'static str) {
    match name {
        "dt" => ("simulation", "dt"),
        "duration" => ("simulation", "duration"),
        "burn_in" => ("simulation", "burn_in"),
        "n_trajectories" => ("simulation", "trajectories"),
        "record_stride" => ("simulation", "record_stride"),
        "drive_amplitude" => ("simulation", "drive_amplitude"),
        "gain" => ("feedback", "gain"),
        "delay" => ("feedback", "delay"),
        "bandpass_center" => ("feedback", "bandpass_center"),
        "bandpass_width" => ("feedback", "bandpass_width"),
        _ => ("oscillator", "frequency"),
    }
}

struct Builder<'a> {
    r: Reader<'a>,
    warnings: Vec<Diagnostic>,
    base_dir: &'a Path,
}

impl Builder<'_> {
    fn warn(&mut self, section: &str, key: &str, message: impl Into<String>) {
        let origin = self.r.config().get(section, key).map(|e| e.origin.clone());
        self.warnings.push(Diagnostic::field(section, key, origin.as_ref(), message));
    }

    /// Records a core error against a field.
    fn core_error(&mut self, section: &str, key: &str, e: &Error) {
        self.r.error(section, key, e.to_string());
    }

    fn hz(&mut self, section: &str, key: &str) -> Option<f64> {
        self.r.positive(section, key, false).map(hz_to_rad)
    }

    fn require_hz(&mut self, section: &str, key: &str) -> Option<f64> {
        self.r.require_positive(section, key, false).map(hz_to_rad)
    }

    fn path(&mut self, section: &str, key: &str) -> Option<PathBuf> {
        self.r.require_string(section, key).map(|p| self.base_dir.join(p))
    }

    fn scenario(&mut self) -> Option<Scenario> {
        let name = self.r.require_string("scenario", "name");
        if let Some(n) = &name {
            if n.is_empty() || n.contains(['/', '\\']) {
                self.r.error("scenario", "name", "must be a non-empty name without path separators");
            }
        }
        let description = self.r.string("scenario", "description");
        let mode = match self.r.require_string("scenario", "mode") {
            Some(m) => {
                let mode = Mode::from_name(&m.to_ascii_lowercase());
                if mode.is_none() {
                    self.r.error("scenario", "mode", format!("expected one of {}, found `{m}`", Mode::NAMES.join(", ")));
                }
                mode
            }
            None => None,
        };
        let seed = if self.r.has("scenario", "seed") {
            self.r.u64("scenario", "seed")
        } else {
            Some(0)
        };
        let output_dir = self
            .r
            .string("output", "dir")
            .map(PathBuf::from)
            .or_else(|| name.as_ref().map(|n| Path::new("out").join(n)));
        let mode = mode?;
        let artifacts = self.artifacts(mode);
        let params = match mode {
            Mode::AnalyticBudget => self.budget_scenario().map(Params::AnalyticBudget),
            Mode::CoolingSweep => self.cooling_scenario().map(Params::CoolingSweep),
            Mode::Simulate => self.simulate_scenario(seed.unwrap_or(0)).map(|s| Params::Simulate(Box::new(s))),
            Mode::Ringdown => self.ringdown_scenario(seed.unwrap_or(0)).map(|s| Params::Ringdown(Box::new(s))),
            Mode::Fit => self.fit_scenario().map(Params::Fit),
            Mode::Calibrate => self.calibrate_scenario().map(Params::Calibrate),
        };
        Some(Scenario {
            name: name?,
            description,
            mode,
            seed: seed?,
            output_dir: output_dir?,
            artifacts: artifacts?,
            params: params?,
        })
    }

    fn artifacts(&mut self, mode: Mode) -> Option<Vec<&'static str>> {
        let all = mode.artifacts();
        let Some(list) = self.r.list("output", "artifacts") else {
            return Some(all.to_vec());
        };
        if list.is_empty() {
            self.r.error("output", "artifacts", "artifact list is empty");
            return None;
        }
        let mut out = Vec::new();
        for a in list {
            match all.iter().find(|x| **x == a) {
                Some(x) => out.push(*x),
                None => {
                    self.r.error(
                        "output",
                        "artifacts",
                        format!("`{a}` is not an artifact of mode {}; expected one of {}", mode.name(), all.join(", ")),
                    );
                    return None;
                }
            }
        }
        Some(out)
    }

    fn oscillator(&mut self) -> Option<OscillatorParams> {
        let units = self.r.choice("oscillator", "units", &["physical", "scaled"]).unwrap_or("physical");
        let osc = if units == "scaled" {
            let ratio = if self.r.has("oscillator", "damping_ratio") {
                self.r.positive("oscillator", "damping_ratio", false)?
            } else {
                1e-3
            };
            for k in ["frequency", "linewidth", "mass", "temperature", "x_zp"] {
                if self.r.has("oscillator", k) {
                    self.r.error("oscillator", k, "not used with units = scaled");
                }
            }
            OscillatorParams::scaled(ratio)
        } else {
            let f = self.require_hz("oscillator", "frequency");
            let g = self.require_hz("oscillator", "linewidth");
            let mass = self.r.positive("oscillator", "mass", false);
            let temp = self.r.positive("oscillator", "temperature", true).unwrap_or(0.0);
            let x_zp = self.r.positive("oscillator", "x_zp", false);
            // Positions are normalized to x_zp, so the mass only matters for
            // displacement-unit conversions.
            let osc = OscillatorParams::new(f?, g?, mass.unwrap_or(1.0), temp);
            match (osc, x_zp) {
                (Ok(o), Some(x)) => o.with_x_zp(x),
                (o, _) => o,
            }
        };
        self.check(osc, "oscillator", "frequency")
    }

    fn check<T>(&mut self, v: coldamp::Result<T>, section: &str, key: &str) -> Option<T> {
        match v {
            Ok(v) => Some(v),
            Err(e) => {
                let (s, k) = match &e {
                    Error::InvalidParameter { name, .. } => field_for(section, name).unwrap_or((section, key)),
                    _ => (section, key),
                };
                self.core_error(s, k, &e);
                None
            }
        }
    }

    fn n_th(&mut self, osc: &OscillatorParams) -> f64 {
        if self.r.has("oscillator", "n_th") {
            self.r.positive("oscillator", "n_th", true).unwrap_or(0.0)
        } else {
            thermal_occupancy(osc)
        }
    }

    fn cavity(&mut self) -> Option<CavityParams> {
        let wavelength = self.r.require_positive("cavity", "wavelength", false);
        let split = self.r.positive("cavity", "splitting", true).map(hz_to_rad).unwrap_or(0.0);
        let detuning = self.r.f64("cavity", "detuning").map(hz_to_rad).unwrap_or(0.0);
        let explicit = self.r.has("cavity", "kappa_0") || self.r.has("cavity", "kappa_ex");
        let cav = if explicit {
            let k0 = self.r.require_positive("cavity", "kappa_0", false).map(hz_to_rad);
            let kex = self.r.require_positive("cavity", "kappa_ex", false).map(hz_to_rad);
            for k in ["linewidth", "eta_c"] {
                if self.r.has("cavity", k) {
                    self.r.error("cavity", k, "give either kappa_0/kappa_ex or linewidth/eta_c, not both");
                }
            }
            CavityParams::new(k0?, kex?, split, detuning, wavelength?)
        } else {
            let k = self.require_hz("cavity", "linewidth");
            let eta = self.r.require_positive("cavity", "eta_c", false);
            CavityParams::from_linewidth(k?, eta?, split, wavelength?).map(|c| c.with_detuning(detuning))
        };
        self.check(cav, "cavity", "linewidth")
    }

    fn readout(&mut self, osc: &OscillatorParams) -> Option<Readout> {
        let n_th = self.n_th(osc);
        let c0_ex = self.r.positive("readout", "c0_ex", true).unwrap_or(0.0);
        let n_imp_ex = self.r.positive("readout", "n_imp_ex", true).unwrap_or(0.0);
        let n_fb = self.r.positive("readout", "n_fb", true).unwrap_or(0.0);
        let xi = self.r.positive("readout", "ideality", false);
        if let Some(x) = xi {
            if x > 1.0 {
                self.r.error("readout", "ideality", format!("must lie in (0, 1], found {x}"));
            }
        }
        let component = self.r.has("readout", "g0");
        let cav = if self.r.config().has_section("cavity") {
            self.cavity()
        } else {
            None
        };
        let eta_d = self.r.positive("readout", "eta_d", false);
        if let Some(e) = eta_d {
            if e > 1.0 {
                self.r.error("readout", "eta_d", format!("must lie in (0, 1], found {e}"));
            }
        }
        let taper = self.r.positive("readout", "taper", false).unwrap_or(1.0);
        // Over-specified ideality: compare with the component derivation.
        if let (Some(x), Some(c), Some(e)) = (xi, cav, eta_d) {
            match component_ideality(&c, e) {
                Ok(d) => {
                    let derived = d * taper;
                    if (x / derived - 1.0).abs() > IDEALITY_TOLERANCE {
                        self.warn(
                            "readout",
                            "ideality",
                            format!(
                                "stated ideality {x} differs from the component derivation eta_c*eta_d*((1-r^2)/(1+r^2))^2*taper = {derived:.4} by {:.1}%",
                                100.0 * (x / derived - 1.0).abs()
                            ),
                        );
                    }
                }
                Err(err) => self.core_error("cavity", "splitting", &err),
            }
        }
        if component {
            for k in ["c0", "n_c"] {
                if self.r.has("readout", k) {
                    self.r.error("readout", k, "effective-form key conflicts with component form (g0 is set)");
                }
            }
            let g0 = self.hz("readout", "g0");
            let power = self.r.require_positive("readout", "power", true);
            let eta_d = if self.r.has("readout", "eta_d") {
                eta_d
            } else {
                self.r.error("readout", "eta_d", "required key is missing");
                None
            };
            if !self.r.config().has_section("cavity") {
                self.r.error("cavity", "linewidth", "component-form readout needs a [cavity] section");
            }
            let chain = MeasurementChain::new(g0?, eta_d?, power?).and_then(|c| c.with_extraneous(c0_ex, n_imp_ex));
            let mut chain = self.check(chain, "readout", "g0")?;
            chain.n_fb = n_fb;
            if let Some(x) = xi {
                chain = self.check(chain.with_ideality(x), "readout", "ideality")?;
            }
            if self.r.has("oscillator", "n_th") {
                self.r.error("oscillator", "n_th", "not supported with component-form readout; set temperature");
                return None;
            }
            let cav = cav?;
            self.check(budget_inputs(osc, &cav, &chain), "cavity", "detuning")?;
            let osc = *osc;
            return Some(Readout::Component { osc, cav, chain });
        }
        let c0 = self.r.require_positive("readout", "c0", false);
        let xi = match xi {
            Some(x) => Some(x),
            None => match (cav, eta_d) {
                (Some(c), Some(e)) => self.check(component_ideality(&c, e).map(|d| d * taper), "readout", "ideality"),
                _ => {
                    self.r.error("readout", "ideality", "required key is missing (or give [cavity] and eta_d)");
                    None
                }
            },
        };
        let n_c = self.r.positive("readout", "n_c", false);
        let inputs = BudgetInputs {
            gamma_m: osc.gamma_m,
            n_th,
            c0: c0?,
            c0_ex,
            n_c: n_c.unwrap_or(1.0),
            ideality: xi?,
            n_imp_ex,
            n_fb,
        };
        let inputs = self.check(inputs.validate().map(|_| inputs), "readout", "c0")?;
        Some(Readout::Effective {
            inputs,
            has_operating_point: n_c.is_some(),
        })
    }

    /// Parses `[sweep]` if present. Returns `Some(None)` when absent.
    fn sweep(&mut self, allowed: &[&'static str]) -> Option<Option<(SweepParameter, Vec<SweepToken>)>> {
        if !self.r.config().has_section("sweep") {
            return Some(None);
        }
        let p = match self.r.string("sweep", "parameter") {
            Some(_) => self.r.choice("sweep", "parameter", allowed)?,
            None => {
                self.r.error("sweep", "parameter", format!("required key is missing (one of {})", allowed.join(", ")));
                return None;
            }
        };
        let param = SweepParameter::from_name(p);
        if let Some(list) = self.r.list("sweep", "values") {
            for k in ["start", "stop", "points"] {
                if self.r.has("sweep", k) {
                    self.r.error("sweep", k, "conflicts with sweep.values");
                }
            }
            if list.is_empty() {
                self.r.error("sweep", "values", "sweep is empty: no values given");
                return None;
            }
            let mut out = Vec::new();
            for v in &list {
                match parse_token(v, param == SweepParameter::Gain) {
                    Some(t) => out.push(t),
                    None => {
                        self.r.error("sweep", "values", format!("cannot parse `{v}` as a number{}", if param == SweepParameter::Gain { " or `<factor>g_opt`" } else { "" }));
                        return None;
                    }
                }
            }
            return Some(Some((param, out)));
        }
        let start = self.r.require_f64("sweep", "start");
        let stop = self.r.require_f64("sweep", "stop");
        let points = if self.r.has("sweep", "points") {
            self.r.usize("sweep", "points")
        } else {
            self.r.error("sweep", "points", "required key is missing");
            None
        };
        let scale = self.r.choice("sweep", "scale", &["log", "linear"]).unwrap_or("log");
        let (start, stop, points) = (start?, stop?, points?);
        if points == 0 {
            self.r.error("sweep", "points", "sweep is empty: points must be at least 1");
            return None;
        }
        if scale == "log" && !(start > 0.0 && stop > 0.0) {
            self.r.error("sweep", "start", "log-spaced sweeps need positive start and stop");
            return None;
        }
        let values = spaced(start, stop, points, scale == "log");
        Some(Some((param, values.into_iter().map(SweepToken::Value).collect())))
    }

    fn budget_scenario(&mut self) -> Option<BudgetScenario> {
        let osc = self.oscillator()?;
        let readout = self.readout(&osc)?;
        let sweep = self.sweep(&["n_c", "power"])?;
        let sweep = match sweep {
            None => {
                if readout.operating_point().is_none() {
                    self.r.error("readout", "n_c", "required without a [sweep]");
                    return None;
                }
                None
            }
            Some((p, tokens)) => {
                if p == SweepParameter::Power && matches!(readout, Readout::Effective { .. }) {
                    self.r.error("sweep", "parameter", "a power sweep needs the component-form readout (g0, eta_d, [cavity])");
                    return None;
                }
                let values: Vec<f64> = tokens.iter().map(|t| t.resolve(0.0)).collect();
                if values.iter().any(|v| !(*v > 0.0)) {
                    self.r.error("sweep", "start", format!("{} sweep values must be positive", p.name()));
                    return None;
                }
                Some((p, values))
            }
        };
        Some(BudgetScenario { readout, sweep })
    }

    /// Budget for feedback and simulation modes: `[budget]` totals, or a
    /// readout at its operating point.
    fn loop_budget(&mut self, osc: &OscillatorParams, need_imprecision: bool) -> Option<NoiseBudget> {
        if self.r.config().has_section("budget") || !self.r.config().has_section("readout") {
            let n_tot = self.r.require_positive("budget", "n_tot", true);
            let n_imp = if need_imprecision {
                self.r.require_positive("budget", "n_imp", false)
            } else {
                Some(self.r.positive("budget", "n_imp", true).unwrap_or(0.0))
            };
            let n_fb = self.r.positive("budget", "n_fb", true).unwrap_or(0.0);
            let b = NoiseBudget::from_totals(osc.gamma_m, n_tot?, n_imp?).map(|b| b.with_n_fb(n_fb));
            return self.check(b, "budget", "n_tot");
        }
        let readout = self.readout(osc)?;
        let Some(inputs) = readout.operating_point() else {
            self.r.error("readout", "n_c", "operating point required");
            return None;
        };
        self.check(NoiseBudget::assemble(&inputs), "readout", "n_c")
    }

    fn feedback(&mut self, osc: &OscillatorParams, gain: f64) -> Option<(FeedbackSettings, LoopModel)> {
        let delay = self
            .r
            .positive("feedback", "delay", false)
            .unwrap_or(1.5 * std::f64::consts::PI / osc.omega_m);
        let center = self.hz("feedback", "bandpass_center").unwrap_or(osc.omega_m);
        let width = self.hz("feedback", "bandpass_width").unwrap_or(osc.omega_m);
        let model = match self.r.choice("feedback", "loop", &["ideal", "filtered"]) {
            Some("ideal") => LoopModel::Ideal,
            _ => LoopModel::Filtered,
        };
        let fb = FeedbackSettings::new(gain, delay, center, width);
        Some((self.check(fb, "feedback", "gain")?, model))
    }

    fn cooling_scenario(&mut self) -> Option<CoolingScenario> {
        let osc = self.oscillator()?;
        let budget = self.loop_budget(&osc, true)?;
        let sweep = self.sweep(&["gamma_eff", "gain"])?;
        let (parameter, gains) = match sweep {
            None => {
                let g = self.r.positive("feedback", "gain", true).unwrap_or(0.0);
                (SweepParameter::Gain, vec![g])
            }
            Some((p, tokens)) => {
                let g_opt = minimum_occupancy(&budget).g_fb_opt;
                let gains = tokens
                    .iter()
                    .map(|t| match p {
                        SweepParameter::GammaEff => hz_to_rad(t.resolve(0.0)) / osc.gamma_m - 1.0,
                        _ => t.resolve(g_opt),
                    })
                    .collect::<Vec<_>>();
                if let Some(g) = gains.iter().find(|g| !(**g >= 0.0)) {
                    let msg = match p {
                        SweepParameter::GammaEff => format!(
                            "gamma_eff below the intrinsic linewidth (gain {g:.3e}); values must be at least {} Hz",
                            coldamp::units::rad_to_hz(osc.gamma_m)
                        ),
                        _ => format!("gain {g} must be non-negative"),
                    };
                    self.r.error("sweep", "start", msg);
                    return None;
                }
                (p, gains)
            }
        };
        Some(CoolingScenario {
            budget,
            gains,
            parameter,
        })
    }

    fn integrator(&mut self) -> Integrator {
        match self.r.choice("simulation", "integrator", &["symplectic", "exact"]) {
            Some("exact") => Integrator::Exact,
            _ => Integrator::SymplecticEuler,
        }
    }

    fn export(&mut self) -> (Export, usize) {
        let e = match self.r.choice("simulation", "export", &["csv", "binary", "none"]) {
            Some("binary") => Export::Binary,
            Some("none") => Export::None,
            _ => Export::Csv,
        };
        (e, self.r.usize("simulation", "export_trajectories").unwrap_or(1))
    }

    fn sim_base(&mut self, osc: OscillatorParams, budget: NoiseBudget, fb: FeedbackSettings, seed: u64) -> Option<SimConfig> {
        let dt = self.r.require_positive("simulation", "dt", false);
        let duration = self.r.require_positive("simulation", "duration", false);
        let burn_in = self.r.positive("simulation", "burn_in", true).unwrap_or(0.0);
        let mut c = SimConfig::new(osc, budget, fb, dt?, duration?, burn_in, seed);
        c.n_trajectories = self.r.usize("simulation", "trajectories").unwrap_or(1);
        c.integrator = self.integrator();
        c.record_stride = self.r.usize("simulation", "record_stride").unwrap_or(1);
        c.drive_amplitude = self.r.positive("simulation", "drive_amplitude", true);
        c.zero_point = self.r.bool("simulation", "zero_point").unwrap_or(true);
        Some(c)
    }

    fn sim_checks(&mut self, cfg: &SimConfig, label: &str) -> bool {
        match cfg.validate_step() {
            Ok(ws) => {
                for w in ws {
                    match w {
                        SimWarning::CoarseStep { dt_omega } => self.warn(
                            "simulation",
                            "dt",
                            format!("{label}dt*omega_m = {dt_omega:.3} is above the recommended 0.02"),
                        ),
                        SimWarning::LowQ { q } => {
                            self.warn("oscillator", "linewidth", format!("{label}quality factor {q:.3} is not high-Q"))
                        }
                    }
                }
                true
            }
            Err(e) => {
                let (s, k) = match &e {
                    Error::InvalidParameter { name, .. } => sim_key(name),
                    _ => ("simulation", "dt"),
                };
                let origin = self.r.config().get(s, k).map(|e| e.origin.clone());
                self.r.diags.push(Diagnostic::field(s, k, origin.as_ref(), format!("{label}{e}")));
                false
            }
        }
    }

    /// Linewidth and burn-in requirements, which scale with the gain.
    fn sim_span_checks(&mut self, cfg: &SimConfig, label: &str) -> bool {
        match cfg.validate() {
            Ok(_) => true,
            Err(e) => {
                let (s, k) = match &e {
                    Error::InvalidParameter { name, .. } => sim_key(name),
                    _ => ("simulation", "duration"),
                };
                let origin = self.r.config().get(s, k).map(|e| e.origin.clone());
                self.r.diags.push(Diagnostic::field(s, k, origin.as_ref(), format!("{label}{e}")));
                false
            }
        }
    }

    fn spectral(&mut self) -> SpectralSettings {
        let overlap = self.r.f64("spectral", "overlap").unwrap_or(0.5);
        if !(0.0..=0.9).contains(&overlap) {
            self.r.error("spectral", "overlap", format!("must lie in [0, 0.9], found {overlap}"));
        }
        let segment_length = self.r.usize("spectral", "segment_length");
        if segment_length.is_some_and(|n| n < 8) {
            self.r.error("spectral", "segment_length", "must be at least 8 samples");
        }
        let window = self.window("spectral", "window_lo", "window_hi", false);
        SpectralSettings {
            segment_length,
            overlap,
            fit: self.r.bool("spectral", "fit").unwrap_or(false),
            window,
            options: self.fit_options(),
        }
    }

    fn fit_options(&mut self) -> FitOptions<f64> {
        let d = FitOptions::<f64>::default();
        FitOptions {
            weighting: match self.r.choice("spectral", "weighting", &["uniform", "chi-square"]) {
                Some("chi-square") => Weighting::ChiSquare,
                _ => Weighting::Uniform,
            },
            max_iterations: self.r.usize("spectral", "max_iterations").unwrap_or(d.max_iterations),
            tolerance: self.r.positive("spectral", "tolerance", false).unwrap_or(d.tolerance),
        }
    }

    /// Window in Hz from two keys; both or neither unless `required`.
    fn window(&mut self, section: &str, lo: &str, hi: &str, required: bool) -> Option<(f64, f64)> {
        if !required && !self.r.has(section, lo) && !self.r.has(section, hi) {
            return None;
        }
        let a = self.r.require_positive(section, lo, true)?;
        let b = self.r.require_positive(section, hi, true)?;
        if b <= a {
            self.r.error(section, hi, format!("must exceed {section}.{lo} = {a}"));
            return None;
        }
        Some((a, b))
    }

    fn simulate_scenario(&mut self, seed: u64) -> Option<SimulateScenario> {
        let osc = self.oscillator()?;
        let budget = self.loop_budget(&osc, false)?;
        let base_gain = self.r.positive("feedback", "gain", true).unwrap_or(0.0);
        let (fb, model) = self.feedback(&osc, base_gain)?;
        let sweep = self.sweep(&["gain", "gamma_eff"])?;
        let g_opt = if budget.n_imp > 0.0 {
            Some(minimum_occupancy(&budget).g_fb_opt)
        } else {
            None
        };
        let gains = match sweep {
            None => vec![base_gain],
            Some((p, tokens)) => {
                let mut gains = Vec::new();
                for t in tokens {
                    let g = match (p, t) {
                        (SweepParameter::GammaEff, t) => hz_to_rad(t.resolve(0.0)) / osc.gamma_m - 1.0,
                        (_, SweepToken::OptimalGain(_)) if g_opt.is_none() => {
                            self.r.error("sweep", "values", "`g_opt` needs a positive budget.n_imp");
                            return None;
                        }
                        (_, t) => t.resolve(g_opt.unwrap_or(0.0)),
                    };
                    if !(g >= 0.0) {
                        self.r.error("sweep", "values", format!("gain {g} must be non-negative"));
                        return None;
                    }
                    gains.push(g);
                }
                gains
            }
        };
        let mut base = self.sim_base(osc, budget, fb, seed)?;
        base.loop_model = model;
        base.initial = match self.r.choice("simulation", "initial", &["rest", "stationary"]) {
            Some("stationary") => InitialState::Stationary,
            _ => InitialState::Rest,
        };
        let spectral = self.spectral();
        let (export, export_trajectories) = self.export();
        let s = SimulateScenario {
            base,
            gains,
            spectral,
            export,
            export_trajectories,
        };
        // Step-level checks do not depend on the gain; report them once.
        let first = s.point(s.gains.first().copied().unwrap_or(0.0));
        if !self.sim_checks(&first, "") {
            return None;
        }
        let multi = s.gains.len() > 1;
        let mut ok = true;
        for &g in &s.gains {
            let label = if multi { format!("at gain {g:.4e}: ") } else { String::new() };
            ok &= self.sim_span_checks(&s.point(g), &label);
        }
        ok.then_some(s)
    }

    fn ringdown_options(&mut self, section: &str) -> RingdownOptions {
        let start = self.r.positive(section, "fit_start", true);
        let end = self.r.positive(section, "fit_end", false);
        if let (Some(a), Some(b)) = (start, end) {
            if b <= a {
                self.r.error(section, "fit_end", format!("must exceed fit_start = {a}"));
            }
        }
        RingdownOptions { start, end }
    }

    fn ringdown_scenario(&mut self, seed: u64) -> Option<RingdownScenario> {
        let osc = self.oscillator()?;
        let budget = self.loop_budget(&osc, false)?;
        let gain = self.r.positive("feedback", "gain", true).unwrap_or(0.0);
        let (fb, model) = self.feedback(&osc, gain)?;
        let drive_frequency = self.hz("ringdown", "drive_frequency").unwrap_or(osc.omega_m);
        let drive_off = self.r.require_positive("ringdown", "drive_off", false);
        let demod_frequency = self.hz("ringdown", "demod_frequency").unwrap_or(drive_frequency);
        let bandwidth = self.r.require_positive("ringdown", "bandwidth", false);
        let options = self.ringdown_options("ringdown");
        let mut sim = self.sim_base(osc, budget, fb, seed)?;
        sim.loop_model = model;
        let (export, export_trajectories) = self.export();
        let drive_off = drive_off?;
        if drive_off >= sim.duration {
            self.r.error("ringdown", "drive_off", format!("must precede the end of the run ({} s)", sim.duration));
        }
        if drive_off < sim.burn_in {
            self.r.error("ringdown", "drive_off", "must not precede the burn-in end");
        }
        self.sim_checks(&sim, "").then_some(RingdownScenario {
            sim,
            drive_frequency,
            drive_off,
            demod_frequency,
            bandwidth: bandwidth?,
            options,
            export,
            export_trajectories,
        })
    }

    fn psd_input(&mut self) -> Option<PsdInput> {
        let path = self.path("input", "psd");
        let unit = match self.r.choice(
            "input",
            "psd_unit",
            &["normalized", "displacement", "frequency", "voltage", "arbitrary"],
        ) {
            Some("normalized") => PsdUnit::NormalizedPosition,
            Some("displacement") => PsdUnit::Displacement,
            Some("frequency") => PsdUnit::FrequencyNoise,
            Some("voltage") => PsdUnit::Voltage,
            _ => PsdUnit::Arbitrary,
        };
        let n_averages = self.r.usize("input", "n_averages").unwrap_or(1);
        if n_averages == 0 {
            self.r.error("input", "n_averages", "must be at least 1");
        }
        Some(PsdInput {
            path: path?,
            n_averages,
            unit,
        })
    }

    fn fit_scenario(&mut self) -> Option<FitScenario> {
        let input = self.psd_input();
        let window = self.window("spectral", "window_lo", "window_hi", true);
        let options = self.fit_options();
        let osc = if self.r.config().has_section("oscillator") {
            Some(self.oscillator()?)
        } else {
            None
        };
        let g0 = self.hz("readout", "g0").unwrap_or(0.0);
        if let (Some(i), None) = (&input, osc) {
            if matches!(i.unit, PsdUnit::NormalizedPosition | PsdUnit::Displacement | PsdUnit::FrequencyNoise) {
                self.warn("oscillator", "linewidth", "no [oscillator] section: occupancies will not be reported");
            }
        }
        Some(FitScenario {
            input: input?,
            window: window?,
            options,
            osc,
            g0,
        })
    }

    fn calibrate_scenario(&mut self) -> Option<CalibrateScenario> {
        let method = match self.r.string("calibration", "method") {
            Some(_) => self.r.choice("calibration", "method", &["tone", "spring", "splitting", "ringdown"])?,
            None => {
                self.r.error("calibration", "method", "required key is missing");
                return None;
            }
        };
        match method {
            "tone" => {
                let input = self.psd_input();
                let beta = self.r.require_positive("calibration", "beta", false);
                let f_cal = self.require_hz("calibration", "tone_frequency");
                let ratio = self.r.positive("calibration", "transfer_ratio", false).unwrap_or(1.0);
                let n_th = if self.r.has("calibration", "n_th") {
                    self.r.positive("calibration", "n_th", false)
                } else if self.r.config().has_section("oscillator") {
                    let osc = self.oscillator()?;
                    Some(self.n_th(&osc))
                } else {
                    self.r.error("calibration", "n_th", "required key is missing (or give [oscillator])");
                    None
                };
                let tone_window = self.window("calibration", "tone_lo", "tone_hi", true);
                let peak_window = match self.window("calibration", "peak_lo", "peak_hi", false) {
                    Some(w) => Some(w),
                    None if self.r.config().has_section("oscillator") => {
                        let osc = self.oscillator()?;
                        Some(coldamp::calibration::default_peak_window(osc.omega_m, osc.gamma_m))
                    }
                    None => {
                        self.r.error("calibration", "peak_lo", "required key is missing (or give [oscillator])");
                        None
                    }
                };
                let tone = self.check(CalibrationTone::new(beta?, f_cal?, ratio), "calibration", "beta")?;
                let (pw, tw) = (peak_window?, tone_window?);
                if pw.0 <= tw.1 && tw.0 <= pw.1 {
                    self.r.error("calibration", "tone_lo", "tone window overlaps the peak window");
                    return None;
                }
                Some(CalibrateScenario::Tone {
                    input: input?,
                    tone,
                    n_th: n_th?,
                    peak_window: pw,
                    tone_window: tw,
                })
            }
            "spring" => {
                let data = self.path("input", "data");
                let cav = self.cavity();
                let power = self.r.require_positive("readout", "power", false);
                Some(CalibrateScenario::Spring {
                    data: data?,
                    cav: cav?,
                    power: power?,
                })
            }
            "splitting" => Some(CalibrateScenario::Splitting {
                data: self.path("input", "data")?,
            }),
            _ => {
                let list = match self.r.list("input", "trajectories") {
                    Some(l) if !l.is_empty() => Some(l),
                    Some(_) => {
                        self.r.error("input", "trajectories", "trajectory list is empty");
                        None
                    }
                    None => {
                        self.r.error("input", "trajectories", "required key is missing");
                        None
                    }
                };
                let demod = self.require_hz("ringdown", "demod_frequency");
                let bandwidth = self.r.require_positive("ringdown", "bandwidth", false);
                let options = self.ringdown_options("ringdown");
                Some(CalibrateScenario::Ringdown {
                    trajectories: list?.iter().map(|p| self.base_dir.join(p)).collect(),
                    demod_frequency: demod?,
                    bandwidth: bandwidth?,
                    options,
                })
            }
        }
    }
}

/// Maps a core parameter name to the config key of `section`.
fn field_for<'a>(section: &'a str, name: &str) -> Option<(&'a str, &'static str)> {
    let key = match (section, name) {
        ("oscillator", "omega_m") => "frequency",
        ("oscillator", "gamma_m") => "linewidth",
        ("oscillator", "mass") => "mass",
        ("oscillator", "temperature") => "temperature",
        ("oscillator", "x_zp") => "x_zp",
        ("cavity", "kappa_0") => "kappa_0",
        ("cavity", "kappa_ex") => "kappa_ex",
        ("cavity", "gamma_split") => "splitting",
        ("cavity", "wavelength") => "wavelength",
        ("cavity", "eta_c") => "eta_c",
        ("readout", "g0") => "g0",
        ("readout", "eta_d") => "eta_d",
        ("readout", "input_power") => "power",
        ("readout", "c0_extraneous") => "c0_ex",
        ("readout", "n_imp_extraneous") => "n_imp_ex",
        ("readout", "ideality") => "ideality",
        ("readout", "c0") => "c0",
        ("readout", "n_c") => "n_c",
        ("budget", "n_th") => "n_tot",
        ("budget", "n_imp_shot") => "n_imp",
        ("budget", "n_fb") => "n_fb",
        ("feedback", k) => match k {
            "gain" => "gain",
            "delay" => "delay",
            "bandpass_center" => "bandpass_center",
            _ => "bandpass_width",
        },
        ("calibration", "beta") => "beta",
        ("calibration", "omega_cal") => "tone_frequency",
        ("calibration", "transfer_ratio") => "transfer_ratio",
        _ => return None,
    };
    Some((section, key))
}

/// A sweep value, possibly relative to the optimal gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepToken {
    Value(f64),
    /// `factor × g_opt`.
    OptimalGain(f64),
}

impl SweepToken {
    pub fn resolve(self, g_opt: f64) -> f64 {
        match self {
            SweepToken::Value(v) => v,
            SweepToken::OptimalGain(f) => f * g_opt,
        }
    }
}

/// `1.5`, `g_opt`, `10g_opt`, `0.5*g_opt`.
pub fn parse_token(s: &str, allow_g_opt: bool) -> Option<SweepToken> {
    let s = s.trim();
    if allow_g_opt {
        if let Some(f) = s.strip_suffix("g_opt") {
            let f = f.trim().trim_end_matches('*').trim();
            let factor = if f.is_empty() { 1.0 } else { f.parse::<f64>().ok()? };
            return factor.is_finite().then_some(SweepToken::OptimalGain(factor));
        }
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite()).map(SweepToken::Value)
}

/// `points` values from `start` to `stop` inclusive.
pub fn spaced(start: f64, stop: f64, points: usize, log: bool) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    let n = (points - 1) as f64;
    (0..points)
        .map(|i| {
            let t = i as f64 / n;
            if i == 0 {
                start
            } else if i == points - 1 {
                stop
            } else if log {
                (start.ln() + t * (stop.ln() - start.ln())).exp()
            } else {
                start + t * (stop - start)
            }
        })
        .collect()
}
