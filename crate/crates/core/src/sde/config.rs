use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{FeedbackSettings, NoiseBudget, OscillatorParams};

/// Largest accepted `dt Ω_m`.
pub const MAX_STEP: f64 = 0.05;
/// `dt Ω_m` above which a warning is emitted.
pub const STEP_WARNING: f64 = 0.02;
/// Required post-burn-in span in units of `1/Γ_eff`.
pub const MIN_LINEWIDTHS: f64 = 20.0;
/// Required burn-in in units of `1/Γ_eff`.
pub const MIN_BURN_IN: f64 = 10.0;

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Integrator {
    /// Semi-implicit Euler–Maruyama on `(u, u̇)`.
    #[default]
    SymplecticEuler,
    /// Exact linear propagator over each step, with exactly matched noise
    /// covariance. Unconditionally stable; preferred at large feedback gain.
    Exact,
}

/// How the feedback force is formed from the record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LoopModel {
    /// Force `−Γ_fb ẏ`: velocity feedback at every frequency.
    Ideal,
    /// Record passed through a bandpass and an integer-sample delay line.
    #[default]
    Filtered,
}

/// Initial condition of each trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum InitialState {
    /// `u = u̇ = 0`; the burn-in has to cover the transient.
    #[default]
    Rest,
    /// Drawn from the stationary distribution of the discretized dynamics.
    Stationary,
    /// Deterministic start, e.g. for ringdowns.
    Fixed { u: f64, v: f64 },
}

/// Simulation settings. Positions are in units of `x_zp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub osc: OscillatorParams<f64>,
    pub budget: NoiseBudget<f64>,
    pub fb: FeedbackSettings<f64>,
    /// Integration step (s).
    pub dt: f64,
    /// Total simulated time including burn-in (s).
    pub duration: f64,
    /// Discarded initial span (s).
    pub burn_in: f64,
    pub seed: u64,
    pub n_trajectories: usize,
    pub integrator: Integrator,
    pub loop_model: LoopModel,
    pub initial: InitialState,
    /// Keep every `record_stride`-th step; `y` and `f_fb` are averaged over
    /// the skipped steps so that the record is not aliased.
    pub record_stride: usize,
    /// Ringdown drive expressed as the resonant steady-state amplitude of
    /// `u`; defaults to `100 sqrt(2 n_tot + 1)`.
    pub drive_amplitude: Option<f64>,
    /// Include the zero-point `+½` in the thermal force. Switching it off
    /// together with zero occupancies gives noise-free dynamics.
    pub zero_point: bool,
}

/// Non-fatal configuration findings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SimWarning {
    /// `dt Ω_m` is above the recommended 0.02.
    CoarseStep { dt_omega: f64 },
    /// The oscillator is not high-Q.
    LowQ { q: f64 },
}

impl SimConfig {
    pub fn new(
        osc: OscillatorParams<f64>,
        budget: NoiseBudget<f64>,
        fb: FeedbackSettings<f64>,
        dt: f64,
        duration: f64,
        burn_in: f64,
        seed: u64,
    ) -> Self {
        Self {
            osc,
            budget,
            fb,
            dt,
            duration,
            burn_in,
            seed,
            n_trajectories: 1,
            integrator: Integrator::default(),
            loop_model: LoopModel::default(),
            initial: InitialState::default(),
            record_stride: 1,
            drive_amplitude: None,
            zero_point: true,
        }
    }

    pub fn gamma_eff(&self) -> f64 {
        self.fb.gamma_eff(self.osc.gamma_m)
    }

    /// Checks shared by every run mode: step size, counts and positivity.
    pub fn validate_step(&self) -> Result<Vec<SimWarning>> {
        self.osc.validate()?;
        self.fb.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        let dto = self.dt * self.osc.omega_m;
        if dto > MAX_STEP {
            return Err(invalid(
                "dt",
                format!("dt*omega_m = {dto} exceeds {MAX_STEP} (fewer than ~125 samples per period)"),
            ));
        }
        if !(self.duration > self.burn_in && self.burn_in >= 0.0) {
            return Err(invalid("duration", "must exceed burn_in, and burn_in must be non-negative"));
        }
        if self.n_trajectories == 0 {
            return Err(invalid("n_trajectories", "must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be at least 1"));
        }
        if let Some(a) = self.drive_amplitude {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(invalid("drive_amplitude", "must be non-negative"));
            }
        }
        let mut warnings = Vec::new();
        if dto > STEP_WARNING {
            warnings.push(SimWarning::CoarseStep { dt_omega: dto });
        }
        if !self.osc.is_high_q() {
            warnings.push(SimWarning::LowQ {
                q: self.osc.quality_factor(),
            });
        }
        Ok(warnings)
    }

    /// Full validation for stationary-noise runs: additionally requires
    /// enough linewidths after the burn-in and, when starting at rest, a
    /// burn-in long enough for the transient to decay.
    pub fn validate(&self) -> Result<Vec<SimWarning>> {
        let warnings = self.validate_step()?;
        let ge = self.gamma_eff();
        let span = self.duration - self.burn_in;
        if span * ge < MIN_LINEWIDTHS {
            return Err(invalid(
                "duration",
                format!(
                    "duration - burn_in = {span} covers {:.3} linewidths, need {MIN_LINEWIDTHS}/gamma_eff",
                    span * ge
                ),
            ));
        }
        if self.initial == InitialState::Rest && self.burn_in * ge < MIN_BURN_IN {
            return Err(invalid(
                "burn_in",
                format!("burn_in = {} is below {MIN_BURN_IN}/gamma_eff", self.burn_in),
            ));
        }
        Ok(warnings)
    }

    /// Number of integration steps after the burn-in that are recorded.
    pub fn recorded_samples(&self) -> usize {
        let steps = ((self.duration - self.burn_in) / self.dt).floor() as usize;
        steps / self.record_stride
    }

    /// Default ringdown drive amplitude in units of `x_zp`.
    pub fn ringdown_amplitude(&self) -> f64 {
        self.drive_amplitude
            .unwrap_or_else(|| 100.0 * (2.0 * self.budget.n_tot + 1.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaled(gain: f64) -> SimConfig {
        let osc = OscillatorParams::scaled(1e-3).unwrap();
        let budget = NoiseBudget::from_totals(1e-3, 100.0, 0.0).unwrap();
        let fb = FeedbackSettings::cold_damping(gain, 1.0).unwrap();
        SimConfig::new(osc, budget, fb, 0.02, 3e5, 1e4, 1)
    }

    #[test]
    fn accepts_reasonable_config() {
        assert!(scaled(0.0).validate().unwrap().is_empty());
    }

    #[test]
    fn rejects_coarse_step() {
        let mut c = scaled(0.0);
        c.dt = 0.5;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("dt"), "{err}");
        c.dt = 0.04;
        assert!(matches!(c.validate().unwrap()[0], SimWarning::CoarseStep { .. }));
    }

    #[test]
    fn rejects_short_spans() {
        let mut c = scaled(0.0);
        c.duration = 1.5e4;
        assert!(c.validate().is_err());
        let mut c = scaled(0.0);
        c.burn_in = 100.0;
        assert!(c.validate().is_err());
        c.initial = InitialState::Stationary;
        assert!(c.validate().is_ok());
    }
}
