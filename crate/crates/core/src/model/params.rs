//! Parameter sets for the mechanical mode, the optical readout and the loop.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::units::{self, HBAR};

/// Quality factor below which area-based occupancy formulas are flagged.
pub const HIGH_Q_THRESHOLD: f64 = 100.0;

/// Mechanical mode of the oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams<T> {
    /// Angular resonance frequency (rad/s).
    pub omega_m: T,
    /// Angular energy damping rate (rad/s).
    pub gamma_m: T,
    /// Effective mass (kg).
    pub mass: T,
    /// Ambient bath temperature (K).
    pub temperature: T,
    /// Zero-point amplitude supplied directly (m). When absent it is derived
    /// from the mass; the two are never reconciled silently.
    pub x_zp_override: Option<T>,
}

impl<T: Real> OscillatorParams<T> {
    pub fn new(omega_m: T, gamma_m: T, mass: T, temperature: T) -> Result<Self> {
        let p = Self {
            omega_m,
            gamma_m,
            mass,
            temperature,
            x_zp_override: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unit-free oscillator with `Ω_m = 1` and `Γ_m = damping_ratio`; time is
    /// measured in units of `1/Ω_m` and positions in units of `x_zp`.
    pub fn scaled(damping_ratio: T) -> Result<Self> {
        let mut p = Self::new(T::one(), damping_ratio, T::one(), T::zero())?;
        p.x_zp_override = Some(T::one());
        Ok(p)
    }

    pub fn with_x_zp(mut self, x_zp: T) -> Result<Self> {
        if !(x_zp > T::zero()) {
            return Err(invalid("x_zp", "must be positive"));
        }
        self.x_zp_override = Some(x_zp);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_m > T::zero()) {
            return Err(invalid("omega_m", "must be positive"));
        }
        if !(self.gamma_m > T::zero()) {
            return Err(invalid("gamma_m", "must be positive"));
        }
        if !(self.mass > T::zero()) {
            return Err(invalid("mass", "must be positive"));
        }
        if !(self.temperature >= T::zero()) {
            return Err(invalid("temperature", "must be non-negative"));
        }
        Ok(())
    }

    /// `sqrt(ħ / 2 m Ω_m)`, or the supplied override.
    pub fn x_zp(&self) -> T {
        self.x_zp_override
            .unwrap_or_else(|| (T::lit(HBAR) / (T::lit(2.0) * self.mass * self.omega_m)).sqrt())
    }

    /// `x_zp` computed from the mass regardless of any override.
    pub fn x_zp_from_mass(&self) -> T {
        (T::lit(HBAR) / (T::lit(2.0) * self.mass * self.omega_m)).sqrt()
    }

    pub fn quality_factor(&self) -> T {
        self.omega_m / self.gamma_m
    }

    /// False when `Ω_m/Γ_m < 100`: narrow-Lorentzian formulas are then suspect.
    pub fn is_high_q(&self) -> bool {
        self.quality_factor() >= T::lit(HIGH_Q_THRESHOLD)
    }
}

/// Optical mode doublet used for readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams<T> {
    /// Intrinsic energy decay rate κ₀ (rad/s).
    pub kappa_0: T,
    /// External (taper) coupling rate κ_ex (rad/s).
    pub kappa_ex: T,
    /// Clockwise/counter-clockwise scattering rate γ (rad/s).
    pub gamma_split: T,
    /// Laser-cavity detuning Δ (rad/s).
    pub detuning: T,
    /// Vacuum carrier wavelength (m).
    pub wavelength: T,
}

impl<T: Real> CavityParams<T> {
    pub fn new(kappa_0: T, kappa_ex: T, gamma_split: T, detuning: T, wavelength: T) -> Result<Self> {
        let c = Self {
            kappa_0,
            kappa_ex,
            gamma_split,
            detuning,
            wavelength,
        };
        c.validate()?;
        Ok(c)
    }

    /// Builds a cavity from its total linewidth and coupling efficiency.
    pub fn from_linewidth(kappa: T, eta_c: T, gamma_split: T, wavelength: T) -> Result<Self> {
        if !(eta_c >= T::zero() && eta_c < T::one()) {
            return Err(invalid("eta_c", "must lie in [0, 1)"));
        }
        Self::new(kappa * (T::one() - eta_c), kappa * eta_c, gamma_split, T::zero(), wavelength)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_0 > T::zero()) {
            return Err(invalid("kappa_0", "must be positive"));
        }
        if !(self.kappa_ex >= T::zero()) {
            return Err(invalid("kappa_ex", "must be non-negative"));
        }
        if !(self.gamma_split >= T::zero()) {
            return Err(invalid("gamma_split", "must be non-negative"));
        }
        if !self.detuning.is_finite() {
            return Err(invalid("detuning", "must be finite"));
        }
        if !(self.wavelength > T::zero()) {
            return Err(invalid("wavelength", "must be positive"));
        }
        Ok(())
    }

    /// Total decay rate `κ = κ₀ + κ_ex`.
    pub fn kappa(&self) -> T {
        self.kappa_0 + self.kappa_ex
    }

    /// Output coupling efficiency `η_c = κ_ex / κ`.
    pub fn eta_c(&self) -> T {
        self.kappa_ex / self.kappa()
    }

    /// `γ/κ`.
    pub fn split_ratio(&self) -> T {
        self.gamma_split / self.kappa()
    }

    pub fn omega_c(&self) -> T {
        units::optical_angular_frequency(self.wavelength)
    }

    pub fn with_detuning(mut self, detuning: T) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_kappa_ex(mut self, kappa_ex: T) -> Self {
        self.kappa_ex = kappa_ex;
        self
    }
}

/// Coupling, detection and excess-noise description of the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementChain<T> {
    /// Vacuum optomechanical coupling rate g₀ (rad/s).
    pub g0: T,
    /// Detector quantum efficiency, including any throughput loss after the cavity.
    pub eta_d: T,
    /// Injected sensor power P_in⁺ (W).
    pub input_power: T,
    /// Excess cooperativity modelling extraneous back-action.
    pub c0_extraneous: T,
    /// Extraneous imprecision occupancy floor.
    pub n_imp_extraneous: T,
    /// Feedback actuator noise occupancy.
    pub n_fb: T,
    /// Overall measurement ideality ξ. When present it replaces the
    /// component product `η_c η_d ((1-γ²/κ²)/(1+γ²/κ²))²`.
    pub ideality: Option<T>,
}

impl<T: Real> MeasurementChain<T> {
    pub fn new(g0: T, eta_d: T, input_power: T) -> Result<Self> {
        let m = Self {
            g0,
            eta_d,
            input_power,
            c0_extraneous: T::zero(),
            n_imp_extraneous: T::zero(),
            n_fb: T::zero(),
            ideality: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_extraneous(mut self, c0_extraneous: T, n_imp_extraneous: T) -> Result<Self> {
        self.c0_extraneous = c0_extraneous;
        self.n_imp_extraneous = n_imp_extraneous;
        self.validate()?;
        Ok(self)
    }

    pub fn with_ideality(mut self, xi: T) -> Result<Self> {
        self.ideality = Some(xi);
        self.validate()?;
        Ok(self)
    }

    pub fn with_power(mut self, input_power: T) -> Self {
        self.input_power = input_power;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g0 > T::zero()) {
            return Err(invalid("g0", "must be positive"));
        }
        if !(self.eta_d > T::zero() && self.eta_d <= T::one()) {
            return Err(invalid("eta_d", "must lie in (0, 1]"));
        }
        if !(self.input_power >= T::zero()) {
            return Err(invalid("input_power", "must be non-negative"));
        }
        if !(self.c0_extraneous >= T::zero()) {
            return Err(invalid("c0_extraneous", "must be non-negative"));
        }
        if !(self.n_imp_extraneous >= T::zero()) {
            return Err(invalid("n_imp_extraneous", "must be non-negative"));
        }
        if !(self.n_fb >= T::zero()) {
            return Err(invalid("n_fb", "must be non-negative"));
        }
        if let Some(xi) = self.ideality {
            if !(xi > T::zero() && xi <= T::one()) {
                return Err(invalid("ideality", "must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Single-photon cooperativity `C₀ = 4g₀²/(κΓ_m)`.
    pub fn cooperativity(&self, cav: &CavityParams<T>, osc: &OscillatorParams<T>) -> T {
        T::lit(4.0) * self.g0 * self.g0 / (cav.kappa() * osc.gamma_m)
    }
}

/// Feedback loop settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSettings<T> {
    /// Open-loop gain `g_fb = Γ_fb / Γ_m`.
    pub gain: T,
    /// Loop delay τ (s).
    pub delay: T,
    /// Bandpass center (rad/s).
    pub bandpass_center: T,
    /// Bandpass full width (rad/s).
    pub bandpass_width: T,
}

impl<T: Real> FeedbackSettings<T> {
    pub fn new(gain: T, delay: T, bandpass_center: T, bandpass_width: T) -> Result<Self> {
        let f = Self {
            gain,
            delay,
            bandpass_center,
            bandpass_width,
        };
        f.validate()?;
        Ok(f)
    }

    /// Velocity-like loop for a mode at `omega_m`: delay `3π/2Ω_m`, bandpass
    /// centered on the mode with a full width of `Ω_m`.
    pub fn cold_damping(gain: T, omega_m: T) -> Result<Self> {
        Self::new(
            gain,
            T::lit(1.5) * T::PI() / omega_m,
            omega_m,
            omega_m,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain >= T::zero()) {
            return Err(invalid("gain", "must be non-negative"));
        }
        if !(self.delay >= T::zero()) {
            return Err(invalid("delay", "must be non-negative"));
        }
        if !(self.bandpass_width > T::zero()) {
            return Err(invalid("bandpass_width", "must be positive"));
        }
        if !(self.bandpass_center > T::zero()) {
            return Err(invalid("bandpass_center", "must be positive"));
        }
        Ok(())
    }

    pub fn with_gain(mut self, gain: T) -> Self {
        self.gain = gain;
        self
    }

    /// Feedback damping rate `Γ_fb = g_fb Γ_m`.
    pub fn gamma_fb(&self, gamma_m: T) -> T {
        self.gain * gamma_m
    }

    /// Closed-loop damping rate `Γ_eff = (1 + g_fb) Γ_m`.
    pub fn gamma_eff(&self, gamma_m: T) -> T {
        (T::one() + self.gain) * gamma_m
    }
}

#[cfg(test)]
mod tests {
    use crate::{CavityParams, FeedbackSettings, MeasurementChain, OscillatorParams};

    fn hz_to_rad(f: f64) -> f64 {
        crate::units::hz_to_rad(f)
    }

    #[test]
    fn x_zp_from_effective_mass_differs_from_quoted_value() {
        // m = 2.9 pg at 4.3 MHz gives ~26 fm, not the quoted 29 fm.
        let osc = OscillatorParams::new(hz_to_rad(4.3e6), hz_to_rad(5.7), 2.9e-15, 4.4).unwrap();
        let x = osc.x_zp();
        assert!((x - 26.0e-15).abs() < 1.0e-15, "x_zp = {x:e}");
        let osc = osc.with_x_zp(29e-15).unwrap();
        assert_eq!(osc.x_zp(), 29e-15);
        assert!((osc.x_zp_from_mass() - x).abs() < 1e-25);
    }

    #[test]
    fn high_q_flag() {
        let osc = OscillatorParams::new(1.0, 0.02, 1.0, 0.0).unwrap();
        assert!(!osc.is_high_q());
        let osc = OscillatorParams::new(1.0, 1e-3, 1.0, 0.0).unwrap();
        assert!(osc.is_high_q());
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(OscillatorParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(OscillatorParams::new(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(OscillatorParams::new(1.0, 1.0, 1.0, -1.0).is_err());
        assert!(CavityParams::new(0.0, 1.0, 0.0, 0.0, 775e-9).is_err());
        assert!(CavityParams::new(1.0, -1.0, 0.0, 0.0, 775e-9).is_err());
        assert!(MeasurementChain::new(1.0, 1.5, 0.0).is_err());
        assert!(MeasurementChain::new(1.0, 0.0, 0.0).is_err());
        assert!(FeedbackSettings::new(-1.0, 0.0, 1.0, 1.0).is_err());
        assert!(FeedbackSettings::new(1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn cavity_derived_quantities() {
        let cav = CavityParams::new(hz_to_rad(440e6), hz_to_rad(470e6), hz_to_rad(360e6), 0.0, 775e-9)
            .unwrap();
        assert!((cav.kappa() - hz_to_rad(910e6)).abs() < 1.0);
        assert!((cav.eta_c() - 470.0 / 910.0).abs() < 1e-12);
        let c2 = CavityParams::from_linewidth(cav.kappa(), cav.eta_c(), cav.gamma_split, 775e-9).unwrap();
        assert!((c2.kappa_0 - cav.kappa_0).abs() < 1e-3);
    }

    #[test]
    fn works_in_single_precision() {
        let osc = crate::OscillatorParamsF32::new(crate::units::hz_to_rad(4.3e6_f32), crate::units::hz_to_rad(5.7_f32), 2.9e-15, 4.4).unwrap();
        assert!((osc.x_zp() / 26.0e-15 - 1.0).abs() < 0.05);
    }
}
