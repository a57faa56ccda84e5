//! Coupling-rate calibration against a phase-modulation reference tone.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{fit_lorentzian, integrate_band, Psd};

/// Bins on either side of the tone maximum that are integrated.
pub const TONE_HALF_WIDTH_BINS: usize = 3;
/// The tone maximum must exceed the window's median floor by this factor.
pub const TONE_DETECTION_RATIO: f64 = 10.0;

/// Phase-modulation reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTone {
    /// Modulation depth (rad).
    pub beta: f64,
    /// Modulation frequency (rad/s).
    pub omega_cal: f64,
    /// Detector transfer ratio `|G(Ω_cal) / G(Ω_m)|`.
    pub transfer_ratio: f64,
}

impl CalibrationTone {
    pub fn new(beta: f64, omega_cal: f64, transfer_ratio: f64) -> Result<Self> {
        let t = Self {
            beta,
            omega_cal,
            transfer_ratio,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", "must be positive"));
        }
        if !(self.omega_cal > 0.0 && self.omega_cal.is_finite()) {
            return Err(invalid("omega_cal", "must be positive"));
        }
        if !(self.transfer_ratio > 0.0 && self.transfer_ratio <= 1.5) {
            return Err(invalid("transfer_ratio", "must lie in (0, 1.5]"));
        }
        Ok(())
    }

    /// Mean-square signal of the tone for a detector gain `|G(Ω_cal)|`.
    pub fn tone_power(&self, gain_at_cal: f64) -> f64 {
        0.5 * (self.omega_cal * self.beta * gain_at_cal).powi(2)
    }
}

/// `g₀` with the areas it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneCalibration {
    /// Coupling rate (rad/s).
    pub g0: f64,
    pub sigma: f64,
    /// Floor-subtracted mechanical peak area.
    pub peak_area: f64,
    /// Floor-subtracted tone area.
    pub tone_area: f64,
    pub peak_floor: f64,
    pub tone_floor: f64,
}

/// Default peak window `Ω_m ± 5 Γ_eff`, converted to Hz.
pub fn default_peak_window(omega_m: f64, gamma_eff: f64) -> (f64, f64) {
    let tau = std::f64::consts::TAU;
    ((omega_m - 5.0 * gamma_eff) / tau, (omega_m + 5.0 * gamma_eff) / tau)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mechanical area: floor-subtracted trapezoid over the window plus the
/// Lorentzian wings beyond it, both from a line fit inside the window.
fn peak_area(psd: &Psd<f64>, window: (f64, f64)) -> Result<(f64, f64, f64)> {
    let fit = fit_lorentzian(psd, window)?;
    let r = psd.window_indices(window.0, window.1);
    let (lo, hi) = (psd.freq[r.start], psd.freq[r.end - 1]);
    let inside = integrate_band(psd, lo, hi) - fit.floor * (hi - lo);
    let tau = std::f64::consts::TAU;
    let h = 0.5 * fit.gamma_eff;
    let c = fit.omega_center;
    // ∫ P h²/((Ω−c)²+h²) dΩ/2π beyond each edge.
    let wing = |edge: f64| fit.peak * h * (std::f64::consts::FRAC_PI_2 - ((edge - c).abs() / h).atan()) / tau;
    let area = inside + wing(tau * lo) + wing(tau * hi);
    // Relative uncertainty of the area ∝ peak Γ.
    let rel = ((fit.sigma(2) / fit.peak).powi(2) + (fit.sigma(1) / fit.gamma_eff).powi(2)).sqrt();
    Ok((area, fit.floor, rel))
}

fn tone_area(psd: &Psd<f64>, window: (f64, f64)) -> Result<(f64, f64)> {
    let r = psd.window_indices(window.0, window.1);
    if r.is_empty() {
        return Err(Error::EmptyWindow {
            lo: window.0,
            hi: window.1,
        });
    }
    let vals = &psd.value[r.clone()];
    let floor = median(vals.to_vec());
    let (imax, vmax) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    if !(vmax > TONE_DETECTION_RATIO * floor) || vmax <= 0.0 {
        return Err(Error::ToneNotFound);
    }
    let k = r.start + imax;
    let a = k.saturating_sub(TONE_HALF_WIDTH_BINS);
    let b = (k + TONE_HALF_WIDTH_BINS).min(psd.len() - 1);
    let (lo, hi) = (psd.freq[a], psd.freq[b]);
    let area = integrate_band(psd, lo, hi) - floor * (hi - lo);
    if !(area > 0.0) {
        return Err(Error::ToneNotFound);
    }
    Ok((area, floor))
}

/// `g₀ = (β Ω_cal / 2) sqrt(⟨V²⟩_m / (n_th ⟨V²⟩_cal)) |G(Ω_cal)/G(Ω_m)|`
/// from the areas of the thermal peak and of the reference tone. Windows are
/// in Hz and must not overlap.
pub fn calibrate_g0(
    psd: &Psd<f64>,
    tone: &CalibrationTone,
    n_th: f64,
    peak_window: (f64, f64),
    tone_window: (f64, f64),
) -> Result<ToneCalibration> {
    tone.validate()?;
    if !(n_th > 0.0) {
        return Err(invalid("n_th", "must be positive"));
    }
    for w in [peak_window, tone_window] {
        if !(w.1 > w.0) {
            return Err(invalid("window", "upper edge must exceed lower edge"));
        }
    }
    if peak_window.0 <= tone_window.1 && tone_window.0 <= peak_window.1 {
        return Err(Error::OverlappingWindows);
    }
    let (m_area, m_floor, m_rel) = peak_area(psd, peak_window)?;
    let (c_area, c_floor) = tone_area(psd, tone_window)?;
    if !(m_area > 0.0) {
        return Err(Error::PeakNotResolvable);
    }
    let g0 = 0.5 * tone.beta * tone.omega_cal * (m_area / (n_th * c_area)).sqrt() * tone.transfer_ratio;
    // Periodogram bins scatter by 1/sqrt(n_averages); the tone area spans
    // about 2·TONE_HALF_WIDTH_BINS + 1 of them.
    let c_rel = 1.0 / ((psd.n_averages * (2 * TONE_HALF_WIDTH_BINS + 1)) as f64).sqrt();
    let rel = 0.5 * (m_rel * m_rel + c_rel * c_rel).sqrt();
    Ok(ToneCalibration {
        g0,
        sigma: g0 * rel,
        peak_area: m_area,
        tone_area: c_area,
        peak_floor: m_floor,
        tone_floor: c_floor,
    })
}
