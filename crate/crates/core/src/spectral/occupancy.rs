//! Occupancies inferred from fitted spectral lines.

use serde::{Deserialize, Serialize};

use super::fit::{SpectrumFit, TailFit};
use super::psd::PsdUnit;
use crate::error::{Error, Result};
use crate::model::OscillatorParams;
use crate::scalar::Real;

/// Twice the zero-point spectral density at resonance, `2 S_zp`, in the
/// given unit. `g0` is only used for frequency-noise spectra.
pub fn twice_zero_point<T: Real>(unit: PsdUnit, osc: &OscillatorParams<T>, g0: T) -> Result<T> {
    let base = T::lit(8.0) / osc.gamma_m;
    match unit {
        PsdUnit::NormalizedPosition => Ok(base),
        PsdUnit::Displacement => {
            let x = osc.x_zp();
            Ok(base * x * x)
        }
        PsdUnit::FrequencyNoise => {
            if !(g0 > T::zero()) {
                return Err(crate::error::invalid("g0", "must be positive for frequency-noise spectra"));
            }
            Ok(base * g0 * g0)
        }
        u => Err(Error::UnitMismatch(format!(
            "{u:?} spectra carry no zero-point reference; convert to a position or frequency-noise unit first"
        ))),
    }
}

/// Occupancies read off a Lorentzian fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyEstimate<T> {
    /// `peak (Γ_eff/Γ_m)² / 2S_zp`.
    pub n_tot: T,
    /// `floor / 2S_zp`.
    pub n_imp: T,
    /// Imprecision referred to the damped response, `n_imp Γ_eff/Γ_m`.
    pub n_imp_damped: T,
    pub sigma_n_tot: T,
    pub sigma_n_imp: T,
}

fn quad_form<T: Real>(g: &[T; 4], c: &[[T; 4]; 4]) -> T {
    let mut s = T::zero();
    for i in 0..4 {
        for k in 0..4 {
            s = s + g[i] * c[i][k] * g[k];
        }
    }
    s.max(T::zero())
}

pub fn extract_occupancies<T: Real>(fit: &SpectrumFit<T>, osc: &OscillatorParams<T>, g0: T) -> Result<OccupancyEstimate<T>> {
    let s2 = twice_zero_point(fit.unit, osc, g0)?;
    let ratio = fit.gamma_eff / osc.gamma_m;
    let n_tot = fit.peak * ratio * ratio / s2;
    let n_imp = fit.floor / s2;
    let two = T::lit(2.0);
    let g_tot = [
        T::zero(),
        two * fit.peak * fit.gamma_eff / (osc.gamma_m * osc.gamma_m * s2),
        ratio * ratio / s2,
        T::zero(),
    ];
    let g_imp = [T::zero(), T::zero(), T::zero(), T::one() / s2];
    Ok(OccupancyEstimate {
        n_tot,
        n_imp,
        n_imp_damped: n_imp * ratio,
        sigma_n_tot: quad_form(&g_tot, &fit.covariance).sqrt(),
        sigma_n_imp: quad_form(&g_imp, &fit.covariance).sqrt(),
    })
}

/// `n_tot` from the width-free tail coefficient `peak Γ²/4`.
pub fn occupancy_from_tail<T: Real>(tail: &TailFit<T>, osc: &OscillatorParams<T>, g0: T) -> Result<(T, T)> {
    let s2 = twice_zero_point(tail.unit, osc, g0)?;
    let k = T::lit(4.0) / (osc.gamma_m * osc.gamma_m * s2);
    Ok((tail.amplitude * k, tail.covariance[0][0].max(T::zero()).sqrt() * k))
}

/// Phonon number estimated from an in-loop line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhononEstimate<T> {
    pub n_m: T,
    pub sigma: T,
    /// The estimate is negative by more than its uncertainty, which only
    /// happens when the line is squashed into the imprecision floor.
    pub squashing_artifact: bool,
}

/// `n_m + ½ = (Γ_eff/Γ_m)(S(Ω_m) + S_imp) / 2S_zp` with `S(Ω_m) = peak +
/// floor` and `S_imp = floor`. Applied to an in-loop record this exceeds the
/// true occupancy by `2 n_imp`.
pub fn phonon_from_spectrum<T: Real>(fit: &SpectrumFit<T>, osc: &OscillatorParams<T>, g0: T) -> Result<PhononEstimate<T>> {
    let s2 = twice_zero_point(fit.unit, osc, g0)?;
    let two = T::lit(2.0);
    let k = T::one() / (osc.gamma_m * s2);
    let n_m = fit.gamma_eff * (fit.peak + two * fit.floor) * k - T::lit(0.5);
    let grad = [
        T::zero(),
        (fit.peak + two * fit.floor) * k,
        fit.gamma_eff * k,
        two * fit.gamma_eff * k,
    ];
    let sigma = quad_form(&grad, &fit.covariance).sqrt();
    Ok(PhononEstimate {
        n_m,
        sigma,
        squashing_artifact: n_m + sigma < T::zero(),
    })
}
