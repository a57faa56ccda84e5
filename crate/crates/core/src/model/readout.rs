//! Cavity readout: photon numbers, transmission, back-action and imprecision.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::params::{CavityParams, MeasurementChain, OscillatorParams};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::units::{BOLTZMANN, HBAR};

/// `κ/Ω_m` below which the bad-cavity expressions are flagged.
pub const BAD_CAVITY_RATIO: f64 = 10.0;

/// Mean thermal occupancy `½ coth(ħΩ_m / 2k_BT)`.
///
/// For `k_BT ≫ ħΩ_m` this approaches `k_BT/ħΩ_m`; at `T = 0` it is exactly ½.
pub fn thermal_occupancy<T: Real>(osc: &OscillatorParams<T>) -> T {
    let half = T::lit(0.5);
    if osc.temperature == T::zero() {
        return half;
    }
    let x = T::lit(HBAR) * osc.omega_m / (T::lit(2.0 * BOLTZMANN) * osc.temperature);
    half / x.tanh()
}

/// High-temperature limit `k_BT/ħΩ_m`.
pub fn thermal_occupancy_classical<T: Real>(osc: &OscillatorParams<T>) -> T {
    T::lit(BOLTZMANN) * osc.temperature / (T::lit(HBAR) * osc.omega_m)
}

/// Peak zero-point spectral densities, single-sided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroPointSpectra<T> {
    /// `4 x_zp² / Γ_m` (m²/Hz).
    pub position: T,
    /// `4 g₀² / Γ_m` ((rad/s)²/Hz).
    pub frequency: T,
}

pub fn zero_point_spectra<T: Real>(osc: &OscillatorParams<T>, g0: T) -> ZeroPointSpectra<T> {
    let four = T::lit(4.0);
    let x = osc.x_zp();
    ZeroPointSpectra {
        position: four * x * x / osc.gamma_m,
        frequency: four * g0 * g0 / osc.gamma_m,
    }
}

/// Intracavity photon numbers of the driven (`plus`) and back-scattered
/// (`minus`) modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonNumbers<T> {
    pub plus: T,
    pub minus: T,
}

fn require_resonant<T: Real>(cav: &CavityParams<T>) -> Result<()> {
    if cav.detuning != T::zero() {
        return Err(Error::DetuningNotSupported {
            detuning: cav.detuning.as_f64(),
        });
    }
    Ok(())
}

/// Steady-state photon numbers for resonant probing.
pub fn intracavity_photons<T: Real>(
    cav: &CavityParams<T>,
    chain: &MeasurementChain<T>,
) -> Result<PhotonNumbers<T>> {
    require_resonant(cav)?;
    let kappa = cav.kappa();
    let r2 = cav.split_ratio() * cav.split_ratio();
    let flux = chain.input_power / (T::lit(HBAR) * cav.omega_c());
    let s = T::one() + r2;
    let plus = T::lit(4.0) * cav.eta_c() / kappa * flux / (s * s);
    Ok(PhotonNumbers {
        plus,
        minus: r2 * plus,
    })
}

/// Normalized forward transmission `P_out/P_in` at detuning `delta`.
pub fn transmission_at<T: Real>(cav: &CavityParams<T>, delta: T) -> T {
    let k = cav.kappa();
    let eta = cav.eta_c();
    let q = T::lit(0.25);
    let k2 = q * k * k;
    let g2 = q * cav.gamma_split * cav.gamma_split;
    let d2 = delta * delta;
    let num = (d2 + g2 + k2) - eta * (d2 + k2);
    let re = k2 + g2 - d2;
    let den = re * re + k * k * d2;
    T::one() - eta * k * k * num / den
}

/// Transmission over a detuning scan.
pub fn transmission<T: Real>(cav: &CavityParams<T>, detunings: &[T]) -> Vec<T> {
    detunings.iter().map(|&d| transmission_at(cav, d)).collect()
}

/// Complex forward output amplitude `t = s_out/s_in` at detuning `delta`.
pub fn transmission_amplitude<T: Real>(cav: &CavityParams<T>, delta: T) -> Complex<T> {
    let half = T::lit(0.5);
    let a = Complex::new(half * cav.kappa(), -delta);
    let g = Complex::new(T::zero(), half * cav.gamma_split);
    let one = Complex::new(T::one(), T::zero());
    // a_+ = sqrt(κ_ex) s_in · a / (a² + (γ/2)²)
    let resp = a / (a * a - g * g);
    one - resp * cav.kappa_ex
}

/// Optically induced spring shift and damping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicBackaction<T> {
    /// `ΔΩ_ba` (rad/s).
    pub spring_shift: T,
    /// `Γ_ba` (rad/s).
    pub damping: T,
    /// Set when `κ < 10 Ω_m`: the adiabatic expressions are then unreliable.
    pub bad_cavity_violated: bool,
}

/// `2g₀²/κ · 4η_c P/(κħω_c)`; the prefactor shared by spring and damping.
fn dba_prefactor<T: Real>(cav: &CavityParams<T>, g0: T, power: T) -> T {
    let k = cav.kappa();
    let flux = power / (T::lit(HBAR) * cav.omega_c());
    T::lit(2.0) * g0 * g0 / k * (T::lit(4.0) * cav.eta_c() * flux / k)
}

fn spring_sum<T: Real>(cav: &CavityParams<T>, delta: T) -> T {
    let hk = T::lit(0.5) * cav.kappa();
    let hg = T::lit(0.5) * cav.gamma_split;
    let mut s = T::zero();
    for j in [T::one(), -T::one()] {
        let d = delta + j * hg;
        let den = d * d + hk * hk;
        s = s + hk * hk * hk * d / (den * den);
    }
    s
}

fn damping_sum<T: Real>(cav: &CavityParams<T>, delta: T) -> T {
    let k = cav.kappa();
    let hk = T::lit(0.5) * k;
    let hg = T::lit(0.5) * cav.gamma_split;
    let k5 = k * k * k * k * k;
    let mut s = T::zero();
    for j in [T::one(), -T::one()] {
        let d = delta + j * hg;
        let den = d * d + hk * hk;
        s = s + k5 * (delta - j * hg) / (den * den * den);
    }
    s
}

/// Spring shift per unit `g₀²` at detuning `delta` and input power `power`.
///
/// The shift is linear in `g₀²` and in power, so calibrations fit against this.
pub fn spring_shift_per_g0_squared<T: Real>(cav: &CavityParams<T>, power: T, delta: T) -> T {
    dba_prefactor(cav, T::one(), power) * spring_sum(cav, delta)
}

/// Dynamic back-action at the cavity's configured detuning.
pub fn dynamic_backaction<T: Real>(
    cav: &CavityParams<T>,
    chain: &MeasurementChain<T>,
    osc: &OscillatorParams<T>,
) -> DynamicBackaction<T> {
    let a = dba_prefactor(cav, chain.g0, chain.input_power);
    let k = cav.kappa();
    DynamicBackaction {
        spring_shift: a * spring_sum(cav, cav.detuning),
        damping: osc.omega_m / (T::lit(4.0) * k) * a * damping_sum(cav, cav.detuning),
        bad_cavity_violated: k < T::lit(BAD_CAVITY_RATIO) * osc.omega_m,
    }
}

/// Overall readout efficiency `η_c η_d ((1-γ²/κ²)/(1+γ²/κ²))²`, or the
/// chain's explicit ideality when one is set.
pub fn readout_ideality<T: Real>(cav: &CavityParams<T>, chain: &MeasurementChain<T>) -> Result<T> {
    if let Some(xi) = chain.ideality {
        return Ok(xi);
    }
    component_ideality(cav, chain.eta_d)
}

/// `η_c η_d ((1-r²)/(1+r²))²` with `r = γ/κ`.
pub fn component_ideality<T: Real>(cav: &CavityParams<T>, eta_d: T) -> Result<T> {
    let r2 = cav.split_ratio() * cav.split_ratio();
    if (T::one() - r2).abs() <= T::tol_floor() {
        return Err(Error::ReadoutSingular);
    }
    let f = (T::one() - r2) / (T::one() + r2);
    Ok(cav.eta_c() * eta_d * f * f)
}

/// Back-action occupancies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackactionOccupancy<T> {
    /// Quantum back-action `C₀ n₊`.
    pub quantum: T,
    /// Extraneous back-action `C₀ᵉˣ n₊`.
    pub extraneous: T,
}

pub fn backaction_occupancy<T: Real>(
    chain: &MeasurementChain<T>,
    cav: &CavityParams<T>,
    osc: &OscillatorParams<T>,
) -> Result<BackactionOccupancy<T>> {
    let n = intracavity_photons(cav, chain)?.plus;
    Ok(BackactionOccupancy {
        quantum: chain.cooperativity(cav, osc) * n,
        extraneous: chain.c0_extraneous * n,
    })
}

/// Imprecision occupancies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprecisionOccupancy<T> {
    /// Shot-noise imprecision including the mode-splitting penalty.
    pub shot: T,
    /// `shot + n_impᵉˣ`.
    pub total: T,
}

/// `n_imp = (16 ξ C₀ n₊)⁻¹` plus the extraneous floor. Infinite when no light
/// reaches the cavity.
pub fn imprecision_occupancy<T: Real>(
    chain: &MeasurementChain<T>,
    cav: &CavityParams<T>,
    osc: &OscillatorParams<T>,
) -> Result<ImprecisionOccupancy<T>> {
    let xi = readout_ideality(cav, chain)?;
    let n = intracavity_photons(cav, chain)?.plus;
    let c0 = chain.cooperativity(cav, osc);
    let shot = T::one() / (T::lit(16.0) * xi * c0 * n);
    Ok(ImprecisionOccupancy {
        shot,
        total: shot + chain.n_imp_extraneous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{CavityParams, MeasurementChain, OscillatorParams};

    fn hz_to_rad(f: f64) -> f64 {
        crate::units::hz_to_rad(f)
    }

    fn reference_cavity() -> CavityParams {
        CavityParams::from_linewidth(hz_to_rad(0.91e9), 0.52, hz_to_rad(360e6), 775e-9).unwrap()
    }

    #[test]
    fn thermal_occupancy_examples() {
        let osc = OscillatorParams::new(hz_to_rad(4.3e6), 1.0, 1e-15, 4.4).unwrap();
        let n = thermal_occupancy(&osc);
        assert!((n / 2.1e4 - 1.0).abs() < 0.02, "n_th = {n}");
        assert!((n - thermal_occupancy_classical(&osc)).abs() < 1e-3);
        let osc = OscillatorParams::new(hz_to_rad(4.32e6), 1.0, 1e-15, 3.3).unwrap();
        assert!((thermal_occupancy(&osc) / 1.6e4 - 1.0).abs() < 0.02);
        let osc = OscillatorParams::new(123.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(thermal_occupancy(&osc), 0.5);
    }

    #[test]
    fn zero_point_examples() {
        let osc = OscillatorParams::new(hz_to_rad(4.3e6), hz_to_rad(5.7), 1e-15, 4.4)
            .unwrap()
            .with_x_zp(29e-15)
            .unwrap();
        let zp = zero_point_spectra(&osc, hz_to_rad(20e3));
        let target = hz_to_rad(6.7e3_f64).powi(2);
        assert!((zp.frequency / target - 1.0).abs() < 0.01);
        assert!((zp.position.sqrt() / 0.95e-14 - 1.0).abs() < 0.03);
        let mut osc2 = osc;
        osc2.gamma_m *= 2.0;
        let zp2 = zero_point_spectra(&osc2, hz_to_rad(20e3));
        assert!((zp2.frequency * 2.0 - zp.frequency).abs() / zp.frequency < 1e-14);
        assert!((zp2.position * 2.0 - zp.position).abs() / zp.position < 1e-14);
    }

    #[test]
    fn photon_numbers() {
        let cav = reference_cavity();
        let chain = MeasurementChain::new(1.0, 1.0, 1e-6).unwrap();
        let n = intracavity_photons(&cav, &chain).unwrap();
        assert!((n.plus / 1.06e3 - 1.0).abs() < 0.01, "n+ = {}", n.plus);
        let r = 360.0 / 910.0;
        assert!((n.minus / n.plus - r * r).abs() < 1e-12);

        let cav0 = CavityParams { gamma_split: 0.0, ..cav };
        assert_eq!(intracavity_photons(&cav0, &chain).unwrap().minus, 0.0);
        let dark = chain.with_power(0.0);
        let n = intracavity_photons(&cav, &dark).unwrap();
        assert_eq!((n.plus, n.minus), (0.0, 0.0));
        assert!(matches!(
            intracavity_photons(&cav.with_detuning(1.0), &chain),
            Err(Error::DetuningNotSupported { .. })
        ));
    }

    #[test]
    fn transmission_limits() {
        let cav = CavityParams::new(1.0, 1.0, 0.0, 0.0, 775e-9).unwrap();
        assert!(transmission_at(&cav, 0.0).abs() < 1e-15);
        let uncoupled = CavityParams::new(1.0, 0.0, 0.3, 0.0, 775e-9).unwrap();
        for d in [-3.0, -0.2, 0.0, 0.7, 10.0] {
            assert_eq!(transmission_at(&uncoupled, d), 1.0);
        }
    }

    #[test]
    fn transmission_matches_amplitude() {
        let cav = CavityParams::new(1.0, 0.8, 0.6, 0.0, 775e-9).unwrap();
        for d in [-2.0, -0.5, 0.0, 0.3, 1.7] {
            let t = transmission_amplitude(&cav, d).norm_sqr();
            assert!((t - transmission_at(&cav, d)).abs() < 1e-12);
        }
    }

    #[test]
    fn dynamic_backaction_vanishes_on_resonance_and_in_dark() {
        let cav = reference_cavity();
        let osc = OscillatorParams::new(hz_to_rad(4.3e6), hz_to_rad(5.7), 1e-15, 4.4).unwrap();
        let chain = MeasurementChain::new(hz_to_rad(19e3), 1.0, 1e-6).unwrap();
        let dba = dynamic_backaction(&cav, &chain, &osc);
        assert!(dba.spring_shift.abs() < 1e-12 && dba.damping.abs() < 1e-12);
        assert!(!dba.bad_cavity_violated);
        let dark = dynamic_backaction(&cav.with_detuning(-cav.kappa() / 3.0), &chain.with_power(0.0), &osc);
        assert_eq!((dark.spring_shift, dark.damping), (0.0, 0.0));
    }

    #[test]
    fn imprecision_examples() {
        // Effective parameterization with ξ, C₀ and n_c given directly.
        let n_imp: f64 = 1.0 / (16.0 * 0.23 * 0.31 * 3.25e4);
        assert!((n_imp / 2.7e-5 - 1.0).abs() < 0.05);

        // Quantum-limited readout at C₀ n₊ = 1/4 gives the SQL value.
        let osc = OscillatorParams::new(1e7, 10.0, 1e-15, 0.0).unwrap();
        let cav = CavityParams::new(1e9, 1e9, 0.0, 0.0, 775e-9).unwrap();
        // Unit ideality stands in for the overcoupled limit η_c → 1.
        let chain = MeasurementChain::new(1e3, 1.0, 1e-9).unwrap().with_ideality(1.0).unwrap();
        let c0 = chain.cooperativity(&cav, &osc);
        let n = intracavity_photons(&cav, &chain).unwrap().plus;
        let scale = 0.25 / (c0 * n);
        let chain = chain.with_power(1e-9 * scale);
        let imp = imprecision_occupancy(&chain, &cav, &osc).unwrap();
        assert!((imp.shot - 0.25).abs() < 1e-12);

        let bright = chain.with_power(1e3).with_extraneous(0.0, 0.70e-5).unwrap();
        let imp = imprecision_occupancy(&bright, &cav, &osc).unwrap();
        assert!((imp.total / 0.70e-5 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn splitting_equal_to_linewidth_is_singular() {
        let cav = CavityParams::new(0.5, 0.5, 1.0, 0.0, 775e-9).unwrap();
        let osc = OscillatorParams::new(1.0, 1e-3, 1.0, 0.0).unwrap();
        let chain = MeasurementChain::new(1e-3, 1.0, 1e-6).unwrap();
        assert_eq!(imprecision_occupancy(&chain, &cav, &osc), Err(Error::ReadoutSingular));
    }
}
