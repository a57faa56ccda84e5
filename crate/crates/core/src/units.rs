//! Physical constants and the Hz <-> rad/s boundary conversions.
//!
//! Everything inside the crate is angular (rad/s). Configuration and file
//! formats speak ordinary frequency; convert exactly once at the edge.

use crate::scalar::Real;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `2π f`.
#[inline]
pub fn hz_to_rad<T: Real>(f_hz: T) -> T {
    f_hz * T::TAU()
}

/// `ω / 2π`.
#[inline]
pub fn rad_to_hz<T: Real>(omega: T) -> T {
    omega / T::TAU()
}

/// Angular optical carrier frequency for a vacuum wavelength.
#[inline]
pub fn optical_angular_frequency<T: Real>(wavelength: T) -> T {
    T::TAU() * T::lit(SPEED_OF_LIGHT) / wavelength
}

/// Photon energy `ħω_c` (J) at the given vacuum wavelength.
#[inline]
pub fn photon_energy<T: Real>(wavelength: T) -> T {
    T::lit(PLANCK) * T::lit(SPEED_OF_LIGHT) / wavelength
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_enough() {
        let f = 4.32e6_f64;
        assert!((rad_to_hz(hz_to_rad(f)) - f).abs() < 1e-6);
        let g = 5.7_f32;
        assert!((rad_to_hz(hz_to_rad(g)) - g).abs() < 1e-5);
    }

    #[test]
    fn photon_energy_matches_hbar_omega() {
        let lambda = 775e-9;
        let e1 = photon_energy(lambda);
        let e2 = HBAR * optical_angular_frequency(lambda);
        assert!((e1 - e2).abs() / e1 < 1e-9);
    }
}
