//! Coupling rate from the optical spring measured at red detuning.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{spring_shift_per_g0_squared, transmission_at, CavityParams};

/// Bisection tolerance in units of `κ`.
pub const DETUNING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpringCalibration {
    /// Coupling rate (rad/s).
    pub g0: f64,
    pub sigma: f64,
    /// Detuning inferred for each datum (rad/s, negative).
    pub detunings: Vec<f64>,
    /// Model shift per `g₀²` for each datum; zero-weight points have 0.
    pub sensitivities: Vec<f64>,
}

/// Red-side branch `(−∞, Δ_min]` on which transmission rises monotonically
/// toward 1 as the detuning grows more negative.
struct RedBranch {
    delta_min: f64,
    t_min: f64,
    /// Transmission at zero detuning; values in `(t_min, t_zero)` also have
    /// a solution on the inner branch `(Δ_min, 0)`.
    t_zero: f64,
}

fn red_branch(cav: &CavityParams<f64>) -> RedBranch {
    let t = |d: f64| transmission_at(cav, d);
    let k = cav.kappa();
    let span = 2.0 * k + cav.gamma_split;
    let n = 2000;
    let (mut best, mut tb) = (0.0, t(0.0));
    for i in 1..=n {
        let d = -span * i as f64 / n as f64;
        let v = t(d);
        if v < tb {
            best = d;
            tb = v;
        }
    }
    // Golden-section refinement around the coarse minimum.
    let step = span / n as f64;
    let (mut a, mut b) = ((best - step).max(-span), (best + step).min(0.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if t(c) < t(d) {
            b = d;
        } else {
            a = c;
        }
        if b - a < 1e-12 * k {
            break;
        }
    }
    let dm = 0.5 * (a + b);
    RedBranch {
        delta_min: dm,
        t_min: t(dm),
        t_zero: t(0.0),
    }
}

/// Solves `T(Δ) = value` for `Δ ≤ Δ_min` by bisection.
fn invert(cav: &CavityParams<f64>, br: &RedBranch, value: f64) -> Result<f64> {
    let k = cav.kappa();
    if !(value >= br.t_min && value < 1.0) {
        return Err(Error::TransmissionOutOfRange {
            value,
            min: br.t_min,
            max: 1.0,
        });
    }
    if value < br.t_zero && br.delta_min < -DETUNING_TOLERANCE * k {
        return Err(Error::AmbiguousBranch);
    }
    let mut hi = br.delta_min;
    let mut lo = br.delta_min - k;
    while transmission_at(cav, lo) < value {
        lo -= 2.0 * (br.delta_min - lo);
        if lo < -1e9 * k {
            return Err(Error::TransmissionOutOfRange {
                value,
                min: br.t_min,
                max: 1.0,
            });
        }
    }
    while hi - lo > DETUNING_TOLERANCE * k {
        let mid = 0.5 * (lo + hi);
        if transmission_at(cav, mid) < value {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Least-squares `g₀` from `(transmission, spring shift)` pairs.
///
/// Each transmission is mapped to a red detuning through the cavity model,
/// then the shifts are fit as `g₀² · ∂ΔΩ/∂(g₀²)`. Points on resonance carry
/// no sensitivity and drop out of the fit.
pub fn g0_from_spring(measurements: &[(f64, f64)], cav: &CavityParams<f64>, input_power: f64) -> Result<SpringCalibration> {
    cav.validate()?;
    if !(input_power > 0.0) {
        return Err(invalid("input_power", "must be positive"));
    }
    let mut distinct: Vec<f64> = measurements.iter().map(|m| m.0).collect();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if distinct.len() < 5 {
        return Err(Error::InsufficientData {
            needed: 5,
            got: distinct.len(),
        });
    }
    let br = red_branch(cav);
    let k = cav.kappa();
    let mut detunings = Vec::with_capacity(measurements.len());
    let mut sens = Vec::with_capacity(measurements.len());
    for &(t, _) in measurements {
        // Resonant data (at the transmission minimum when unsplit) pin Δ = 0.
        let d = if (t - br.t_zero).abs() <= 1e-12 && br.delta_min > -DETUNING_TOLERANCE * k {
            0.0
        } else {
            invert(cav, &br, t)?
        };
        detunings.push(d);
        sens.push(spring_shift_per_g0_squared(cav, input_power, d));
    }
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&s, m) in sens.iter().zip(measurements) {
        sxx += s * s;
        sxy += s * m.1;
    }
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("no datum is sensitive to the coupling rate".into()));
    }
    let g2 = sxy / sxx;
    if !(g2 > 0.0) {
        return Err(Error::Degenerate("spring shifts have the wrong sign for red detuning".into()));
    }
    let used = sens.iter().filter(|s| **s != 0.0).count();
    let rss: f64 = sens.iter().zip(measurements).map(|(&s, m)| (m.1 - g2 * s).powi(2)).sum();
    let var_g2 = if used > 1 { rss / (used - 1) as f64 / sxx } else { 0.0 };
    let g0 = g2.sqrt();
    Ok(SpringCalibration {
        g0,
        sigma: var_g2.sqrt() / (2.0 * g0),
        detunings,
        sensitivities: sens,
    })
}
