//! Intrinsic loss rate and mode splitting from resonant transmission
//! measured at several coupling rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingFit {
    /// Intrinsic loss rate `κ₀` (rad/s).
    pub kappa_0: f64,
    /// Mode splitting `γ` (rad/s); zero when the fitted `γ²` is negative.
    pub gamma_split: f64,
    /// Fitted `γ²`, which may dip below zero within noise.
    pub gamma_squared: f64,
    pub sigma_kappa_0: f64,
    pub sigma_gamma_squared: f64,
    pub iterations: usize,
}

impl SplittingFit {
    /// Uncertainty of `γ` by the delta method, or `sqrt(σ(γ²))` near zero.
    pub fn sigma_gamma(&self) -> f64 {
        if self.gamma_split > 0.0 && self.gamma_squared > self.sigma_gamma_squared {
            self.sigma_gamma_squared / (2.0 * self.gamma_split)
        } else {
            self.sigma_gamma_squared.sqrt()
        }
    }
}

/// Transmission at zero detuning for total rate `kappa`, intrinsic rate
/// `kappa_0` and squared splitting `s = γ²`.
pub fn resonant_transmission(kappa: f64, kappa_0: f64, s: f64) -> f64 {
    let eta = (kappa - kappa_0) / kappa;
    let k2 = kappa * kappa;
    let den = k2 + s;
    1.0 - 4.0 * eta * k2 * ((s + k2) - eta * k2) / (den * den)
}

/// Partial derivatives with respect to `(κ₀, s)`.
fn gradient(kappa: f64, kappa_0: f64, s: f64) -> [f64; 2] {
    let eta = (kappa - kappa_0) / kappa;
    let k2 = kappa * kappa;
    let den = k2 + s;
    [
        4.0 * kappa * ((s + k2) - 2.0 * eta * k2) / (den * den),
        4.0 * k2 * eta / (den * den) - 8.0 * eta * eta * k2 * k2 / (den * den * den),
    ]
}

fn cost(points: &[(f64, f64)], k0: f64, s: f64) -> f64 {
    points.iter().map(|&(k, t)| (t - resonant_transmission(k, k0, s)).powi(2)).sum()
}

/// Two-parameter least-squares fit of `(κ, T(Δ = 0))` pairs.
pub fn fit_mode_splitting(points: &[(f64, f64)]) -> Result<SplittingFit> {
    const N_PARAMS: usize = 2;
    if points.len() < N_PARAMS + 2 {
        return Err(Error::InsufficientData {
            needed: N_PARAMS + 2,
            got: points.len(),
        });
    }
    if let Some(i) = points.iter().position(|p| !(p.0 > 0.0 && p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::NonFinite { index: i });
    }
    let kmin = points.iter().fold(f64::INFINITY, |a, p| a.min(p.0));
    let kmax = points.iter().fold(0.0f64, |a, p| a.max(p.0));
    if kmax - kmin <= 1e-9 * kmax {
        return Err(Error::Degenerate("all points share one decay rate".into()));
    }
    if points.iter().all(|p| (p.1 - 1.0).abs() < 1e-12) {
        return Err(Error::Degenerate("transmission is identically 1 (no external coupling)".into()));
    }

    // Work in units of the largest decay rate.
    let sc = kmax;
    let pts: Vec<(f64, f64)> = points.iter().map(|&(k, t)| (k / sc, t)).collect();
    let (mut k0, mut s) = (0.5 * kmin / sc, 0.0);
    let mut best = cost(&pts, k0, s);
    for i in 1..=40 {
        for j in 0..=40 {
            let a = kmin / sc * i as f64 / 40.0;
            let b = 4.0 * (j as f64 / 40.0).powi(2);
            let c = cost(&pts, a, b);
            if c < best {
                (k0, s, best) = (a, b, c);
            }
        }
    }

    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 200 {
        iterations += 1;
        let (mut a, mut g) = ([[0.0; 2]; 2], [0.0; 2]);
        for &(k, t) in &pts {
            let j = gradient(k, k0, s);
            let r = t - resonant_transmission(k, k0, s);
            for p in 0..2 {
                g[p] += j[p] * r;
                for q in 0..2 {
                    a[p][q] += j[p] * j[q];
                }
            }
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let m = [
                [a[0][0] * (1.0 + lambda), a[0][1]],
                [a[1][0], a[1][1] * (1.0 + lambda)],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det.abs() > 0.0 {
                let d0 = (g[0] * m[1][1] - g[1] * m[0][1]) / det;
                let d1 = (m[0][0] * g[1] - m[1][0] * g[0]) / det;
                let c = cost(&pts, k0 + d0, s + d1);
                if c <= best {
                    let small = d0.abs() <= 1e-12 * k0.abs().max(1e-6) && d1.abs() <= 1e-12 * s.abs().max(1e-6);
                    k0 += d0;
                    s += d1;
                    best = c;
                    lambda = (lambda * 0.1).max(1e-15);
                    accepted = true;
                    converged = small;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            residual: best,
            last: vec![k0 * sc, s * sc * sc],
        });
    }

    let mut a = [[0.0; 2]; 2];
    for &(k, _) in &pts {
        let j = gradient(k, k0, s);
        for p in 0..2 {
            for q in 0..2 {
                a[p][q] += j[p] * j[q];
            }
        }
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !(det.abs() > 1e-30 * (a[0][0] * a[1][1]).abs()) || det == 0.0 {
        return Err(Error::Degenerate("splitting and intrinsic loss are not separately constrained".into()));
    }
    let var = best / (pts.len() - N_PARAMS) as f64;
    let c00 = var * a[1][1] / det;
    let c11 = var * a[0][0] / det;
    Ok(SplittingFit {
        kappa_0: k0 * sc,
        gamma_split: s.max(0.0).sqrt() * sc,
        gamma_squared: s * sc * sc,
        sigma_kappa_0: c00.max(0.0).sqrt() * sc,
        sigma_gamma_squared: c11.max(0.0).sqrt() * sc * sc,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{transmission_at, CavityParams};
    use crate::units::hz_to_rad;

    #[test]
    fn closed_form_matches_cavity_model() {
        let (k0, g) = (hz_to_rad(440e6), hz_to_rad(360e6));
        for ratio in [1.1, 2.0, 3.5] {
            let cav = CavityParams::new(k0, (ratio - 1.0) * k0, g, 0.0, 780e-9).unwrap();
            let a = resonant_transmission(cav.kappa(), k0, g * g);
            assert!((a - transmission_at(&cav, 0.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn noise_free_round_trip() {
        let (k0, g) = (hz_to_rad(440e6), hz_to_rad(360e6));
        let pts: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let k = k0 * (1.2 + 0.4 * i as f64);
                (k, resonant_transmission(k, k0, g * g))
            })
            .collect();
        let fit = fit_mode_splitting(&pts).unwrap();
        assert!((fit.kappa_0 / k0 - 1.0).abs() < 1e-6);
        assert!((fit.gamma_split / g - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_uncoupled_and_short_inputs() {
        let k0 = 1.0;
        let pts = vec![(k0, 1.0); 6];
        assert!(matches!(fit_mode_splitting(&pts), Err(Error::Degenerate(_))));
        assert!(matches!(
            fit_mode_splitting(&pts[..3]),
            Err(Error::InsufficientData { needed: 4, got: 3 })
        ));
    }
}
