//! JSON fit reports with an input fingerprint.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::fit::{FitOptions, SpectrumFit};
use super::psd::Psd;
use crate::scalar::Real;

/// A fit together with what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub fit: SpectrumFit<f64>,
    /// Parameter standard deviations in covariance order.
    pub sigma: [f64; 4],
    /// Fit window (Hz).
    pub window: (f64, f64),
    pub settings: FitOptions<f64>,
    pub n_averages: usize,
    /// SHA-256 over the little-endian `f64` frequency and value columns.
    pub input_sha256: String,
}

pub fn psd_sha256<T: Real>(psd: &Psd<T>) -> String {
    let mut h = Sha256::new();
    for col in [&psd.freq, &psd.value] {
        for v in col.iter() {
            h.update(v.as_f64().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

impl FitReport {
    pub fn new<T: Real>(psd: &Psd<T>, window: (T, T), settings: &FitOptions<T>, fit: &SpectrumFit<T>) -> Self {
        let mut cov = [[0.0; 4]; 4];
        for (i, row) in fit.covariance.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                cov[i][k] = v.as_f64();
            }
        }
        let fit64 = SpectrumFit {
            omega_center: fit.omega_center.as_f64(),
            gamma_eff: fit.gamma_eff.as_f64(),
            peak: fit.peak.as_f64(),
            floor: fit.floor.as_f64(),
            residual_rms: fit.residual_rms.as_f64(),
            covariance: cov,
            unit: fit.unit,
            n_points: fit.n_points,
            iterations: fit.iterations,
            runs_z: fit.runs_z.as_f64(),
            structured_residuals: fit.structured_residuals,
        };
        let sigma = [0, 1, 2, 3].map(|i| fit64.sigma(i));
        Self {
            fit: fit64,
            sigma,
            window: (window.0.as_f64(), window.1.as_f64()),
            settings: FitOptions {
                weighting: settings.weighting,
                max_iterations: settings.max_iterations,
                tolerance: settings.tolerance.as_f64(),
            },
            n_averages: psd.n_averages,
            input_sha256: psd_sha256(psd),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{fit_lorentzian, PsdUnit};

    #[test]
    fn report_round_trips_through_json() {
        let tau = std::f64::consts::TAU;
        let truth = SpectrumFit::analytic(tau * 50.0, tau * 1.0, 2.0, 0.1, PsdUnit::Arbitrary);
        let freq: Vec<f64> = (0..201).map(|i| 40.0 + 0.1 * i as f64).collect();
        let value = freq.iter().map(|&f| truth.model(tau * f)).collect();
        let psd = Psd::new(freq, value, 1, PsdUnit::Arbitrary).unwrap();
        let fit = fit_lorentzian(&psd, (40.0, 60.0)).unwrap();
        let rep = FitReport::new(&psd, (40.0, 60.0), &FitOptions::default(), &fit);
        assert_eq!(rep.input_sha256.len(), 64);
        let back: FitReport = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(back, rep);
    }
}
