//! Damping rate from the energy decay of a free ringdown.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sde::Trajectory;

/// Filter settling allowance after the envelope maximum, in low-pass time
/// constants `1/(2π bandwidth)`.
pub const SETTLE_TIME_CONSTANTS: f64 = 25.0;
/// Auto-selected fit ranges stop once the energy is within this factor of
/// the late-time floor.
pub const FLOOR_MARGIN: f64 = 10.0;

/// Digital lock-in: quadrature mixing followed by four cascaded one-pole
/// low-pass stages. Returns the energy envelope `R²` with `R` the
/// demodulated amplitude.
pub fn lock_in_energy(samples: &[f64], dt: f64, demod_freq: f64, bandwidth: f64) -> Vec<f64> {
    let alpha = 1.0 - (-std::f64::consts::TAU * bandwidth * dt).exp();
    let mut i_state = [0.0; 4];
    let mut q_state = [0.0; 4];
    let (sd, cd) = (demod_freq * dt).sin_cos();
    let (mut s, mut c) = (0.0f64, 1.0f64);
    let mut out = Vec::with_capacity(samples.len());
    for (k, &x) in samples.iter().enumerate() {
        let mut xi = x * c;
        let mut xq = x * s;
        for st in 0..4 {
            i_state[st] += alpha * (xi - i_state[st]);
            q_state[st] += alpha * (xq - q_state[st]);
            xi = i_state[st];
            xq = q_state[st];
        }
        out.push(4.0 * (xi * xi + xq * xq));
        // Rotate the reference; renormalize periodically against drift.
        let (ns, nc) = (s * cd + c * sd, c * cd - s * sd);
        s = ns;
        c = nc;
        if k % 4096 == 4095 {
            let (ts, tc) = (demod_freq * dt * (k + 1) as f64).sin_cos();
            s = ts;
            c = tc;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RingdownOptions {
    /// Fit start (s); defaults to the envelope maximum plus the settle time.
    pub start: Option<f64>,
    /// Fit end (s); defaults to where the energy nears the late-time floor.
    pub end: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingdownFit {
    /// Energy damping rate `Γ_m` (rad/s).
    pub gamma_m: f64,
    pub sigma: f64,
    /// Late-time energy floor subtracted before the fit.
    pub floor: f64,
    pub start: f64,
    pub end: f64,
    pub n_points: usize,
    pub n_trajectories: usize,
}

impl RingdownFit {
    /// Energy e-folding time `1/Γ_m` (s).
    pub fn e_folding_time(&self) -> f64 {
        1.0 / self.gamma_m
    }
}

/// Ordinary least squares `ln E = a − Γ t`; returns `(Γ, σ_Γ)`.
fn log_linear(t: &[f64], e: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = e.iter().map(|v| v.ln()).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&ti, &ei) in t.iter().zip(e) {
        sxx += (ti - tm).powi(2);
        sxy += (ti - tm) * (ei.ln() - ym);
    }
    let slope = sxy / sxx;
    let rss: f64 = t
        .iter()
        .zip(e)
        .map(|(&ti, &ei)| (ei.ln() - ym - slope * (ti - tm)).powi(2))
        .sum();
    let se = (rss / (n - 2.0).max(1.0) / sxx).sqrt();
    (-slope, se)
}

pub fn fit_ringdown(trajs: &[Trajectory], demod_freq: f64, bandwidth: f64) -> Result<RingdownFit> {
    fit_ringdown_with(trajs, demod_freq, bandwidth, &RingdownOptions::default())
}

/// Demodulates the record `y` of each trajectory, averages the energy
/// envelopes over the ensemble and fits an exponential decay. `demod_freq`
/// is in rad/s, `bandwidth` in Hz; the bandwidth should sit well above
/// `Γ_m/2π` and well below `Ω_m/2π`.
pub fn fit_ringdown_with(trajs: &[Trajectory], demod_freq: f64, bandwidth: f64, opts: &RingdownOptions) -> Result<RingdownFit> {
    if trajs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(demod_freq > 0.0) {
        return Err(invalid("demod_freq", "must be positive"));
    }
    if !(bandwidth > 0.0) {
        return Err(invalid("bandwidth", "must be positive"));
    }
    let n = trajs.iter().map(|t| t.len()).min().unwrap_or(0);
    if n < 16 {
        return Err(Error::InsufficientData { needed: 16, got: n });
    }
    let dt = trajs[0].dt();
    if 2.0 * bandwidth * dt >= 1.0 {
        return Err(invalid("bandwidth", "must be below the Nyquist frequency"));
    }
    let t = &trajs[0].t[..n];
    let envelopes: Vec<Vec<f64>> = trajs
        .iter()
        .map(|tr| lock_in_energy(&tr.y[..n], dt, demod_freq, bandwidth))
        .collect();
    let mut energy = vec![0.0; n];
    for env in &envelopes {
        for (a, v) in energy.iter_mut().zip(env) {
            *a += v;
        }
    }
    let m = trajs.len() as f64;
    energy.iter_mut().for_each(|v| *v /= m);

    let settle = (SETTLE_TIME_CONSTANTS / (std::f64::consts::TAU * bandwidth) / dt).ceil() as usize;
    let i_start = match opts.start {
        Some(s) => t.partition_point(|&x| x < s),
        None => {
            let imax = energy
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a })
                .0;
            imax + settle
        }
    };
    if i_start + 8 >= n {
        return Err(Error::InsufficientData {
            needed: i_start + 8,
            got: n,
        });
    }
    // The late-time floor only counts once the record has decayed far
    // below its starting energy and levelled off; otherwise the tail still
    // carries signal.
    let tail = &energy[n - n / 10..];
    let half = tail.len() / 2;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len().max(1) as f64;
    let tail_mean = mean(tail);
    let flat = mean(&tail[half..]) > 0.8 * mean(&tail[..half]);
    let floor = if flat && tail_mean < 0.05 * energy[i_start] { tail_mean } else { 0.0 };
    let i_end = match opts.end {
        Some(e) => t.partition_point(|&x| x <= e),
        None => {
            if floor > 0.0 {
                let limit = (FLOOR_MARGIN + 1.0) * floor;
                i_start + energy[i_start..].iter().position(|&v| v < limit).unwrap_or(n - i_start)
            } else {
                n
            }
        }
    };
    if i_end <= i_start + 8 {
        return Err(Error::InsufficientData {
            needed: 8,
            got: i_end.saturating_sub(i_start),
        });
    }
    let e0 = energy[i_start] - floor;
    let e1 = energy[i_end - 1] - floor;
    if !(e0 > 0.0) || e1 >= e0 {
        return Err(Error::EnvelopeNotDecaying(format!(
            "energy goes from {e0:e} to {e1:e} over the fit range"
        )));
    }
    // A rise above the starting energy after the first fifth of the range
    // cannot be noise on a decaying envelope.
    let skip = (i_end - i_start) / 5;
    if energy[i_start + skip..i_end].iter().any(|&v| v - floor > e0) {
        return Err(Error::EnvelopeNotDecaying("energy rises above its starting value".into()));
    }
    let (ts, es): (Vec<f64>, Vec<f64>) = (i_start..i_end)
        .filter(|&i| energy[i] - floor > 0.0)
        .map(|i| (t[i], energy[i] - floor))
        .unzip();
    let (gamma, se) = log_linear(&ts, &es);
    if !(gamma > 0.0) {
        return Err(Error::EnvelopeNotDecaying(format!("fitted rate {gamma:e} is not positive")));
    }

    // Ensemble scatter is the honest error bar when available; envelope
    // samples are strongly correlated so the regression error is optimistic.
    let sigma = if trajs.len() >= 3 {
        let per: Vec<f64> = envelopes
            .iter()
            .filter_map(|env| {
                let (a, b): (Vec<f64>, Vec<f64>) = (i_start..i_end)
                    .filter(|&i| env[i] - floor > 0.0)
                    .map(|i| (t[i], env[i] - floor))
                    .unzip();
                (a.len() > 8).then(|| log_linear(&a, &b).0)
            })
            .collect();
        let k = per.len() as f64;
        if k >= 3.0 {
            let mean = per.iter().sum::<f64>() / k;
            (per.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
        } else {
            se
        }
    } else {
        se
    };

    Ok(RingdownFit {
        gamma_m: gamma,
        sigma,
        floor,
        start: t[i_start],
        end: t[i_end - 1],
        n_points: ts.len(),
        n_trajectories: trajs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(gamma: f64, omega: f64, dt: f64, n: usize) -> Trajectory {
        let mut tr = Trajectory::with_capacity(n);
        for i in 0..n {
            let t = i as f64 * dt;
            let u = 1e3 * (-0.5 * gamma * t).exp() * (omega * t + 0.3).cos();
            tr.t.push(t);
            tr.u.push(u);
            tr.y.push(u);
            tr.f_fb.push(0.0);
        }
        tr
    }

    #[test]
    fn pure_exponential_is_recovered() {
        let tau = std::f64::consts::TAU;
        let (g, w) = (tau * 50.0, tau * 20e3);
        let tr = decay(g, w, 1e-6, 40_000);
        let fit = fit_ringdown(&[tr], w, 1e3).unwrap();
        assert!((fit.gamma_m / g - 1.0).abs() < 1e-4, "{}", fit.gamma_m / g);
    }

    #[test]
    fn growing_envelope_is_rejected() {
        let tau = std::f64::consts::TAU;
        let tr = decay(-tau * 50.0, tau * 20e3, 1e-6, 40_000);
        assert!(matches!(
            fit_ringdown(&[tr], tau * 20e3, 1e3),
            Err(Error::EnvelopeNotDecaying(_)) | Err(Error::InsufficientData { .. })
        ));
    }
}
