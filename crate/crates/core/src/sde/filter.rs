//! Causal feedback filter: second-order bandpass followed by a delay line.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::FeedbackSettings;

/// Bandpass (unit gain and zero phase at its center) composed with an
/// integer-sample delay.
///
/// The small-signal response at angular frequency `ω` is
/// `H(ω) = e^{−iωDΔt} · B(e^{iωΔt})` with `B` the biquad
///
/// ```text
///          α (1 − z⁻²)
/// B(z) = ──────────────────────────────,  α = sin(ω₀Δt) / 2Q,  Q = ω₀ / width
///        (1 + α) − 2cos(ω₀Δt) z⁻¹ + (1 − α) z⁻²
/// ```
///
/// using the `e^{+iωt}` convention, in which a differentiator has phase +π/2.
/// A delay of `3π/2ω₀` therefore turns the center tone into its time
/// derivative up to a positive factor.
#[derive(Debug, Clone)]
pub struct FeedbackFilter {
    b0: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
    delay: VecDeque<f64>,
    delay_samples: usize,
    dt: f64,
}

impl FeedbackFilter {
    /// Number of samples in the delay line.
    pub fn delay_samples(&self) -> usize {
        self.delay_samples
    }

    /// Pushes one input sample and returns the filtered, delayed output.
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b2 * self.x2 - self.a1 * self.y1 - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        self.delay.push_back(y);
        self.delay.pop_front().unwrap_or(0.0)
    }

    /// Small-signal transfer function at angular frequency `omega` (rad/s).
    pub fn transfer(&self, omega: f64) -> Complex64 {
        let w = omega * self.dt;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = (Complex64::new(1.0, 0.0) - z2) * self.b0;
        let den = Complex64::new(1.0, 0.0) + z1 * self.a1 + z2 * self.a2;
        let delay = Complex64::from_polar(1.0, -w * self.delay_samples as f64);
        delay * num / den
    }

    pub fn reset(&mut self) {
        self.x1 = 0.0;
        self.x2 = 0.0;
        self.y1 = 0.0;
        self.y2 = 0.0;
        for v in self.delay.iter_mut() {
            *v = 0.0;
        }
    }
}

/// Builds the feedback filter for `fb` at `sample_rate` (Hz).
pub fn feedback_filter(fb: &FeedbackSettings<f64>, sample_rate: f64) -> Result<FeedbackFilter> {
    fb.validate()?;
    let dt = 1.0 / sample_rate;
    let nyquist = 0.5 * sample_rate;
    let center_hz = fb.bandpass_center / (2.0 * PI);
    if center_hz >= nyquist {
        return Err(Error::AboveNyquist {
            center_hz,
            nyquist_hz: nyquist,
        });
    }
    let delay_samples = (fb.delay / dt).round() as usize;
    if delay_samples < 1 {
        return Err(Error::DelayTooShort { delay: fb.delay, dt });
    }
    let w0 = fb.bandpass_center * dt;
    let q = fb.bandpass_center / fb.bandpass_width;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    Ok(FeedbackFilter {
        b0: alpha / a0,
        b2: -alpha / a0,
        a1: -2.0 * w0.cos() / a0,
        a2: (1.0 - alpha) / a0,
        x1: 0.0,
        x2: 0.0,
        y1: 0.0,
        y2: 0.0,
        delay: VecDeque::from(vec![0.0; delay_samples]),
        delay_samples,
        dt,
    })
}
