//! Single-sided power spectral densities and the averaged-periodogram estimator.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Physical meaning of a spectrum's values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum PsdUnit {
    /// Position in units of `x_zp` (1/Hz).
    NormalizedPosition,
    /// Displacement (m²/Hz).
    Displacement,
    /// Optical frequency noise ((rad/s)²/Hz).
    FrequencyNoise,
    /// Photodetector voltage (V²/Hz).
    Voltage,
    #[default]
    Arbitrary,
}

/// Single-sided PSD on an ordinary-frequency grid. The integral of a pure
/// tone's PSD equals the tone's mean square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd<T> {
    /// Bin centers (Hz), strictly increasing.
    pub freq: Vec<T>,
    /// Density (unit²/Hz), non-negative.
    pub value: Vec<T>,
    /// Bin width (Hz).
    pub resolution: T,
    /// Number of averaged segments (1 for analytic spectra).
    pub n_averages: usize,
    pub unit: PsdUnit,
}

impl<T: Real> Psd<T> {
    /// Builds a spectrum from grid and values, checking the invariants.
    pub fn new(freq: Vec<T>, value: Vec<T>, n_averages: usize, unit: PsdUnit) -> Result<Self> {
        if freq.is_empty() {
            return Err(Error::EmptyInput);
        }
        if freq.len() != value.len() {
            return Err(invalid("value", "length differs from frequency grid"));
        }
        for (i, (&f, &v)) in freq.iter().zip(&value).enumerate() {
            if !f.is_finite() || !v.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            if v < T::zero() {
                return Err(invalid("value", format!("negative density at index {i}")));
            }
        }
        if freq.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("freq", "must be strictly increasing"));
        }
        let resolution = if freq.len() > 1 {
            (freq[freq.len() - 1] - freq[0]) / T::of_usize(freq.len() - 1)
        } else {
            T::zero()
        };
        Ok(Self {
            freq,
            value,
            resolution,
            n_averages: n_averages.max(1),
            unit,
        })
    }

    pub fn with_unit(mut self, unit: PsdUnit) -> Self {
        self.unit = unit;
        self
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        for v in out.value.iter_mut() {
            *v = *v * factor;
        }
        out
    }

    /// Bin indices with `lo ≤ f ≤ hi` (Hz).
    pub fn window_indices(&self, lo: T, hi: T) -> std::ops::Range<usize> {
        let start = self.freq.partition_point(|&f| f < lo);
        let end = self.freq.partition_point(|&f| f <= hi);
        start..end.max(start)
    }

    /// Converts between position-like units using `S_ω = (g₀/x_zp)² S_x`
    /// and `S_u = S_x / x_zp²`.
    pub fn convert(&self, target: PsdUnit, g0: T, x_zp: T) -> Result<Self> {
        use PsdUnit::*;
        // Factor taking each unit to NormalizedPosition.
        let to_norm = |u: PsdUnit| -> Option<T> {
            match u {
                NormalizedPosition => Some(T::one()),
                Displacement => Some(T::one() / (x_zp * x_zp)),
                FrequencyNoise => Some(T::one() / (g0 * g0)),
                Voltage | Arbitrary => None,
            }
        };
        if self.unit == target {
            return Ok(self.clone());
        }
        match (to_norm(self.unit), to_norm(target)) {
            (Some(a), Some(b)) => Ok(self.scaled(a / b).with_unit(target)),
            _ => Err(Error::UnitMismatch(format!(
                "cannot convert {:?} to {:?}",
                self.unit, target
            ))),
        }
    }

    /// Writes `freq_hz,psd` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "freq_hz,psd")?;
        for (f, v) in self.freq.iter().zip(&self.value) {
            writeln!(w, "{:.16e},{:.16e}", f.as_f64(), v.as_f64())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `freq_hz,psd` file. The averaging count is not stored in the
    /// format and is set to `n_averages`.
    pub fn read_csv<R: Read>(r: R, n_averages: usize, unit: PsdUnit) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().ok_or(Error::EmptyInput)??;
        if header.trim() != "freq_hz,psd" {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `freq_hz,psd`, found `{}`", header.trim()),
            });
        }
        let mut freq = Vec::new();
        let mut value = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let mut next = || -> Result<T> {
                let s = parts.next().ok_or_else(|| Error::Parse {
                    line: i + 2,
                    message: "expected 2 columns".into(),
                })?;
                let v: f64 = s.trim().parse().map_err(|e: std::num::ParseFloatError| Error::Parse {
                    line: i + 2,
                    message: e.to_string(),
                })?;
                Ok(T::lit(v))
            };
            freq.push(next()?);
            value.push(next()?);
        }
        Psd::new(freq, value, n_averages, unit)
    }
}

/// Averaged periodogram with a Hann window and per-segment mean removal.
///
/// `segment_length` samples per segment, consecutive segments overlapping by
/// the fraction `overlap ∈ [0, 0.9]`. The result is single-sided and
/// normalized by the window power, so white noise of variance `σ²` gives the
/// flat level `2σ²/f_s` and a tone of amplitude `A` integrates to `A²/2`.
pub fn welch_psd<T: Real>(samples: &[T], sample_rate: T, segment_length: usize, overlap: T) -> Result<Psd<T>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    if !(sample_rate > T::zero()) {
        return Err(invalid("sample_rate", "must be positive"));
    }
    if segment_length < 2 || segment_length > samples.len() {
        return Err(invalid(
            "segment_length",
            format!("must lie in [2, {}], got {segment_length}", samples.len()),
        ));
    }
    if !(overlap >= T::zero() && overlap <= T::lit(0.9)) {
        return Err(invalid("overlap", "must lie in [0, 0.9]"));
    }
    let n = segment_length;
    let shift = (n - (overlap * T::of_usize(n)).round().to_usize().unwrap_or(0)).max(1);
    let n_seg = 1 + (samples.len() - n) / shift;

    let window: Vec<T> = (0..n)
        .map(|i| {
            let x = T::TAU() * T::of_usize(i) / T::of_usize(n);
            T::lit(0.5) * (T::one() - x.cos())
        })
        .collect();
    let wpow: T = window.iter().fold(T::zero(), |a, &w| a + w * w);

    let fft = FftPlanner::<T>::new().plan_fft_forward(n);
    let n_bins = n / 2 + 1;
    let mut acc = vec![T::zero(); n_bins];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for s in 0..n_seg {
        let seg = &samples[s * shift..s * shift + n];
        let mean = seg.iter().fold(T::zero(), |a, &v| a + v) / T::of_usize(n);
        for (b, (&v, &w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((v - mean) * w, T::zero());
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a = *a + b.norm_sqr();
        }
    }
    let scale = T::one() / (sample_rate * wpow * T::of_usize(n_seg));
    let two = T::lit(2.0);
    let nyquist_bin = if n.is_multiple_of(2) { Some(n / 2) } else { None };
    let value: Vec<T> = acc
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let single = if k == 0 || Some(k) == nyquist_bin { T::one() } else { two };
            a * scale * single
        })
        .collect();
    let df = sample_rate / T::of_usize(n);
    let freq: Vec<T> = (0..n_bins).map(|k| T::of_usize(k) * df).collect();
    Ok(Psd {
        freq,
        value,
        resolution: df,
        n_averages: n_seg,
        unit: PsdUnit::Arbitrary,
    })
}

/// Trapezoidal integral of a PSD over its full grid.
pub fn integrate_variance<T: Real>(psd: &Psd<T>) -> T {
    integrate_band(psd, psd.freq[0], psd.freq[psd.len() - 1])
}

/// Trapezoidal integral over bins with `lo ≤ f ≤ hi` (Hz).
pub fn integrate_band<T: Real>(psd: &Psd<T>, lo: T, hi: T) -> T {
    let r = psd.window_indices(lo, hi);
    let f = &psd.freq[r.clone()];
    let v = &psd.value[r];
    let half = T::lit(0.5);
    f.windows(2)
        .zip(v.windows(2))
        .fold(T::zero(), |a, (f, v)| a + half * (f[1] - f[0]) * (v[0] + v[1]))
}

/// Integral with an estimate of the power lost beyond the last bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport<T> {
    pub variance: T,
    /// Power above the grid assuming the spectrum falls as `1/f²` from its
    /// last bin: `S(f_max) f_max`.
    pub tail_estimate: T,
    /// Set when the tail estimate exceeds 1% of the integral.
    pub truncated: bool,
}

pub fn integrate_variance_report<T: Real>(psd: &Psd<T>) -> VarianceReport<T> {
    let variance = integrate_variance(psd);
    let last = psd.len() - 1;
    let tail = psd.value[last] * psd.freq[last];
    VarianceReport {
        variance,
        tail_estimate: tail,
        truncated: tail > T::lit(0.01) * variance.abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn tone_power_is_half_amplitude_squared() {
        let fs = 1000.0;
        let n = 1 << 16;
        let a = 3.0;
        let f0 = 123.456;
        let x: Vec<f64> = (0..n)
            .map(|i| a * (std::f64::consts::TAU * f0 * i as f64 / fs).sin())
            .collect();
        let psd = welch_psd(&x, fs, 4096, 0.5).unwrap();
        let p = integrate_band(&psd, f0 - 5.0, f0 + 5.0);
        assert!((p / (a * a / 2.0) - 1.0).abs() < 0.01, "{p}");
    }

    #[test]
    fn white_noise_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fs = 200.0;
        let x: Vec<f64> = (0..1 << 17).map(|_| rng.sample(StandardNormal)).collect();
        let psd = welch_psd(&x, fs, 1024, 0.5).unwrap();
        let inner = &psd.value[1..psd.len() - 1];
        let mean = inner.iter().sum::<f64>() / inner.len() as f64;
        assert!((mean / (2.0 / fs) - 1.0).abs() < 3.0 / (psd.n_averages as f64).sqrt());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(welch_psd::<f64>(&[], 1.0, 4, 0.5), Err(Error::EmptyInput)));
        assert!(matches!(
            welch_psd(&[1.0, f64::NAN, 1.0, 2.0], 1.0, 2, 0.5),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(welch_psd(&[1.0, 2.0], 1.0, 4, 0.5).is_err());
        assert!(welch_psd(&[1.0, 2.0, 3.0], 1.0, 2, 0.95).is_err());
    }

    #[test]
    fn unit_conversion_round_trip() {
        let psd = Psd::new(vec![1.0, 2.0], vec![4.0, 8.0], 1, PsdUnit::Displacement).unwrap();
        let w = psd.convert(PsdUnit::FrequencyNoise, 2.0, 0.5).unwrap();
        assert_eq!(w.value, vec![64.0, 128.0]);
        let back = w.convert(PsdUnit::Displacement, 2.0, 0.5).unwrap();
        assert_eq!(back.value, psd.value);
        assert!(psd.with_unit(PsdUnit::Voltage).convert(PsdUnit::Displacement, 1.0, 1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let psd = Psd::new(vec![0.5, 1.0, 1.5], vec![1.0 / 3.0, 2.0, 1e-30], 7, PsdUnit::Voltage).unwrap();
        let mut buf = Vec::new();
        psd.write_csv(&mut buf).unwrap();
        let back = Psd::<f64>::read_csv(buf.as_slice(), 7, PsdUnit::Voltage).unwrap();
        assert_eq!(back, psd);
    }

    #[test]
    fn single_precision_estimate() {
        let x: Vec<f32> = (0..4096).map(|i| (i as f32 * 0.3).sin()).collect();
        let psd = welch_psd(&x, 1.0f32, 512, 0.5).unwrap();
        let v = integrate_variance(&psd);
        assert!((v - 0.5).abs() < 0.02, "{v}");
    }
}
