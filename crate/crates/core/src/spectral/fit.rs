//! Lorentzian-plus-floor least-squares fitting.

use serde::{Deserialize, Serialize};

use super::psd::{Psd, PsdUnit};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Floor-to-peak ratio above which a peak is treated as unresolvable.
pub const UNRESOLVABLE_RATIO: f64 = 1e3;
/// Runs-test z-score below which residuals count as structured.
pub const RUNS_Z_THRESHOLD: f64 = -3.0;

/// Result of fitting `S(Ω) = floor + peak (Γ/2)² / ((Ω − Ω_c)² + (Γ/2)²)`.
///
/// Parameters are ordered `(omega_center, gamma_eff, peak, floor)` in the
/// covariance matrix; rates in rad/s, densities in the spectrum's unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFit<T> {
    pub omega_center: T,
    pub gamma_eff: T,
    pub peak: T,
    pub floor: T,
    /// RMS of the relative residuals `(S − model)/model`.
    pub residual_rms: T,
    pub covariance: [[T; 4]; 4],
    pub unit: PsdUnit,
    pub n_points: usize,
    pub iterations: usize,
    /// Wald–Wolfowitz runs statistic of the residual signs.
    pub runs_z: T,
    /// Set when the residual signs cluster (runs z-score below −3), the
    /// signature of a line shape the model cannot follow, e.g. a squashed dip.
    pub structured_residuals: bool,
}

impl<T: Real> SpectrumFit<T> {
    /// Fit-free description of a known line, e.g. from closed forms. The
    /// peak may be negative here to represent an in-loop dip.
    pub fn analytic(omega_center: T, gamma_eff: T, peak: T, floor: T, unit: PsdUnit) -> Self {
        Self {
            omega_center,
            gamma_eff,
            peak,
            floor,
            residual_rms: T::zero(),
            covariance: [[T::zero(); 4]; 4],
            unit,
            n_points: 0,
            iterations: 0,
            runs_z: T::zero(),
            structured_residuals: false,
        }
    }

    /// Model value at angular frequency `omega`.
    pub fn model(&self, omega: T) -> T {
        let h = T::lit(0.5) * self.gamma_eff;
        let d = omega - self.omega_center;
        self.floor + self.peak * h * h / (d * d + h * h)
    }

    /// Standard deviation of parameter `i`.
    pub fn sigma(&self, i: usize) -> T {
        self.covariance[i][i].max(T::zero()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Weighting {
    #[default]
    Uniform,
    /// Inverse variance `n_averages / model²`, appropriate for averaged
    /// periodograms; the weights are refreshed from the model until the
    /// parameters settle.
    ChiSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions<T> {
    pub weighting: Weighting,
    pub max_iterations: usize,
    /// Convergence threshold on the relative parameter step.
    pub tolerance: T,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            weighting: Weighting::Uniform,
            max_iterations: 200,
            tolerance: T::lit(1e-9),
        }
    }
}

/// Fits a single Lorentzian on a flat floor inside `window = (lo, hi)` (Hz).
pub fn fit_lorentzian<T: Real>(psd: &Psd<T>, window: (T, T)) -> Result<SpectrumFit<T>> {
    fit_lorentzian_with(psd, window, &FitOptions::default())
}

/// Scaled problem: `x = (Ω − Ω_ref)/s_Ω`, `y = S/s_P`, parameters
/// `θ = ((Ω_c − Ω_ref)/s_Ω, Γ/s_Ω, P/s_P, F/s_P)`.
struct Problem<T> {
    x: Vec<T>,
    y: Vec<T>,
    w: Vec<T>,
}

fn lorentz<T: Real>(x: T, th: &[T; 4]) -> T {
    let h = T::lit(0.5) * th[1];
    let d = x - th[0];
    h * h / (d * d + h * h)
}

fn model<T: Real>(x: T, th: &[T; 4]) -> T {
    th[3] + th[2] * lorentz(x, th)
}

impl<T: Real> Problem<T> {
    fn cost(&self, th: &[T; 4]) -> T {
        self.x
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .fold(T::zero(), |a, ((&x, &y), &w)| {
                let r = y - model(x, th);
                a + w * r * r
            })
    }

    /// Normal equations `JᵀWJ` and `JᵀW r`.
    fn normal(&self, th: &[T; 4]) -> ([[T; 4]; 4], [T; 4]) {
        let mut a = [[T::zero(); 4]; 4];
        let mut b = [T::zero(); 4];
        let h = T::lit(0.5) * th[1];
        let two = T::lit(2.0);
        for ((&x, &y), &w) in self.x.iter().zip(&self.y).zip(&self.w) {
            let d = x - th[0];
            let den = d * d + h * h;
            let l = h * h / den;
            let j = [
                th[2] * h * h * two * d / (den * den),
                th[2] * h * d * d / (den * den),
                l,
                T::one(),
            ];
            let r = y - (th[3] + th[2] * l);
            for i in 0..4 {
                b[i] = b[i] + w * j[i] * r;
                for k in 0..4 {
                    a[i][k] = a[i][k] + w * j[i] * j[k];
                }
            }
        }
        (a, b)
    }

    /// Best non-negative `(peak, floor)` for fixed center and width.
    fn project_linear(&self, c: T, g: T) -> [T; 4] {
        let mut th = [c, g, T::zero(), T::zero()];
        let (mut sll, mut sl, mut s1, mut sly, mut sy) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        for ((&x, &y), &w) in self.x.iter().zip(&self.y).zip(&self.w) {
            let l = lorentz(x, &th);
            sll = sll + w * l * l;
            sl = sl + w * l;
            s1 = s1 + w;
            sly = sly + w * l * y;
            sy = sy + w * y;
        }
        let det = sll * s1 - sl * sl;
        let (mut p, mut f) = if det.abs() > T::zero() {
            ((sly * s1 - sl * sy) / det, (sll * sy - sl * sly) / det)
        } else {
            (T::zero(), sy / s1)
        };
        if p < T::zero() {
            p = T::zero();
            f = sy / s1;
        }
        if f < T::zero() {
            f = T::zero();
            p = if sll > T::zero() { sly / sll } else { T::zero() };
        }
        th[2] = p;
        th[3] = f;
        th
    }
}

/// Solves `a x = b` for a 4×4 system by Gaussian elimination with partial
/// pivoting. `None` when singular.
#[allow(clippy::needless_range_loop)]
fn solve4<T: Real>(mut a: [[T; 4]; 4], mut b: [T; 4]) -> Option<[T; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[piv][col] == T::zero() || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = [T::zero(); 4];
    for i in (0..4).rev() {
        let mut s = b[i];
        for k in i + 1..4 {
            s = s - a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

fn invert4<T: Real>(a: &[[T; 4]; 4]) -> Option<[[T; 4]; 4]> {
    let mut inv = [[T::zero(); 4]; 4];
    for c in 0..4 {
        let mut e = [T::zero(); 4];
        e[c] = T::one();
        let col = solve4(*a, e)?;
        for r in 0..4 {
            inv[r][c] = col[r];
        }
    }
    Some(inv)
}

fn clamp_params<T: Real>(th: &mut [T; 4], prev_width: T) {
    if !(th[1] > T::zero()) {
        th[1] = prev_width * T::lit(0.5);
    }
    if th[2] < T::zero() {
        th[2] = T::zero();
    }
    if th[3] < T::zero() {
        th[3] = T::zero();
    }
}

/// Damped Gauss–Newton from `th`; returns the final parameters, iteration
/// count and whether the step criterion was met.
fn levenberg_marquardt<T: Real>(p: &Problem<T>, mut th: [T; 4], opts: &FitOptions<T>, iters: &mut usize) -> ([T; 4], bool) {
    let tol = opts.tolerance.max(T::epsilon() * T::lit(16.0));
    let mut lambda = T::lit(1e-3);
    let mut cost = p.cost(&th);
    while *iters < opts.max_iterations {
        *iters += 1;
        let (a, b) = p.normal(&th);
        let mut accepted = None;
        loop {
            let mut damped = a;
            for (i, row) in damped.iter_mut().enumerate() {
                let d = a[i][i].max(T::min_positive_value());
                row[i] = row[i] + lambda * d;
            }
            if let Some(step) = solve4(damped, b) {
                let mut cand = [th[0] + step[0], th[1] + step[1], th[2] + step[2], th[3] + step[3]];
                clamp_params(&mut cand, th[1]);
                let c = p.cost(&cand);
                if c <= cost {
                    accepted = Some((cand, c));
                    lambda = (lambda / T::lit(10.0)).max(T::lit(1e-15));
                    break;
                }
            }
            lambda = lambda * T::lit(10.0);
            if lambda > T::lit(1e16) {
                break;
            }
        }
        let Some((cand, c)) = accepted else {
            // No descent direction left: stationary to working precision.
            return (th, true);
        };
        let width = cand[1].abs();
        let level = cand[2].abs() + cand[3].abs();
        let small = |d: T, s: T| d.abs() <= tol * s.max(T::min_positive_value());
        let done = small(cand[0] - th[0], width)
            && small(cand[1] - th[1], width)
            && small(cand[2] - th[2], level)
            && small(cand[3] - th[3], level);
        th = cand;
        cost = c;
        if done {
            return (th, true);
        }
    }
    (th, false)
}

fn runs_z<T: Real>(res: &[T]) -> T {
    let signs: Vec<bool> = res.iter().filter(|r| **r != T::zero()).map(|r| *r > T::zero()).collect();
    let n1 = signs.iter().filter(|s| **s).count();
    let n2 = signs.len() - n1;
    if n1 == 0 || n2 == 0 {
        // All residuals on one side: maximally structured if there are many.
        return if signs.len() > 10 { T::lit(-1e3) } else { T::zero() };
    }
    let runs = 1 + signs.windows(2).filter(|w| w[0] != w[1]).count();
    let (n1, n2) = (T::of_usize(n1), T::of_usize(n2));
    let n = n1 + n2;
    let two = T::lit(2.0);
    let mu = two * n1 * n2 / n + T::one();
    let var = two * n1 * n2 * (two * n1 * n2 - n) / (n * n * (n - T::one()));
    if !(var > T::zero()) {
        return T::zero();
    }
    (T::of_usize(runs) - mu) / var.sqrt()
}

pub fn fit_lorentzian_with<T: Real>(psd: &Psd<T>, window: (T, T), opts: &FitOptions<T>) -> Result<SpectrumFit<T>> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(invalid("window", "upper edge must exceed lower edge"));
    }
    let range = psd.window_indices(lo, hi);
    let n = range.len();
    if n < 6 {
        return Err(Error::InsufficientData { needed: 6, got: n });
    }
    let tau = T::TAU();
    let w_lo = tau * lo;
    let w_hi = tau * hi;
    let s_w = w_hi - w_lo;
    let w_ref = T::lit(0.5) * (w_lo + w_hi);
    let ys = &psd.value[range.clone()];
    let s_p = ys.iter().fold(T::zero(), |a, &v| a.max(v));
    if !(s_p > T::zero()) {
        return Err(Error::PeakNotResolvable);
    }
    let x: Vec<T> = psd.freq[range.clone()].iter().map(|&f| (tau * f - w_ref) / s_w).collect();
    let y: Vec<T> = ys.iter().map(|&v| v / s_p).collect();
    let mut prob = Problem {
        w: vec![T::one(); n],
        x,
        y,
    };

    // Seed: peak bin and half-maximum width.
    let imax = (0..n)
        .max_by(|&i, &j| prob.y[i].partial_cmp(&prob.y[j]).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    let base = prob.y.iter().fold(T::infinity(), |a, &v| a.min(v));
    let half = base + T::lit(0.5) * (prob.y[imax] - base);
    let mut l = imax;
    while l > 0 && prob.y[l] > half {
        l -= 1;
    }
    let mut r = imax;
    while r + 1 < n && prob.y[r] > half {
        r += 1;
    }
    let bin = (prob.x[n - 1] - prob.x[0]) / T::of_usize(n - 1);
    let width0 = (prob.x[r] - prob.x[l]).max(T::lit(2.0) * bin);

    let mut best = prob.project_linear(prob.x[imax], width0);
    let mut best_cost = prob.cost(&best);
    for dc in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        for k in -6..=6 {
            let c = prob.x[imax] + T::lit(dc) * bin;
            let g = width0 * T::lit(2f64.powf(k as f64 / 2.0));
            let th = prob.project_linear(c, g);
            let cost = prob.cost(&th);
            if cost < best_cost {
                best = th;
                best_cost = cost;
            }
        }
    }

    let mut iterations = 0;
    let mut th = best;
    let (mut th_fit, mut converged) = levenberg_marquardt(&prob, th, opts, &mut iterations);
    if opts.weighting == Weighting::ChiSquare {
        let navg = T::of_usize(psd.n_averages);
        for _ in 0..20 {
            th = th_fit;
            for (w, &x) in prob.w.iter_mut().zip(&prob.x) {
                let m = model(x, &th).max(T::min_positive_value());
                *w = navg / (m * m);
            }
            let (next, ok) = levenberg_marquardt(&prob, th, opts, &mut iterations);
            converged = ok;
            let tol = opts.tolerance.max(T::epsilon() * T::lit(16.0));
            let settled = (0..4).all(|i| {
                let s = if i < 2 { next[1] } else { next[2] + next[3] };
                (next[i] - th[i]).abs() <= tol * s.max(T::min_positive_value())
            });
            th_fit = next;
            if !converged || settled {
                break;
            }
        }
    }
    let residual = prob.cost(&th_fit);
    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            residual: residual.as_f64(),
            last: vec![
                (w_ref + th_fit[0] * s_w).as_f64(),
                (th_fit[1] * s_w).as_f64(),
                (th_fit[2] * s_p).as_f64(),
                (th_fit[3] * s_p).as_f64(),
            ],
        });
    }

    let rel: Vec<T> = prob
        .x
        .iter()
        .zip(&prob.y)
        .map(|(&x, &y)| {
            let m = model(x, &th_fit);
            if m > T::zero() {
                (y - m) / m
            } else {
                y - m
            }
        })
        .collect();
    let rms = (rel.iter().fold(T::zero(), |a, &r| a + r * r) / T::of_usize(n)).sqrt();
    let z = runs_z(&rel);
    let structured = z < T::lit(RUNS_Z_THRESHOLD) && rms > T::epsilon() * T::lit(1e3);

    if th_fit[3] >= T::lit(UNRESOLVABLE_RATIO) * th_fit[2] && !structured {
        return Err(Error::PeakNotResolvable);
    }

    let (a, _) = prob.normal(&th_fit);
    let mut cov = invert4(&a).unwrap_or([[T::infinity(); 4]; 4]);
    let res_scale = match opts.weighting {
        Weighting::Uniform => residual / T::of_usize(n.saturating_sub(4).max(1)),
        Weighting::ChiSquare => T::one(),
    };
    let s = [s_w, s_w, s_p, s_p];
    for i in 0..4 {
        for k in 0..4 {
            cov[i][k] = cov[i][k] * res_scale * s[i] * s[k];
        }
    }

    Ok(SpectrumFit {
        omega_center: w_ref + th_fit[0] * s_w,
        gamma_eff: th_fit[1] * s_w,
        peak: th_fit[2] * s_p,
        floor: th_fit[3] * s_p,
        residual_rms: rms,
        covariance: cov,
        unit: psd.unit,
        n_points: n,
        iterations,
        runs_z: z,
        structured_residuals: structured,
    })
}

/// Linear fit of `floor + amplitude / (Ω − Ω_c)²` to the wings of a peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit<T> {
    /// Tail coefficient `peak Γ²/4` ((rad/s)² × density).
    pub amplitude: T,
    pub floor: T,
    /// Covariance of `(amplitude, floor)`.
    pub covariance: [[T; 2]; 2],
    pub unit: PsdUnit,
}

/// Fits the off-resonant wings `exclude < |Ω − Ω_c|` within `window` (Hz)
/// for a line at `omega_center` (rad/s). The tail coefficient equals
/// `peak Γ²/4` of the underlying Lorentzian without resolving its width.
pub fn fit_tail<T: Real>(psd: &Psd<T>, window: (T, T), omega_center: T, exclude: T) -> Result<TailFit<T>> {
    let tau = T::TAU();
    let mut rows = Vec::new();
    for i in psd.window_indices(window.0, window.1) {
        let d = tau * psd.freq[i] - omega_center;
        if d.abs() > exclude {
            rows.push((T::one() / (d * d), psd.value[i]));
        }
    }
    if rows.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: rows.len(),
        });
    }
    let scale = rows.iter().fold(T::zero(), |a, r| a.max(r.0));
    let (mut saa, mut sa, mut say, mut sy) = (T::zero(), T::zero(), T::zero(), T::zero());
    let n = T::of_usize(rows.len());
    for &(a, y) in &rows {
        let a = a / scale;
        saa = saa + a * a;
        sa = sa + a;
        say = say + a * y;
        sy = sy + y;
    }
    let det = saa * n - sa * sa;
    if !(det.abs() > T::zero()) {
        return Err(Error::Degenerate("tail regressor is constant".into()));
    }
    let amp = (say * n - sa * sy) / det;
    let floor = (saa * sy - sa * say) / det;
    let rss = rows.iter().fold(T::zero(), |acc, &(a, y)| {
        let r = y - floor - amp * a / scale;
        acc + r * r
    });
    let s2 = rss / (n - T::lit(2.0));
    let cov = [
        [s2 * n / det / (scale * scale), -s2 * sa / det / scale],
        [-s2 * sa / det / scale, s2 * saa / det],
    ];
    Ok(TailFit {
        amplitude: amp / scale,
        floor,
        covariance: cov,
        unit: psd.unit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(c_hz: f64, g_hz: f64, peak: f64, floor: f64, n: usize) -> Psd<f64> {
        let tau = std::f64::consts::TAU;
        let freq: Vec<f64> = (0..n).map(|i| c_hz - 10.0 * g_hz + 20.0 * g_hz * i as f64 / (n - 1) as f64).collect();
        let fit = SpectrumFit::analytic(tau * c_hz, tau * g_hz, peak, floor, PsdUnit::Arbitrary);
        let value = freq.iter().map(|&f| fit.model(tau * f)).collect();
        Psd::new(freq, value, 1, PsdUnit::Arbitrary).unwrap()
    }

    #[test]
    fn noise_free_self_fit_is_exact() {
        let psd = synthetic(1000.0, 2.0, 5.0, 0.1, 401);
        let f = fit_lorentzian(&psd, (980.0, 1020.0)).unwrap();
        let tau = std::f64::consts::TAU;
        assert!((f.omega_center / (tau * 1000.0) - 1.0).abs() < 1e-10);
        assert!((f.gamma_eff / (tau * 2.0) - 1.0).abs() < 1e-6);
        assert!((f.peak / 5.0 - 1.0).abs() < 1e-6);
        assert!((f.floor / 0.1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flat_spectrum_is_unresolvable() {
        let psd = synthetic(1000.0, 2.0, 0.0, 1.0, 201);
        assert_eq!(fit_lorentzian(&psd, (980.0, 1020.0)).unwrap_err(), Error::PeakNotResolvable);
    }

    #[test]
    fn iteration_cap_reports_last_iterate() {
        let psd = synthetic(1000.0, 2.0, 5.0, 0.1, 401);
        let opts = FitOptions {
            max_iterations: 1,
            tolerance: 1e-300,
            ..FitOptions::default()
        };
        match fit_lorentzian_with(&psd, (980.0, 1020.0), &opts) {
            Err(Error::NoConvergence { iterations, last, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(last.len(), 4);
            }
            Ok(_) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn tail_fit_recovers_width_free_amplitude() {
        let psd = synthetic(1000.0, 0.05, 40.0, 0.2, 4001);
        let tau = std::f64::consts::TAU;
        let t = fit_tail(&psd, (999.5, 1000.5), tau * 1000.0, tau * 0.2).unwrap();
        let expect = 40.0 * (tau * 0.05f64).powi(2) / 4.0;
        assert!((t.amplitude / expect - 1.0).abs() < 0.02, "{} vs {expect}", t.amplitude);
        assert!((t.floor / 0.2 - 1.0).abs() < 0.05);
    }

    #[test]
    fn single_precision_fit() {
        let freq: Vec<f32> = (0..301).map(|i| 90.0 + 20.0 * i as f32 / 300.0).collect();
        let tau = std::f32::consts::TAU;
        let truth = SpectrumFit::analytic(tau * 100.0, tau * 1.5, 3.0f32, 0.5, PsdUnit::Arbitrary);
        let value = freq.iter().map(|&f| truth.model(tau * f)).collect();
        let psd = Psd::new(freq, value, 1, PsdUnit::Arbitrary).unwrap();
        let f = fit_lorentzian(&psd, (90.0, 110.0)).unwrap();
        assert!((f.gamma_eff / (tau * 1.5) - 1.0).abs() < 1e-3);
        assert!((f.peak / 3.0 - 1.0).abs() < 1e-3);
    }
}
