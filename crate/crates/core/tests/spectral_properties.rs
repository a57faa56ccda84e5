//! Spectral estimation, fitting and read-out checked on analytic spectra,
//! Monte Carlo scatter and random series.

use coldamp::model::{closed_loop_spectra, minimum_occupancy, phonon_occupancy_at_gain};
use coldamp::spectral::{
    extract_occupancies, fit_lorentzian, fit_lorentzian_with, fit_tail, integrate_band, integrate_variance,
    integrate_variance_report, occupancy_from_tail, phonon_from_spectrum, welch_psd, FitOptions, Psd,
    PsdUnit, SpectrumFit, Weighting,
};
use coldamp::units::hz_to_rad;
use coldamp::{FeedbackSettings, NoiseBudget, OscillatorParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};

const TAU: f64 = std::f64::consts::TAU;

/// Normalized-position PSD of the in-loop spectra on `n` bins spanning
/// `Ω_m ± half_width` (rad/s). Returns `(S_x, S_y)`.
fn analytic_psd(
    osc: &OscillatorParams,
    b: &NoiseBudget,
    gain: f64,
    half_width: f64,
    n: usize,
) -> (Psd<f64>, Psd<f64>) {
    let fb = FeedbackSettings::cold_damping(gain, osc.omega_m).unwrap();
    let freq: Vec<f64> = (0..n)
        .map(|i| (osc.omega_m - half_width + 2.0 * half_width * i as f64 / (n - 1) as f64) / TAU)
        .collect();
    let omegas: Vec<f64> = freq.iter().map(|f| TAU * f).collect();
    let s = closed_loop_spectra(osc, b, &fb, &omegas);
    let scale = 8.0 / osc.gamma_m;
    let mk = |v: Vec<f64>| {
        Psd::new(freq.clone(), v.iter().map(|x| x * scale).collect(), 1, PsdUnit::NormalizedPosition).unwrap()
    };
    (mk(s.s_x), mk(s.s_y))
}

fn window(osc: &OscillatorParams, half_width: f64) -> (f64, f64) {
    ((osc.omega_m - half_width) / TAU, (osc.omega_m + half_width) / TAU)
}

#[test]
fn fit_recovers_closed_loop_lines_over_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let n_tot = 10f64.powf(rng.random_range(2.0..5.0));
        let n_imp = 10f64.powf(rng.random_range(-5.0..-2.0));
        // Peak-to-floor ratio r in [1, 100]: with a larger ratio the floor is
        // not identifiable to 1e-6 inside a ±10Γ window.
        let r = 10f64.powf(rng.random_range(0.0..2.0));
        let g = ((n_tot + 0.5 + n_imp) / (n_imp * (r + 1.0))).sqrt() - 1.0;
        // Γ_eff/Ω_m = 1e-8 keeps the Lorentzian approximation below 1e-6.
        let gamma_m = 1e-8 / (1.0 + g);
        let osc = OscillatorParams::scaled(gamma_m).unwrap();
        let b = NoiseBudget::from_totals(gamma_m, n_tot, n_imp).unwrap();
        let ge = gamma_m * (1.0 + g);
        let (_, s_y) = analytic_psd(&osc, &b, g, 10.0 * ge, 401);
        let fit = fit_lorentzian(&s_y, window(&osc, 10.0 * ge)).unwrap();
        let scale = 8.0 / gamma_m;
        let peak = ((n_tot + 0.5 + n_imp) / (1.0 + g).powi(2) - n_imp) * scale;
        let floor = n_imp * scale;
        assert!((fit.gamma_eff / ge - 1.0).abs() < 1e-6, "gamma {}", fit.gamma_eff / ge);
        assert!((fit.peak / peak - 1.0).abs() < 1e-6, "peak {}", fit.peak / peak);
        assert!((fit.floor / floor - 1.0).abs() < 1e-6, "floor {}", fit.floor / floor);
    }
}

#[test]
fn fit_errors_are_calibrated_by_monte_carlo() {
    let truth = SpectrumFit::analytic(TAU * 100.0, TAU * 2.0, 10.0, 1.0, PsdUnit::Arbitrary);
    let freq: Vec<f64> = (0..401).map(|i| 80.0 + 0.1 * i as f64).collect();
    let model: Vec<f64> = freq.iter().map(|&f| truth.model(TAU * f)).collect();
    let n_avg = 100;
    // An average of n_avg exponential periodogram bins is Gamma(n_avg, 1/n_avg).
    let scatter = Gamma::new(n_avg as f64, 1.0 / n_avg as f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = FitOptions {
        weighting: Weighting::ChiSquare,
        ..FitOptions::default()
    };
    let reps = 500;
    let mut inside = [0usize; 4];
    for _ in 0..reps {
        let value = model.iter().map(|&m| m * rng.sample(scatter)).collect();
        let psd = Psd::new(freq.clone(), value, n_avg, PsdUnit::Arbitrary).unwrap();
        let fit = fit_lorentzian_with(&psd, (80.0, 120.0), &opts).unwrap();
        let est = [fit.omega_center, fit.gamma_eff, fit.peak, fit.floor];
        let tru = [truth.omega_center, truth.gamma_eff, truth.peak, truth.floor];
        for i in 0..4 {
            if (est[i] - tru[i]).abs() <= 3.0 * fit.sigma(i) {
                inside[i] += 1;
            }
        }
    }
    for (i, &k) in inside.iter().enumerate() {
        let frac = k as f64 / reps as f64;
        assert!(frac >= 0.99, "parameter {i}: {frac}");
    }
}

#[test]
fn squashed_record_biases_floor_low_and_is_flagged() {
    let osc = OscillatorParams::scaled(1e-6).unwrap();
    let b = NoiseBudget::from_totals(1e-6, 1e3, 1e-2).unwrap();
    let g = 1e3;
    assert!(g > minimum_occupancy(&b).g_fb_opt);
    let ge = 1e-6 * (1.0 + g);
    let (_, s_y) = analytic_psd(&osc, &b, g, 10.0 * ge, 401);
    let fit = fit_lorentzian(&s_y, window(&osc, 10.0 * ge)).unwrap();
    let floor = 1e-2 * 8.0 / 1e-6;
    assert!(fit.floor < floor, "{} vs {floor}", fit.floor);
    assert!(fit.structured_residuals, "runs z = {}", fit.runs_z);
}

#[test]
fn occupancies_round_trip_through_open_loop_record() {
    let osc = OscillatorParams::new(hz_to_rad(4.3e6), hz_to_rad(5.7), 2.9e-15, 4.4).unwrap();
    let b = NoiseBudget::from_totals(osc.gamma_m, 2.1e4, 1e-4).unwrap();
    let (_, s_y) = analytic_psd(&osc, &b, 0.0, 10.0 * osc.gamma_m, 401);
    let fit = fit_lorentzian(&s_y, window(&osc, 10.0 * osc.gamma_m)).unwrap();
    let est = extract_occupancies(&fit, &osc, 0.0).unwrap();
    assert!((est.n_tot / 2.1e4 - 1.0).abs() < 1e-3, "{}", est.n_tot);
    assert!((est.n_imp / 1e-4 - 1.0).abs() < 1e-3, "{}", est.n_imp);
    assert!(est.sigma_n_tot.is_finite());
}

#[test]
fn damping_raises_apparent_imprecision() {
    let osc = OscillatorParams::scaled(1e-8).unwrap();
    let b = NoiseBudget::from_totals(1e-8, 10.0, 1e-1).unwrap();
    for g in [1.0, 3.0, 8.0] {
        let ge = 1e-8 * (1.0 + g);
        let (_, s_y) = analytic_psd(&osc, &b, g, 10.0 * ge, 401);
        let fit = fit_lorentzian(&s_y, window(&osc, 10.0 * ge)).unwrap();
        let est = extract_occupancies(&fit, &osc, 0.0).unwrap();
        let r = est.n_imp_damped / (1e-1 * (1.0 + g));
        assert!((r - 1.0).abs() < 1e-6, "{r}");
    }
}

fn in_loop_line(osc: &OscillatorParams, b: &NoiseBudget, g: f64) -> SpectrumFit<f64> {
    let s = 8.0 / osc.gamma_m;
    let peak = ((b.n_tot + 0.5 + b.n_imp) / (1.0 + g).powi(2) - b.n_imp) * s;
    SpectrumFit::analytic(osc.omega_m, osc.gamma_m * (1.0 + g), peak, b.n_imp * s, PsdUnit::NormalizedPosition)
}

#[test]
fn in_loop_phonon_estimate() {
    let osc = OscillatorParams::new(hz_to_rad(4.3e6), hz_to_rad(5.7), 2.9e-15, 4.4).unwrap();
    let b = NoiseBudget::from_totals(osc.gamma_m, 2.4e4, 2.9e-4).unwrap();
    let m = minimum_occupancy(&b);

    // Optimal gain: matches the occupancy formula up to the 2 n_imp offset.
    let est = phonon_from_spectrum(&in_loop_line(&osc, &b, m.g_fb_opt), &osc, 0.0).unwrap();
    assert!((est.n_m - 4.8).abs() < 0.1, "{}", est.n_m);
    assert!((est.n_m - m.n_m_min - 2.0 * b.n_imp).abs() < 1e-9);

    // Zero gain: the estimate reduces to the bath occupancy.
    let est = phonon_from_spectrum(&in_loop_line(&osc, &b, 0.0), &osc, 0.0).unwrap();
    assert!((est.n_m / 2.4e4 - 1.0).abs() < 1e-6);

    // Deep squashing: the estimator overshoots the true occupancy.
    let g = 10.0 * m.g_fb_opt;
    let est = phonon_from_spectrum(&in_loop_line(&osc, &b, g), &osc, 0.0).unwrap();
    let truth = phonon_occupancy_at_gain(&b, g);
    assert!(est.n_m > truth);
    assert!((est.n_m - truth - 2.0 * b.n_imp).abs() < 1e-9);
    assert!(!est.squashing_artifact);
}

#[test]
fn in_loop_record_is_flat_at_optimal_gain() {
    // At g* the in-loop peak height above the floor vanishes exactly.
    let osc = OscillatorParams::new(hz_to_rad(4.3e6), hz_to_rad(5.7), 2.9e-15, 4.4).unwrap();
    let b = NoiseBudget::from_totals(osc.gamma_m, 2.4e4, 2.9e-4).unwrap();
    let g = minimum_occupancy(&b).g_fb_opt;
    let fb = FeedbackSettings::cold_damping(g, osc.omega_m).unwrap();
    let s = closed_loop_spectra(&osc, &b, &fb, &[osc.omega_m]);
    assert!((s.s_y[0] / b.n_imp - 1.0).abs() < 1e-9, "{}", s.s_y[0] / b.n_imp);
}

#[test]
fn squashing_monotonicity_beyond_optimum() {
    let osc = OscillatorParams::scaled(1e-8).unwrap();
    let b = NoiseBudget::from_totals(1e-8, 1e3, 1e-3).unwrap();
    let g_opt = minimum_occupancy(&b).g_fb_opt;
    let mut last_floor = f64::INFINITY;
    let mut last_nm = f64::NEG_INFINITY;
    for k in 1..=8 {
        let g = g_opt * (1.0 + 0.5 * k as f64);
        // Apparent in-loop floor: level of the record at resonance.
        let fb = FeedbackSettings::cold_damping(g, 1.0).unwrap();
        let floor = closed_loop_spectra(&osc, &b, &fb, &[1.0]).s_y[0];
        let nm = phonon_occupancy_at_gain(&b, g);
        assert!(floor < last_floor);
        assert!(nm > last_nm);
        last_floor = floor;
        last_nm = nm;
    }
}

#[test]
fn open_loop_area_is_twice_occupancy_plus_one() {
    let osc = OscillatorParams::scaled(1e-3).unwrap();
    let b = NoiseBudget::from_totals(1e-3, 100.0, 0.0).unwrap();
    let fb = FeedbackSettings::cold_damping(0.0, 1.0).unwrap();
    let df = 1e-3 / TAU / 40.0;
    let freq: Vec<f64> = (1..(20.0 / TAU / df) as usize).map(|i| i as f64 * df).collect();
    let om: Vec<f64> = freq.iter().map(|f| TAU * f).collect();
    let s = closed_loop_spectra(&osc, &b, &fb, &om).s_x;
    let psd = Psd::new(freq, s.iter().map(|v| v * 8e3).collect(), 1, PsdUnit::NormalizedPosition).unwrap();
    let v = integrate_variance(&psd);
    assert!((v / 201.0 - 1.0).abs() < 0.01, "{v}");
    let half = integrate_band(&psd, 0.0, 1.0 / TAU);
    assert!((half / v - 0.5).abs() < 0.01);
    assert!(!integrate_variance_report(&psd).truncated);
    let cut = integrate_band(&psd, 0.0, 1.0 / TAU);
    let _ = cut;
    let narrow = Psd::new(psd.freq[..psd.len() / 20].to_vec(), psd.value[..psd.len() / 20].to_vec(), 1, psd.unit)
        .unwrap();
    assert!(integrate_variance_report(&narrow).truncated);
}

#[test]
fn tail_fit_recovers_bath_when_peak_is_buried() {
    let osc = OscillatorParams::scaled(1e-7).unwrap();
    // Peak (n_tot + ½) barely above the floor n_imp.
    let b = NoiseBudget::from_totals(1e-7, 0.05, 0.2).unwrap();
    let (_, s_y) = analytic_psd(&osc, &b, 0.0, 200.0 * 1e-7, 8001);
    let tail = fit_tail(&s_y, window(&osc, 200.0 * 1e-7), 1.0, 20.0 * 1e-7).unwrap();
    let (n_tot, _) = occupancy_from_tail(&tail, &osc, 0.0).unwrap();
    assert!((n_tot / 0.55 - 1.0).abs() < 0.02, "{n_tot}");
}

#[test]
fn tone_in_welch_estimate_has_half_amplitude_squared() {
    let fs = 1000.0;
    let x: Vec<f64> = (0..1 << 15).map(|i| 3.0 * (TAU * 123.4 * i as f64 / fs).sin()).collect();
    let psd = welch_psd(&x, fs, 4096, 0.5).unwrap();
    let p = integrate_band(&psd, 110.0, 135.0);
    assert!((p / 4.5 - 1.0).abs() < 0.01, "{p}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn welch_preserves_variance(seed in 0u64..1_000_000, phi in -0.9f64..0.9, log_seg in 12u32..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 << 18;
        let mut x = Vec::with_capacity(n);
        let mut prev = 0.0;
        for _ in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            prev = phi * prev + e;
            x.push(prev + 5.0);
        }
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let psd = welch_psd(&x, 1.0, 1 << log_seg, 0.5).unwrap();
        let v = integrate_variance(&psd);
        prop_assert!((v / var - 1.0).abs() < 0.02, "{} vs {}", v, var);
    }
}
