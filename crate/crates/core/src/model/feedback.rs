//! Closed-loop spectra and cooling performance under velocity feedback.

use serde::{Deserialize, Serialize};

use super::budget::NoiseBudget;
use super::params::{FeedbackSettings, OscillatorParams};
use crate::scalar::Real;

/// In-loop spectra normalized to `2 S_x_zp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopSpectra<T> {
    /// Physical position.
    pub s_x: Vec<T>,
    /// Measurement record (position plus imprecision).
    pub s_y: Vec<T>,
}

/// Spectra of the position and of the in-loop record at angular frequencies
/// `omega_grid`, for ideal velocity feedback of gain `fb.gain`.
pub fn closed_loop_spectra<T: Real>(
    osc: &OscillatorParams<T>,
    budget: &NoiseBudget<T>,
    fb: &FeedbackSettings<T>,
    omega_grid: &[T],
) -> ClosedLoopSpectra<T> {
    let wm2 = osc.omega_m * osc.omega_m;
    let gm2 = osc.gamma_m * osc.gamma_m;
    let ge = fb.gamma_eff(osc.gamma_m);
    let ge2 = ge * ge;
    let drive = (budget.force_occupancy() + T::lit(0.5)) * wm2 * gm2;
    let g2 = fb.gain * fb.gain;
    let n_imp = budget.n_imp;
    let mut s_x = Vec::with_capacity(omega_grid.len());
    let mut s_y = Vec::with_capacity(omega_grid.len());
    for &w in omega_grid {
        let w2 = w * w;
        let det = wm2 - w2;
        let d = det * det + w2 * ge2;
        s_x.push((drive + n_imp * g2 * w2 * gm2) / d);
        s_y.push((drive + n_imp * (det * det + w2 * gm2)) / d);
    }
    ClosedLoopSpectra { s_x, s_y }
}

/// Normalized in-loop record spectrum at the mechanical resonance:
/// `(N + ½ + n_imp)(Γ_m/Γ_eff)²`.
pub fn record_on_resonance<T: Real>(budget: &NoiseBudget<T>, gain: T) -> T {
    let r = T::one() / (T::one() + gain);
    (budget.force_occupancy() + T::lit(0.5) + budget.n_imp) * r * r
}

/// True when the in-loop record dips below its imprecision floor at resonance.
pub fn is_squashed<T: Real>(budget: &NoiseBudget<T>, gain: T) -> bool {
    record_on_resonance(budget, gain) < budget.n_imp
}

/// Mean phonon number under feedback of gain `fb.gain`:
/// `[(n_tot + n_fb + ½) + n_imp g²] / (1 + g) − ½`.
pub fn phonon_occupancy<T: Real>(budget: &NoiseBudget<T>, fb: &FeedbackSettings<T>) -> T {
    phonon_occupancy_at_gain(budget, fb.gain)
}

pub fn phonon_occupancy_at_gain<T: Real>(budget: &NoiseBudget<T>, gain: T) -> T {
    let half = T::lit(0.5);
    (budget.force_occupancy() + half + budget.n_imp * gain * gain) / (T::one() + gain) - half
}

/// Optimum of [`phonon_occupancy`] over the gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimumOccupancy<T> {
    /// Minimum phonon number, exact for the occupancy formula, clamped at 0.
    pub n_m_min: T,
    /// Gain attaining it: `−1 + sqrt(1 + (N + ½)/n_imp)`.
    pub g_fb_opt: T,
    /// Large-bath approximation `2 sqrt(N n_imp) − ½`, clamped at 0.
    pub n_m_min_asymptotic: T,
    /// Large-bath approximation `sqrt(N / n_imp)`.
    pub g_fb_opt_asymptotic: T,
    /// False when `N` is not large compared to ½, so that the asymptotic
    /// forms are unreliable, or when the asymptotic minimum had to be clamped.
    pub asymptotic_valid: bool,
}

/// `N ≫ ½` threshold used to flag the asymptotic forms.
const LARGE_BATH: f64 = 50.0;

pub fn minimum_occupancy<T: Real>(budget: &NoiseBudget<T>) -> MinimumOccupancy<T> {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let n = budget.force_occupancy();
    let imp = budget.n_imp;
    let g_opt = (T::one() + (n + half) / imp).sqrt() - T::one();
    // At the stationary point (N + ½ + n_imp g²)/(1 + g) = 2 n_imp g.
    let exact = two * imp * g_opt - half;
    let asym = two * (n * imp).sqrt() - half;
    MinimumOccupancy {
        n_m_min: exact.max(T::zero()),
        g_fb_opt: g_opt,
        n_m_min_asymptotic: asym.max(T::zero()),
        g_fb_opt_asymptotic: (n / imp).sqrt(),
        asymptotic_valid: n >= T::lit(LARGE_BATH) && asym >= T::zero(),
    }
}

/// Optimal feedback filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalFilter<T> {
    /// `|χ_fb|` per unit mass (s²).
    pub magnitude: Vec<T>,
    /// `arg χ_fb` (rad), in `[0, π]`.
    pub phase: Vec<T>,
}

/// Filter minimizing the phonon number: phase `atan2(ΩΓ_m, Ω_m² − Ω²)` and
/// magnitude `|χ_m⁻¹| S_imp / S_F,tot`.
pub fn optimal_filter<T: Real>(
    osc: &OscillatorParams<T>,
    budget: &NoiseBudget<T>,
    omega_grid: &[T],
) -> OptimalFilter<T> {
    let wm2 = osc.omega_m * osc.omega_m;
    let gm = osc.gamma_m;
    // Both spectra in units of 2 S_x_zp: S_F,tot/m² = (N + ½) Ω_m² Γ_m²,
    // S_x,imp = n_imp.
    let force = (budget.force_occupancy() + T::lit(0.5)) * wm2 * gm * gm;
    let mut magnitude = Vec::with_capacity(omega_grid.len());
    let mut phase = Vec::with_capacity(omega_grid.len());
    for &w in omega_grid {
        let re = wm2 - w * w;
        let im = w * gm;
        magnitude.push(budget.n_imp * re.hypot(im) / force);
        phase.push(im.atan2(re));
    }
    OptimalFilter { magnitude, phase }
}

/// One inequality with its evaluated sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition<T> {
    pub satisfied: bool,
    /// Left-hand side.
    pub value: T,
    /// Right-hand side.
    pub threshold: T,
    /// How far the requirement is met, as a ratio ≥ 1 when satisfied.
    pub margin: T,
}

fn less_than<T: Real>(value: T, threshold: T) -> Condition<T> {
    Condition {
        satisfied: value < threshold,
        value,
        threshold,
        margin: threshold / value,
    }
}

/// Conditions for feedback cooling below one phonon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateReport<T> {
    /// `n_imp < (9/16) / (n_tot + n_fb)`: the optimal-gain minimum is below one.
    pub below_one_phonon: Condition<T>,
    /// `n_imp < 1/(2 n_th)`: necessary condition once back-action is bounded
    /// by the uncertainty product.
    pub imprecision: Condition<T>,
    /// `Γ_meas > Γ_th/8`; `margin` is `8 Γ_meas/Γ_th`.
    pub measurement_rate: Condition<T>,
    /// `Γ_meas / Γ_th`.
    pub rate_ratio: T,
}

pub fn ground_state_conditions<T: Real>(budget: &NoiseBudget<T>) -> GroundStateReport<T> {
    let n = budget.force_occupancy();
    let below = less_than(budget.n_imp, T::lit(9.0 / 16.0) / n);
    let imprecision = less_than(budget.n_imp, T::one() / (T::lit(2.0) * budget.n_th));
    let needed = budget.gamma_th / T::lit(8.0);
    let rate = Condition {
        satisfied: budget.gamma_meas > needed,
        value: budget.gamma_meas,
        threshold: needed,
        margin: budget.gamma_meas / needed,
    };
    GroundStateReport {
        below_one_phonon: below,
        imprecision,
        measurement_rate: rate,
        rate_ratio: budget.gamma_meas / budget.gamma_th,
    }
}
