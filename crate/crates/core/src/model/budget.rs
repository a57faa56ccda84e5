//! Noise budget: occupancies, measurement rate and the imprecision/back-action product.

use serde::{Deserialize, Serialize};

use super::params::{CavityParams, MeasurementChain, OscillatorParams};
use super::readout::{intracavity_photons, readout_ideality, thermal_occupancy};
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Occupancy-level description of the measurement.
///
/// Everything in the feedback model and the simulator is expressed in these
/// unit-free numbers plus the intrinsic damping rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget<T> {
    /// Intrinsic mechanical damping Γ_m (rad/s).
    pub gamma_m: T,
    pub n_th: T,
    pub n_ba: T,
    pub n_ba_ex: T,
    /// `n_th + n_ba + n_ba_ex`.
    pub n_tot: T,
    pub n_imp_shot: T,
    pub n_imp_ex: T,
    /// `n_imp_shot + n_imp_ex`.
    pub n_imp: T,
    /// Feedback actuator noise occupancy.
    pub n_fb: T,
    /// `Γ_m / 16 n_imp` (rad/s).
    pub gamma_meas: T,
    /// `n_th Γ_m` (rad/s).
    pub gamma_th: T,
    /// `4 sqrt(n_imp n_tot)` from the components.
    pub product: T,
    /// The same product from its closed form in `(ξ, C₀, C₀ᵉˣ, n_th, n_c)`,
    /// when the budget was assembled from those inputs.
    pub product_closed_form: Option<T>,
}

/// Inputs of the cooperativity/photon-number parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetInputs<T> {
    pub gamma_m: T,
    pub n_th: T,
    /// Single-photon cooperativity C₀.
    pub c0: T,
    /// Excess cooperativity C₀ᵉˣ.
    pub c0_ex: T,
    /// Intracavity photon number n_c.
    pub n_c: T,
    /// Readout ideality ξ.
    pub ideality: T,
    pub n_imp_ex: T,
    pub n_fb: T,
}

impl<T: Real> BudgetInputs<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_m > T::zero()) {
            return Err(invalid("gamma_m", "must be positive"));
        }
        if !(self.n_th >= T::zero()) {
            return Err(invalid("n_th", "must be non-negative"));
        }
        if !(self.c0 > T::zero()) {
            return Err(invalid("c0", "must be positive"));
        }
        if !(self.c0_ex >= T::zero()) {
            return Err(invalid("c0_ex", "must be non-negative"));
        }
        if !(self.n_c >= T::zero()) {
            return Err(invalid("n_c", "must be non-negative"));
        }
        if !(self.ideality > T::zero() && self.ideality <= T::one()) {
            return Err(invalid("ideality", "must lie in (0, 1]"));
        }
        if !(self.n_imp_ex >= T::zero()) {
            return Err(invalid("n_imp_ex", "must be non-negative"));
        }
        if !(self.n_fb >= T::zero()) {
            return Err(invalid("n_fb", "must be non-negative"));
        }
        Ok(())
    }

    pub fn with_photons(mut self, n_c: T) -> Self {
        self.n_c = n_c;
        self
    }
}

/// `4 sqrt(n_imp n_tot)` written in terms of the readout parameters:
///
/// `sqrt((1/ξ)(1 + n_th/(C₀n_c) + C₀ᵉˣ/C₀)(1 + n_c/n_cᵉˣ))`, with
/// `n_cᵉˣ = (16 ξ C₀ n_impᵉˣ)⁻¹` the photon number at which shot-noise
/// imprecision equals the extraneous floor.
pub fn product_closed_form<T: Real>(inputs: &BudgetInputs<T>) -> T {
    let BudgetInputs {
        n_th,
        c0,
        c0_ex,
        n_c,
        ideality: xi,
        n_imp_ex,
        ..
    } = *inputs;
    let one = T::one();
    let ba = one + n_th / (c0 * n_c) + c0_ex / c0;
    // n_c / n_cᵉˣ = 16 ξ C₀ n_impᵉˣ n_c
    let imp = one + T::lit(16.0) * xi * c0 * n_imp_ex * n_c;
    (ba * imp / xi).sqrt()
}

/// Photon number minimizing [`product_closed_form`] over `n_c`:
/// `sqrt(b / (a c))` with `a = 1 + C₀ᵉˣ/C₀`, `b = n_th/C₀` and
/// `c = 16 ξ C₀ n_impᵉˣ`. Infinite when there is no extraneous imprecision.
pub fn optimal_photon_number<T: Real>(inputs: &BudgetInputs<T>) -> T {
    let a = T::one() + inputs.c0_ex / inputs.c0;
    let b = inputs.n_th / inputs.c0;
    let c = T::lit(16.0) * inputs.ideality * inputs.c0 * inputs.n_imp_ex;
    (b / (a * c)).sqrt()
}

impl<T: Real> NoiseBudget<T> {
    /// Budget from bare occupancies.
    pub fn from_occupancies(
        gamma_m: T,
        n_th: T,
        n_ba: T,
        n_ba_ex: T,
        n_imp_shot: T,
        n_imp_ex: T,
        n_fb: T,
    ) -> Result<Self> {
        if !(gamma_m > T::zero()) {
            return Err(invalid("gamma_m", "must be positive"));
        }
        for (name, v) in [
            ("n_th", n_th),
            ("n_ba", n_ba),
            ("n_ba_ex", n_ba_ex),
            ("n_imp_shot", n_imp_shot),
            ("n_imp_ex", n_imp_ex),
            ("n_fb", n_fb),
        ] {
            if !(v >= T::zero()) {
                return Err(invalid(name, "must be non-negative"));
            }
        }
        let n_tot = n_th + n_ba + n_ba_ex;
        let n_imp = n_imp_shot + n_imp_ex;
        Ok(Self {
            gamma_m,
            n_th,
            n_ba,
            n_ba_ex,
            n_tot,
            n_imp_shot,
            n_imp_ex,
            n_imp,
            n_fb,
            gamma_meas: gamma_m / (T::lit(16.0) * n_imp),
            gamma_th: n_th * gamma_m,
            product: T::lit(4.0) * (n_imp * n_tot).sqrt(),
            product_closed_form: None,
        })
    }

    /// Budget with the total bath folded into `n_th` and the imprecision in
    /// `n_imp_shot`; handy for feedback studies that only know the totals.
    pub fn from_totals(gamma_m: T, n_tot: T, n_imp: T) -> Result<Self> {
        Self::from_occupancies(gamma_m, n_tot, T::zero(), T::zero(), n_imp, T::zero(), T::zero())
    }

    /// Budget from cooperativities and photon number.
    pub fn assemble(inputs: &BudgetInputs<T>) -> Result<Self> {
        inputs.validate()?;
        let n_ba = inputs.c0 * inputs.n_c;
        let n_ba_ex = inputs.c0_ex * inputs.n_c;
        let n_imp_shot = T::one() / (T::lit(16.0) * inputs.ideality * inputs.c0 * inputs.n_c);
        let mut b = Self::from_occupancies(
            inputs.gamma_m,
            inputs.n_th,
            n_ba,
            n_ba_ex,
            n_imp_shot,
            inputs.n_imp_ex,
            inputs.n_fb,
        )?;
        b.product_closed_form = Some(product_closed_form(inputs));
        Ok(b)
    }

    pub fn with_n_fb(mut self, n_fb: T) -> Self {
        self.n_fb = n_fb;
        self
    }

    /// Force-noise occupancy seen by the loop: `n_tot + n_fb`.
    pub fn force_occupancy(&self) -> T {
        self.n_tot + self.n_fb
    }
}

/// Readout parameters collected from the physical parameter sets (resonant probing only).
pub fn budget_inputs<T: Real>(
    osc: &OscillatorParams<T>,
    cav: &CavityParams<T>,
    chain: &MeasurementChain<T>,
) -> Result<BudgetInputs<T>> {
    let n_c = intracavity_photons(cav, chain)?.plus;
    Ok(BudgetInputs {
        gamma_m: osc.gamma_m,
        n_th: thermal_occupancy(osc),
        c0: chain.cooperativity(cav, osc),
        c0_ex: chain.c0_extraneous,
        n_c,
        ideality: readout_ideality(cav, chain)?,
        n_imp_ex: chain.n_imp_extraneous,
        n_fb: chain.n_fb,
    })
}

/// Full noise budget for resonant probing.
pub fn noise_budget<T: Real>(
    osc: &OscillatorParams<T>,
    cav: &CavityParams<T>,
    chain: &MeasurementChain<T>,
) -> Result<NoiseBudget<T>> {
    NoiseBudget::assemble(&budget_inputs(osc, cav, chain)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rel_diff;
    use crate::{CavityParams, MeasurementChain, NoiseBudget, OscillatorParams};

    fn hz_to_rad(f: f64) -> f64 {
        crate::units::hz_to_rad(f)
    }

    fn figure2(n_c: f64) -> BudgetInputs<f64> {
        BudgetInputs {
            gamma_m: hz_to_rad(5.7),
            n_th: 2.1e4,
            c0: 0.31,
            c0_ex: 0.56,
            n_c,
            ideality: 0.23,
            n_imp_ex: 0.70e-5,
            n_fb: 0.0,
        }
    }

    #[test]
    fn product_near_five_at_optimum() {
        let b = NoiseBudget::assemble(&figure2(5e4)).unwrap();
        assert!((b.product - 5.03).abs() < 0.01, "product {}", b.product);
        assert!(rel_diff(b.product, b.product_closed_form.unwrap()) < 1e-12);
        assert!((b.n_ba / (b.n_ba + b.n_ba_ex) - 0.356).abs() < 1e-3);
    }

    #[test]
    fn photon_optimum_is_stationary() {
        let inputs = figure2(1.0);
        let n = optimal_photon_number(&inputs);
        assert!((n / 5.5e4 - 1.0).abs() < 0.02, "{n}");
        let p = |m: f64| product_closed_form(&inputs.with_photons(m));
        assert!(p(n) < p(n * 1.01) && p(n) < p(n / 1.01));
    }

    #[test]
    fn rates() {
        let b = NoiseBudget::from_occupancies(hz_to_rad(5.7), 2.1e4, 0.0, 0.0, 2.7e-5, 0.0, 0.0).unwrap();
        assert!((b.gamma_meas / hz_to_rad(13.19e3) - 1.0).abs() < 1e-3);
        assert!((b.gamma_th / hz_to_rad(119.7e3) - 1.0).abs() < 1e-3);
        assert!((b.gamma_meas / b.gamma_th - 0.110).abs() < 1e-3);
    }

    #[test]
    fn quantum_limited_product_is_one() {
        for n_c in [1e-2, 1.0, 3.7e3, 1e8] {
            let inputs = BudgetInputs {
                n_th: 0.0,
                c0_ex: 0.0,
                ideality: 1.0,
                n_imp_ex: 0.0,
                ..figure2(n_c)
            };
            let b = NoiseBudget::assemble(&inputs).unwrap();
            let p = 4.0 * (b.n_imp_shot * b.n_ba).sqrt();
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn physical_chain_reproduces_photon_number() {
        let osc = OscillatorParams::new(hz_to_rad(4.3e6), hz_to_rad(5.7), 2.9e-15, 4.4).unwrap();
        let cav = CavityParams::from_linewidth(hz_to_rad(0.91e9), 0.52, hz_to_rad(360e6), 775e-9).unwrap();
        let chain = MeasurementChain::new(hz_to_rad(20e3), 0.7, 1e-6).unwrap();
        let b = noise_budget(&osc, &cav, &chain).unwrap();
        assert!(rel_diff(b.product, b.product_closed_form.unwrap()) < 1e-12);
        assert!(noise_budget(&osc, &cav.with_detuning(1.0), &chain).is_err());
    }
}
