//! One-step linear maps for the oscillator and their stationary statistics.
//!
//! The state is `z = (u, s)` with `u = x/x_zp`. For the filtered loop `s` is
//! the velocity `u̇`; for the ideal velocity loop it is `p = u̇ + Γ_fb e`,
//! which removes the derivative of the white imprecision noise `e` from the
//! equations of motion:
//!
//! ```text
//! u̇ = p − Γ_fb e
//! ṗ = −Ω_m² u − Γ_eff p + Γ_eff Γ_fb e + F
//! ```
//!
//! Within a step `e` and any applied force are held constant.

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector2, Vector4};

use super::config::Integrator;

/// Affine one-step map `z' = M z + c_force F + c_imp e + L ξ`, where `L` is
/// the Cholesky factor of the step covariance for a force of unit two-sided
/// intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMap {
    pub m: Matrix2<f64>,
    pub c_force: Vector2<f64>,
    pub c_imp: Vector2<f64>,
    pub chol: Matrix2<f64>,
    /// Number of independent normals needed per force channel (1 or 2).
    pub rank: usize,
}

/// Continuous-time dynamics of the loop in `(u, s)` form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearDynamics {
    pub omega_m: f64,
    /// Damping acting on `s`: `Γ_m` for the filtered loop, `Γ_eff` for the ideal one.
    pub damping: f64,
    /// `Γ_fb` when the ideal loop feeds the record back, zero otherwise.
    pub gamma_fb: f64,
}

impl LinearDynamics {
    fn a(&self) -> Matrix2<f64> {
        Matrix2::new(0.0, 1.0, -self.omega_m * self.omega_m, -self.damping)
    }

    fn b_imp(&self) -> Vector2<f64> {
        Vector2::new(-self.gamma_fb, self.damping * self.gamma_fb)
    }
}

fn chol2(q: &Matrix2<f64>) -> Matrix2<f64> {
    let l11 = q[(0, 0)].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { q[(1, 0)] / l11 } else { 0.0 };
    let l22 = (q[(1, 1)] - l21 * l21).max(0.0).sqrt();
    Matrix2::new(l11, 0.0, l21, l22)
}

/// `∫₀^dt e^{As} b ds` via the exponential of the augmented 3×3 matrix.
fn input_integral(a: &Matrix2<f64>, b: &Vector2<f64>, dt: f64) -> Vector2<f64> {
    let mut aug = Matrix3::zeros();
    aug.fixed_view_mut::<2, 2>(0, 0).copy_from(&(a * dt));
    aug.fixed_view_mut::<2, 1>(0, 2).copy_from(&(b * dt));
    let e = aug.exp();
    Vector2::new(e[(0, 2)], e[(1, 2)])
}

/// Van Loan: `Φ = e^{A dt}` and `Q = ∫₀^dt e^{As} g gᵀ e^{Aᵀs} ds`, `g = (0, 1)`.
fn propagator_and_covariance(a: &Matrix2<f64>, dt: f64) -> (Matrix2<f64>, Matrix2<f64>) {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(&(-a * dt));
    m[(1, 3)] = dt;
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(&(a.transpose() * dt));
    let e = m.exp();
    let f12: Matrix2<f64> = e.fixed_view::<2, 2>(0, 2).into();
    let f22: Matrix2<f64> = e.fixed_view::<2, 2>(2, 2).into();
    let phi = f22.transpose();
    let mut q = phi * f12;
    q = 0.5 * (q + q.transpose());
    (phi, q)
}

pub fn step_map(integrator: Integrator, dyn_: &LinearDynamics, dt: f64) -> StepMap {
    match integrator {
        Integrator::SymplecticEuler => {
            let w2 = dyn_.omega_m * dyn_.omega_m;
            let g = dyn_.damping;
            let gf = dyn_.gamma_fb;
            // s' = s + dt(−Ω²u − Γs + Γ Γ_fb e + F) + kick;  u' = u + dt(s' − Γ_fb e)
            let m = Matrix2::new(1.0 - dt * dt * w2, dt * (1.0 - g * dt), -dt * w2, 1.0 - g * dt);
            let c_force = Vector2::new(dt * dt, dt);
            let c_imp = Vector2::new(dt * (dt * g * gf - gf), dt * g * gf);
            let sq = dt.sqrt();
            let chol = Matrix2::new(dt * sq, 0.0, sq, 0.0);
            StepMap {
                m,
                c_force,
                c_imp,
                chol,
                rank: 1,
            }
        }
        Integrator::Exact => {
            let a = dyn_.a();
            let (phi, q) = propagator_and_covariance(&a, dt);
            let c_force = input_integral(&a, &Vector2::new(0.0, 1.0), dt);
            let c_imp = input_integral(&a, &dyn_.b_imp(), dt);
            StepMap {
                m: phi,
                c_force,
                c_imp,
                chol: chol2(&q),
                rank: 2,
            }
        }
    }
}

impl StepMap {
    /// Step covariance for unit two-sided force intensity.
    pub fn unit_covariance(&self) -> Matrix2<f64> {
        self.chol * self.chol.transpose()
    }

    /// Stationary covariance of `z` for total two-sided force intensity
    /// `force_intensity` and per-step imprecision variance `imp_var`, from
    /// the discrete Lyapunov equation `P = M P Mᵀ + Q`.
    pub fn stationary_covariance(&self, force_intensity: f64, imp_var: f64) -> Option<Matrix2<f64>> {
        let q = self.unit_covariance() * force_intensity + self.c_imp * self.c_imp.transpose() * imp_var;
        let m = &self.m;
        // Column-major vec: vec(M P Mᵀ) = (M ⊗ M) vec(P).
        let mut kron = Matrix4::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        kron[(i + 2 * j, k + 2 * l)] = m[(i, k)] * m[(j, l)];
                    }
                }
            }
        }
        let lhs = Matrix4::identity() - kron;
        let rhs = Vector4::new(q[(0, 0)], q[(1, 0)], q[(0, 1)], q[(1, 1)]);
        let p = lhs.lu().solve(&rhs)?;
        Some(Matrix2::new(p[0], p[2], p[1], p[3]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_loop(g: f64) -> LinearDynamics {
        LinearDynamics {
            omega_m: 1.0,
            damping: g,
            gamma_fb: 0.0,
        }
    }

    #[test]
    fn exact_map_matches_continuous_stationary_variance() {
        // Continuous OU oscillator: Var u = q / (2 Γ Ω²).
        let d = open_loop(1e-2);
        let map = step_map(Integrator::Exact, &d, 0.05);
        let p = map.stationary_covariance(1.0, 0.0).unwrap();
        let expect = 1.0 / (2.0 * 1e-2);
        assert!((p[(0, 0)] / expect - 1.0).abs() < 1e-8, "{}", p[(0, 0)]);
        assert!((p[(1, 1)] / expect - 1.0).abs() < 1e-8);
    }

    #[test]
    fn exact_homogeneous_step_is_damped_rotation() {
        let g: f64 = 0.1;
        let dt = 0.3;
        let map = step_map(Integrator::Exact, &open_loop(g), dt);
        let wd = (1.0 - g * g / 4.0).sqrt();
        // u(t) = e^{−Γt/2}(cos ω_d t + Γ/(2ω_d) sin ω_d t) for u(0)=1, u̇(0)=0.
        let expect = (-g * dt / 2.0).exp() * ((wd * dt).cos() + g / (2.0 * wd) * (wd * dt).sin());
        assert!((map.m[(0, 0)] - expect).abs() < 1e-12);
    }

    #[test]
    fn symplectic_euler_converges_with_step() {
        let d = open_loop(1e-3);
        let v = |dt: f64| {
            step_map(Integrator::SymplecticEuler, &d, dt)
                .stationary_covariance(1.0, 0.0)
                .unwrap()[(0, 0)]
        };
        let exact = 1.0 / (2.0 * 1e-3);
        let coarse = (v(0.05) / exact - 1.0).abs();
        let fine = (v(0.025) / exact - 1.0).abs();
        assert!(fine < coarse);
    }
}
