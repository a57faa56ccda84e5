//! Monte Carlo integration of the feedback-cooled oscillator.

use nalgebra::Vector2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::config::{InitialState, LoopModel, SimConfig};
use super::filter::{feedback_filter, FeedbackFilter};
use super::integrator::{step_map, LinearDynamics, StepMap};
use super::trajectory::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Channel};

/// Instability threshold in units of the thermal amplitude `sqrt(2 n_tot + 1)`.
pub const INSTABILITY_FACTOR: f64 = 1e6;

/// Single-sided force PSD (for `ü`) of a bath at occupancy `n`, excluding the
/// zero-point term: `8 Ω_m² Γ_m n`.
fn force_psd(omega_m: f64, gamma_m: f64, n: f64) -> f64 {
    8.0 * omega_m * omega_m * gamma_m * n
}

/// Per-step imprecision variance matching the flat record PSD `8 n_imp/Γ_m`.
pub fn imprecision_variance(n_imp: f64, gamma_m: f64, dt: f64) -> f64 {
    4.0 * n_imp / (gamma_m * dt)
}

/// Two-sided force intensities `(thermal, back-action, actuator)`. The
/// thermal channel carries the zero-point `+½` unless disabled.
pub fn force_intensities(cfg: &SimConfig) -> [f64; 3] {
    let w = cfg.osc.omega_m;
    let g = cfg.osc.gamma_m;
    let b = &cfg.budget;
    let zp = if cfg.zero_point { 0.5 } else { 0.0 };
    [
        0.5 * force_psd(w, g, b.n_th + zp),
        0.5 * force_psd(w, g, b.n_ba + b.n_ba_ex),
        0.5 * force_psd(w, g, b.n_fb),
    ]
}

fn dynamics(cfg: &SimConfig) -> LinearDynamics {
    match cfg.loop_model {
        LoopModel::Ideal => LinearDynamics {
            omega_m: cfg.osc.omega_m,
            damping: cfg.gamma_eff(),
            gamma_fb: cfg.fb.gamma_fb(cfg.osc.gamma_m),
        },
        LoopModel::Filtered => LinearDynamics {
            omega_m: cfg.osc.omega_m,
            damping: cfg.osc.gamma_m,
            gamma_fb: 0.0,
        },
    }
}

/// Discrete-time stationary variance of `u` implied by the integrator for
/// the ideal loop (or an open loop). `None` for a feedback filter, whose
/// internal state is not part of the oscillator map.
pub fn stationary_variance(cfg: &SimConfig) -> Option<f64> {
    if cfg.loop_model == LoopModel::Filtered && cfg.fb.gain != 0.0 {
        return None;
    }
    let map = step_map(cfg.integrator, &dynamics(cfg), cfg.dt);
    let q: f64 = force_intensities(cfg).iter().sum();
    let imp = match cfg.loop_model {
        LoopModel::Ideal => imprecision_variance(cfg.budget.n_imp, cfg.osc.gamma_m, cfg.dt),
        LoopModel::Filtered => 0.0,
    };
    map.stationary_covariance(q, imp).map(|p| p[(0, 0)])
}

/// Coherent drive switched off at `off_time`.
#[derive(Debug, Clone, Copy)]
struct Drive {
    /// Acceleration amplitude (1/s²).
    amplitude: f64,
    omega: f64,
    off_time: f64,
}

struct Noise {
    rng: ChaCha8Rng,
    scale: f64,
}

impl Noise {
    fn new(cfg: &SimConfig, index: u64, channel: Channel, scale: f64) -> Option<Self> {
        (scale > 0.0).then(|| Noise {
            rng: stream(cfg.seed, index, channel),
            scale,
        })
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn run_one(cfg: &SimConfig, map: &StepMap, index: u64, drive: Option<Drive>) -> Result<Trajectory> {
    let dt = cfg.dt;
    let n_steps = (cfg.duration / dt).floor() as usize;
    let burn_steps = (cfg.burn_in / dt).ceil() as usize;
    let stride = cfg.record_stride;
    let ideal = cfg.loop_model == LoopModel::Ideal;
    let gamma_fb = cfg.fb.gamma_fb(cfg.osc.gamma_m);
    let filter_gain = -cfg.fb.gain * cfg.osc.gamma_m * cfg.osc.omega_m;
    let mut filter: Option<FeedbackFilter> = if !ideal && cfg.fb.gain > 0.0 {
        Some(feedback_filter(&cfg.fb, 1.0 / dt)?)
    } else {
        None
    };

    let mut forces: Vec<Noise> = force_intensities(cfg)
        .iter()
        .zip([Channel::Thermal, Channel::Backaction, Channel::Actuator])
        .filter_map(|(&q, ch)| Noise::new(cfg, index, ch, q.sqrt()))
        .collect();
    let sigma_e = imprecision_variance(cfg.budget.n_imp, cfg.osc.gamma_m, dt).sqrt();
    let mut imp = Noise::new(cfg, index, Channel::Imprecision, sigma_e);

    let mut z = match cfg.initial {
        InitialState::Rest => Vector2::zeros(),
        // With no imprecision drawn yet, p = u̇ for the ideal loop as well.
        InitialState::Fixed { u, v } => Vector2::new(u, v),
        InitialState::Stationary => {
            let var = stationary_variance(cfg).ok_or_else(|| {
                invalid("initial", "stationary start requires the ideal loop or zero gain")
            })?;
            let map_q: f64 = force_intensities(cfg).iter().sum();
            let imp_var = if ideal { sigma_e * sigma_e } else { 0.0 };
            let p = map
                .stationary_covariance(map_q, imp_var)
                .ok_or_else(|| invalid("initial", "stationary covariance is singular"))?;
            debug_assert!((p[(0, 0)] - var).abs() <= 1e-9 * var.abs().max(1.0));
            let l11 = p[(0, 0)].max(0.0).sqrt();
            let l21 = if l11 > 0.0 { p[(1, 0)] / l11 } else { 0.0 };
            let l22 = (p[(1, 1)] - l21 * l21).max(0.0).sqrt();
            let mut rng = stream(cfg.seed, index, Channel::Initial);
            let (a, b) = (normal(&mut rng), normal(&mut rng));
            Vector2::new(l11 * a, l21 * a + l22 * b)
        }
    };

    let limit = INSTABILITY_FACTOR * (2.0 * cfg.budget.n_tot + 1.0).sqrt();
    let limit = match (drive, cfg.initial) {
        (Some(d), _) => limit.max(10.0 * d.amplitude / (cfg.osc.omega_m * cfg.osc.gamma_m)),
        (None, InitialState::Fixed { u, .. }) => limit.max(10.0 * u.abs()),
        _ => limit,
    };

    let n_rec = n_steps.saturating_sub(burn_steps) / stride;
    let mut out = Trajectory::with_capacity(n_rec);
    let mut acc_y = 0.0;
    let mut acc_f = 0.0;
    let mut acc_n = 0usize;
    let mut e_prev = 0.0;

    for k in 0..n_steps {
        let t = k as f64 * dt;
        let e = imp.as_mut().map_or(0.0, |n| n.scale * normal(&mut n.rng));
        let u = z[0];
        let y = u + e;

        let (f_applied, f_report) = if ideal {
            let v = z[1] - gamma_fb * e_prev;
            (0.0, -gamma_fb * (v + (e - e_prev) / dt))
        } else if let Some(f) = filter.as_mut() {
            let f = filter_gain * f.process(y);
            (f, f)
        } else {
            (0.0, 0.0)
        };

        if k >= burn_steps {
            let rel = k - burn_steps;
            if rel.is_multiple_of(stride) {
                out.t.push(t);
                out.u.push(u);
                acc_y = 0.0;
                acc_f = 0.0;
                acc_n = 0;
            }
            acc_y += y;
            acc_f += f_report;
            acc_n += 1;
            if acc_n == stride {
                let m = 1.0 / stride as f64;
                out.y.push(acc_y * m);
                out.f_fb.push(acc_f * m);
            }
        }

        let mut drive_force = 0.0;
        if let Some(d) = drive {
            if t < d.off_time {
                drive_force = d.amplitude * (d.omega * (t + 0.5 * dt)).cos();
            }
        }

        let mut next = map.m * z + map.c_force * (f_applied + drive_force);
        if ideal {
            next += map.c_imp * e;
        }
        for n in forces.iter_mut() {
            let a = normal(&mut n.rng);
            if map.rank == 2 {
                let b = normal(&mut n.rng);
                next += map.chol * Vector2::new(a, b) * n.scale;
            } else {
                next += map.chol.column(0) * (a * n.scale);
            }
        }
        z = next;
        e_prev = e;

        if !(z[0].abs() <= limit) {
            return Err(Error::LoopUnstable {
                amplitude: z[0].abs(),
                limit,
                time: t + dt,
            });
        }
    }
    // Drop a trailing partial block.
    out.t.truncate(out.y.len());
    out.u.truncate(out.y.len());
    Ok(out)
}

fn run_all(cfg: &SimConfig, drive: Option<Drive>) -> Result<Vec<Trajectory>> {
    let map = step_map(cfg.integrator, &dynamics(cfg), cfg.dt);
    (0..cfg.n_trajectories as u64)
        .into_par_iter()
        .map(|i| run_one(cfg, &map, i, drive))
        .collect()
}

/// Simulates `cfg.n_trajectories` independent trajectories, in index order.
///
/// Trajectory `i` draws its noise from streams keyed by `(cfg.seed, i)`, so
/// the output does not depend on the number of worker threads.
pub fn simulate(cfg: &SimConfig) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    run_all(cfg, None)
}

/// Drives the oscillator at `drive_freq` (rad/s) until `drive_off_time` (s),
/// then lets it ring down under the configured noise and feedback.
///
/// The drive strength is set by [`SimConfig::ringdown_amplitude`] as the
/// resonant steady-state amplitude. One trajectory is produced per
/// `cfg.n_trajectories`.
pub fn simulate_ringdown(cfg: &SimConfig, drive_freq: f64, drive_off_time: f64) -> Result<Vec<Trajectory>> {
    cfg.validate_step()?;
    if !(drive_freq > 0.0) {
        return Err(invalid("drive_freq", "must be positive"));
    }
    if !(drive_off_time >= 0.0 && drive_off_time < cfg.duration) {
        return Err(invalid("drive_off_time", "must lie within the simulated span"));
    }
    let drive = Drive {
        amplitude: cfg.ringdown_amplitude() * cfg.osc.omega_m * cfg.osc.gamma_m,
        omega: drive_freq,
        off_time: drive_off_time,
    };
    run_all(cfg, Some(drive))
}
