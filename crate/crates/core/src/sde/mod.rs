//! Stochastic time-domain simulation of the oscillator under feedback.
//!
//! Positions are expressed as `u = x/x_zp`; forces as accelerations of `u`.
//! The thermal, back-action and actuator baths drive `ü` with single-sided
//! PSD `4 Ω_m² Γ_m (2n + 1)` (zero-point term on the thermal bath only) and
//! the record carries white imprecision of single-sided PSD `8 n_imp / Γ_m`.

pub mod config;
pub mod filter;
pub mod integrator;
pub mod simulate;
pub mod trajectory;

pub use config::{InitialState, Integrator, LoopModel, SimConfig, SimWarning};
pub use filter::{feedback_filter, FeedbackFilter};
pub use simulate::{simulate, simulate_ringdown, stationary_variance};
pub use trajectory::Trajectory;
