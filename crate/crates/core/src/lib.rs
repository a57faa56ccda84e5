//! Noise budgets, stochastic simulation and spectral analysis for
//! feedback-cooled optomechanical oscillators.
//!
//! Rates and frequencies are angular (rad/s) throughout; spectra are
//! single-sided. Conversion from ordinary frequency happens at the I/O edge
//! via [`units::hz_to_rad`].

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod error;
pub mod model;
pub mod rng;
pub mod sde;
pub mod spectral;
pub mod scalar;
pub mod units;

pub use error::{Error, Result};
pub use scalar::Real;

pub type OscillatorParams = model::OscillatorParams<f64>;
pub type CavityParams = model::CavityParams<f64>;
pub type MeasurementChain = model::MeasurementChain<f64>;
pub type FeedbackSettings = model::FeedbackSettings<f64>;
pub type NoiseBudget = model::NoiseBudget<f64>;

pub type OscillatorParamsF32 = model::OscillatorParams<f32>;
pub type CavityParamsF32 = model::CavityParams<f32>;
pub type MeasurementChainF32 = model::MeasurementChain<f32>;
pub type FeedbackSettingsF32 = model::FeedbackSettings<f32>;
pub type NoiseBudgetF32 = model::NoiseBudget<f32>;
