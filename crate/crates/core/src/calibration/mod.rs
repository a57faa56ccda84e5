//! Parameter extraction: coupling rate from a reference tone or the optical
//! spring, mode splitting from resonant transmission and damping from
//! ringdowns. These routines work in `f64`.

mod report;
mod ringdown;
mod splitting;
mod spring;
mod tone;

pub use report::CalibrationReport;
pub use ringdown::{fit_ringdown, fit_ringdown_with, lock_in_energy, RingdownFit, RingdownOptions};
pub use splitting::{fit_mode_splitting, resonant_transmission, SplittingFit};
pub use spring::{g0_from_spring, SpringCalibration, DETUNING_TOLERANCE};
pub use tone::{calibrate_g0, default_peak_window, CalibrationTone, ToneCalibration};
