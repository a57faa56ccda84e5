//! Spectral estimation, line fitting and occupancy read-out.

mod fit;
mod occupancy;
mod psd;
mod report;

pub use fit::{
    fit_lorentzian, fit_lorentzian_with, fit_tail, FitOptions, SpectrumFit, TailFit, Weighting, RUNS_Z_THRESHOLD,
    UNRESOLVABLE_RATIO,
};
pub use occupancy::{
    extract_occupancies, occupancy_from_tail, phonon_from_spectrum, twice_zero_point, OccupancyEstimate,
    PhononEstimate,
};
pub use psd::{
    integrate_band, integrate_variance, integrate_variance_report, welch_psd, Psd, PsdUnit, VarianceReport,
};
pub use report::{psd_sha256, FitReport};
