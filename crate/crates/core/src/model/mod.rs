//! Closed-form optomechanical noise model.

pub mod budget;
pub mod feedback;
pub mod params;
pub mod readout;

pub use budget::{budget_inputs, noise_budget, optimal_photon_number, product_closed_form, BudgetInputs, NoiseBudget};
pub use feedback::{
    closed_loop_spectra, ground_state_conditions, is_squashed, minimum_occupancy, optimal_filter,
    phonon_occupancy, phonon_occupancy_at_gain, record_on_resonance, ClosedLoopSpectra, Condition,
    GroundStateReport, MinimumOccupancy, OptimalFilter,
};
pub use params::{CavityParams, FeedbackSettings, MeasurementChain, OscillatorParams};
pub use readout::{
    backaction_occupancy, component_ideality, dynamic_backaction, imprecision_occupancy,
    intracavity_photons, readout_ideality, spring_shift_per_g0_squared, thermal_occupancy,
    thermal_occupancy_classical, transmission, transmission_amplitude, transmission_at,
    zero_point_spectra, BackactionOccupancy, DynamicBackaction, ImprecisionOccupancy,
    PhotonNumbers, ZeroPointSpectra,
};
