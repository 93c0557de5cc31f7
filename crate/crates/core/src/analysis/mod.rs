//! Figure-of-merit extraction: regressions, the Butterworth fit, bandwidth,
//! CMRR, clearance, efficiency accounting and the full characterization.

mod butterworth;
mod characterize;
mod metrics;
mod regression;
mod report;

pub use butterworth::{bandwidth_3db, bandwidth_details, fit_butterworth, Bandwidth, ButterworthFit, P_STARTS};
pub use characterize::{
    analyze, characterize, characterize_full, simulate_measurements, AnalysisSettings, Characterization, DcPoint,
    MeasuredData, SweepConfig, CMRR_IMBALANCE, SATURATION_IMBALANCE,
};
pub use metrics::{
    clearance, cmrr, cmrr_from_raw_db, decouple_coupling, electronic_current_noise_density, eta_snr, total_efficiency,
    Cmrr, ADDITION_CORRECTION_DB,
};
pub use regression::{
    detect_saturation, fit_dc_efficiency, fit_linearity, ols, EfficiencyFit, LinearFit, LinearityPolicy,
};
pub use report::{read_flat_fields, CharacterizationReport, UNAVAILABLE};
