//! Offline gain synthesis and certification.

mod bound;
mod lmi;
mod synth;

pub use bound::{
    asymptotic_error_bound, tune_chi, worst_case_params_from_model, ModelBounds, WorstCaseParams,
};
pub use lmi::{
    lmi_block_matrix, lmi_feasible_lpv, lmi_feasible_matrix, lmi_feasible_scalar, LmiScalarParams,
    LMI_TOL,
};
pub use synth::{
    default_rho_grid, design_lpv_gain, design_static_gain, uniform_theta_grid, GainCertificate,
    ParamsEcho, DEFAULT_NU,
};
