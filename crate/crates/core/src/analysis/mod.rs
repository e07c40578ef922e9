//! Steady-state predictions for the SM-CM-GSC beamformer and the
//! verification mathematics behind the CM-GSC cost.

mod fourth_moment;
mod hessian;
mod stability;
mod steady_state;

pub use fourth_moment::{
    dropped_cross_term, fourth_moment_bruteforce, fourth_moment_paper, sample_phase_balanced, MAX_ENUMERATED_GAINS,
};
pub use hessian::{cm_cost_deterministic, cm_hessian, convexity_probe, finite_difference_hessian};
pub use stability::{estimate_rdr, stability_bound};
pub use steady_state::{
    aux_weights_from_effective, br_norm_moments, excess_mse, excess_mse_both, gamma_mean_pdb,
    gamma_mean_pidb, k1, k2, mu_moments, nu_inf, predict, q_function, residual_powers,
    steady_state_mse, update_probability, xi_min, ExcessForm, ExcessMse, MsePrediction,
    PredictionInputs,
};
