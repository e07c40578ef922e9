//! Set-membership constant-modulus beamforming with a generalized sidelobe
//! canceler (SM-CM-GSC).
//!
//! The crate covers the narrowband ULA signal model, GSC blocking matrices,
//! the data-selective SM-CM update with fixed and time-varying (PDB/PIDB)
//! error bounds, reference beamformers (CM-GSC, MV-GSC, MVDR, direct-form
//! SM-CM, batch CM-GSC), steady-state MSE predictions, and a Monte Carlo
//! harness that writes SINR / MSE / update-rate curves to CSV.

pub mod analysis;
pub mod array_model;
pub mod baselines;
pub mod error;
pub mod gsc;
pub mod harness;
pub mod linalg;
pub mod sm_adaptive;

pub use error::{Error, Result};
