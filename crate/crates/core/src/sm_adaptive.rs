//! Set-membership CM adaptation for the GSC: the data-selective update with
//! its projection step size, and the fixed / PDB / PIDB bound schedules.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsc::{prediction_error, GscState};
use crate::linalg::{norm_sqr, CVector};

/// Upper clamp on the time-varying bound.
pub const GAMMA_MAX: f64 = 10.0;

const SINGULAR_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Fixed,
    Pdb,
    Pidb,
}

impl std::fmt::Display for BoundKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundKind::Fixed => "fixed",
            BoundKind::Pdb => "pdb",
            BoundKind::Pidb => "pidb",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundScheme {
    pub kind: BoundKind,
    pub gamma_fixed: f64,
    /// Forgetting factor.
    pub rho: f64,
    pub lambda: f64,
    /// Weight on the interference-power term (PIDB only).
    pub psi: f64,
}

impl BoundScheme {
    pub const DEFAULT_RHO: f64 = 0.98;
    pub const DEFAULT_LAMBDA: f64 = 2.0;
    pub const DEFAULT_PSI: f64 = 0.003;

    pub fn fixed(gamma: f64) -> Self {
        Self {
            kind: BoundKind::Fixed,
            gamma_fixed: gamma,
            rho: Self::DEFAULT_RHO,
            lambda: Self::DEFAULT_LAMBDA,
            psi: 0.0,
        }
    }

    pub fn pdb(rho: f64, lambda: f64) -> Self {
        Self {
            kind: BoundKind::Pdb,
            gamma_fixed: 0.0,
            rho,
            lambda,
            psi: 0.0,
        }
    }

    pub fn pidb(rho: f64, lambda: f64, psi: f64) -> Self {
        Self {
            kind: BoundKind::Pidb,
            gamma_fixed: 0.0,
            rho,
            lambda,
            psi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            BoundKind::Fixed => {
                if !(self.gamma_fixed >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "fixed bound must be non-negative, got {}",
                        self.gamma_fixed
                    )));
                }
            }
            BoundKind::Pdb | BoundKind::Pidb => {
                if !(self.rho > 0.0 && self.rho < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "forgetting factor must lie in (0, 1), got {}",
                        self.rho
                    )));
                }
                if !(self.lambda > 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "lambda must exceed 1, got {}",
                        self.lambda
                    )));
                }
                if !(self.psi >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "psi must be non-negative, got {}",
                        self.psi
                    )));
                }
            }
        }
        Ok(())
    }

    /// `γ(0)`: the fixed bound, or zero for the time-varying schemes.
    pub fn initial_state(&self) -> BoundState {
        match self.kind {
            BoundKind::Fixed => BoundState {
                gamma: self.gamma_fixed,
                nu: 0.0,
            },
            _ => BoundState::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundState {
    pub gamma: f64,
    /// Running interference-plus-noise power seen by the auxiliary branch.
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmUpdateRecord {
    pub updated: bool,
    pub mu: f64,
    pub y_prior: Complex64,
    pub y_posterior: Complex64,
}

/// Which boundary of the constraint set an update projects onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strip {
    Upper,
    Lower,
}

/// Active strip for output `y` under bound `γ`, or `None` when `e² ≤ γ²`.
/// For `γ ≥ 1` the lower strip does not exist.
pub fn active_strip(y: Complex64, gamma: f64) -> Option<Strip> {
    let e = prediction_error(y);
    if e * e <= gamma * gamma {
        None
    } else if e > 0.0 {
        Some(Strip::Upper)
    } else if gamma < 1.0 {
        Some(Strip::Lower)
    } else {
        None
    }
}

/// Step size of the projection in direction `(1 − |y|²) B r y*` that lands
/// the a-posteriori modulus on `√(1 ± γ)`.
pub fn strip_step_size(y: Complex64, gamma: f64, q_br: f64, strip: Strip) -> f64 {
    let mag = y.norm();
    let target = match strip {
        Strip::Upper => (1.0 + gamma).sqrt(),
        Strip::Lower => (1.0 - gamma).max(0.0).sqrt(),
    };
    let denom = (mag * mag - 1.0) * q_br;
    if denom.abs() < SINGULAR_GUARD {
        return 0.0;
    }
    (1.0 - target / mag) / denom
}

/// Variable step size: nonzero only when `e² > γ²`.
pub fn sm_step_size(y: Complex64, gamma: f64, q_br: f64) -> Result<f64> {
    if !(q_br > 0.0) {
        return Err(Error::DegenerateSnapshot(q_br));
    }
    match active_strip(y, gamma) {
        None => Ok(0.0),
        Some(Strip::Lower) if y.norm() == 0.0 => Err(Error::UndefinedProjection),
        Some(strip) => Ok(strip_step_size(y, gamma, q_br, strip)),
    }
}

/// One data-selective SM-CM-GSC step with the current bound.
pub fn sm_cm_gsc_update(
    state: &mut GscState,
    bound: &BoundState,
    r: &CVector,
) -> Result<SmUpdateRecord> {
    if r.len() != state.a0().len() {
        return Err(Error::DimensionMismatch {
            expected: state.a0().len(),
            got: r.len(),
        });
    }
    let y = state.output(r);
    if active_strip(y, bound.gamma).is_none() {
        return Ok(SmUpdateRecord {
            updated: false,
            mu: 0.0,
            y_prior: y,
            y_posterior: y,
        });
    }
    let br = state.blocking().apply(r);
    let q_br = norm_sqr(&br);
    let mu = sm_step_size(y, bound.gamma, q_br)?;
    if mu == 0.0 {
        return Ok(SmUpdateRecord {
            updated: false,
            mu,
            y_prior: y,
            y_posterior: y,
        });
    }
    state.cm_gradient_step(mu, &br, y);
    Ok(SmUpdateRecord {
        updated: true,
        mu,
        y_prior: y,
        y_posterior: state.output(r),
    })
}

fn clamp_gamma(g: f64) -> f64 {
    g.clamp(0.0, GAMMA_MAX)
}

/// `γ' = (1−ρ)γ + ρ√(λ‖w̃‖²σ̂²)`
pub fn bound_update_pdb(
    bound: &BoundState,
    w_tilde: &CVector,
    noise_power: f64,
    scheme: &BoundScheme,
) -> BoundState {
    pdb_from_norm(bound, norm_sqr(w_tilde), noise_power, scheme)
}

fn pdb_from_norm(bound: &BoundState, w_norm2: f64, noise_power: f64, scheme: &BoundScheme) -> BoundState {
    let rho = scheme.rho;
    BoundState {
        gamma: clamp_gamma((1.0 - rho) * bound.gamma + rho * (scheme.lambda * w_norm2 * noise_power).sqrt()),
        nu: bound.nu,
    }
}

/// `ν' = (1−ρ)ν + ρ|w^H B r|²`
pub fn interference_power_update(
    bound: &BoundState,
    aux_output: Complex64,
    scheme: &BoundScheme,
) -> BoundState {
    let rho = scheme.rho;
    BoundState {
        gamma: bound.gamma,
        nu: (1.0 - rho) * bound.nu + rho * aux_output.norm_sqr(),
    }
}

/// `γ' = (1−ρ)γ + ρ(√(ψν) + √(λ‖w̃‖²σ̂²))`, using the already-updated `ν`.
pub fn bound_update_pidb(
    bound: &BoundState,
    w_tilde: &CVector,
    noise_power: f64,
    scheme: &BoundScheme,
) -> BoundState {
    pidb_from_norm(bound, norm_sqr(w_tilde), noise_power, scheme)
}

fn pidb_from_norm(bound: &BoundState, w_norm2: f64, noise_power: f64, scheme: &BoundScheme) -> BoundState {
    let rho = scheme.rho;
    let drive = (scheme.psi * bound.nu).sqrt() + (scheme.lambda * w_norm2 * noise_power).sqrt();
    BoundState {
        gamma: clamp_gamma((1.0 - rho) * bound.gamma + rho * drive),
        nu: bound.nu,
    }
}

/// Owns a bound scheme and its running state.
#[derive(Debug, Clone)]
pub struct BoundTracker {
    scheme: BoundScheme,
    state: BoundState,
}

impl BoundTracker {
    pub fn new(scheme: BoundScheme) -> Result<Self> {
        scheme.validate()?;
        Ok(Self {
            scheme,
            state: scheme.initial_state(),
        })
    }

    pub fn scheme(&self) -> &BoundScheme {
        &self.scheme
    }

    pub fn state(&self) -> &BoundState {
        &self.state
    }

    /// Advance to `γ(i+1)` from quantities observed at snapshot `i`.
    pub fn advance(&mut self, w_tilde_norm2: f64, aux_output: Complex64, noise_power: f64) {
        self.state = match self.scheme.kind {
            BoundKind::Fixed => self.state,
            BoundKind::Pdb => pdb_from_norm(&self.state, w_tilde_norm2, noise_power, &self.scheme),
            BoundKind::Pidb => {
                let s = interference_power_update(&self.state, aux_output, &self.scheme);
                pidb_from_norm(&s, w_tilde_norm2, noise_power, &self.scheme)
            }
        };
    }
}

/// Outcome of one engine step, including the bound that was in force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmStep {
    pub record: SmUpdateRecord,
    pub gamma: f64,
    /// Set when the lower-strip projection was undefined (`y = 0`).
    pub undefined_projection: bool,
}

/// SM-CM-GSC beamformer with a bound schedule.
///
/// Per snapshot: adapt `w` with `γ(i)`, then update `ν`, then form `γ(i+1)`,
/// the latter two from `w(i)`.
#[derive(Debug, Clone)]
pub struct SmCmGsc {
    state: GscState,
    bound: BoundTracker,
    noise_power: f64,
    undefined_projections: usize,
}

impl SmCmGsc {
    pub fn new(state: GscState, scheme: BoundScheme, noise_power: f64) -> Result<Self> {
        Ok(Self {
            state,
            bound: BoundTracker::new(scheme)?,
            noise_power,
            undefined_projections: 0,
        })
    }

    pub fn state(&self) -> &GscState {
        &self.state
    }

    pub fn bound(&self) -> &BoundState {
        self.bound.state()
    }

    pub fn undefined_projections(&self) -> usize {
        self.undefined_projections
    }

    pub fn step(&mut self, r: &CVector) -> Result<SmStep> {
        let gamma = self.bound.state().gamma;
        let w_norm2 = norm_sqr(self.state.effective_weights());
        let y_prior = self.state.output(r);
        let aux = self.state.aux_output(r, y_prior);
        let mut undefined_projection = false;
        let record = match sm_cm_gsc_update(&mut self.state, self.bound.state(), r) {
            Ok(rec) => rec,
            Err(Error::UndefinedProjection) => {
                self.undefined_projections += 1;
                undefined_projection = true;
                SmUpdateRecord {
                    updated: false,
                    mu: 0.0,
                    y_prior,
                    y_posterior: y_prior,
                }
            }
            Err(e) => return Err(e),
        };
        self.bound.advance(w_norm2, aux, self.noise_power);
        Ok(SmStep {
            record,
            gamma,
            undefined_projection,
        })
    }
}
