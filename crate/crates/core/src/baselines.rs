//! Reference beamformers: fixed-step CM-GSC and MV-GSC, closed-form MVDR,
//! the direct-form SM-CM beamformer, the batch CM-GSC fixed point, and the
//! scaled Wiener approximation of the CM optimum.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gsc::{prediction_error, BlockingMatrix, GscState};
use crate::linalg::{hermitian_eigenvalues, hermitian_solve, norm_sqr, CMatrix, CVector};
use crate::sm_adaptive::{active_strip, sm_step_size, SmUpdateRecord};

/// Constant-step CM-GSC update. Returns the a-priori output.
pub fn cm_gsc_sg_update(state: &mut GscState, r: &CVector, mu: f64) -> Complex64 {
    let y = state.output(r);
    if mu != 0.0 {
        let br = state.blocking().apply(r);
        state.cm_gradient_step(mu, &br, y);
    }
    y
}

/// LMS on the GSC output power: `w ← w + μ B r y*`. Returns the a-priori output.
pub fn mv_gsc_sg_update(state: &mut GscState, r: &CVector, mu: f64) -> Complex64 {
    let y = state.output(r);
    if mu != 0.0 {
        let br = state.blocking().apply(r);
        state.add_scaled(y.conj() * mu, &br);
    }
    y
}

/// `R⁻¹a0 / (a0^H R⁻¹ a0)`
pub fn mvdr_weights(r: &CMatrix, a0: &CVector) -> Result<CVector> {
    let ria = hermitian_solve(r, a0)?;
    let denom = a0.dotc(&ria);
    if !(denom.norm() > 0.0) || !denom.re.is_finite() {
        return Err(Error::NonInvertibleCovariance);
    }
    Ok(ria / denom.conj())
}

/// Direct-form SM-CM beamformer: the full weight vector adapts inside the
/// subspace orthogonal to the look direction, so `w^H a0` stays at `v`.
#[derive(Debug, Clone)]
pub struct DfpState {
    pub w: CVector,
    pub a0: CVector,
    pub v: f64,
}

impl DfpState {
    /// Quiescent start `w = v·a0`.
    pub fn quiescent(v: f64, a0: CVector) -> Self {
        let w = &a0 * Complex64::new(v, 0.0);
        Self { w, a0, v }
    }
}

/// One direct-form SM-CM step with bound `gamma`.
///
/// `w ← w + μ(1 − |y|²) y*·P r` with `P = I − a0 a0^H`, where `μ` is the
/// two-strip projection step computed with `q = r^H P r`.
pub fn sm_cm_dfp_update(state: &mut DfpState, r: &CVector, gamma: f64) -> Result<SmUpdateRecord> {
    let y = state.w.dotc(r);
    if active_strip(y, gamma).is_none() {
        return Ok(SmUpdateRecord {
            updated: false,
            mu: 0.0,
            y_prior: y,
            y_posterior: y,
        });
    }
    let s = state.a0.dotc(r);
    let mut pr = r.clone();
    pr.axpy(-s, &state.a0, Complex64::new(1.0, 0.0));
    let q = norm_sqr(&pr);
    let mu = sm_step_size(y, gamma, q)?;
    if mu == 0.0 {
        return Ok(SmUpdateRecord {
            updated: false,
            mu,
            y_prior: y,
            y_posterior: y,
        });
    }
    let c = y.conj() * (mu * (1.0 - y.norm_sqr()));
    state.w.axpy(c, &pr, Complex64::new(1.0, 0.0));
    Ok(SmUpdateRecord {
        updated: true,
        mu,
        y_prior: y,
        y_posterior: state.w.dotc(r),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub w: CVector,
    pub iterations: usize,
    pub converged: bool,
    /// Set when any iteration needed ridge loading of the sample matrix.
    pub regularized: bool,
    /// `‖w_{k+1} − w_k‖` of the final iteration.
    pub last_step: f64,
}

/// Condition number above which the sample matrix is ridge-loaded.
pub const FIXED_POINT_MAX_CONDITION: f64 = 1e12;

/// One batch iteration of the CM-GSC normal equations
/// `E[|y|² Br r^H B^H] w' = E[(v (r^H a0)|y|² − y*) B r]`, with `y` evaluated at `w`.
pub fn cm_gsc_fixed_point_step(
    snapshots: &[CVector],
    v: f64,
    a0: &CVector,
    blocking: &BlockingMatrix,
    w: &CVector,
) -> Result<(CVector, bool)> {
    let rows = blocking.rows();
    let mut g = CMatrix::zeros(rows, rows);
    let mut rhs = CVector::zeros(rows);
    let n = snapshots.len() as f64;
    let w_tilde = crate::gsc::effective_weights(v, a0, blocking, w)?;
    let mut scale = 0.0;
    for r in snapshots {
        scale += norm_sqr(r).powi(2) / n;
        let y = w_tilde.dotc(r);
        let p = y.norm_sqr();
        let br = blocking.apply(r);
        g.ger(Complex64::new(p / n, 0.0), &br, &br.map(|z| z.conj()), Complex64::new(1.0, 0.0));
        let coef = (r.dotc(a0) * (v * p) - y.conj()) / n;
        rhs.axpy(coef, &br, Complex64::new(1.0, 0.0));
    }
    // Hermitian by construction; symmetrize the rounding.
    let g = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    let ev = hermitian_eigenvalues(&g);
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    let ill = !(lo > 0.0) || hi / lo > FIXED_POINT_MAX_CONDITION;
    let g = if ill {
        // Floor the loading at the data scale so rounding-level `Br` is not amplified.
        let tr = g.trace().re.max(scale);
        let eps = if tr > 0.0 { 1e-6 * tr / rows as f64 } else { 1e-8 };
        g + CMatrix::identity(rows, rows) * Complex64::new(eps, 0.0)
    } else {
        g
    };
    let next = hermitian_solve(&g, &rhs)?;
    Ok((next, ill))
}

/// Iterate the batch CM-GSC fixed point from `w = 0` until
/// `‖w_{k+1} − w_k‖ < tol·(1 + ‖w_k‖)` or `max_iters`.
pub fn cm_gsc_fixed_point(
    snapshots: &[CVector],
    v: f64,
    a0: &CVector,
    blocking: &BlockingMatrix,
    max_iters: usize,
    tol: f64,
) -> Result<FixedPointResult> {
    let mut w = CVector::zeros(blocking.rows());
    let mut regularized = false;
    let mut last_step = f64::INFINITY;
    for k in 0..max_iters {
        let (next, ill) = cm_gsc_fixed_point_step(snapshots, v, a0, blocking, &w)?;
        regularized |= ill;
        last_step = (&next - &w).norm();
        let done = last_step < tol * (1.0 + w.norm());
        w = next;
        if done {
            return Ok(FixedPointResult {
                w,
                iterations: k + 1,
                converged: true,
                regularized,
                last_step,
            });
        }
    }
    Ok(FixedPointResult {
        w,
        iterations: max_iters,
        converged: false,
        regularized,
        last_step,
    })
}

/// Sample CM cost `mean((|w^H r|² − 1)²)`.
pub fn cm_cost(w_tilde: &CVector, block: &[CVector]) -> f64 {
    block
        .iter()
        .map(|r| prediction_error(w_tilde.dotc(r)).powi(2))
        .sum::<f64>()
        / block.len() as f64
}

/// Gain `β` minimizing the sample CM cost of `β·w` over `block`:
/// `β² = mean|ŷ|² / mean|ŷ|⁴`.
pub fn cm_optimal_scale(w: &CVector, block: &[CVector]) -> f64 {
    let (mut p2, mut p4) = (0.0, 0.0);
    for r in block {
        let p = w.dotc(r).norm_sqr();
        p2 += p;
        p4 += p * p;
    }
    if p4 > 0.0 {
        (p2 / p4).sqrt()
    } else {
        0.0
    }
}

/// Wiener filter `R⁻¹a0` scaled to minimize the CM cost on a calibration block.
pub fn scaled_wiener(r: &CMatrix, a0: &CVector, calibration: &[CVector]) -> Result<CVector> {
    let w = hermitian_solve(r, a0)?;
    let beta = cm_optimal_scale(&w, calibration);
    Ok(w * Complex64::new(beta, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::steering_vector;
    use crate::gsc::BlockingKind;
    use crate::sm_adaptive::sm_cm_gsc_update;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_element() -> (CVector, Arc<BlockingMatrix>) {
        let s = 1.0 / 2f64.sqrt();
        let a0 = CVector::from_vec(vec![c(s, 0.0), c(s, 0.0)]);
        let b = Arc::new(BlockingMatrix::css(&a0).unwrap());
        (a0, b)
    }

    #[test]
    fn zero_step_leaves_state() {
        let (a0, b) = two_element();
        let mut st = GscState::with_unit_start(1.0, a0, b).unwrap();
        let before = st.w().clone();
        let r = CVector::from_vec(vec![c(0.3, 1.0), c(-2.0, 0.1)]);
        cm_gsc_sg_update(&mut st, &r, 0.0);
        mv_gsc_sg_update(&mut st, &r, 0.0);
        assert_eq!(st.w(), &before);
    }

    #[test]
    fn cm_step_reproduces_hand_example() {
        let (a0, b) = two_element();
        let mut st = GscState::new(1.0, a0.clone(), b.clone(), CVector::zeros(2)).unwrap();
        let r = CVector::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0)]);
        let mu = (1.0 - 1.0 / 2f64.sqrt()) / 2.0;
        cm_gsc_sg_update(&mut st, &r, mu);
        assert!((st.w()[0] - c(0.2071, 0.0)).norm() < 1e-4);
        assert!((st.w()[1] - c(-0.2071, 0.0)).norm() < 1e-4);

        let mut sm = GscState::new(1.0, a0, b, CVector::zeros(2)).unwrap();
        sm_cm_gsc_update(&mut sm, &Default::default(), &r).unwrap();
        assert!((sm.w() - st.w()).norm() < 1e-15);
    }

    #[test]
    fn mv_gsc_drives_interferer_output_down() {
        // Two elements, look direction broadside, one noiseless interferer.
        let a0 = steering_vector(std::f64::consts::FRAC_PI_2, 2, 0.5);
        let a1 = steering_vector(0.6, 2, 0.5);
        let b = Arc::new(BlockingMatrix::css(&a0).unwrap());
        let mut st = GscState::new(1.0, a0.clone(), b, CVector::zeros(2)).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..200 {
            let r = &a1 * c(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
            let y = mv_gsc_sg_update(&mut st, &r, 0.05);
            assert!(y.norm() <= last + 1e-12);
            last = y.norm();
            assert!((st.effective_weights().dotc(&a0) - c(1.0, 0.0)).norm() < 1e-10);
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn mvdr_identity_and_constraint() {
        let a0 = steering_vector(1.0, 8, 0.5);
        let w = mvdr_weights(&CMatrix::identity(8, 8), &a0).unwrap();
        assert!((w - &a0).norm() < 1e-12);
        assert!(mvdr_weights(&CMatrix::zeros(8, 8), &a0).is_err());
    }

    #[test]
    fn mvdr_nulls_strong_interferer() {
        let theta0 = 1.2_f64;
        let theta1 = theta0 + 30f64.to_radians();
        let a0 = steering_vector(theta0, 16, 0.5);
        let a1 = steering_vector(theta1, 16, 0.5);
        let r = &a0 * a0.adjoint() + &a1 * a1.adjoint() * c(100.0, 0.0) + CMatrix::identity(16, 16) * c(0.01, 0.0);
        let w = mvdr_weights(&r, &a0).unwrap();
        assert!((w.dotc(&a0) - c(1.0, 0.0)).norm() < 1e-10);
        assert!(w.dotc(&a1).norm_sqr() <= 1e-2 * w.dotc(&a0).norm_sqr());
    }

    #[test]
    fn dfp_update_hits_boundary_and_keeps_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a0 = steering_vector(0.9, 8, 0.5);
        let mut st = DfpState::quiescent(1.0, a0.clone());
        let gamma = 0.3;
        let mut updates = 0;
        for _ in 0..500 {
            let r = CVector::from_iterator(8, (0..8).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
            let rec = sm_cm_dfp_update(&mut st, &r, gamma).unwrap();
            let mag = rec.y_prior.norm();
            if mag >= (1.0 - gamma).sqrt() && mag <= (1.0 + gamma).sqrt() {
                assert!(!rec.updated);
            }
            if rec.updated {
                updates += 1;
                let p = rec.y_posterior.norm_sqr();
                let target = if rec.y_prior.norm_sqr() > 1.0 { 1.0 + gamma } else { 1.0 - gamma };
                assert!((p - target).abs() <= 1e-9 * target);
            }
            assert!((st.w.dotc(&a0) - c(1.0, 0.0)).norm() < 1e-10);
        }
        assert!(updates > 50);
    }

    #[test]
    fn fixed_point_noiseless_single_source_stays_at_zero() {
        let a0 = steering_vector(1.0, 6, 0.5);
        for kind in [BlockingKind::Css, BlockingKind::Nullspace] {
            let b = BlockingMatrix::new(kind, &a0).unwrap();
            let block: Vec<CVector> = (0..50).map(|k| &a0 * c(if k % 3 == 0 { 1.0 } else { -1.0 }, 0.0)).collect();
            let res = cm_gsc_fixed_point(&block, 1.0, &a0, &b, 20, 1e-8).unwrap();
            assert!(res.regularized);
            assert!(res.converged);
            assert!(b.apply_adjoint(&res.w).norm() < 1e-8);
        }
    }

    #[test]
    fn scaled_wiener_cases() {
        let a0 = steering_vector(0.8, 4, 0.5);
        let block: Vec<CVector> = (0..40).map(|k| &a0 * c(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0)).collect();
        let w = scaled_wiener(&CMatrix::identity(4, 4), &a0, &block).unwrap();
        assert!((w - &a0).norm() < 1e-12);
        assert!(cm_cost(&a0, &block) < 1e-24);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noisy: Vec<CVector> = (0..300)
            .map(|_| CVector::from_iterator(4, (0..4).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))))
            .collect();
        let beta = cm_optimal_scale(&a0, &noisy);
        let (p2, p4) = noisy.iter().fold((0.0, 0.0), |(s2, s4), r| {
            let p = a0.dotc(r).norm_sqr();
            (s2 + p, s4 + p * p)
        });
        assert!((beta * beta - p2 / p4).abs() < 1e-12);
        // β minimizes the cost along the ray.
        let best = cm_cost(&(&a0 * c(beta, 0.0)), &noisy);
        for f in [0.9, 0.99, 1.01, 1.1] {
            assert!(best <= cm_cost(&(&a0 * c(beta * f, 0.0)), &noisy) + 1e-15);
        }
    }
}
