use num_complex::Complex64;
use rand::Rng;

use crate::array_model::Scenario;
use crate::error::{Error, Result};
use crate::gsc::{prediction_error, BlockingMatrix};
use crate::linalg::{eigenvalues, CMatrix, CVector};

/// Monte Carlo estimate of `E[e d r^H]` with `d = B^H B r` and `e` the CM
/// error of `w_tilde_opt`, with every source active.
pub fn estimate_rdr<R: Rng + ?Sized>(
    scenario: &Scenario,
    w_tilde_opt: &CVector,
    blocking: &BlockingMatrix,
    samples: usize,
    rng: &mut R,
) -> CMatrix {
    let m = scenario.elements();
    let idx = scenario.sources.iter().map(|s| s.onset).max().unwrap_or(0);
    let mut acc = CMatrix::zeros(m, m);
    for _ in 0..samples {
        let r = scenario.emit_snapshot(idx, rng).received;
        let e = prediction_error(w_tilde_opt.dotc(&r));
        let d = blocking.apply_adjoint(&blocking.apply(&r));
        acc.ger(Complex64::new(e, 0.0), &d, &r.map(|z| z.conj()), Complex64::new(1.0, 0.0));
    }
    if samples > 0 {
        acc /= Complex64::new(samples as f64, 0.0);
    }
    acc
}

/// `min_k 2/|λ_k|` over the (complex) eigenvalues of `r_dr`.
pub fn stability_bound(r_dr: &CMatrix) -> Result<f64> {
    if r_dr.nrows() != r_dr.ncols() {
        return Err(Error::DimensionMismatch {
            expected: r_dr.nrows(),
            got: r_dr.ncols(),
        });
    }
    let largest = eigenvalues(r_dr)
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    if !(largest > 0.0) {
        return Err(Error::UndefinedBound);
    }
    Ok(2.0 / largest)
}
