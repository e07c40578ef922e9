//! Generalized sidelobe canceler: blocking matrices, the auxiliary weight
//! state and the beamformer output `y = w̃^H r` with `w̃ = v·a0 − B^H w`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, CMatrix, CVector};

const UNIT_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockingKind {
    /// `I − a0 a0^H`, square and idempotent.
    #[default]
    Css,
    /// Orthonormal basis of the complement of `a0`, `(m−1) × m`.
    Nullspace,
}

impl std::fmt::Display for BlockingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BlockingKind::Css => "css",
            BlockingKind::Nullspace => "nullspace",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockingMatrix {
    matrix: CMatrix,
    kind: BlockingKind,
    a0: CVector,
}

fn check_unit(a0: &CVector) -> Result<()> {
    let norm = norm_sqr(a0).sqrt();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::InvalidSteering { norm });
    }
    Ok(())
}

impl BlockingMatrix {
    pub fn new(kind: BlockingKind, a0: &CVector) -> Result<Self> {
        match kind {
            BlockingKind::Css => Self::css(a0),
            BlockingKind::Nullspace => Self::nullspace(a0),
        }
    }

    pub fn css(a0: &CVector) -> Result<Self> {
        check_unit(a0)?;
        let m = a0.len();
        Ok(Self {
            matrix: CMatrix::identity(m, m) - a0 * a0.adjoint(),
            kind: BlockingKind::Css,
            a0: a0.clone(),
        })
    }

    /// Rows are the eigenvectors of `I − a0 a0^H` with unit eigenvalue.
    pub fn nullspace(a0: &CVector) -> Result<Self> {
        check_unit(a0)?;
        let m = a0.len();
        let projector = CMatrix::identity(m, m) - a0 * a0.adjoint();
        let eig = projector.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let mut matrix = CMatrix::zeros(m - 1, m);
        for (row, &col) in order.iter().take(m - 1).enumerate() {
            let v = eig.eigenvectors.column(col);
            for p in 0..m {
                matrix[(row, p)] = v[p].conj();
            }
        }
        Ok(Self {
            matrix,
            kind: BlockingKind::Nullspace,
            a0: a0.clone(),
        })
    }

    pub fn kind(&self) -> BlockingKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn elements(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Look direction the matrix blocks.
    pub fn look_direction(&self) -> &CVector {
        &self.a0
    }

    /// `B r`; linear cost for the CSS form.
    pub fn apply(&self, r: &CVector) -> CVector {
        match self.kind {
            BlockingKind::Css => project_out(r, &self.a0),
            BlockingKind::Nullspace => &self.matrix * r,
        }
    }

    /// `B^H w`
    pub fn apply_adjoint(&self, w: &CVector) -> CVector {
        match self.kind {
            BlockingKind::Css => project_out(w, &self.a0),
            BlockingKind::Nullspace => self.matrix.ad_mul(w),
        }
    }
}

/// `x − a (a^H x)`
fn project_out(x: &CVector, a: &CVector) -> CVector {
    let s = a.dotc(x);
    let mut out = x.clone();
    out.axpy(-s, a, Complex64::new(1.0, 0.0));
    out
}

/// `v·a0 − B^H w`.
pub fn effective_weights(
    v: f64,
    a0: &CVector,
    blocking: &BlockingMatrix,
    w: &CVector,
) -> Result<CVector> {
    if a0.len() != blocking.elements() {
        return Err(Error::InvalidState(format!(
            "steering length {} does not match blocking width {}",
            a0.len(),
            blocking.elements()
        )));
    }
    if w.len() != blocking.rows() {
        return Err(Error::InvalidState(format!(
            "auxiliary weight length {} does not match blocking rows {}",
            w.len(),
            blocking.rows()
        )));
    }
    Ok(a0 * Complex64::new(v, 0.0) - blocking.apply_adjoint(w))
}

/// `w̃^H r`
pub fn gsc_output(w_tilde: &CVector, r: &CVector) -> Result<Complex64> {
    if w_tilde.len() != r.len() {
        return Err(Error::DimensionMismatch {
            expected: w_tilde.len(),
            got: r.len(),
        });
    }
    Ok(w_tilde.dotc(r))
}

/// CM prediction error `|y|² − 1`.
#[inline]
pub fn prediction_error(y: Complex64) -> f64 {
    y.norm_sqr() - 1.0
}

/// GSC adaptive state. The effective weight vector is cached and refreshed
/// whenever `w` changes.
#[derive(Debug, Clone)]
pub struct GscState {
    v: f64,
    a0: CVector,
    blocking: Arc<BlockingMatrix>,
    w: CVector,
    w_tilde: CVector,
}

impl GscState {
    pub fn new(v: f64, a0: CVector, blocking: Arc<BlockingMatrix>, w: CVector) -> Result<Self> {
        let w_tilde = effective_weights(v, &a0, &blocking, &w)?;
        Ok(Self {
            v,
            a0,
            blocking,
            w,
            w_tilde,
        })
    }

    /// Auxiliary weights start at `[1, 0, …, 0]`.
    pub fn with_unit_start(v: f64, a0: CVector, blocking: Arc<BlockingMatrix>) -> Result<Self> {
        let mut w = CVector::zeros(blocking.rows());
        w[0] = Complex64::new(1.0, 0.0);
        Self::new(v, a0, blocking, w)
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn a0(&self) -> &CVector {
        &self.a0
    }

    pub fn blocking(&self) -> &BlockingMatrix {
        &self.blocking
    }

    pub fn w(&self) -> &CVector {
        &self.w
    }

    pub fn set_w(&mut self, w: CVector) -> Result<()> {
        self.w_tilde = effective_weights(self.v, &self.a0, &self.blocking, &w)?;
        self.w = w;
        Ok(())
    }

    pub fn effective_weights(&self) -> &CVector {
        &self.w_tilde
    }

    pub fn output(&self, r: &CVector) -> Complex64 {
        self.w_tilde.dotc(r)
    }

    /// Auxiliary-branch output `w^H B r`, from `y = v a0^H r − w^H B r`.
    pub fn aux_output(&self, r: &CVector, y: Complex64) -> Complex64 {
        self.a0.dotc(r) * self.v - y
    }

    /// `w ← w + c·Br` for a complex scalar `c`; `w̃` moves by `−c·B^H B r`.
    pub(crate) fn add_scaled(&mut self, c: Complex64, br: &CVector) {
        self.w.axpy(c, br, Complex64::new(1.0, 0.0));
        let d = self.blocking.apply_adjoint(br);
        self.w_tilde.axpy(-c, &d, Complex64::new(1.0, 0.0));
    }

    /// Recompute `w̃` from `w`, discarding accumulated rounding.
    pub fn resync(&mut self) {
        self.w_tilde = self.a0.clone() * Complex64::new(self.v, 0.0) - self.blocking.apply_adjoint(&self.w);
    }

    /// CM stochastic-gradient step `w ← w − μ(B r y* − |y|² B r y*)`.
    pub fn cm_gradient_step(&mut self, mu: f64, br: &CVector, y: Complex64) {
        let c = -(y.conj() * (1.0 - y.norm_sqr()) * mu);
        self.add_scaled(c, br);
    }
}
