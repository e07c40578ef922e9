//! Hessian of the deterministic CM-GSC cost `J₁(s̄) + σ_n²J₂(w̃)`, where
//! `s_k = a_k^H w̃` for the interferers and the desired gain is pinned at
//! `D = v²`. Entries follow `M_ij = ∂²J/∂w̃_i* ∂w̃_j`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::array_model::Scenario;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, hermitian_eigenvalues, norm_sqr, CMatrix, CVector};

fn interferer_steering(scenario: &Scenario) -> CMatrix {
    let m = scenario.elements();
    let q = scenario.sources.len();
    CMatrix::from_fn(m, q - 1, |i, k| scenario.steering(k + 1)[i])
}

/// `J₁(s̄) + σ_n² J₂(w̃)` with `J₁ = 2S² − (D² + Σ|s_k|⁴) − 2S + 1`,
/// `J₂ = (4S − 2 + 3σ_n²‖w̃‖²)‖w̃‖²` and `S = D + ‖s̄‖²`.
pub fn cm_cost_deterministic(w_tilde: &CVector, scenario: &Scenario, v: f64) -> f64 {
    let a_bar = interferer_steering(scenario);
    let s_bar = a_bar.ad_mul(w_tilde);
    let d = v * v;
    let s_total = d + norm_sqr(&s_bar);
    let quartic: f64 = s_bar.iter().map(|z| z.norm_sqr().powi(2)).sum();
    let j1 = 2.0 * s_total * s_total - (d * d + quartic) - 2.0 * s_total + 1.0;
    let sigma2 = scenario.noise_power;
    let n = norm_sqr(w_tilde);
    let j2 = (4.0 * s_total - 2.0 + 3.0 * sigma2 * n) * n;
    j1 + sigma2 * j2
}

/// `M = M₁ + σ_n² M₂` with
/// `M₁ = 4Ā[(D − ½)I + ‖s̄‖²I + s̄s̄^H − diag|s_k|²]Ā^H` and
/// `M₂ = (4D−2)I + 6σ_n²(‖w̃‖²I + w̃w̃^H) + 4(w̃^H G w̃ I + ‖w̃‖²G + G w̃w̃^H + w̃w̃^H G)`, `G = ĀĀ^H`.
pub fn cm_hessian(w_tilde: &CVector, scenario: &Scenario, v: f64) -> CMatrix {
    let m = scenario.elements();
    let a_bar = interferer_steering(scenario);
    let s_bar = a_bar.ad_mul(w_tilde);
    let d = v * v;
    let k = s_bar.len();
    let cplx = |x: f64| Complex64::new(x, 0.0);

    let mut inner = &s_bar * s_bar.adjoint();
    let shift = d - 0.5 + norm_sqr(&s_bar);
    for i in 0..k {
        inner[(i, i)] += cplx(shift - s_bar[i].norm_sqr());
    }
    let m1 = &a_bar * inner * a_bar.adjoint() * cplx(4.0);

    let sigma2 = scenario.noise_power;
    if sigma2 == 0.0 {
        return m1;
    }
    let g = &a_bar * a_bar.adjoint();
    let n = norm_sqr(w_tilde);
    let ww = w_tilde * w_tilde.adjoint();
    let wgw = w_tilde.dotc(&(&g * w_tilde)).re;
    let eye = CMatrix::identity(m, m);
    let m2 = &eye * cplx(4.0 * d - 2.0)
        + (&eye * cplx(n) + &ww) * cplx(6.0 * sigma2)
        + (&eye * cplx(wgw) + &g * cplx(n) + &g * &ww + &ww * &g) * cplx(4.0);
    m1 + m2 * cplx(sigma2)
}

/// Central finite-difference Hessian of `f` in the `∂²/∂w̃_i* ∂w̃_j`
/// convention, perturbing real and imaginary parts by `h`.
pub fn finite_difference_hessian<F>(f: F, w: &CVector, h: f64) -> CMatrix
where
    F: Fn(&CVector) -> f64,
{
    let m = w.len();
    // Real coordinates: index 2i is Re w_i, 2i+1 is Im w_i.
    let unit = |idx: usize| -> CVector {
        let mut e = CVector::zeros(m);
        e[idx / 2] = if idx % 2 == 0 {
            Complex64::new(h, 0.0)
        } else {
            Complex64::new(0.0, h)
        };
        e
    };
    let n = 2 * m;
    let mut real = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let (ea, eb) = (unit(a), unit(b));
            let val = if a == b {
                (f(&(w + &ea)) - 2.0 * f(w) + f(&(w - &ea))) / (h * h)
            } else {
                (f(&(w + &ea + &eb)) - f(&(w + &ea - &eb)) - f(&(w - &ea + &eb)) + f(&(w - &ea - &eb)))
                    / (4.0 * h * h)
            };
            real[a][b] = val;
            real[b][a] = val;
        }
    }
    CMatrix::from_fn(m, m, |i, j| {
        let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        Complex64::new(
            0.25 * (real[xi][xj] + real[yi][yj]),
            0.25 * (real[yi][xj] - real[xi][yj]),
        )
    })
}

/// Smallest Hessian eigenvalue over `trials` random points with `‖w̃‖ ≤ region_radius`.
pub fn convexity_probe<R: Rng + ?Sized>(
    scenario: &Scenario,
    v: f64,
    trials: usize,
    region_radius: f64,
    rng: &mut R,
) -> Result<f64> {
    let m = scenario.elements();
    let mut worst = f64::INFINITY;
    for _ in 0..trials.max(1) {
        let dir = CVector::from_fn(m, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        });
        let radius = region_radius * rng.random::<f64>();
        let w = &dir * Complex64::new(radius / dir.norm(), 0.0);
        let h = cm_hessian(&w, scenario, v);
        let defect = hermitian_defect(&h);
        if defect > 1e-8 * (1.0 + h.norm()) {
            return Err(Error::InvalidState(format!("Hessian not Hermitian (defect {defect:e})")));
        }
        worst = worst.min(hermitian_eigenvalues(&h)[0]);
    }
    Ok(worst)
}
