use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub const MAX_ENUMERATED_GAINS: usize = 20;

/// Closed form `Σ|s_i|⁴ + 2 Σ_{i≠l} |s_i|²|s_l|²` for `E|s^H b|⁴` with BPSK `b`.
pub fn fourth_moment_paper(s: &[Complex64]) -> f64 {
    let p: Vec<f64> = s.iter().map(|z| z.norm_sqr()).collect();
    let diag: f64 = p.iter().map(|x| x * x).sum();
    let total: f64 = p.iter().sum();
    // Σ_{i≠l} p_i p_l = (Σp)² − Σp²
    diag + 2.0 * (total * total - diag)
}

/// Exact `E|s^H b|⁴` by enumerating all `2^q` sign patterns.
pub fn fourth_moment_bruteforce(s: &[Complex64]) -> Result<f64> {
    let q = s.len();
    if q > MAX_ENUMERATED_GAINS {
        return Err(Error::EnumerationLimit(q));
    }
    let count = 1usize << q;
    let mut acc = 0.0;
    for mask in 0..count {
        let z: Complex64 = s
            .iter()
            .enumerate()
            .map(|(k, sk)| if mask >> k & 1 == 1 { -sk.conj() } else { sk.conj() })
            .sum();
        acc += z.norm_sqr().powi(2);
    }
    Ok(acc / count as f64)
}

/// `Σ_{i≠j} s_i² (s_j*)²`, the term the closed form omits; real-valued.
pub fn dropped_cross_term(s: &[Complex64]) -> f64 {
    let sum_sq: Complex64 = s.iter().map(|z| z * z).sum();
    let diag: f64 = s.iter().map(|z| z.norm_sqr().powi(2)).sum();
    sum_sq.norm_sqr() - diag
}

/// Random gains (`q ≥ 2`) whose omitted cross term vanishes.
///
/// The first `q − 1` gains are free; the last, `ρe^{jφ}`, solves
/// `Re(T'^* e^{2jφ}) = (P' − |T'|²)/(2ρ²)` with `T' = Σ s_i²`, `P' = Σ|s_i|⁴`.
pub fn sample_phase_balanced<R: Rng + ?Sized>(q: usize, rng: &mut R) -> Vec<Complex64> {
    assert!(q >= 2, "need at least two gains");
    loop {
        let mut s: Vec<Complex64> = (0..q - 1)
            .map(|_| Complex64::from_polar(rng.random_range(0.2..1.5), rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let t: Complex64 = s.iter().map(|z| z * z).sum();
        let p: f64 = s.iter().map(|z| z.norm_sqr().powi(2)).sum();
        let tn = t.norm();
        if tn < 1e-3 {
            continue;
        }
        let gap = p - tn * tn;
        let rho2 = (gap.abs() / (2.0 * tn)).max(rng.random_range(0.05..2.0));
        let cos = (gap / (2.0 * rho2 * tn)).clamp(-1.0, 1.0);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let phi = 0.5 * (t.arg() + sign * cos.acos());
        s.push(Complex64::from_polar(rho2.sqrt(), phi));
        return s;
    }
}
