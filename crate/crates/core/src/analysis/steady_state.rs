//! Steady-state MSE prediction: residual powers, update probability,
//! step-size moments, excess MSE and the bound means of PDB/PIDB.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::array_model::Scenario;
use crate::error::{Error, Result};
use crate::gsc::BlockingMatrix;
use crate::linalg::{norm_sqr, CVector};

/// Statistics of the optimum beamformer feeding the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionInputs {
    /// Residual interference power at the optimum output.
    pub sigma_i2: f64,
    /// Residual noise power at the optimum output.
    pub sigma_v2: f64,
    /// `E‖Br‖²`
    pub m2_br: f64,
    /// `E‖Br‖⁴`
    pub m4_br: f64,
    /// Steady-state mean bound.
    pub gamma_mean: f64,
    pub w_opt_norm2: f64,
    pub xi_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MsePrediction {
    pub p_update: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub xi_ex: f64,
    pub xi_total: f64,
}

/// Which excess-MSE expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcessForm {
    /// Keeps the residual-interference terms.
    Full,
    /// Assumes residual interference is negligible against residual noise.
    #[default]
    Simplified,
}

/// Standard normal upper tail `Q(x) = ½ erfc(x/√2)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn steady_index(scenario: &Scenario) -> usize {
    scenario.sources.iter().map(|s| s.onset).max().unwrap_or(0)
}

/// Residual interference and noise power at the output of `w_tilde_opt`,
/// with every source active.
pub fn residual_powers(w_tilde_opt: &CVector, scenario: &Scenario) -> (f64, f64) {
    let sigma_i2 = (1..scenario.sources.len())
        .map(|k| scenario.sources[k].power * w_tilde_opt.dotc(scenario.steering(k)).norm_sqr())
        .sum();
    (sigma_i2, scenario.noise_power * norm_sqr(w_tilde_opt))
}

/// `E|b0 − w̃^H r|²` in closed form.
pub fn xi_min(w_tilde: &CVector, scenario: &Scenario) -> f64 {
    let r = scenario.ideal_covariance(steady_index(scenario));
    let quad = w_tilde.dotc(&(&r * w_tilde)).re;
    let gain = w_tilde.dotc(scenario.desired_steering()).re;
    1.0 - 2.0 * scenario.sources[0].power.sqrt() * gain + quad
}

/// `(E‖Br‖², E‖Br‖⁴)`: the second moment in closed form `tr(B R B^H)`,
/// the fourth by Monte Carlo over `samples` snapshots.
pub fn br_norm_moments<R: Rng + ?Sized>(
    blocking: &BlockingMatrix,
    scenario: &Scenario,
    samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    let idx = steady_index(scenario);
    let r = scenario.ideal_covariance(idx);
    let b = blocking.matrix();
    let m2 = (b * r * b.adjoint()).trace().re;
    let mut acc = 0.0;
    for _ in 0..samples {
        let snap = scenario.emit_snapshot(idx, rng);
        let q = norm_sqr(&blocking.apply(&snap.received));
        acc += q * q;
    }
    let m4 = if samples > 0 { acc / samples as f64 } else { f64::NAN };
    (m2, m4)
}

/// `2Q(E[γ]/σ_v)`, clipped to `[0, 1]`.
pub fn update_probability(gamma_mean: f64, sigma_v: f64) -> Result<f64> {
    if !(sigma_v > 0.0) {
        return Err(Error::DegenerateNoise);
    }
    Ok((2.0 * q_function(gamma_mean / sigma_v)).clamp(0.0, 1.0))
}

/// `√λ σ_n ‖w̃_opt‖`
pub fn gamma_mean_pdb(lambda: f64, sigma_n: f64, w_opt_norm: f64) -> f64 {
    lambda.sqrt() * sigma_n * w_opt_norm
}

/// `√(ψ ν_∞) + √λ σ_n ‖w̃_opt‖`
pub fn gamma_mean_pidb(psi: f64, nu_inf: f64, lambda: f64, sigma_n: f64, w_opt_norm: f64) -> f64 {
    (psi * nu_inf).sqrt() + gamma_mean_pdb(lambda, sigma_n, w_opt_norm)
}

/// Auxiliary weights whose GSC effective weights best match `w_tilde`:
/// `w = B(v a0 − w̃)`, exact whenever `w̃^H a0 = v`.
pub fn aux_weights_from_effective(w_tilde: &CVector, v: f64, blocking: &BlockingMatrix) -> CVector {
    let target = blocking.look_direction() * Complex64::new(v, 0.0) - w_tilde;
    blocking.apply(&target)
}

/// Auxiliary-branch output power `w^H B R_in B^H w` with every interferer active.
pub fn nu_inf(w_opt: &CVector, blocking: &BlockingMatrix, scenario: &Scenario) -> f64 {
    let r_in = scenario.interference_noise_covariance(steady_index(scenario));
    let x = blocking.apply_adjoint(w_opt);
    x.dotc(&(&r_in * &x)).re
}

/// First and second step-size moments, evaluated as printed:
/// `E[γ]𝒫 + (1−𝒫)/(E[γ]·E‖Br‖²)` and `E[γ]𝒫 + (1−𝒫)/(E[γ]·E‖Br‖⁴)`.
pub fn mu_moments(gamma_mean: f64, p_update: f64, m2_br: f64, m4_br: f64) -> Result<(f64, f64)> {
    if gamma_mean == 0.0 {
        return Err(Error::UndefinedMoment);
    }
    let mu1 = gamma_mean * p_update + (1.0 - p_update) / (gamma_mean * m2_br);
    let mu2 = gamma_mean * p_update + (1.0 - p_update) / (gamma_mean * m4_br);
    Ok((mu1, mu2))
}

/// `K₁ = 3 + 3σ_I⁴ + 6σ_I²σ_v² + 3σ_v⁴`
pub fn k1(sigma_i2: f64, sigma_v2: f64) -> f64 {
    3.0 + 3.0 * sigma_i2 * sigma_i2 + 6.0 * sigma_i2 * sigma_v2 + 3.0 * sigma_v2 * sigma_v2
}

/// `K₂ = σ_v⁶ + 3σ_I²σ_v⁴ + 3σ_I⁴σ_v² + σ_I⁶ + σ_v⁴ + 2σ_I²σ_v² + σ_I⁴ + 4σ_v² + 2σ_I² + 2`
pub fn k2(sigma_i2: f64, sigma_v2: f64) -> f64 {
    let (i, v) = (sigma_i2, sigma_v2);
    v.powi(3) + 3.0 * i * v * v + 3.0 * i * i * v + i.powi(3) + v * v + 2.0 * i * v + i * i + 4.0 * v
        + 2.0 * i
        + 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcessMse {
    pub full: Result<f64>,
    pub simplified: Result<f64>,
}

/// Steady-state excess MSE from the step-size moments.
pub fn excess_mse(inputs: &PredictionInputs, mu1: f64, mu2: f64, form: ExcessForm) -> Result<f64> {
    let (si, sv, m2) = (inputs.sigma_i2, inputs.sigma_v2, inputs.m2_br);
    let (num, den) = match form {
        ExcessForm::Full => (mu2 * m2 * k2(si, sv), 2.0 * mu1 * (si + sv) - mu2 * m2 * k1(si, sv)),
        ExcessForm::Simplified => (
            mu2 * m2 * (sv.powi(3) + sv * sv + 4.0 * sv + 2.0),
            2.0 * mu1 * sv - mu2 * m2 * (3.0 + 3.0 * sv * sv),
        ),
    };
    if !(den > 0.0) {
        return Err(Error::PredictionOutOfDomain(den));
    }
    Ok(num / den)
}

pub fn excess_mse_both(inputs: &PredictionInputs, mu1: f64, mu2: f64) -> ExcessMse {
    ExcessMse {
        full: excess_mse(inputs, mu1, mu2, ExcessForm::Full),
        simplified: excess_mse(inputs, mu1, mu2, ExcessForm::Simplified),
    }
}

pub fn steady_state_mse(xi_min: f64, xi_ex: f64) -> f64 {
    xi_min + xi_ex
}

/// Chain the update probability, step-size moments and excess MSE.
pub fn predict(inputs: &PredictionInputs, form: ExcessForm) -> Result<MsePrediction> {
    let p_update = update_probability(inputs.gamma_mean, inputs.sigma_v2.sqrt())?;
    let (mu1, mu2) = mu_moments(inputs.gamma_mean, p_update, inputs.m2_br, inputs.m4_br)?;
    let xi_ex = excess_mse(inputs, mu1, mu2, form)?;
    Ok(MsePrediction {
        p_update,
        mu1,
        mu2,
        xi_ex,
        xi_total: steady_state_mse(inputs.xi_min, xi_ex),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::{ArrayGeometry, SourceSpec};
    use crate::gsc::BlockingKind;

    fn inputs(sigma_i2: f64, sigma_v2: f64, m2: f64) -> PredictionInputs {
        PredictionInputs {
            sigma_i2,
            sigma_v2,
            m2_br: m2,
            m4_br: m2 * m2 * 1.2,
            gamma_mean: 0.1,
            w_opt_norm2: 1.0,
            xi_min: 0.02,
        }
    }

    fn scenario(doas: &[f64], noise: f64) -> Scenario {
        let g = ArrayGeometry::new(8, 0.5).unwrap();
        let sources = doas
            .iter()
            .enumerate()
            .map(|(k, &doa)| SourceSpec {
                doa,
                power: 1.0,
                onset: 0,
                is_desired: k == 0,
            })
            .collect();
        Scenario::new(g, sources, noise, 0.0).unwrap()
    }

    #[test]
    fn q_function_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        assert!((2.0 * q_function(1.0) - 0.317_310_507_862_914_1).abs() < 1e-12);
        assert!(q_function(40.0) < 1e-300);
    }

    #[test]
    fn update_probability_cases() {
        assert_eq!(update_probability(0.0, 0.1).unwrap(), 1.0);
        assert!((update_probability(0.1, 0.1).unwrap() - 0.31731).abs() < 1e-5);
        assert!(update_probability(1e3, 0.1).unwrap() < 1e-300);
        assert!(matches!(update_probability(0.1, 0.0), Err(Error::DegenerateNoise)));
        let mut last = 1.0;
        for k in 0..100 {
            let p = update_probability(k as f64 * 0.01, 0.1).unwrap();
            assert!(p <= last);
            last = p;
        }
    }

    #[test]
    fn residual_power_cases() {
        let s = scenario(&[1.0], 0.01);
        let a0 = s.desired_steering().clone();
        let (si, sv) = residual_powers(&a0, &s);
        assert!(si.abs() < 1e-15 && (sv - 0.01).abs() < 1e-15);
        let s2 = scenario(&[1.0, 2.0], 0.01);
        let a1 = s2.steering(1).clone();
        let (si, _) = residual_powers(&a1, &s2);
        assert!((si - 1.0).abs() < 1e-12);
    }

    #[test]
    fn second_moment_closed_form_white() {
        let s = scenario(&[1.0], 0.0);
        // Negligible source power and unit noise: R = I.
        let g = ArrayGeometry::new(8, 0.5).unwrap();
        let noise_only = Scenario::new(
            g,
            vec![SourceSpec {
                doa: 1.0,
                power: 1e-300,
                onset: 0,
                is_desired: true,
            }],
            1.0,
            0.0,
        )
        .unwrap();
        let a0 = s.desired_steering();
        let mut rng = rand::rng();
        for kind in [BlockingKind::Css, BlockingKind::Nullspace] {
            let b = BlockingMatrix::new(kind, a0).unwrap();
            let (m2, _) = br_norm_moments(&b, &noise_only, 0, &mut rng);
            assert!((m2 - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_means() {
        assert!((gamma_mean_pdb(2.0, 0.1, 1.0) - 0.141_421_356).abs() < 1e-8);
        assert!((gamma_mean_pdb(2.0, 0.3, 1.0) - 3.0 * gamma_mean_pdb(2.0, 0.1, 1.0)).abs() < 1e-15);
        assert_eq!(gamma_mean_pidb(0.0, 5.0, 2.0, 0.1, 1.0), gamma_mean_pdb(2.0, 0.1, 1.0));
        assert!((gamma_mean_pidb(0.003, 1.0, 2.0, 0.1, 1.0) - 0.19619).abs() < 1e-5);
    }

    #[test]
    fn pdb_mean_is_recursion_fixed_point() {
        use crate::sm_adaptive::{bound_update_pdb, BoundScheme, BoundState};
        let w = CVector::from_vec(vec![Complex64::new(0.8, 0.0), Complex64::new(0.0, 0.9)]);
        let mut s = BoundState::default();
        for _ in 0..3000 {
            s = bound_update_pdb(&s, &w, 0.04, &BoundScheme::pdb(0.98, 2.0));
        }
        assert!((s.gamma - gamma_mean_pdb(2.0, 0.2, norm_sqr(&w).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn mu_moment_cases() {
        assert_eq!(mu_moments(0.3, 1.0, 15.0, 260.0).unwrap(), (0.3, 0.3));
        let (mu1, _) = mu_moments(0.3, 0.0, 15.0, 260.0).unwrap();
        assert!((mu1 - 1.0 / (0.3 * 15.0)).abs() < 1e-15);
        let (mu1, mu2) = mu_moments(0.2, 0.25, 15.0, 260.0).unwrap();
        assert!((mu1 - 0.3).abs() < 1e-15);
        assert!((mu2 - 0.064_423).abs() < 1e-6);
        assert!(matches!(mu_moments(0.0, 0.5, 1.0, 1.0), Err(Error::UndefinedMoment)));
    }

    #[test]
    fn excess_forms_coincide_without_interference() {
        let inp = inputs(0.0, 0.01, 15.0);
        let both = excess_mse_both(&inp, 1e-3, 1e-8);
        assert_eq!(both.full.unwrap(), both.simplified.unwrap());
    }

    #[test]
    fn excess_domain_guard() {
        let inp = inputs(0.0, 0.01, 15.0);
        // denominator 2e-4 − 1.5e-3·3.0003
        match excess_mse(&inp, 0.01, 1e-4, ExcessForm::Simplified) {
            Err(Error::PredictionOutOfDomain(d)) => assert!((d - (2e-4 - 4.500_45e-3)).abs() < 1e-15),
            other => panic!("expected domain error, got {other:?}"),
        }
        assert!(excess_mse(&inp, 1e-3, 1e-6, ExcessForm::Full).is_err());
        // mu2·m2·K1 < 2·mu1·σ_v²: 1e-8·15·3.0003 = 4.5e-7 < 2e-5
        let ok = excess_mse(&inp, 1e-3, 1e-8, ExcessForm::Full).unwrap();
        let expect = 1e-8 * 15.0 * 2.040101 / (2e-5 - 1e-8 * 15.0 * 3.0003);
        assert!(ok > 0.0 && ok.is_finite());
        assert!((ok - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn full_form_continuous_in_interference() {
        let a = excess_mse(&inputs(1e-11, 0.01, 15.0), 1e-3, 1e-8, ExcessForm::Full).unwrap();
        let b = excess_mse(&inputs(0.0, 0.01, 15.0), 1e-3, 1e-8, ExcessForm::Simplified).unwrap();
        assert!((a - b).abs() < 1e-6 * b);
    }

    #[test]
    fn steady_state_is_additive() {
        assert_eq!(steady_state_mse(0.05, 0.0), 0.05);
        let t = steady_state_mse(0.05, 0.013);
        assert!(((t - 0.05) - 0.013).abs() < 1e-17);
    }

    #[test]
    fn aux_weights_roundtrip() {
        let s = scenario(&[1.0, 2.0], 0.01);
        let a0 = s.desired_steering().clone();
        for kind in [BlockingKind::Css, BlockingKind::Nullspace] {
            let b = BlockingMatrix::new(kind, &a0).unwrap();
            let w = CVector::from_fn(b.rows(), |i, _| Complex64::new(0.1 * i as f64, -0.05));
            let wt = crate::gsc::effective_weights(1.0, &a0, &b, &w).unwrap();
            let back = aux_weights_from_effective(&wt, 1.0, &b);
            let wt2 = crate::gsc::effective_weights(1.0, &a0, &b, &back).unwrap();
            assert!((wt2 - wt).norm() < 1e-12);
        }
    }
}
