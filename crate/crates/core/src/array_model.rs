//! Uniform linear array signal model: steering vectors, source layouts,
//! received snapshots and their exact second moments.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

/// Number of attempts allowed when drawing DOAs that respect the separation floor.
pub const RESAMPLE_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub elements: usize,
    /// Inter-element distance over carrier wavelength.
    pub spacing_ratio: f64,
}

impl ArrayGeometry {
    pub fn new(elements: usize, spacing_ratio: f64) -> Result<Self> {
        if elements < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 elements, got {elements}"
            )));
        }
        if !(spacing_ratio > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "spacing ratio must be positive, got {spacing_ratio}"
            )));
        }
        Ok(Self {
            elements,
            spacing_ratio,
        })
    }

    pub fn steering(&self, theta: f64) -> CVector {
        steering_vector(theta, self.elements, self.spacing_ratio)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    /// Direction of arrival in radians, in `(0, π)`.
    pub doa: f64,
    /// Linear power.
    pub power: f64,
    /// First snapshot index at which the source transmits.
    pub onset: usize,
    pub is_desired: bool,
}

/// A source request before DOA randomization; `doa: None` draws one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceRequest {
    pub doa: Option<f64>,
    pub power: f64,
    pub onset: usize,
}

/// Unresolved scenario: the desired source is `sources[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDescription {
    pub geometry: ArrayGeometry,
    pub sources: Vec<SourceRequest>,
    pub noise_power: f64,
    pub min_separation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    /// Desired source first.
    pub sources: Vec<SourceSpec>,
    pub noise_power: f64,
    pub min_separation: f64,
    steering: Vec<CVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub received: CVector,
    pub desired_symbol: f64,
    pub index: usize,
}

/// Unit-norm ULA response: element `p` is `exp(-2πj·p·d·cos θ)/√m`.
pub fn steering_vector(theta: f64, m: usize, spacing_ratio: f64) -> CVector {
    let scale = 1.0 / (m as f64).sqrt();
    let phase_step = -2.0 * PI * spacing_ratio * theta.cos();
    CVector::from_iterator(
        m,
        (0..m).map(|p| Complex64::from_polar(scale, phase_step * p as f64)),
    )
}

fn separations_ok(doas: &[f64], min_separation: f64) -> bool {
    doas.iter().enumerate().all(|(i, a)| {
        doas[i + 1..]
            .iter()
            .all(|b| (a - b).abs() >= min_separation)
    })
}

/// Resolve a description into a concrete scenario, drawing any unspecified
/// DOAs uniformly on `(0, π)` until every pair is at least `min_separation` apart.
pub fn build_scenario<R: Rng + ?Sized>(raw: &ScenarioDescription, rng: &mut R) -> Result<Scenario> {
    let m = raw.geometry.elements;
    let q = raw.sources.len();
    if q == 0 {
        return Err(Error::InfeasibleScenario("no sources".into()));
    }
    if q > m {
        return Err(Error::InfeasibleScenario(format!(
            "{q} sources exceed {m} array elements"
        )));
    }
    if raw.noise_power < 0.0 {
        return Err(Error::InfeasibleScenario(format!(
            "negative noise power {}",
            raw.noise_power
        )));
    }
    if raw.sources[0].onset != 0 {
        return Err(Error::InfeasibleScenario(
            "desired source must be active from snapshot 0".into(),
        ));
    }
    for s in &raw.sources {
        if !(s.power > 0.0) {
            return Err(Error::InfeasibleScenario(format!(
                "source power must be positive, got {}",
                s.power
            )));
        }
        if let Some(d) = s.doa {
            if !(d > 0.0 && d < PI) {
                return Err(Error::InfeasibleScenario(format!(
                    "DOA {d} rad outside (0, π)"
                )));
            }
        }
    }

    let mut doas: Vec<f64> = raw.sources.iter().map(|s| s.doa.unwrap_or(0.0)).collect();
    let randomized = raw.sources.iter().any(|s| s.doa.is_none());
    let mut feasible = separations_ok(&doas, raw.min_separation) && !randomized;
    if randomized {
        for _ in 0..RESAMPLE_BUDGET {
            for (d, s) in doas.iter_mut().zip(&raw.sources) {
                if s.doa.is_none() {
                    *d = loop {
                        let x: f64 = rng.random_range(0.0..PI);
                        if x > 0.0 {
                            break x;
                        }
                    };
                }
            }
            if separations_ok(&doas, raw.min_separation) {
                feasible = true;
                break;
            }
        }
    }
    if !feasible {
        return Err(Error::InfeasibleScenario(format!(
            "could not place {q} sources with separation {:.4} rad",
            raw.min_separation
        )));
    }

    let sources = raw
        .sources
        .iter()
        .zip(&doas)
        .enumerate()
        .map(|(k, (s, &doa))| SourceSpec {
            doa,
            power: s.power,
            onset: s.onset,
            is_desired: k == 0,
        })
        .collect();
    Scenario::new(raw.geometry, sources, raw.noise_power, raw.min_separation)
}

impl Scenario {
    /// Builds a scenario from resolved sources; the desired one must come first.
    pub fn new(
        geometry: ArrayGeometry,
        sources: Vec<SourceSpec>,
        noise_power: f64,
        min_separation: f64,
    ) -> Result<Self> {
        let desired = sources.iter().filter(|s| s.is_desired).count();
        if desired != 1 || !sources.first().is_some_and(|s| s.is_desired && s.onset == 0) {
            return Err(Error::InfeasibleScenario(
                "exactly one desired source, listed first with onset 0, is required".into(),
            ));
        }
        if sources.len() > geometry.elements {
            return Err(Error::InfeasibleScenario(format!(
                "{} sources exceed {} array elements",
                sources.len(),
                geometry.elements
            )));
        }
        let steering = sources.iter().map(|s| geometry.steering(s.doa)).collect();
        Ok(Self {
            geometry,
            sources,
            noise_power,
            min_separation,
            steering,
        })
    }

    pub fn elements(&self) -> usize {
        self.geometry.elements
    }

    /// Steering vector of source `k`.
    pub fn steering(&self, k: usize) -> &CVector {
        &self.steering[k]
    }

    pub fn desired_steering(&self) -> &CVector {
        &self.steering[0]
    }

    pub fn is_active(&self, k: usize, index: usize) -> bool {
        self.sources[k].onset <= index
    }

    /// Interferers (k ≥ 1) transmitting at `index`.
    pub fn active_interferers(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        (1..self.sources.len()).filter(move |&k| self.is_active(k, index))
    }

    /// Draw snapshot `index` of the received process.
    ///
    /// Every source's symbol is drawn each snapshot, active or not, so the
    /// random stream advances identically regardless of onset times.
    pub fn emit_snapshot<R: Rng + ?Sized>(&self, index: usize, rng: &mut R) -> Snapshot {
        let m = self.elements();
        let mut received = CVector::zeros(m);
        let mut desired_symbol = 0.0;
        for (k, src) in self.sources.iter().enumerate() {
            let b = if rng.random::<bool>() { 1.0 } else { -1.0 };
            if k == 0 {
                desired_symbol = b;
            }
            if src.onset <= index {
                received.axpy(Complex64::new(src.power.sqrt() * b, 0.0), &self.steering[k], Complex64::new(1.0, 0.0));
            }
        }
        let sd = (self.noise_power / 2.0).sqrt();
        for z in received.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *z += Complex64::new(sd * re, sd * im);
        }
        Snapshot {
            received,
            desired_symbol,
            index,
        }
    }

    /// `Σ_active p_k a_k a_k^H + σ_n² I`.
    pub fn ideal_covariance(&self, index: usize) -> CMatrix {
        let mut r = self.interference_noise_covariance(index);
        let a0 = &self.steering[0];
        r += a0 * a0.adjoint() * Complex64::new(self.sources[0].power, 0.0);
        r
    }

    /// Interference-plus-noise covariance: the ideal covariance without the desired source.
    pub fn interference_noise_covariance(&self, index: usize) -> CMatrix {
        let m = self.elements();
        let mut r = CMatrix::identity(m, m) * Complex64::new(self.noise_power, 0.0);
        for k in self.active_interferers(index) {
            let a = &self.steering[k];
            r += a * a.adjoint() * Complex64::new(self.sources[k].power, 0.0);
        }
        r
    }

    /// Whether the set of active sources changes between `a` and `b`.
    pub fn same_activity(&self, a: usize, b: usize) -> bool {
        self.sources
            .iter()
            .all(|s| (s.onset <= a) == (s.onset <= b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_defect, hermitian_eigenvalues, norm_sqr};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    #[test]
    fn steering_broadside_is_flat() {
        let a = steering_vector(PI / 2.0, 4, 0.5);
        for z in a.iter() {
            assert!((z - c(0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn steering_endfire_alternates() {
        let a = steering_vector(0.0, 2, 0.5);
        let s = 1.0 / 2f64.sqrt();
        assert!((a[0] - c(s, 0.0)).norm() < 1e-12);
        assert!((a[1] - c(-s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_unit_norm_and_distinct_doas_independent() {
        for m in [2usize, 5, 16, 33] {
            for k in 0..50 {
                let theta = PI * k as f64 / 49.0;
                let a = steering_vector(theta, m, 0.5);
                assert!((norm_sqr(&a).sqrt() - 1.0).abs() < 1e-12);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let t1: f64 = rng.random_range(0.01..PI - deg(2.0) - 0.01);
            let t2 = t1 + deg(2.0) + rng.random_range(0.0..(PI - t1 - deg(2.0)));
            let a = steering_vector(t1, 16, 0.5);
            let b = steering_vector(t2.min(PI - 1e-6), 16, 0.5);
            let g = a.dotc(&b).norm_sqr();
            // Gram determinant of two unit vectors.
            assert!(1.0 - g > 1e-10, "gram det {} at {t1} {t2}", 1.0 - g);
        }
    }

    fn desc(doas: &[Option<f64>], min_sep_deg: f64) -> ScenarioDescription {
        ScenarioDescription {
            geometry: ArrayGeometry::new(16, 0.5).unwrap(),
            sources: doas
                .iter()
                .map(|&doa| SourceRequest {
                    doa,
                    power: 1.0,
                    onset: 0,
                })
                .collect(),
            noise_power: 0.01,
            min_separation: deg(min_sep_deg),
        }
    }

    #[test]
    fn explicit_doas_pass_through() {
        let d = desc(&[Some(deg(20.0)), Some(deg(60.0)), Some(deg(110.0))], 2.0);
        let s = build_scenario(&d, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let got: Vec<f64> = s.sources.iter().map(|x| x.doa).collect();
        assert_eq!(got, vec![deg(20.0), deg(60.0), deg(110.0)]);
        assert!(s.sources[0].is_desired && !s.sources[1].is_desired);
    }

    #[test]
    fn randomized_doas_respect_separation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let s = build_scenario(&desc(&[None; 6], 2.0), &mut rng).unwrap();
            let mut pairs = 0;
            for i in 0..6 {
                for j in i + 1..6 {
                    pairs += 1;
                    assert!((s.sources[i].doa - s.sources[j].doa).abs() >= deg(2.0));
                }
                assert!(s.sources[i].doa > 0.0 && s.sources[i].doa < PI);
            }
            assert_eq!(pairs, 15);
        }
    }

    #[test]
    fn too_dense_is_infeasible() {
        let err = build_scenario(&desc(&[None; 16], 30.0), &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(err, Err(Error::InfeasibleScenario(_))));
        let too_many = desc(&[None; 17], 0.1);
        assert!(build_scenario(&too_many, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
        let close = desc(&[Some(deg(30.0)), Some(deg(31.0))], 2.0);
        assert!(build_scenario(&close, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn noiseless_single_source_snapshot() {
        let g = ArrayGeometry::new(8, 0.5).unwrap();
        let src = SourceSpec {
            doa: 1.0,
            power: 1.0,
            onset: 0,
            is_desired: true,
        };
        let s = Scenario::new(g, vec![src], 0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..20 {
            let snap = s.emit_snapshot(i, &mut rng);
            let expect = s.desired_steering() * Complex64::new(snap.desired_symbol, 0.0);
            assert!((snap.received - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn onset_gates_contributions() {
        let g = ArrayGeometry::new(16, 0.5).unwrap();
        let mut sources = vec![SourceSpec {
            doa: 1.0,
            power: 1.0,
            onset: 0,
            is_desired: true,
        }];
        for (k, onset) in [0usize, 0, 0, 1000, 1000, 1000].iter().enumerate() {
            sources.push(SourceSpec {
                doa: 0.3 + 0.35 * k as f64,
                power: 1.0,
                onset: *onset,
                is_desired: false,
            });
        }
        let s = Scenario::new(g, sources, 0.0, 0.0).unwrap();
        assert_eq!(s.active_interferers(500).count(), 3);
        assert_eq!(s.active_interferers(1000).count(), 6);
        let tr = |i| s.ideal_covariance(i).trace().re;
        assert!((tr(500) - 4.0).abs() < 1e-12);
        assert!((tr(1500) - 7.0).abs() < 1e-12);
        assert!(s.same_activity(0, 999) && !s.same_activity(999, 1000));
    }

    #[test]
    fn ideal_covariance_basics() {
        let g = ArrayGeometry::new(6, 0.5).unwrap();
        let one = SourceSpec {
            doa: 0.7,
            power: 1.0,
            onset: 0,
            is_desired: true,
        };
        let s = Scenario::new(g, vec![one], 0.2, 0.0).unwrap();
        assert!((s.ideal_covariance(0).trace().re - (1.0 + 6.0 * 0.2)).abs() < 1e-12);
        let noise_only = s.interference_noise_covariance(0) * Complex64::new(1.0 / 0.2, 0.0);
        assert!((noise_only - CMatrix::identity(6, 6)).norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let d = desc(&[None; 5], 2.0);
            let s = build_scenario(&d, &mut rng).unwrap();
            let r = s.ideal_covariance(0);
            assert!(hermitian_defect(&r) < 1e-14);
            assert!(hermitian_eigenvalues(&r)[0] >= -1e-12);
        }
    }

    #[test]
    fn symbols_are_balanced() {
        let g = ArrayGeometry::new(2, 0.5).unwrap();
        let src = SourceSpec {
            doa: 1.0,
            power: 1.0,
            onset: 0,
            is_desired: true,
        };
        let s = Scenario::new(g, vec![src], 0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|i| s.emit_snapshot(i, &mut rng).desired_symbol)
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
    }
}
