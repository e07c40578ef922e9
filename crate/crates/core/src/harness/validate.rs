//! Invariant suite behind the `validate` subcommand.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::parse_config;
use super::metrics::{sinr_linear, write_csv_to};
use super::runner::run_experiment_with_threads;
use crate::analysis::{
    cm_cost_deterministic, cm_hessian, convexity_probe, finite_difference_hessian, fourth_moment_bruteforce,
    fourth_moment_paper, q_function, sample_phase_balanced, stability_bound,
};
use crate::array_model::{build_scenario, ArrayGeometry, Scenario, ScenarioDescription, SourceRequest};
use crate::baselines::mvdr_weights;
use crate::gsc::{BlockingKind, BlockingMatrix, GscState};
use crate::linalg::{CMatrix, CVector};
use crate::sm_adaptive::{BoundScheme, SmCmGsc};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn detail_suffix(&self) -> String {
        if self.detail.is_empty() {
            String::new()
        } else {
            format!(": {}", self.detail)
        }
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn random_scenario(rng: &mut ChaCha8Rng, noiseless: bool) -> Scenario {
    let m = rng.random_range(4..=12);
    let q = rng.random_range(1..=m / 2);
    let snr_db: f64 = rng.random_range(5.0..25.0);
    let desc = ScenarioDescription {
        geometry: ArrayGeometry::new(m, 0.5).unwrap(),
        sources: (0..q)
            .map(|k| SourceRequest {
                doa: None,
                power: if k == 0 { 1.0 } else { 10f64.powf(rng.random_range(-3.0..3.0) / 10.0) },
                onset: 0,
            })
            .collect(),
        noise_power: if noiseless { 0.0 } else { 10f64.powf(-snr_db / 10.0) },
        min_separation: 2f64.to_radians(),
    };
    build_scenario(&desc, rng).unwrap()
}

fn engine(scenario: &Scenario, kind: BlockingKind, scheme: BoundScheme) -> SmCmGsc {
    let a0 = scenario.desired_steering().clone();
    let b = Arc::new(BlockingMatrix::new(kind, &a0).unwrap());
    SmCmGsc::new(GscState::with_unit_start(1.0, a0, b).unwrap(), scheme, scenario.noise_power).unwrap()
}

/// Runs SM-CM-GSC over random scenarios and checks every step.
fn adaptive_checks(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let (mut updates, mut worst_proj, mut worst_dist, mut moved_inside) = (0usize, 0.0f64, 0.0f64, 0usize);
    for trial in 0..40 {
        let scenario = random_scenario(rng, false);
        let kind = if trial % 2 == 0 { BlockingKind::Css } else { BlockingKind::Nullspace };
        let scheme = match trial % 3 {
            0 => BoundScheme::fixed(rng.random_range(0.0..0.9)),
            1 => BoundScheme::pdb(0.98, 2.0),
            _ => BoundScheme::pidb(0.98, 2.0, 0.003),
        };
        let mut e = engine(&scenario, kind, scheme);
        for i in 0..300 {
            let r = scenario.emit_snapshot(i, rng).received;
            let before = e.state().w().clone();
            let step = e.step(&r).unwrap();
            let rec = step.record;
            if rec.updated {
                updates += 1;
                let prior = rec.y_prior.norm_sqr();
                let target = if prior > 1.0 + step.gamma { 1.0 + step.gamma } else { 1.0 - step.gamma };
                worst_proj = worst_proj.max((rec.y_posterior.norm_sqr() - target).abs() / target);
            } else if (rec.y_prior.norm_sqr() - 1.0).powi(2) <= step.gamma.powi(2) && e.state().w() != &before {
                moved_inside += 1;
            }
            let w_tilde = e.state().effective_weights();
            let resp = scenario.desired_steering().dotc(w_tilde);
            worst_dist = worst_dist.max((resp - Complex64::new(1.0, 0.0)).norm());
        }
    }
    vec![
        check(
            "projection lands on the active boundary",
            worst_proj <= 1e-9,
            format!("{updates} updates, worst relative error {worst_proj:.2e}"),
        ),
        check(
            "no update inside the constraint set",
            moved_inside == 0,
            format!("{moved_inside} weight changes inside the set"),
        ),
        check(
            "look-direction response stays at v",
            worst_dist <= 1e-10,
            format!("worst deviation {worst_dist:.2e}"),
        ),
    ]
}

fn blocking_check(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let s = random_scenario(rng, false);
        let a0 = s.desired_steering();
        for kind in [BlockingKind::Css, BlockingKind::Nullspace] {
            let b = BlockingMatrix::new(kind, a0).unwrap();
            worst = worst.max(b.apply(a0).norm());
        }
    }
    check("blocking matrix annihilates the look direction", worst <= 1e-12, format!("worst |B a0| {worst:.2e}"))
}

fn fourth_moment_check(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let q = rng.random_range(2..=10);
        let s = sample_phase_balanced(q, rng);
        let brute = fourth_moment_bruteforce(&s).unwrap();
        worst = worst.max((fourth_moment_paper(&s) - brute).abs() / brute);
    }
    let ones = [Complex64::new(1.0, 0.0); 2];
    let pair = (fourth_moment_paper(&ones), fourth_moment_bruteforce(&ones).unwrap());
    check(
        "closed-form fourth moment on phase-balanced gains",
        worst <= 1e-12 && pair == (6.0, 8.0),
        format!("worst relative gap {worst:.2e}, s=[1,1] gives {} vs {}", pair.0, pair.1),
    )
}

fn hessian_checks(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mut worst_eig = f64::INFINITY;
    for v in [std::f64::consts::FRAC_1_SQRT_2, 1.0, 1.5] {
        let s = random_scenario(rng, true);
        worst_eig = worst_eig.min(convexity_probe(&s, v, 50, 2.0, rng).unwrap());
    }
    let mut worst_rel = 0.0f64;
    for _ in 0..10 {
        let s = random_scenario(rng, false);
        let v = rng.random_range(0.3..1.5);
        let w = CVector::from_fn(s.elements(), |_, _| {
            Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))
        });
        let exact = cm_hessian(&w, &s, v);
        let fd = finite_difference_hessian(|x| cm_cost_deterministic(x, &s, v), &w, 1e-4);
        worst_rel = worst_rel.max((&exact - &fd).camax() / exact.camax());
    }
    vec![
        check(
            "CM cost convex for v^2 >= 1/2 without noise",
            worst_eig >= -1e-8,
            format!("min eigenvalue {worst_eig:.2e}"),
        ),
        check(
            "Hessian matches finite differences",
            worst_rel <= 1e-4,
            format!("worst relative error {worst_rel:.2e}"),
        ),
    ]
}

fn mvdr_check(rng: &mut ChaCha8Rng) -> Check {
    let mut violations = 0;
    for _ in 0..20 {
        let s = random_scenario(rng, false);
        let a0 = s.desired_steering();
        let best = sinr_linear(&mvdr_weights(&s.ideal_covariance(0), a0).unwrap(), &s, 0);
        for _ in 0..50 {
            let w = CVector::from_fn(s.elements(), |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            if sinr_linear(&w, &s, 0) > best * (1.0 + 1e-9) {
                violations += 1;
            }
        }
    }
    check("MVDR beats random beamformers", violations == 0, format!("{violations} violations"))
}

fn scalar_checks() -> Vec<Check> {
    let alpha = 0.37;
    let bound = stability_bound(&(CMatrix::identity(5, 5) * Complex64::new(alpha, 0.0))).unwrap();
    let q0 = q_function(0.0);
    vec![
        check(
            "stability bound of a scaled identity",
            (bound - 2.0 / alpha).abs() <= 1e-12,
            format!("{bound} vs {}", 2.0 / alpha),
        ),
        check("Q(0) = 1/2", (q0 - 0.5).abs() <= 1e-15, String::new()),
    ]
}

const SMALL_RUN: &str = r#"
[scenario]
snr_db = 15.0
random_source_count = 4
snapshots = 200
[run]
runs = 40
master_seed = 11
[[algorithms]]
name = "sm-pidb"
algorithm = "sm-cm-gsc"
bound = { kind = "pidb" }
[[algorithms]]
name = "cm-gsc"
algorithm = "cm-gsc"
"#;

fn determinism_check() -> Check {
    let cfg = parse_config(SMALL_RUN).unwrap();
    let csv = |threads| {
        let res = run_experiment_with_threads(&cfg, threads).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&res.series, &mut buf).unwrap();
        buf
    };
    let (one, many) = (csv(1), csv(4));
    check(
        "identical CSV across thread counts",
        one == many,
        format!("{} bytes", one.len()),
    )
}

/// Fixed-seed checks of the core invariants, one entry per property.
pub fn run_suite() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out = adaptive_checks(&mut rng);
    out.push(blocking_check(&mut rng));
    out.push(fourth_moment_check(&mut rng));
    out.extend(hessian_checks(&mut rng));
    out.push(mvdr_check(&mut rng));
    out.extend(scalar_checks());
    out.push(determinism_check());
    out
}
