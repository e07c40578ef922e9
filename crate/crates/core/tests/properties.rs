use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smcm_gsc::analysis::{
    fourth_moment_bruteforce, fourth_moment_paper, q_function, sample_phase_balanced, stability_bound,
    update_probability,
};
use smcm_gsc::array_model::{build_scenario, steering_vector, ArrayGeometry, Scenario, ScenarioDescription, SourceRequest};
use smcm_gsc::baselines::mvdr_weights;
use smcm_gsc::gsc::{BlockingKind, BlockingMatrix, GscState};
use smcm_gsc::harness::config::to_toml;
use smcm_gsc::harness::{parse_config, sinr_linear};
use smcm_gsc::linalg::{CMatrix, CVector};
use smcm_gsc::sm_adaptive::{bound_update_pdb, sm_step_size, BoundScheme, BoundState, SmCmGsc};

fn scenario(seed: u64, m: usize, q: usize, snr_db: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let desc = ScenarioDescription {
        geometry: ArrayGeometry::new(m, 0.5).unwrap(),
        sources: (0..q)
            .map(|_| SourceRequest {
                doa: None,
                power: 1.0,
                onset: 0,
            })
            .collect(),
        noise_power: 10f64.powf(-snr_db / 10.0),
        min_separation: 2f64.to_radians(),
    };
    build_scenario(&desc, &mut rng).unwrap()
}

fn blocking_kind(css: bool) -> BlockingKind {
    if css {
        BlockingKind::Css
    } else {
        BlockingKind::Nullspace
    }
}

fn complex_vec(m: usize) -> impl Strategy<Value = CVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), m)
        .prop_map(|v| CVector::from_iterator(v.len(), v.into_iter().map(|(re, im)| Complex64::new(re, im))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn updates_land_on_the_boundary_and_keep_the_look_response(
        seed in any::<u64>(),
        m in 4usize..12,
        snr in 5.0f64..25.0,
        gamma in 0.0f64..0.9,
        css in any::<bool>(),
    ) {
        let s = scenario(seed, m, 1 + (seed % (m as u64 / 2)) as usize, snr);
        let a0 = s.desired_steering().clone();
        let b = Arc::new(BlockingMatrix::new(blocking_kind(css), &a0).unwrap());
        let mut e = SmCmGsc::new(GscState::with_unit_start(1.0, a0.clone(), b).unwrap(), BoundScheme::fixed(gamma), s.noise_power).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for i in 0..100 {
            let r = s.emit_snapshot(i, &mut rng).received;
            let before = e.state().w().clone();
            let step = e.step(&r).unwrap();
            let rec = step.record;
            let e_prior = rec.y_prior.norm_sqr() - 1.0;
            if rec.updated {
                let target = if e_prior > 0.0 { 1.0 + gamma } else { 1.0 - gamma };
                prop_assert!((rec.y_posterior.norm_sqr() - target).abs() <= 1e-9 * target);
            } else {
                prop_assert_eq!(e.state().w(), &before);
            }
            if e_prior * e_prior <= gamma * gamma {
                prop_assert!(!rec.updated);
            }
            let resp = a0.dotc(e.state().effective_weights());
            prop_assert!((resp - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn step_size_vanishes_inside_the_set(mag in 0.0f64..2.0, phase in 0.0f64..std::f64::consts::TAU, gamma in 0.0f64..2.0, q_br in 0.01f64..10.0) {
        let y = Complex64::from_polar(mag, phase);
        let e = mag * mag - 1.0;
        let mu = sm_step_size(y, gamma, q_br);
        if e * e <= gamma * gamma || (e < 0.0 && gamma >= 1.0) {
            prop_assert_eq!(mu.unwrap(), 0.0);
        }
    }

    #[test]
    fn blocking_annihilates_look_direction(theta in 0.0f64..std::f64::consts::PI, m in 2usize..20, css in any::<bool>()) {
        let a0 = steering_vector(theta, m, 0.5);
        prop_assert!((a0.norm() - 1.0).abs() < 1e-12);
        let b = BlockingMatrix::new(blocking_kind(css), &a0).unwrap();
        prop_assert!(b.apply(&a0).norm() < 1e-12);
    }

    #[test]
    fn fourth_moment_closed_form_on_phase_balanced(seed in any::<u64>(), q in 2usize..12) {
        let s = sample_phase_balanced(q, &mut ChaCha8Rng::seed_from_u64(seed));
        let brute = fourth_moment_bruteforce(&s).unwrap();
        prop_assert!((fourth_moment_paper(&s) - brute).abs() <= 1e-12 * brute);
    }

    #[test]
    fn update_probability_falls_with_the_bound(g1 in 0.0f64..5.0, dg in 0.0f64..5.0, sigma in 0.01f64..3.0) {
        let p1 = update_probability(g1, sigma).unwrap();
        let p2 = update_probability(g1 + dg, sigma).unwrap();
        prop_assert!(p2 <= p1);
        prop_assert!((0.0..=1.0).contains(&p1));
    }

    #[test]
    fn q_function_symmetry(x in -8.0f64..8.0) {
        prop_assert!((q_function(x) + q_function(-x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stability_bound_unitary_invariant(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rand_mat = |rng: &mut ChaCha8Rng| CMatrix::from_fn(n, n, |_, _| {
            use rand::Rng;
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let a = rand_mat(&mut rng);
        let u = rand_mat(&mut rng).qr().q();
        let rotated = &u * &a * u.adjoint();
        let (b0, b1) = (stability_bound(&a).unwrap(), stability_bound(&rotated).unwrap());
        prop_assert!((b0 - b1).abs() <= 1e-8 * b0);
    }

    #[test]
    fn mvdr_is_sinr_optimal(seed in any::<u64>(), w in complex_vec(8), snr in 0.0f64..25.0) {
        let s = scenario(seed, 8, 3, snr);
        let best = sinr_linear(&mvdr_weights(&s.ideal_covariance(0), s.desired_steering()).unwrap(), &s, 0);
        prop_assert!(sinr_linear(&w, &s, 0) <= best * (1.0 + 1e-9));
    }

    #[test]
    fn pdb_bound_settles_at_its_fixed_point(w in complex_vec(6), lambda in 0.5f64..4.0, noise in 0.001f64..0.5) {
        let scheme = BoundScheme::pdb(0.98, lambda);
        let mut st = BoundState { gamma: 0.0, nu: 0.0 };
        for _ in 0..50 {
            st = bound_update_pdb(&st, &w, noise, &scheme);
        }
        let target = (lambda * w.norm_squared() * noise).sqrt().min(10.0);
        prop_assert!((st.gamma - target).abs() <= 1e-9 * (1.0 + target));
    }

    #[test]
    fn config_round_trips(snr in -5.0f64..30.0, q in 1usize..8, runs in 1usize..5000, seed in any::<u64>(), gamma in 0.0f64..1.0) {
        let text = format!(
            "[scenario]\nsnr_db = {snr}\nrandom_source_count = {q}\nsnapshots = 100\n[run]\nruns = {runs}\nmaster_seed = {seed}\n\
             [[algorithms]]\nname = \"a\"\nalgorithm = \"sm-cm-gsc\"\nbound = {{ kind = \"fixed\", gamma = {gamma} }}\n"
        );
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(parse_config(&to_toml(&cfg).unwrap()).unwrap(), cfg);
    }
}
