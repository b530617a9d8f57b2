use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pgq_core::harness::Algorithm;
use pgq_core::learners::pgq_derived_direction;
use pgq_core::toy::full_rank_toy;
use pgq_core::{build_baird_star, BoltzmannPolicy, LearnerState, ObjectiveWorkspace, TransitionSample, Vector};

#[test]
fn derived_direction_is_half_the_negative_gradient_in_expectation() {
    for seed in 0..3 {
        let toy = full_rank_toy(3, 2, seed).unwrap();
        let target = BoltzmannPolicy::new(toy.features.clone(), 0.5).unwrap();
        let ws = ObjectiveWorkspace::uniform(toy.mdp.clone(), target.clone()).unwrap();
        let mdp = &toy.mdp;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            let theta = Vector::from_fn(ws.k(), |_, _| rng.random_range(-1.0..1.0));
            let w = ws.exact_w(&theta);
            let mut expected = Vector::zeros(ws.k());
            for s in 0..mdp.n_states() {
                let probs = target.action_probabilities(&theta, s).unwrap();
                for (a, &p) in probs.iter().enumerate() {
                    for s_next in 0..mdp.n_states() {
                        let weight = ws.state_weights().get(s) * p * mdp.transition(s, a, s_next);
                        let sample = TransitionSample::new(s, a, mdp.reward(s, a), s_next);
                        let dir = pgq_derived_direction(&theta, &w, &sample, &target, mdp.gamma());
                        expected.axpy(weight, &dir, 1.0);
                    }
                }
            }
            let half_gradient = ws.mspbe_gradient(&theta) * -0.5;
            assert!((expected - half_gradient).amax() < 1e-8);
        }
    }
}

fn baird_sample(rng: &mut ChaCha8Rng) -> TransitionSample {
    let baird = build_baird_star();
    let s = rng.random_range(0..7);
    let a = rng.random_range(0..2);
    let (s_next, r) = baird.mdp.sample_transition(s, a, rng).unwrap();
    TransitionSample::new(s, a, r, s_next)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn zero_step_sizes_leave_state_untouched(seed in any::<u64>(), raw in proptest::collection::vec(-3.0f64..3.0, 32)) {
        let baird = build_baird_star();
        let target = BoltzmannPolicy::new(baird.features.clone(), 0.4).unwrap();
        let behavior = BoltzmannPolicy::new(baird.features.clone(), 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sample = baird_sample(&mut rng);
        let theta = DVector::from_column_slice(&raw[..16]);
        let w = DVector::from_column_slice(&raw[16..]);
        for algorithm in Algorithm::ALL {
            let mut state = LearnerState::new(theta.clone(), w.clone(), 0.0, 0.0).unwrap();
            state.update(algorithm, &sample, &target, &behavior, 0.99);
            prop_assert_eq!(&state.theta, &theta);
            prop_assert_eq!(&state.w, &w);
        }
    }

    #[test]
    fn alg1_and_derived_coincide_on_policy(seed in any::<u64>(), raw in proptest::collection::vec(-2.0f64..2.0, 32)) {
        let baird = build_baird_star();
        let target = BoltzmannPolicy::new(baird.features.clone(), 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sample = baird_sample(&mut rng);
        let theta = DVector::from_column_slice(&raw[..16]);
        let w = DVector::from_column_slice(&raw[16..]);
        let mut alg1 = LearnerState::new(theta.clone(), w.clone(), 0.01, 0.1).unwrap();
        let mut derived = alg1.clone();
        alg1.pgq_update_alg1(&sample, &target, &target, 0.99);
        derived.pgq_update_derived(&sample, &target, 0.99);
        prop_assert!((&alg1.theta - &derived.theta).amax() < 1e-12);
        prop_assert!((&alg1.w - &derived.w).amax() < 1e-12);
        prop_assert!((alg1.last_rho().unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_w_reduces_every_td_learner_to_q_learning() {
    let baird = build_baird_star();
    let target = BoltzmannPolicy::new(baird.features.clone(), 0.4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sample = baird_sample(&mut rng);
    let start = LearnerState::with_zero_w(baird.theta_init.clone(), 0.01, 0.0).unwrap();
    let mut reference = start.clone();
    reference.q_update(&sample, &target, 0.99);
    for algorithm in [Algorithm::Gq, Algorithm::PgqAlg1, Algorithm::PgqDerived] {
        let mut state = start.clone();
        state.update(algorithm, &sample, &target, &target, 0.99);
        assert!((&state.theta - &reference.theta).amax() < 1e-12, "{algorithm}");
    }
}

#[test]
fn w_update_is_still_at_its_fixed_point() {
    let baird = build_baird_star();
    let target = BoltzmannPolicy::new(baird.features.clone(), 0.4).unwrap();
    let sample = TransitionSample::new(2, 0, 0.0, 6);
    let theta = baird.theta_init.clone();
    let delta = pgq_core::learners::td_error(&theta, &sample, &target, 0.99);
    // w along phi(s, a) chosen so that phi^T w = delta
    let phi = baird.features.phi(2, 0).clone();
    let w = &phi * (delta / phi.norm_squared());
    let mut state = LearnerState::new(theta, w.clone(), 0.0, 0.5).unwrap();
    state.w_update(&sample, &target, 0.99);
    assert!((&state.w - &w).amax() < 1e-12);
}
