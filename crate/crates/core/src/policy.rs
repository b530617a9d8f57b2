//! Boltzmann (softmax) policies over linear action values.

use std::sync::Arc;

use rand::Rng;

use crate::mdp::{sample_categorical, Action, FeatureMap, State};
use crate::{Error, Result, Vector};

/// Behaviour probabilities below this make importance ratios unusable.
pub const MIN_BEHAVIOR_PROBABILITY: f64 = 1e-300;

/// `pi(a|s) = exp(theta^T phi(s,a) / tau) / sum_b exp(theta^T phi(s,b) / tau)`.
///
/// The same type serves as target and behaviour policy; the two differ only in
/// temperature.
#[derive(Debug, Clone)]
pub struct BoltzmannPolicy {
    features: Arc<FeatureMap>,
    tau: f64,
}

impl BoltzmannPolicy {
    pub fn new(features: Arc<FeatureMap>, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive and finite, got {tau}"
            )));
        }
        Ok(Self { features, tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn features(&self) -> &Arc<FeatureMap> {
        &self.features
    }

    pub fn n_actions(&self) -> usize {
        self.features.n_actions()
    }

    /// `theta^T phi(s, a)` for every action.
    pub fn action_values(&self, theta: &Vector, s: State) -> Vec<f64> {
        (0..self.n_actions())
            .map(|a| theta.dot(self.features.phi(s, a)))
            .collect()
    }

    /// Softmax without validation. Non-finite values yield NaN probabilities.
    pub(crate) fn probabilities_unchecked(&self, theta: &Vector, s: State) -> Vec<f64> {
        softmax(&self.action_values(theta, s), self.tau)
    }

    pub fn action_probabilities(&self, theta: &Vector, s: State) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let values = self.action_values(theta, s);
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite action value {v} at state {s}"
            )));
        }
        Ok(softmax(&values, self.tau))
    }

    /// `sum_a pi(a|s) phi(s, a)`.
    pub fn expected_feature(&self, theta: &Vector, s: State) -> Vector {
        let probs = self.probabilities_unchecked(theta, s);
        self.mean_feature(&probs, s)
    }

    fn mean_feature(&self, probs: &[f64], s: State) -> Vector {
        let mut mean = Vector::zeros(self.features.k());
        for (a, &p) in probs.iter().enumerate() {
            mean.axpy(p, self.features.phi(s, a), 1.0);
        }
        mean
    }

    /// Score function `grad log pi(a|s) = (phi(s,a) - E_pi[phi(s,.)]) / tau`.
    pub fn log_gradient(&self, theta: &Vector, s: State, a: Action) -> Vector {
        let mean = self.expected_feature(theta, s);
        (self.features.phi(s, a) - mean) / self.tau
    }

    /// `grad_theta pi(a|s)`.
    pub fn policy_gradient(&self, theta: &Vector, s: State, a: Action) -> Vector {
        let probs = self.probabilities_unchecked(theta, s);
        let mean = self.mean_feature(&probs, s);
        (self.features.phi(s, a) - mean) * (probs[a] / self.tau)
    }

    /// `grad_theta pi(a|s)` for every action at `s`, sharing one softmax.
    pub fn policy_gradients(&self, theta: &Vector, s: State) -> Vec<Vector> {
        let probs = self.probabilities_unchecked(theta, s);
        let mean = self.mean_feature(&probs, s);
        probs
            .iter()
            .enumerate()
            .map(|(a, &p)| (self.features.phi(s, a) - &mean) * (p / self.tau))
            .collect()
    }

    /// `phi_bar(s') = sum_{a'} pi(a'|s') phi(s', a')`.
    pub fn expected_next_feature(&self, theta: &Vector, s_next: State) -> Vector {
        self.expected_feature(theta, s_next)
    }

    /// `phi_bar_grad(s') = sum_{a'} grad pi(a'|s') theta^T phi(s', a')`.
    pub fn expected_next_grad_value(&self, theta: &Vector, s_next: State) -> Vector {
        let values = self.action_values(theta, s_next);
        let mut out = Vector::zeros(self.features.k());
        for (grad, v) in self.policy_gradients(theta, s_next).iter().zip(values) {
            out.axpy(v, grad, 1.0);
        }
        out
    }

    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        theta: &Vector,
        s: State,
        rng: &mut R,
    ) -> Result<Action> {
        let probs = self.action_probabilities(theta, s)?;
        Ok(sample_categorical(&probs, rng))
    }

    fn check_theta(&self, theta: &Vector) -> Result<()> {
        if theta.len() != self.features.k() {
            return Err(Error::InvalidArgument(format!(
                "theta has length {}, features have dimension {}",
                theta.len(),
                self.features.k()
            )));
        }
        Ok(())
    }
}

/// Max-shifted softmax of `values / tau`.
pub fn softmax(values: &[f64], tau: f64) -> Vec<f64> {
    let max = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exps: Vec<f64> = values.iter().map(|v| ((v - max) / tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `rho = pi(a|s) / b(a|s)` and `rho_grad = grad pi(a|s) / b(a|s)`.
pub fn importance_ratios(
    target: &BoltzmannPolicy,
    behavior: &BoltzmannPolicy,
    theta: &Vector,
    s: State,
    a: Action,
) -> Result<(f64, Vector)> {
    let pi = target.action_probabilities(theta, s)?[a];
    let b = behavior.action_probabilities(theta, s)?[a];
    if !(b >= MIN_BEHAVIOR_PROBABILITY) {
        return Err(Error::Numerical(format!(
            "behaviour probability {b:e} of action {a} at state {s} is too small"
        )));
    }
    let rho_grad = target.policy_gradient(theta, s, a) / b;
    Ok((pi / b, rho_grad))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::baird::{build_baird_star, CENTRE, DASHED, SOLID};

    fn two_action_scalar() -> Arc<FeatureMap> {
        // one state, values theta * (1, 0)
        Arc::new(FeatureMap::new(1, 2, vec![vec![1.0], vec![0.0]]).unwrap())
    }

    #[test]
    fn uniform_at_zero() {
        let p = BoltzmannPolicy::new(two_action_scalar(), 0.3).unwrap();
        assert_eq!(p.action_probabilities(&Vector::zeros(1), 0).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn analytic_softmax() {
        let p = BoltzmannPolicy::new(two_action_scalar(), 1.0).unwrap();
        let probs = p
            .action_probabilities(&Vector::from_vec(vec![2f64.ln()]), 0)
            .unwrap();
        assert_relative_eq!(probs[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(probs[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn baird_init_prefers_solid() {
        let baird = build_baird_star();
        let p = BoltzmannPolicy::new(baird.features.clone(), 0.4).unwrap();
        for s in 0..7 {
            let probs = p.action_probabilities(&baird.theta_init, s).unwrap();
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(probs[SOLID] > probs[DASHED]);
        }
    }

    #[test]
    fn rejects_bad_temperature_and_theta() {
        assert!(BoltzmannPolicy::new(two_action_scalar(), 0.0).is_err());
        assert!(BoltzmannPolicy::new(two_action_scalar(), f64::NAN).is_err());
        let p = BoltzmannPolicy::new(two_action_scalar(), 1.0).unwrap();
        assert!(p.action_probabilities(&Vector::zeros(2), 0).is_err());
        assert!(matches!(
            p.action_probabilities(&Vector::from_vec(vec![f64::INFINITY]), 0),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn overflow_safe() {
        let p = BoltzmannPolicy::new(two_action_scalar(), 0.01).unwrap();
        let probs = p
            .action_probabilities(&Vector::from_vec(vec![1e6]), 0)
            .unwrap();
        assert_eq!(probs, vec![1.0, 0.0]);
    }

    #[test]
    fn gradient_vanishes_for_identical_features() {
        let f = Arc::new(FeatureMap::new(1, 2, vec![vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap());
        let p = BoltzmannPolicy::new(f, 0.5).unwrap();
        let g = p.policy_gradient(&Vector::zeros(2), 0, 0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn expected_next_feature_cases() {
        let baird = build_baird_star();
        let p = BoltzmannPolicy::new(baird.features.clone(), 0.4).unwrap();
        let f = &baird.features;

        let mean = p.expected_next_feature(&Vector::zeros(16), CENTRE);
        assert_relative_eq!(
            mean,
            (f.phi(CENTRE, SOLID) + f.phi(CENTRE, DASHED)) / 2.0,
            epsilon = 1e-15
        );

        let mean = p.expected_next_feature(&baird.theta_init, CENTRE);
        for i in 0..16 {
            let (x, y) = (f.phi(CENTRE, SOLID)[i], f.phi(CENTRE, DASHED)[i]);
            assert!(mean[i] >= x.min(y) - 1e-15 && mean[i] <= x.max(y) + 1e-15);
        }

        let single = Arc::new(FeatureMap::new(1, 1, vec![vec![0.3, -2.0]]).unwrap());
        let p1 = BoltzmannPolicy::new(single.clone(), 0.7).unwrap();
        let theta = Vector::from_vec(vec![4.0, 1.5]);
        assert_eq!(&p1.expected_next_feature(&theta, 0), single.phi(0, 0));
        assert!(p1.expected_next_grad_value(&theta, 0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn expected_next_grad_value_zero_at_zero() {
        let baird = build_baird_star();
        let p = BoltzmannPolicy::new(baird.features.clone(), 0.4).unwrap();
        assert!(p
            .expected_next_grad_value(&Vector::zeros(16), CENTRE)
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn importance_ratio_cases() {
        let baird = build_baird_star();
        let target = BoltzmannPolicy::new(baird.features.clone(), 0.4).unwrap();
        let behavior = BoltzmannPolicy::new(baird.features.clone(), 0.7).unwrap();

        let (rho, grad) = importance_ratios(&target, &target, &baird.theta_init, 2, DASHED).unwrap();
        assert_relative_eq!(rho, 1.0, epsilon = 1e-12);
        let expected = target.log_gradient(&baird.theta_init, 2, DASHED);
        assert_relative_eq!(grad, expected, epsilon = 1e-9, max_relative = 1e-9);

        let (rho, _) = importance_ratios(&target, &behavior, &Vector::zeros(16), 2, SOLID).unwrap();
        assert_eq!(rho, 1.0);

        for s in 0..7 {
            for a in [SOLID, DASHED] {
                let (rho, grad) =
                    importance_ratios(&target, &behavior, &baird.theta_init, s, a).unwrap();
                let pi = target.action_probabilities(&baird.theta_init, s).unwrap()[a];
                let b = behavior.action_probabilities(&baird.theta_init, s).unwrap()[a];
                assert!(rho > 0.0 && rho.is_finite());
                assert_relative_eq!(rho, pi / b, max_relative = 1e-14);
                assert!(grad.iter().all(|x| x.is_finite()));
            }
        }
    }

    #[test]
    fn importance_ratio_rejects_vanishing_behavior() {
        let f = two_action_scalar();
        let target = BoltzmannPolicy::new(f.clone(), 1.0).unwrap();
        let behavior = BoltzmannPolicy::new(f, 1e-3).unwrap();
        let theta = Vector::from_vec(vec![10.0]);
        assert!(matches!(
            importance_ratios(&target, &behavior, &theta, 0, 1),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn sampling_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = BoltzmannPolicy::new(two_action_scalar(), 1.0).unwrap();
        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| p.sample_action(&Vector::zeros(1), 0, &mut rng).unwrap() == 0)
            .count();
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 0.006);

        let single = Arc::new(FeatureMap::new(1, 1, vec![vec![1.0]]).unwrap());
        let p1 = BoltzmannPolicy::new(single, 1.0).unwrap();
        assert!((0..100).all(|_| p1.sample_action(&Vector::from_vec(vec![3.0]), 0, &mut rng).unwrap() == 0));
    }

    #[test]
    fn cold_policy_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = BoltzmannPolicy::new(two_action_scalar(), 0.01).unwrap();
        let theta = Vector::from_vec(vec![0.1]);
        let exact = p.action_probabilities(&theta, 0).unwrap()[0];
        assert!(exact > 0.9999);
        let hits = (0..10_000)
            .filter(|_| p.sample_action(&theta, 0, &mut rng).unwrap() == 0)
            .count();
        assert!(hits as f64 / 10_000.0 > 0.999);
    }
}
