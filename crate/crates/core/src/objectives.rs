//! Exact matrix-form objectives over a finite MDP.
//!
//! The measurement distribution is factored as `d_{s,a} = d_s pi_theta(a|s)`
//! with fixed state weights `d_s` and the target policy, so `D` depends on
//! `theta` only through the action probabilities. Every inverse of
//! `Phi^T D Phi` is a Moore-Penrose pseudo-inverse (see [`crate::linalg`]).

use std::sync::Arc;

use crate::linalg::pseudo_inverse_symmetric;
use crate::mdp::{
    transition_matrix_from_probs, FeatureMap, StateActionDistribution, StateDistribution,
    TabularMdp,
};
use crate::policy::BoltzmannPolicy;
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone)]
pub struct ObjectiveWorkspace {
    mdp: Arc<TabularMdp>,
    target: BoltzmannPolicy,
    states: StateDistribution,
    phi: Matrix,
    reward: Vector,
    /// rows t(s, a, .) in pair order
    transition: Matrix,
}

/// Everything the objectives need at one `theta`.
struct Evaluation {
    probs: Vec<Vec<f64>>,
    d: Vector,
    p: Matrix,
    q: Vector,
    residual: Vector,
    cov_pinv: Matrix,
    b: Vector,
}

impl ObjectiveWorkspace {
    pub fn new(
        mdp: Arc<TabularMdp>,
        target: BoltzmannPolicy,
        states: StateDistribution,
    ) -> Result<Self> {
        let features = target.features().clone();
        if !features.is_compatible_with(&mdp) {
            return Err(Error::InvalidArgument(
                "feature map and MDP disagree on state/action counts".into(),
            ));
        }
        if states.len() != mdp.n_states() {
            return Err(Error::InvalidArgument(format!(
                "state distribution has {} entries, MDP has {} states",
                states.len(),
                mdp.n_states()
            )));
        }
        Ok(Self {
            phi: features.matrix().clone(),
            reward: mdp.reward_vector(),
            transition: mdp.transition_matrix(),
            mdp,
            target,
            states,
        })
    }

    /// Workspace measuring with uniform state weights.
    pub fn uniform(mdp: Arc<TabularMdp>, target: BoltzmannPolicy) -> Result<Self> {
        let states = StateDistribution::uniform(mdp.n_states());
        Self::new(mdp, target, states)
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn target(&self) -> &BoltzmannPolicy {
        &self.target
    }

    pub fn features(&self) -> &Arc<FeatureMap> {
        self.target.features()
    }

    pub fn state_weights(&self) -> &StateDistribution {
        &self.states
    }

    pub fn k(&self) -> usize {
        self.phi.ncols()
    }

    /// `d_{s,a} = d_s pi_theta(a|s)`.
    pub fn measurement_distribution(&self, theta: &Vector) -> Result<StateActionDistribution> {
        StateActionDistribution::factored(&self.states, &self.target, theta)
    }

    fn state_of_pair(&self, pair: usize) -> usize {
        pair / self.mdp.n_actions()
    }

    fn evaluate(&self, theta: &Vector) -> Evaluation {
        self.evaluate_with_gamma(theta, self.mdp.gamma())
    }

    fn evaluate_with_gamma(&self, theta: &Vector, gamma: f64) -> Evaluation {
        let n_actions = self.mdp.n_actions();
        let probs: Vec<Vec<f64>> = (0..self.mdp.n_states())
            .map(|s| self.target.probabilities_unchecked(theta, s))
            .collect();
        let d = Vector::from_iterator(
            self.mdp.n_pairs(),
            (0..self.mdp.n_pairs()).map(|pair| {
                self.states.get(pair / n_actions) * probs[pair / n_actions][pair % n_actions]
            }),
        );
        let p = transition_matrix_from_probs(&self.mdp, &probs);
        let q = &self.phi * theta;
        let residual = &self.reward + (&p * &q) * gamma - &q;
        let phi_t_d = weighted_transpose(&self.phi, &d);
        let cov_pinv = pseudo_inverse_symmetric(&(&phi_t_d * &self.phi));
        let b = &phi_t_d * &residual;
        Evaluation {
            probs,
            d,
            p,
            q,
            residual,
            cov_pinv,
            b,
        }
    }

    /// `T_theta Q_theta - Q_theta = R + gamma P_theta Phi theta - Phi theta`.
    pub fn bellman_residual(&self, theta: &Vector) -> Vector {
        self.evaluate(theta).residual
    }

    /// `(Phi^T D delta)^T (Phi^T D Phi)^+ (Phi^T D delta)`, clamped at zero.
    pub fn mspbe(&self, theta: &Vector) -> f64 {
        let e = self.evaluate(theta);
        let value = e.b.dot(&(&e.cov_pinv * &e.b));
        value.max(0.0)
    }

    /// `||Q_theta - Pi T_theta Q_theta||_D^2` with `Pi = Phi (Phi^T D Phi)^+ Phi^T D`.
    pub fn mspbe_projection_form(&self, theta: &Vector) -> f64 {
        let e = self.evaluate(theta);
        let phi_t_d = weighted_transpose(&self.phi, &e.d);
        let projection = &self.phi * &e.cov_pinv * &phi_t_d;
        let bellman_image = &e.q + &e.residual;
        let diff = &e.q - projection * bellman_image;
        diff.component_mul(&diff).dot(&e.d)
    }

    /// `w = (Phi^T D Phi)^+ Phi^T D (T_theta Q_theta - Q_theta)`.
    pub fn exact_w(&self, theta: &Vector) -> Vector {
        let e = self.evaluate(theta);
        &e.cov_pinv * &e.b
    }

    /// `Phi^T D (T_theta Q_theta - Q_theta)`.
    pub fn projected_residual(&self, theta: &Vector) -> Vector {
        self.evaluate(theta).b
    }

    /// Analytic `grad_theta MSPBE(theta)`.
    ///
    /// Component `i` is
    ///
    /// ```text
    ///   2 (Phi^T dD_i delta)^T w
    /// + 2 (Phi^T D (gamma dP_i Phi theta + gamma P Phi_:i - Phi_:i))^T w
    /// -   w^T (Phi^T dD_i Phi) w
    /// ```
    ///
    /// with `dD_i = diag(d_s d_i pi(a|s))` and
    /// `dP_i[(s,a),(s',a')] = t(s,a,s') d_i pi(a'|s')`.
    pub fn mspbe_gradient(&self, theta: &Vector) -> Vector {
        let e = self.evaluate(theta);
        let gamma = self.mdp.gamma();
        let (n_states, n_actions) = (self.mdp.n_states(), self.mdp.n_actions());
        let k = self.k();
        let w = &e.cov_pinv * &e.b;
        let u = &self.phi * &w;

        // rows grad pi(a|s) in pair order, and rows sum_a' grad pi(a'|s') Q(s',a')
        let mut pi_grads = Matrix::zeros(self.mdp.n_pairs(), k);
        let mut next_grad_values = Matrix::zeros(n_states, k);
        for s in 0..n_states {
            for (a, g) in self.target.policy_gradients(theta, s).iter().enumerate() {
                let pair = s * n_actions + a;
                pi_grads.set_row(pair, &g.transpose());
                let mut row = next_grad_values.row_mut(s);
                row += g.transpose() * e.q[pair];
            }
        }

        let d_state = Vector::from_iterator(
            self.mdp.n_pairs(),
            (0..self.mdp.n_pairs()).map(|pair| self.states.get(self.state_of_pair(pair))),
        );

        // 2 (Phi^T dD_i delta)^T w = 2 sum_p d_s dpi_p delta_p u_p
        let distribution_term =
            pi_grads.tr_mul(&d_state.component_mul(&e.residual).component_mul(&u)) * 2.0;

        // 2 (D (gamma dP_i Q + gamma P Phi_:i - Phi_:i))^T u
        let residual_jacobian = (&self.transition * &next_grad_values) * gamma
            + (&e.p * &self.phi) * gamma
            - &self.phi;
        let residual_term = residual_jacobian.tr_mul(&e.d.component_mul(&u)) * 2.0;

        // w^T Phi^T dD_i Phi w = sum_p d_s dpi_p u_p^2
        let covariance_term = pi_grads.tr_mul(&d_state.component_mul(&u.component_mul(&u)));

        distribution_term + residual_term - covariance_term
    }

    /// Mean squared TD error with the expected-next-action TD error,
    /// `sum_{s,a} d_{s,a} sum_{s'} t(s,a,s') (r + gamma theta^T phi_bar(s') - theta^T phi(s,a))^2`.
    pub fn mstde(&self, theta: &Vector) -> f64 {
        let e = self.evaluate(theta);
        let gamma = self.mdp.gamma();
        let n_states = self.mdp.n_states();
        // theta^T phi_bar(s') = sum_a' pi(a'|s') Q(s', a')
        let next_values: Vec<f64> = (0..n_states)
            .map(|s| {
                e.probs[s]
                    .iter()
                    .enumerate()
                    .map(|(a, p)| p * e.q[s * self.mdp.n_actions() + a])
                    .sum()
            })
            .collect();
        let mut total = 0.0;
        for pair in 0..self.mdp.n_pairs() {
            if e.d[pair] == 0.0 {
                continue;
            }
            let row = self.transition.row(pair);
            let inner: f64 = (0..n_states)
                .map(|s_next| {
                    let delta = self.reward[pair] + gamma * next_values[s_next] - e.q[pair];
                    row[s_next] * delta * delta
                })
                .sum();
            total += e.d[pair] * inner;
        }
        total
    }

    /// Central differences of [`Self::mspbe`] with `d_s` held fixed; `D` and
    /// `P_theta` are rebuilt at every perturbed `theta`.
    pub fn finite_difference_gradient(&self, theta: &Vector, h: f64) -> Vector {
        central_difference(|t| self.mspbe(t), theta, h)
    }

    #[cfg(test)]
    fn bellman_residual_with_gamma(&self, theta: &Vector, gamma: f64) -> Vector {
        self.evaluate_with_gamma(theta, gamma).residual
    }
}

/// `Phi^T diag(d)`.
fn weighted_transpose(phi: &Matrix, d: &Vector) -> Matrix {
    let mut out = phi.transpose();
    for (mut column, &weight) in out.column_iter_mut().zip(d.iter()) {
        column *= weight;
    }
    out
}

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_difference(f: impl Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = x.clone();
    Vector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            probe[i] = x[i] + h;
            let plus = f(&probe);
            probe[i] = x[i] - h;
            let minus = f(&probe);
            probe[i] = x[i];
            (plus - minus) / (2.0 * h)
        }),
    )
}

/// `||a - b||_inf / max(||a||_inf, ||b||_inf)`, with denominators below
/// `floor` replaced by `floor`.
pub fn relative_error(a: &Vector, b: &Vector, floor: f64) -> f64 {
    let scale = a
        .iter()
        .chain(b.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(floor);
    let diff = a
        .iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    diff / scale
}
