//! Incremental O(k) update rules.
//!
//! Every learner uses the expected-next-action TD error
//! `delta = r + gamma theta^T phi_bar(s') - theta^T phi(s, a)` where
//! `phi_bar(s') = sum_{a'} pi_theta(a'|s') phi(s', a')` under the target policy.
//!
//! The `*_direction` functions return the bracketed update direction (the
//! increment divided by the step size); the [`LearnerState`] methods scale and
//! apply them.

use std::fmt;
use std::str::FromStr;

use crate::linalg::all_finite;
use crate::mdp::{Action, State};
use crate::policy::{importance_ratios, BoltzmannPolicy};
use crate::{Error, Result, Vector};

/// A parameter entry above this magnitude marks the run as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e100;

/// One transition `(s, a, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionSample {
    pub s: State,
    pub a: Action,
    pub r: f64,
    pub s_next: State,
}

impl TransitionSample {
    pub fn new(s: State, a: Action, r: f64, s_next: State) -> Self {
        Self { s, a, r, s_next }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    QLearning,
    Gq,
    PgqAlg1,
    PgqDerived,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::QLearning,
        Algorithm::Gq,
        Algorithm::PgqAlg1,
        Algorithm::PgqDerived,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::QLearning => "qlearning",
            Algorithm::Gq => "gq",
            Algorithm::PgqAlg1 => "pgq-alg1",
            Algorithm::PgqDerived => "pgq-derived",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qlearning" => Ok(Algorithm::QLearning),
            "gq" => Ok(Algorithm::Gq),
            "pgq-alg1" | "pgq_alg1" => Ok(Algorithm::PgqAlg1),
            "pgq-derived" | "pgq_derived" => Ok(Algorithm::PgqDerived),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

pub fn td_error(theta: &Vector, sample: &TransitionSample, policy: &BoltzmannPolicy, gamma: f64) -> f64 {
    let phi = policy.features().phi(sample.s, sample.a);
    let phi_bar = policy.expected_next_feature(theta, sample.s_next);
    sample.r + gamma * theta.dot(&phi_bar) - theta.dot(phi)
}

/// Semi-gradient Q-learning: `delta phi`.
pub fn q_direction(
    theta: &Vector,
    sample: &TransitionSample,
    policy: &BoltzmannPolicy,
    gamma: f64,
) -> Vector {
    let delta = td_error(theta, sample, policy, gamma);
    policy.features().phi(sample.s, sample.a) * delta
}

/// GQ/TDC: `delta phi - gamma phi_bar (phi^T w)`.
pub fn gq_direction(
    theta: &Vector,
    w: &Vector,
    sample: &TransitionSample,
    policy: &BoltzmannPolicy,
    gamma: f64,
) -> Vector {
    let phi = policy.features().phi(sample.s, sample.a);
    let phi_bar = policy.expected_next_feature(theta, sample.s_next);
    let delta = sample.r + gamma * theta.dot(&phi_bar) - theta.dot(phi);
    phi * delta - phi_bar * (gamma * phi.dot(w))
}

/// Auxiliary weights: `(delta - phi^T w) phi`.
pub fn w_direction(
    theta: &Vector,
    w: &Vector,
    sample: &TransitionSample,
    policy: &BoltzmannPolicy,
    gamma: f64,
) -> Vector {
    let phi = policy.features().phi(sample.s, sample.a);
    let delta = td_error(theta, sample, policy, gamma);
    phi * (delta - phi.dot(w))
}

/// The policy-gradient Q-learning step with importance-corrected score:
///
/// ```text
/// delta phi - gamma phi_bar (phi^T w) - rho_grad delta (phi^T w)
///           - gamma phi_bar_grad (phi^T w) + 1/2 (grad pi / pi) (w^T phi)^2
/// ```
///
/// with `rho_grad = grad pi(a|s) / b(a|s)`. The importance ratio `rho` is
/// returned alongside but does not enter the step.
pub fn pgq_alg1_direction(
    theta: &Vector,
    w: &Vector,
    sample: &TransitionSample,
    target: &BoltzmannPolicy,
    behavior: &BoltzmannPolicy,
    gamma: f64,
) -> Result<(Vector, f64)> {
    let (rho, rho_grad) = importance_ratios(target, behavior, theta, sample.s, sample.a)?;
    let phi = target.features().phi(sample.s, sample.a);
    let phi_bar = target.expected_next_feature(theta, sample.s_next);
    let phi_bar_grad = target.expected_next_grad_value(theta, sample.s_next);
    let delta = sample.r + gamma * theta.dot(&phi_bar) - theta.dot(phi);
    let score = target.log_gradient(theta, sample.s, sample.a);
    let phi_w = phi.dot(w);

    let mut direction = phi * delta;
    direction.axpy(-gamma * phi_w, &phi_bar, 1.0);
    direction.axpy(-delta * phi_w, &rho_grad, 1.0);
    direction.axpy(-gamma * phi_w, &phi_bar_grad, 1.0);
    direction.axpy(0.5 * phi_w * phi_w, &score, 1.0);
    Ok((direction, rho))
}

/// The sampled MSPBE-gradient step with target-policy likelihood ratios:
///
/// ```text
/// delta phi - gamma phi_bar phi^T w - (grad pi / pi) delta phi^T w
///           - gamma phi_bar_grad (phi^T w) + 1/2 (grad pi / pi) (w^T phi)^2
/// ```
///
/// Its expectation under `d_{s,a} = d_s pi(a|s)` and `t(s, a, .)` with the
/// exact `w` is `-1/2 grad MSPBE(theta)`.
pub fn pgq_derived_direction(
    theta: &Vector,
    w: &Vector,
    sample: &TransitionSample,
    target: &BoltzmannPolicy,
    gamma: f64,
) -> Vector {
    let phi = target.features().phi(sample.s, sample.a);
    let phi_bar = target.expected_next_feature(theta, sample.s_next);
    let phi_bar_grad = target.expected_next_grad_value(theta, sample.s_next);
    let delta = sample.r + gamma * theta.dot(&phi_bar) - theta.dot(phi);
    let score = target.log_gradient(theta, sample.s, sample.a);
    let phi_w = phi.dot(w);

    let mut direction = phi * delta;
    direction.axpy(-gamma * phi_w, &phi_bar, 1.0);
    direction.axpy(-delta * phi_w + 0.5 * phi_w * phi_w, &score, 1.0);
    direction.axpy(-gamma * phi_w, &phi_bar_grad, 1.0);
    direction
}

/// Parameters of one learning run.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub theta: Vector,
    pub w: Vector,
    pub alpha: f64,
    pub beta: f64,
    diverged: bool,
    last_rho: Option<f64>,
}

impl LearnerState {
    pub fn new(theta: Vector, w: Vector, alpha: f64, beta: f64) -> Result<Self> {
        if theta.len() != w.len() {
            return Err(Error::InvalidArgument(format!(
                "theta has length {} but w has length {}",
                theta.len(),
                w.len()
            )));
        }
        if !(alpha >= 0.0 && beta >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "step sizes must be finite and non-negative (alpha {alpha}, beta {beta})"
            )));
        }
        Ok(Self {
            theta,
            w,
            alpha,
            beta,
            diverged: false,
            last_rho: None,
        })
    }

    /// `theta` given, `w = 0`.
    pub fn with_zero_w(theta: Vector, alpha: f64, beta: f64) -> Result<Self> {
        let w = Vector::zeros(theta.len());
        Self::new(theta, w, alpha, beta)
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    /// Importance ratio computed by the last `pgq_update_alg1` step.
    pub fn last_rho(&self) -> Option<f64> {
        self.last_rho
    }

    /// Applies `theta += alpha theta_dir`, `w += beta w_dir`, or flags the
    /// run as diverged and leaves both untouched.
    fn commit(&mut self, theta_dir: Option<Vector>, w_dir: Option<Vector>) {
        if self.diverged {
            return;
        }
        let theta = match theta_dir {
            Some(dir) if self.alpha != 0.0 => &self.theta + dir * self.alpha,
            _ => self.theta.clone(),
        };
        let w = match w_dir {
            Some(dir) if self.beta != 0.0 => &self.w + dir * self.beta,
            _ => self.w.clone(),
        };
        if !within_bounds(&theta) || !within_bounds(&w) {
            self.diverged = true;
            return;
        }
        self.theta = theta;
        self.w = w;
    }

    pub fn q_update(&mut self, sample: &TransitionSample, policy: &BoltzmannPolicy, gamma: f64) {
        let dir = q_direction(&self.theta, sample, policy, gamma);
        self.commit(Some(dir), None);
    }

    pub fn gq_update(&mut self, sample: &TransitionSample, policy: &BoltzmannPolicy, gamma: f64) {
        let theta_dir = gq_direction(&self.theta, &self.w, sample, policy, gamma);
        let w_dir = w_direction(&self.theta, &self.w, sample, policy, gamma);
        self.commit(Some(theta_dir), Some(w_dir));
    }

    pub fn pgq_update_alg1(
        &mut self,
        sample: &TransitionSample,
        target: &BoltzmannPolicy,
        behavior: &BoltzmannPolicy,
        gamma: f64,
    ) {
        if self.diverged {
            return;
        }
        match pgq_alg1_direction(&self.theta, &self.w, sample, target, behavior, gamma) {
            Ok((theta_dir, rho)) => {
                self.last_rho = Some(rho);
                let w_dir = w_direction(&self.theta, &self.w, sample, target, gamma);
                self.commit(Some(theta_dir), Some(w_dir));
            }
            Err(_) => self.diverged = true,
        }
    }

    pub fn pgq_update_derived(
        &mut self,
        sample: &TransitionSample,
        target: &BoltzmannPolicy,
        gamma: f64,
    ) {
        let theta_dir = pgq_derived_direction(&self.theta, &self.w, sample, target, gamma);
        let w_dir = w_direction(&self.theta, &self.w, sample, target, gamma);
        self.commit(Some(theta_dir), Some(w_dir));
    }

    /// `w += beta (delta - phi^T w) phi` with `theta` held fixed.
    pub fn w_update(&mut self, sample: &TransitionSample, policy: &BoltzmannPolicy, gamma: f64) {
        let w_dir = w_direction(&self.theta, &self.w, sample, policy, gamma);
        self.commit(None, Some(w_dir));
    }

    /// Dispatches one update of `algorithm`.
    pub fn update(
        &mut self,
        algorithm: Algorithm,
        sample: &TransitionSample,
        target: &BoltzmannPolicy,
        behavior: &BoltzmannPolicy,
        gamma: f64,
    ) {
        match algorithm {
            Algorithm::QLearning => self.q_update(sample, target, gamma),
            Algorithm::Gq => self.gq_update(sample, target, gamma),
            Algorithm::PgqAlg1 => self.pgq_update_alg1(sample, target, behavior, gamma),
            Algorithm::PgqDerived => self.pgq_update_derived(sample, target, gamma),
        }
    }
}

fn within_bounds(v: &Vector) -> bool {
    all_finite(v) && v.iter().all(|x| x.abs() <= DIVERGENCE_BOUND)
}
