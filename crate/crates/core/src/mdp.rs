//! Finite MDPs, linear state-action features and the Markov chains a policy
//! induces over state-action pairs.

use rand::Rng;

use crate::linalg::{max_abs, pinv_solve};
use crate::policy::BoltzmannPolicy;
use crate::{Error, Matrix, Result, Vector};

pub type State = usize;
pub type Action = usize;

/// Tolerance on transition row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;
/// Tolerance on distribution sums.
pub const DISTRIBUTION_SUM_TOLERANCE: f64 = 1e-10;

/// Power-iteration cap for [`stationary_distribution`].
pub const POWER_ITERATION_CAP: usize = 100_000;
/// Successive max-norm change at which power iteration stops.
pub const POWER_ITERATION_TOLERANCE: f64 = 1e-12;
/// Largest acceptable max-norm residual of `d^T P - d^T`.
pub const STATIONARY_RESIDUAL_TOLERANCE: f64 = 1e-9;

/// A finite MDP with transition tensor `t(s, a, s')`, rewards `r(s, a)` and
/// discount `gamma` in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    gamma: f64,
}

impl TabularMdp {
    /// `transition` is laid out as `[(s * n_actions + a) * n_states + s']`,
    /// `reward` as `[s * n_actions + a]`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidArgument(
                "an MDP needs at least one state and one action".into(),
            ));
        }
        let n_pairs = n_states * n_actions;
        if transition.len() != n_pairs * n_states {
            return Err(Error::InvalidArgument(format!(
                "transition tensor has {} entries, expected {}",
                transition.len(),
                n_pairs * n_states
            )));
        }
        if reward.len() != n_pairs {
            return Err(Error::InvalidArgument(format!(
                "reward table has {} entries, expected {n_pairs}",
                reward.len()
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "discount must lie strictly between 0 and 1, got {gamma}"
            )));
        }
        if let Some(r) = reward.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite reward {r}")));
        }
        for (pair, row) in transition.chunks(n_states).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "transition row {pair} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "transition row {pair} sums to {sum}"
                )));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn pair_index(&self, s: State, a: Action) -> usize {
        s * self.n_actions + a
    }

    pub fn check_indices(&self, s: State, a: Action) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                len: self.n_states,
            });
        }
        if a >= self.n_actions {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                len: self.n_actions,
            });
        }
        Ok(())
    }

    pub fn transition(&self, s: State, a: Action, s_next: State) -> f64 {
        self.transition_row(s, a)[s_next]
    }

    /// The distribution `t(s, a, .)`.
    pub fn transition_row(&self, s: State, a: Action) -> &[f64] {
        let start = self.pair_index(s, a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn reward(&self, s: State, a: Action) -> f64 {
        self.reward[self.pair_index(s, a)]
    }

    /// Rewards stacked in pair order.
    pub fn reward_vector(&self) -> Vector {
        Vector::from_column_slice(&self.reward)
    }

    /// The `(n_states * n_actions) x n_states` matrix with rows `t(s, a, .)`.
    pub fn transition_matrix(&self) -> Matrix {
        Matrix::from_row_slice(self.n_pairs(), self.n_states, &self.transition)
    }

    /// Draws `s' ~ t(s, a, .)` and returns it with `r(s, a)`.
    pub fn sample_transition<R: Rng + ?Sized>(
        &self,
        s: State,
        a: Action,
        rng: &mut R,
    ) -> Result<(State, f64)> {
        self.check_indices(s, a)?;
        let s_next = sample_categorical(self.transition_row(s, a), rng);
        Ok((s_next, self.reward(s, a)))
    }
}

/// Inverse-CDF draw from a probability vector using one uniform variate.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    // rounding left u above the final partial sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Linear features `phi(s, a)` in R^k, stored as the stacked matrix `Phi`
/// whose row `s * n_actions + a` is `phi(s, a)^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    n_states: usize,
    n_actions: usize,
    matrix: Matrix,
    rows: Vec<Vector>,
}

impl FeatureMap {
    /// `rows` must be given in pair order and all have the same length.
    pub fn new(n_states: usize, n_actions: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_pairs = n_states * n_actions;
        if n_pairs == 0 {
            return Err(Error::InvalidArgument("empty feature map".into()));
        }
        if rows.len() != n_pairs {
            return Err(Error::InvalidArgument(format!(
                "feature map has {} rows, expected {n_pairs}",
                rows.len()
            )));
        }
        let k = rows[0].len();
        if k == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        for (pair, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidArgument(format!(
                    "feature row {pair} has {} entries, expected {k}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "feature row {pair} has a non-finite entry"
                )));
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let matrix = Matrix::from_row_slice(n_pairs, k, &flat);
        let rows = rows.into_iter().map(Vector::from_vec).collect();
        Ok(Self {
            n_states,
            n_actions,
            matrix,
            rows,
        })
    }

    pub fn from_fn(
        n_states: usize,
        n_actions: usize,
        f: impl Fn(State, Action) -> Vec<f64>,
    ) -> Result<Self> {
        let rows = (0..n_states)
            .flat_map(|s| (0..n_actions).map(move |a| (s, a)))
            .map(|(s, a)| f(s, a))
            .collect();
        Self::new(n_states, n_actions, rows)
    }

    /// Tabular features: `k = n_states * n_actions`, `Phi = I`.
    pub fn one_hot(n_states: usize, n_actions: usize) -> Result<Self> {
        let n = n_states * n_actions;
        Self::from_fn(n_states, n_actions, |s, a| {
            let mut row = vec![0.0; n];
            row[s * n_actions + a] = 1.0;
            row
        })
    }

    pub fn k(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn phi(&self, s: State, a: Action) -> &Vector {
        &self.rows[s * self.n_actions + a]
    }

    /// The stacked `Phi` matrix.
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn is_compatible_with(&self, mdp: &TabularMdp) -> bool {
        self.n_states == mdp.n_states() && self.n_actions == mdp.n_actions()
    }
}

/// A distribution over states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution(Vector);

impl StateDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        validate_distribution(&weights)?;
        Ok(Self(Vector::from_vec(weights)))
    }

    pub fn uniform(n_states: usize) -> Self {
        Self(Vector::from_element(n_states, 1.0 / n_states as f64))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn get(&self, s: State) -> f64 {
        self.0[s]
    }
}

/// A distribution `d_{s,a}` over state-action pairs in pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct StateActionDistribution(Vector);

impl StateActionDistribution {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        validate_distribution(&d)?;
        Ok(Self(Vector::from_vec(d)))
    }

    /// `d_{s,a} = d_s * pi(a|s)`.
    pub fn factored(
        states: &StateDistribution,
        policy: &BoltzmannPolicy,
        theta: &Vector,
    ) -> Result<Self> {
        let n_actions = policy.features().n_actions();
        let mut d = Vec::with_capacity(states.len() * n_actions);
        for s in 0..states.len() {
            let probs = policy.action_probabilities(theta, s)?;
            d.extend(probs.iter().map(|p| states.get(s) * p));
        }
        Self::new(d)
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn into_vector(self) -> Vector {
        self.0
    }

    /// `d_s = sum_a d_{s,a}`.
    pub fn state_marginal(&self, n_actions: usize) -> Vec<f64> {
        self.0
            .as_slice()
            .chunks(n_actions)
            .map(|c| c.iter().sum())
            .collect()
    }
}

fn validate_distribution(d: &[f64]) -> Result<()> {
    if d.is_empty() {
        return Err(Error::InvalidArgument("empty distribution".into()));
    }
    if d.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "distribution has a negative or non-finite entry".into(),
        ));
    }
    let sum: f64 = d.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "distribution sums to {sum}"
        )));
    }
    Ok(())
}

/// `P[(s,a),(s',a')] = t(s,a,s') * pi(a'|s')`.
pub fn state_action_transition_matrix(
    mdp: &TabularMdp,
    policy: &BoltzmannPolicy,
    theta: &Vector,
) -> Result<Matrix> {
    let next_probs = (0..mdp.n_states())
        .map(|s| policy.action_probabilities(theta, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(transition_matrix_from_probs(mdp, &next_probs))
}

pub(crate) fn transition_matrix_from_probs(mdp: &TabularMdp, next_probs: &[Vec<f64>]) -> Matrix {
    let (n_states, n_actions) = (mdp.n_states(), mdp.n_actions());
    let n = mdp.n_pairs();
    let mut p = Matrix::zeros(n, n);
    for s in 0..n_states {
        for a in 0..n_actions {
            let row = mdp.pair_index(s, a);
            for (s_next, &t) in mdp.transition_row(s, a).iter().enumerate() {
                if t == 0.0 {
                    continue;
                }
                for (a_next, &pi) in next_probs[s_next].iter().enumerate() {
                    p[(row, s_next * n_actions + a_next)] = t * pi;
                }
            }
        }
    }
    p
}

/// Stationary distribution of the chain over state-action pairs induced by
/// `policy` at `theta`.
///
/// Runs power iteration from the uniform distribution and falls back to a
/// direct solve of `(P^T - I) d = 0, 1^T d = 1` if it does not settle.
pub fn stationary_distribution(
    mdp: &TabularMdp,
    policy: &BoltzmannPolicy,
    theta: &Vector,
) -> Result<StateActionDistribution> {
    let p = state_action_transition_matrix(mdp, policy, theta)?;
    let d = match stationary_by_power_iteration(&p) {
        Ok(d) => d,
        Err(Error::NotConverged { .. }) => stationary_by_direct_solve(&p)?,
        Err(e) => return Err(e),
    };
    StateActionDistribution::new(d.iter().copied().collect())
}

/// Max-norm of `d^T P - d^T`.
pub fn stationary_residual(p: &Matrix, d: &Vector) -> f64 {
    max_abs(&(p.tr_mul(d) - d))
}

pub fn stationary_by_power_iteration(p: &Matrix) -> Result<Vector> {
    let n = p.nrows();
    let mut d = Vector::from_element(n, 1.0 / n as f64);
    let mut change = f64::INFINITY;
    for _ in 0..POWER_ITERATION_CAP {
        let mut next = p.tr_mul(&d);
        let total = next.sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Numerical(
                "power iteration produced a degenerate vector".into(),
            ));
        }
        next /= total;
        change = max_abs(&(&next - &d));
        d = next;
        if change < POWER_ITERATION_TOLERANCE {
            break;
        }
    }
    let residual = stationary_residual(p, &d);
    if change >= POWER_ITERATION_TOLERANCE || residual > STATIONARY_RESIDUAL_TOLERANCE {
        return Err(Error::NotConverged { residual });
    }
    Ok(d)
}

pub fn stationary_by_direct_solve(p: &Matrix) -> Result<Vector> {
    let n = p.nrows();
    let mut system = Matrix::zeros(n + 1, n);
    system
        .view_mut((0, 0), (n, n))
        .copy_from(&(p.transpose() - Matrix::identity(n, n)));
    system.row_mut(n).fill(1.0);
    let mut rhs = Vector::zeros(n + 1);
    rhs[n] = 1.0;

    let mut d = pinv_solve(&system, &rhs);
    // clip round-off negatives
    d.iter_mut().for_each(|x| *x = x.max(0.0));
    let total = d.sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("direct stationary solve returned zero".into()));
    }
    d /= total;
    let residual = stationary_residual(p, &d);
    if residual > STATIONARY_RESIDUAL_TOLERANCE {
        return Err(Error::NotConverged { residual });
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn cycle() -> (TabularMdp, Arc<FeatureMap>) {
        // 0 -> 1 -> 0, one action
        let mdp = TabularMdp::new(2, 1, vec![0.0, 1.0, 1.0, 0.0], vec![0.0, 0.0], 0.9).unwrap();
        let features = Arc::new(FeatureMap::one_hot(2, 1).unwrap());
        (mdp, features)
    }

    #[test]
    fn rejects_bad_rows_and_gamma() {
        assert!(TabularMdp::new(1, 1, vec![0.5], vec![0.0], 0.9).is_err());
        assert!(TabularMdp::new(1, 1, vec![-1.0], vec![0.0], 0.9).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![0.0], 1.0).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![0.0], 0.0).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![f64::NAN], 0.5).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![0.0], 0.5).is_ok());
    }

    #[test]
    fn feature_rows_must_agree() {
        assert!(FeatureMap::new(1, 2, vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(FeatureMap::new(1, 2, vec![vec![1.0], vec![f64::INFINITY]]).is_err());
        let f = FeatureMap::new(1, 2, vec![vec![1.0, 0.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(f.matrix()[(1, 1)], 3.0);
        assert_eq!(f.phi(0, 1)[1], 3.0);
    }

    #[test]
    fn deterministic_row_always_lands() {
        let mdp = TabularMdp::new(2, 1, vec![0.0, 1.0, 0.0, 1.0], vec![0.5, 0.0], 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(mdp.sample_transition(0, 0, &mut rng).unwrap(), (1, 0.5));
        }
    }

    #[test]
    fn sampling_rejects_bad_indices() {
        let (mdp, _) = cycle();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            mdp.sample_transition(2, 0, &mut rng),
            Err(Error::IndexOutOfRange { what: "state", .. })
        ));
        assert!(matches!(
            mdp.sample_transition(0, 1, &mut rng),
            Err(Error::IndexOutOfRange { what: "action", .. })
        ));
    }

    #[test]
    fn periodic_cycle_is_uniform() {
        let (mdp, features) = cycle();
        let policy = BoltzmannPolicy::new(features, 1.0).unwrap();
        let d = stationary_distribution(&mdp, &policy, &Vector::zeros(2)).unwrap();
        assert_relative_eq!(d.as_vector()[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(d.as_vector()[1], 0.5, epsilon = 1e-12);
        assert_eq!(d.state_marginal(1), vec![0.5, 0.5]);
    }

    #[test]
    fn direct_solve_handles_what_power_iteration_cannot() {
        // A periodic chain started off its fixed point never settles.
        let p = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let d = stationary_by_direct_solve(&p).unwrap();
        assert_relative_eq!(d, Vector::from_vec(vec![0.5, 0.5]), epsilon = 1e-12);
    }

    #[test]
    fn distribution_validation() {
        assert!(StateActionDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(StateActionDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(StateDistribution::new(vec![0.25; 4]).is_ok());
    }
}
