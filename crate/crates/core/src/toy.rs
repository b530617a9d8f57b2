//! Small full-rank problems used to certify the analytic MSPBE gradient.
//!
//! With one-hot features `Phi = I`, so `Phi^T D Phi = D` is invertible whenever
//! every state-action pair has positive measurement weight and the inverse
//! derivative identity holds exactly.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::{FeatureMap, TabularMdp};
use crate::{Error, Result};

pub const TOY_GAMMA: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct ToyProblem {
    pub mdp: Arc<TabularMdp>,
    pub features: Arc<FeatureMap>,
}

/// A random `n_states`-state MDP with `n_actions` actions, dense transition
/// rows, rewards in [-1, 1] and one-hot features. Deterministic in `seed`.
pub fn full_rank_toy(n_states: usize, n_actions: usize, seed: u64) -> Result<ToyProblem> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::InvalidArgument("toy problem needs states and actions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        // bounded away from zero so every row is dense
        let raw: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut row: Vec<f64> = raw.iter().map(|x| x / total).collect();
        // push the rounding residue into the last entry
        let head: f64 = row[..n_states - 1].iter().sum();
        row[n_states - 1] = 1.0 - head;
        transition.extend(row);
    }
    let reward = (0..n_states * n_actions)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mdp = TabularMdp::new(n_states, n_actions, transition, reward, TOY_GAMMA)?;
    let features = FeatureMap::one_hot(n_states, n_actions)?;
    Ok(ToyProblem {
        mdp: Arc::new(mdp),
        features: Arc::new(features),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_dense() {
        let a = full_rank_toy(3, 2, 9).unwrap();
        let b = full_rank_toy(3, 2, 9).unwrap();
        assert_eq!(a.mdp, b.mdp);
        for s in 0..3 {
            for act in 0..2 {
                assert!(a.mdp.transition_row(s, act).iter().all(|&p| p > 0.0));
            }
        }
        assert_eq!(a.features.k(), 6);
    }
}
