//! The seven-state "star" counterexample.
//!
//! States `0..=5` are the outer states and state `6` is the centre. Action
//! [`SOLID`] moves to the centre with probability one; action [`DASHED`] moves
//! to one of the outer states uniformly. Every reward is zero.
//!
//! Each state carries an 8-dimensional basis `x(s)`:
//!
//! ```text
//! x(s_i) = 2 e_i + e_8      i = 1..6
//! x(s_7) =   e_7 + 2 e_8
//! ```
//!
//! and the action features stack it into per-action blocks,
//! `phi(s, SOLID) = [x(s); 0]`, `phi(s, DASHED) = [0; x(s)]`, so `k = 16`.

use std::sync::Arc;

use crate::mdp::{Action, FeatureMap, State, TabularMdp};
use crate::Vector;

pub const N_STATES: usize = 7;
pub const N_ACTIONS: usize = 2;
pub const BASIS_DIM: usize = 8;
pub const FEATURE_DIM: usize = 2 * BASIS_DIM;
pub const GAMMA: f64 = 0.99;

pub const SOLID: Action = 0;
pub const DASHED: Action = 1;
pub const CENTRE: State = 6;

#[derive(Debug, Clone)]
pub struct BairdStar {
    pub mdp: Arc<TabularMdp>,
    pub features: Arc<FeatureMap>,
    pub theta_init: Vector,
}

/// Per-state basis `x(s)`.
pub fn state_basis(s: State) -> [f64; BASIS_DIM] {
    let mut x = [0.0; BASIS_DIM];
    if s == CENTRE {
        x[CENTRE] = 1.0;
        x[BASIS_DIM - 1] = 2.0;
    } else {
        x[s] = 2.0;
        x[BASIS_DIM - 1] = 1.0;
    }
    x
}

pub fn build_baird_star() -> BairdStar {
    let mut transition = vec![0.0; N_STATES * N_ACTIONS * N_STATES];
    for s in 0..N_STATES {
        let solid = (s * N_ACTIONS + SOLID) * N_STATES;
        transition[solid + CENTRE] = 1.0;
        let dashed = (s * N_ACTIONS + DASHED) * N_STATES;
        for s_next in 0..CENTRE {
            transition[dashed + s_next] = 1.0 / 6.0;
        }
    }
    let reward = vec![0.0; N_STATES * N_ACTIONS];
    let mdp = TabularMdp::new(N_STATES, N_ACTIONS, transition, reward, GAMMA)
        .expect("the star MDP is well formed");

    let features = FeatureMap::from_fn(N_STATES, N_ACTIONS, |s, a| {
        let mut row = vec![0.0; FEATURE_DIM];
        let offset = if a == SOLID { 0 } else { BASIS_DIM };
        row[offset..offset + BASIS_DIM].copy_from_slice(&state_basis(s));
        row
    })
    .expect("the star features are well formed");

    let mut theta_init = Vector::from_element(FEATURE_DIM, 1.0);
    theta_init[BASIS_DIM - 1] = 10.0;

    BairdStar {
        mdp: Arc::new(mdp),
        features: Arc::new(features),
        theta_init,
    }
}
