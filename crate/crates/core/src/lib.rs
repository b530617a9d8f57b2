//! Policy-gradient Q-learning (PGQ) and its gradient-TD baselines under linear
//! function approximation.
//!
//! The crate is split by concern:
//!
//! - [`mdp`]: finite MDPs, linear features, policy-induced state-action
//!   dynamics and stationary distributions.
//! - [`baird`]: the seven-state "star" counterexample.
//! - [`policy`]: Boltzmann policies and their exact gradients.
//! - [`objectives`]: exact MSPBE, MSTDE, the auxiliary fixed point `w` and the
//!   analytic MSPBE gradient, plus a finite-difference oracle.
//! - [`learners`]: O(k) incremental updates for Q-learning, GQ/TDC and PGQ.
//! - [`harness`]: seeded experiment runners, CSV logging and gradient checks.
//!
//! State-action pairs are flattened everywhere as `s * n_actions + a`.

pub mod baird;
pub mod error;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod mdp;
pub mod objectives;
pub mod policy;
pub mod toy;

pub use baird::{build_baird_star, BairdStar};
pub use error::{Error, Result};
pub use harness::{
    grad_check, run_experiment, run_sampled, run_trajectory, Algorithm, ExperimentConfig,
    GradCheckReport, MetricRecord, MetricSeries, Mode,
};
pub use learners::{LearnerState, TransitionSample};
pub use mdp::{Action, FeatureMap, State, StateActionDistribution, StateDistribution, TabularMdp};
pub use objectives::ObjectiveWorkspace;
pub use policy::BoltzmannPolicy;

/// Dense real vector used for `theta`, `w` and feature vectors.
pub type Vector = nalgebra::DVector<f64>;
/// Dense real matrix.
pub type Matrix = nalgebra::DMatrix<f64>;
