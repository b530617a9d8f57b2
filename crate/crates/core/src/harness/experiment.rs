use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Mode};
use super::series::{MetricRecord, MetricSeries};
use crate::baird::{build_baird_star, BairdStar};
use crate::learners::{LearnerState, TransitionSample};
use crate::objectives::ObjectiveWorkspace;
use crate::policy::BoltzmannPolicy;
use crate::{Error, Result};

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of run `run` under master seed `seed`: `splitmix64(seed + run)`.
///
/// Run `i` under seed `s` therefore replays run `0` under seed `s + i`.
pub fn stream_seed(seed: u64, run: usize) -> u64 {
    splitmix64(seed.wrapping_add(run as u64))
}

struct Setup {
    baird: BairdStar,
    target: BoltzmannPolicy,
    behavior: BoltzmannPolicy,
    workspace: ObjectiveWorkspace,
}

impl Setup {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let baird = build_baird_star();
        let target = BoltzmannPolicy::new(baird.features.clone(), config.tau_target)?;
        let behavior = BoltzmannPolicy::new(baird.features.clone(), config.tau_behavior)?;
        let workspace = ObjectiveWorkspace::uniform(baird.mdp.clone(), target.clone())?;
        Ok(Self {
            baird,
            target,
            behavior,
            workspace,
        })
    }
}

/// Runs `config` in whichever mode it names.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricSeries> {
    config.validate()?;
    let setup = Setup::new(config)?;
    let runs: Vec<Vec<MetricRecord>> = (0..config.runs)
        .into_par_iter()
        .map(|run| run_single(config, &setup, run))
        .collect::<Result<_>>()?;
    Ok(MetricSeries::new(runs.into_iter().flatten().collect()))
}

pub fn run_sampled(config: &ExperimentConfig) -> Result<MetricSeries> {
    if config.mode != Mode::Sampled {
        return Err(Error::Config("run_sampled needs mode = sampled".into()));
    }
    run_experiment(config)
}

pub fn run_trajectory(config: &ExperimentConfig) -> Result<MetricSeries> {
    if config.mode != Mode::Trajectory {
        return Err(Error::Config("run_trajectory needs mode = trajectory".into()));
    }
    run_experiment(config)
}

fn run_single(config: &ExperimentConfig, setup: &Setup, run: usize) -> Result<Vec<MetricRecord>> {
    let mdp = &setup.baird.mdp;
    let gamma = mdp.gamma();
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, run));
    let mut state = LearnerState::with_zero_w(setup.baird.theta_init.clone(), config.alpha, config.beta)?;

    let mut records = Vec::with_capacity(config.steps / config.measure_every + 1);
    let mut last_finite = (f64::NAN, f64::NAN);
    let mut measure = |step: usize, state: &LearnerState, records: &mut Vec<MetricRecord>| {
        let mspbe = setup.workspace.mspbe(&state.theta);
        let mstde = setup.workspace.mstde(&state.theta);
        let finite = mspbe.is_finite() && mstde.is_finite();
        if finite {
            last_finite = (mspbe, mstde);
        }
        records.push(MetricRecord {
            algorithm: config.algorithm,
            run,
            step,
            mspbe: last_finite.0,
            mstde: last_finite.1,
            diverged: state.diverged() || !finite,
        });
    };

    measure(0, &state, &mut records);
    let mut current = match config.mode {
        Mode::Trajectory => rng.random_range(0..mdp.n_states()),
        Mode::Sampled => 0,
    };
    let mut halted = false;
    for step in 1..=config.steps {
        if !halted {
            let s = match config.mode {
                Mode::Sampled => rng.random_range(0..mdp.n_states()),
                Mode::Trajectory => current,
            };
            match setup.behavior.sample_action(&state.theta, s, &mut rng) {
                Ok(a) => {
                    let (s_next, r) = mdp.sample_transition(s, a, &mut rng)?;
                    let sample = TransitionSample::new(s, a, r, s_next);
                    state.update(config.algorithm, &sample, &setup.target, &setup.behavior, gamma);
                    current = s_next;
                }
                Err(Error::Numerical(_)) => halted = true,
                Err(e) => return Err(e),
            }
            halted |= state.diverged();
        }
        if step % config.measure_every == 0 {
            measure(step, &state, &mut records);
            if halted {
                records.last_mut().expect("just pushed").diverged = true;
            }
        }
    }
    Ok(records)
}
