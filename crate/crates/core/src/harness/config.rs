use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::learners::Algorithm;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// i.i.d. transitions: `s` uniform over states, `a` from the sampling policy.
    Sampled,
    /// One trajectory per run from a uniform start state.
    Trajectory,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Sampled => "sampled",
            Mode::Trajectory => "trajectory",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampled" => Ok(Mode::Sampled),
            "trajectory" => Ok(Mode::Trajectory),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub beta: f64,
    pub tau_target: f64,
    /// Temperature of the Boltzmann policy that picks actions. Equal to
    /// `tau_target` for on-policy runs.
    pub tau_behavior: f64,
    pub steps: usize,
    pub runs: usize,
    pub seed: u64,
    pub measure_every: usize,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// On-policy sampled updates: `tau = 0.4`, `alpha = 0.01`, `beta = 0.25`.
    pub fn sampled(algorithm: Algorithm) -> Self {
        Self {
            mode: Mode::Sampled,
            algorithm,
            alpha: 0.01,
            beta: 0.25,
            tau_target: 0.4,
            tau_behavior: 0.4,
            steps: 5000,
            runs: 1,
            seed: 0,
            measure_every: 10,
            output_path: None,
        }
    }

    /// Off-policy sampled updates: target `tau = 0.4`, behaviour `tau = 0.7`,
    /// `alpha = 0.005`, `beta = 0.01`.
    pub fn sampled_off_policy(algorithm: Algorithm) -> Self {
        Self {
            alpha: 0.005,
            beta: 0.01,
            tau_behavior: 0.7,
            ..Self::sampled(algorithm)
        }
    }

    /// Trajectories: target `tau = 0.8`, behaviour `tau = 10`,
    /// `alpha = 0.0125`, `beta = 0.0421875`, ten runs.
    pub fn trajectory(algorithm: Algorithm) -> Self {
        Self {
            mode: Mode::Trajectory,
            algorithm,
            alpha: 0.0125,
            beta: 0.0421875,
            tau_target: 0.8,
            tau_behavior: 10.0,
            steps: 20_000,
            runs: 10,
            seed: 0,
            measure_every: 10,
            output_path: None,
        }
    }

    pub fn defaults(mode: Mode, algorithm: Algorithm) -> Self {
        match mode {
            Mode::Sampled => Self::sampled(algorithm),
            Mode::Trajectory => Self::trajectory(algorithm),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be non-negative and finite, got {v}")))
            }
        };
        positive("tau-target", self.tau_target)?;
        positive("tau-behavior", self.tau_behavior)?;
        non_negative("alpha", self.alpha)?;
        non_negative("beta", self.beta)?;
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.measure_every == 0 {
            return Err(Error::Config("measure-every must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for algorithm in Algorithm::ALL {
            ExperimentConfig::sampled(algorithm).validate().unwrap();
            ExperimentConfig::sampled_off_policy(algorithm).validate().unwrap();
            ExperimentConfig::trajectory(algorithm).validate().unwrap();
        }
    }

    #[test]
    fn rejects_bad_values() {
        let base = ExperimentConfig::sampled(Algorithm::Gq);
        let cases = [
            ExperimentConfig { runs: 0, ..base.clone() },
            ExperimentConfig { measure_every: 0, ..base.clone() },
            ExperimentConfig { tau_target: 0.0, ..base.clone() },
            ExperimentConfig { tau_behavior: -1.0, ..base.clone() },
            ExperimentConfig { alpha: -0.1, ..base.clone() },
            ExperimentConfig { beta: f64::NAN, ..base.clone() },
        ];
        for case in cases {
            assert!(matches!(case.validate(), Err(Error::Config(_))), "{case:?}");
        }
    }
}
