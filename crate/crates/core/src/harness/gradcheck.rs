//! Certification of the analytic MSPBE gradient against central differences.

use std::fmt;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baird::build_baird_star;
use crate::objectives::{relative_error, ObjectiveWorkspace};
use crate::policy::BoltzmannPolicy;
use crate::toy::full_rank_toy;
use crate::{Result, Vector};

/// Largest acceptable relative error at [`REFERENCE_STEP`].
pub const GRAD_CHECK_TOLERANCE: f64 = 5e-5;
/// Step the tolerance applies to.
pub const REFERENCE_STEP: f64 = 1e-5;
/// Steps swept for the error curve.
pub const GRAD_CHECK_STEPS: [f64; 3] = [1e-4, 1e-5, 1e-6];
/// Gradients smaller than this in max-norm are compared absolutely.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-8;

const TOY_TAU: f64 = 0.5;
const BAIRD_TAU: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradCheckProblem {
    /// Three states, two actions, one-hot features.
    Toy,
    /// The star counterexample; `Phi^T D Phi` is singular.
    Baird,
}

impl GradCheckProblem {
    pub fn name(self) -> &'static str {
        match self {
            GradCheckProblem::Toy => "toy",
            GradCheckProblem::Baird => "baird",
        }
    }

    pub fn workspace(self, seed: u64) -> Result<ObjectiveWorkspace> {
        match self {
            GradCheckProblem::Toy => {
                let toy = full_rank_toy(3, 2, seed)?;
                let target = BoltzmannPolicy::new(toy.features, TOY_TAU)?;
                ObjectiveWorkspace::uniform(toy.mdp, target)
            }
            GradCheckProblem::Baird => {
                let baird = build_baird_star();
                let target = BoltzmannPolicy::new(baird.features, BAIRD_TAU)?;
                ObjectiveWorkspace::uniform(baird.mdp, target)
            }
        }
    }
}

impl fmt::Display for GradCheckProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckEntry {
    pub problem: GradCheckProblem,
    pub draw: usize,
    pub h: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_error(&self, problem: GradCheckProblem, h: f64) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.problem == problem && e.h == h)
            .fold(0.0, |m, e| m.max(e.relative_error))
    }

    pub fn problems(&self) -> Vec<GradCheckProblem> {
        let mut out = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.problem) {
                out.push(e.problem);
            }
        }
        out
    }

    /// Every problem within tolerance at the reference step.
    pub fn passed(&self) -> bool {
        self.problems()
            .into_iter()
            .all(|p| self.max_error(p, REFERENCE_STEP) < self.tolerance)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("problem,draw,h,relative_error\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{}\n", e.problem, e.draw, e.h, e.relative_error));
        }
        out
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for problem in self.problems() {
            for h in GRAD_CHECK_STEPS {
                writeln!(
                    f,
                    "{problem:<6} h={h:e} max relative error {:.3e}",
                    self.max_error(problem, h)
                )?;
            }
        }
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} (tolerance {:e} at h={REFERENCE_STEP:e})", self.tolerance)
    }
}

/// Compares analytic and finite-difference gradients at `draws` random
/// `theta` on one problem, for every step in [`GRAD_CHECK_STEPS`].
pub fn grad_check_problem(
    problem: GradCheckProblem,
    draws: usize,
    seed: u64,
) -> Result<Vec<GradCheckEntry>> {
    let workspace = problem.workspace(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6772_6164); // "grad"
    let k = workspace.k();
    let mut entries = Vec::with_capacity(draws * GRAD_CHECK_STEPS.len());
    for draw in 0..draws {
        let theta: Vector = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        let analytic = workspace.mspbe_gradient(&theta);
        for h in GRAD_CHECK_STEPS {
            let numeric = workspace.finite_difference_gradient(&theta, h);
            entries.push(GradCheckEntry {
                problem,
                draw,
                h,
                relative_error: relative_error(&analytic, &numeric, RELATIVE_ERROR_FLOOR),
            });
        }
    }
    Ok(entries)
}

/// Runs the check on the full-rank toy problem and on the Baird star.
pub fn grad_check(draws: usize, seed: u64) -> Result<GradCheckReport> {
    let mut entries = grad_check_problem(GradCheckProblem::Toy, draws, seed)?;
    entries.extend(grad_check_problem(GradCheckProblem::Baird, draws, seed)?);
    Ok(GradCheckReport {
        entries,
        tolerance: GRAD_CHECK_TOLERANCE,
    })
}
