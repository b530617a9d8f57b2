//! Seeded Baird experiments, metric logging and gradient certification.

mod config;
mod experiment;
mod gradcheck;
mod series;

pub use config::{ExperimentConfig, Mode};
pub use experiment::{run_experiment, run_sampled, run_trajectory, splitmix64, stream_seed};
pub use gradcheck::{
    grad_check, grad_check_problem, GradCheckEntry, GradCheckProblem, GradCheckReport,
    GRAD_CHECK_STEPS, GRAD_CHECK_TOLERANCE, REFERENCE_STEP,
};
pub use series::{MetricRecord, MetricSeries, CSV_HEADER};

pub use crate::learners::Algorithm;
