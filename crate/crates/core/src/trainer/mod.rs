//! Proximal policy optimization of the trainable interfaces, plus the
//! calibration tooling that turns reward traces into step budgets.

mod config;
mod convergence;
mod gae;
mod normalize;
mod ppo;
mod rollout;
mod run;

pub use config::PpoConfig;
pub use convergence::{assign_budget, detect_convergence, BudgetRule, ConvergenceReport, ConvergenceStatus, Rounding, N_BINS, PATIENCE};
pub use gae::{compute_gae, StepFlag};
pub use normalize::{RewardNormalizer, RunningMeanStd};
pub use ppo::{minibatch_gradient, ppo_update, Adam, MinibatchLoss, UpdateStats};
pub use rollout::{collect_rollouts, EpisodeRecord, RolloutBatch, VecEnv};
pub use run::{
    calibrate, evaluate, read_evals, read_metrics, run_dir, train, CalibrationOutcome, EvalRecord, MetricsRow, TrainJob, TrainOutcome,
    CHECKPOINT_FILE, EVALS_FILE, METRICS_FILE,
};

use thiserror::Error;

use crate::envs::EnvError;
use crate::policy::PolicyError;
use crate::reservoir::ReservoirError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("reward trace: {0}")]
    Trace(String),
    #[error("environment {index}: {source}")]
    Env { index: usize, source: EnvError },
    #[error("non-finite loss in epoch {epoch}, minibatch {minibatch}: {detail}")]
    NonFiniteLoss { epoch: usize, minibatch: usize, detail: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Reservoir(#[from] ReservoirError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[cfg(test)]
mod tests;
