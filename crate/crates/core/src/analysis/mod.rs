//! Behavioral similarity between trained policies and statistics relating
//! reservoir properties to task performance.

mod priors;
mod similarity;
pub mod stats;

pub use priors::{
    effect_zscores, find_checkpoints, fisher_cells, sign_test, ContingencyResult, EffectMatrix, FisherReport, RewardEntry, RewardTable,
    SignTestReport, SignTestResult, Taxonomy, CANONICAL_GRNS,
};
pub use similarity::{action_matrix, mean_off_diagonal, similarity_matrix, ActionMatrix, SimilarityMatrix, AUX_COORDINATE, N_STATES};
pub use stats::{bh_fdr, fisher_exact, p_min_ceiling, sign_test_p, Table2x2};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("io: {0}")]
    Io(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Env(#[from] crate::envs::EnvError),
    #[error(transparent)]
    Policy(#[from] crate::policy::PolicyError),
}

impl From<std::io::Error> for AnalysisError {
    fn from(e: std::io::Error) -> Self {
        AnalysisError::Io(e.to_string())
    }
}
