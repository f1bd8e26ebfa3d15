//! The encoder / frozen-reservoir / decoder actor and its shared-encoder critic.

mod checkpoint;
mod distribution;
mod layers;
mod net;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use distribution::{sample_action, ActionDistribution};
pub use layers::{Affine, Normalizer};
pub use net::{ActorTrace, CriticTrace, PolicyConfig, PolicyNet, PolicyParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("observation has {got} components, policy expects {expected}")]
    ObservationDimension { expected: usize, got: usize },
    #[error("non-finite value after the {stage} stage")]
    NonFinite { stage: &'static str },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Reservoir(#[from] crate::reservoir::ReservoirError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests;
