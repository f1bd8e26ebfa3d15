//! Frozen ODE reservoirs.
//!
//! A [`ReservoirModel`] is a right-hand side `f(x) = dx/dt` with fixed
//! parameters. Policies only ever evaluate the instantaneous gradient `f(x)`
//! and its vector-Jacobian product; [`integrate_trajectory`] exists for
//! diagnostics and the console's state previews.

mod clamp;
mod integrate;
mod model;
mod registry;
pub mod terms;

pub use clamp::{ste_project, ClampConfig, SteProjection};
pub use integrate::integrate_trajectory;
pub use model::{Category, Dynamics, FrozenMlp, JacobianMode, PropertyTag, ReservoirModel};
pub use registry::{ModelSummary, Registry};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReservoirError {
    #[error("dimension mismatch: model {model} expects {expected}, got {got}")]
    DimensionMismatch { model: String, expected: usize, got: usize },
    #[error("state component {index} = {value} is outside the positive orthant of model {model}")]
    DomainViolation { model: String, index: usize, value: f64 },
    #[error("non-finite state encountered at step {step}; reduce the step size")]
    NonFinite { step: usize },
    #[error("invalid clamp config: need 0 < epsilon ({epsilon}) < max_val ({max_val})")]
    InvalidClamp { epsilon: f64, max_val: f64 },
    #[error("invalid model definition: {0}")]
    InvalidModel(String),
    #[error("unknown reservoir '{0}'")]
    UnknownModel(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}
