//! Classic-control environments with the reference dynamics of CartPole-v1,
//! Acrobot-v1, MountainCarContinuous-v0 and Pendulum-v1.
//!
//! Every environment exposes its internal state for direct injection, which
//! is how the dialogue pipeline "speaks" a designed situation to a policy.

mod acrobot;
mod cartpole;
mod descriptors;
mod mountain_car;
mod pendulum;

pub use acrobot::Acrobot;
pub use cartpole::CartPole;
pub use descriptors::{env_description, env_descriptors, format_env_list, EnvDescriptor};
pub use mountain_car::MountainCarContinuous;
pub use pendulum::Pendulum;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CARTPOLE: &str = "CartPole-v1";
pub const ACROBOT: &str = "Acrobot-v1";
pub const MOUNTAIN_CAR_CONTINUOUS: &str = "MountainCarContinuous-v0";
pub const PENDULUM: &str = "Pendulum-v1";

/// The desk roster, in a fixed order.
pub const ENV_NAMES: [&str; 4] = [CARTPOLE, ACROBOT, MOUNTAIN_CAR_CONTINUOUS, PENDULUM];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("unknown environment '{0}'")]
    Unknown(String),
    #[error("{env}: internal state needs {expected} components, got {got}")]
    StateDimension { env: String, expected: usize, got: usize },
    #[error("{env}: internal state component {index} is not finite")]
    NonFiniteState { env: String, index: usize },
    #[error("{env}: action {action:?} is not in the action space")]
    InvalidAction { env: String, action: Action },
    #[error("{env}: step called on a finished episode; reset first")]
    EpisodeOver { env: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionSpace {
    Discrete { n: usize },
    Continuous { dim: usize, low: f64, high: f64 },
}

impl ActionSpace {
    /// Width of the decoder output: number of logits or action dimensions.
    pub fn output_dim(&self) -> usize {
        match *self {
            ActionSpace::Discrete { n } => n,
            ActionSpace::Continuous { dim, .. } => dim,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionSpace::Discrete { .. })
    }
}

/// A discrete index or a continuous vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub action: ActionSpace,
    pub horizon: usize,
    pub solved_threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

/// Episodic interface shared by all environments.
pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode. `Some(seed)` reseeds the environment's own RNG
    /// stream; `None` keeps drawing from the current stream.
    fn reset(&mut self, seed: Option<u64>) -> Vec<f64>;

    fn step(&mut self, action: &Action) -> Result<StepResult, EnvError>;

    /// Adopts `state` exactly and returns the derived observation.
    fn set_internal_state(&mut self, state: &[f64]) -> Result<Vec<f64>, EnvError>;

    fn internal_state(&self) -> Vec<f64>;

    fn observation(&self) -> Vec<f64>;
}

/// Physics of one task. [`Episode`] adds seeding, time limits and validation.
pub trait Dynamics: Send + Clone {
    fn spec() -> EnvSpec;
    fn initial_state(rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// Advances `state` in place; returns `(reward, terminated)`.
    fn transition(state: &mut [f64], action: &Action) -> (f64, bool);
    fn observe(state: &[f64]) -> Vec<f64>;
    fn action_valid(action: &Action) -> bool;
}

#[derive(Clone, Debug)]
pub struct Episode<D: Dynamics> {
    spec: EnvSpec,
    state: Vec<f64>,
    rng: ChaCha8Rng,
    elapsed: usize,
    done: bool,
    _dynamics: std::marker::PhantomData<D>,
}

impl<D: Dynamics> Default for Episode<D> {
    fn default() -> Self {
        Self::new()
    }
}

impl<D: Dynamics> Episode<D> {
    pub fn new() -> Self {
        let spec = D::spec();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let state = D::initial_state(&mut rng);
        Episode { spec, state, rng, elapsed: 0, done: false, _dynamics: std::marker::PhantomData }
    }

    pub fn elapsed(&self) -> usize {
        self.elapsed
    }
}

impl<D: Dynamics + 'static> Environment for Episode<D> {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: Option<u64>) -> Vec<f64> {
        if let Some(s) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(s);
        }
        self.state = D::initial_state(&mut self.rng);
        self.elapsed = 0;
        self.done = false;
        D::observe(&self.state)
    }

    fn step(&mut self, action: &Action) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver { env: self.spec.name.clone() });
        }
        if !D::action_valid(action) {
            return Err(EnvError::InvalidAction { env: self.spec.name.clone(), action: action.clone() });
        }
        let (reward, terminated) = D::transition(&mut self.state, action);
        self.elapsed += 1;
        let truncated = !terminated && self.elapsed >= self.spec.horizon;
        self.done = terminated || truncated;
        Ok(StepResult { observation: D::observe(&self.state), reward, terminated, truncated })
    }

    fn set_internal_state(&mut self, state: &[f64]) -> Result<Vec<f64>, EnvError> {
        if state.len() != self.spec.state_dim {
            return Err(EnvError::StateDimension { env: self.spec.name.clone(), expected: self.spec.state_dim, got: state.len() });
        }
        if let Some(index) = state.iter().position(|v| !v.is_finite()) {
            return Err(EnvError::NonFiniteState { env: self.spec.name.clone(), index });
        }
        self.state = state.to_vec();
        self.done = false;
        Ok(D::observe(&self.state))
    }

    fn internal_state(&self) -> Vec<f64> {
        self.state.clone()
    }

    fn observation(&self) -> Vec<f64> {
        D::observe(&self.state)
    }
}

pub fn make_env(name: &str) -> Result<Box<dyn Environment>, EnvError> {
    Ok(match name {
        CARTPOLE => Box::new(Episode::<CartPole>::new()),
        ACROBOT => Box::new(Episode::<Acrobot>::new()),
        MOUNTAIN_CAR_CONTINUOUS => Box::new(Episode::<MountainCarContinuous>::new()),
        PENDULUM => Box::new(Episode::<Pendulum>::new()),
        other => return Err(EnvError::Unknown(other.to_string())),
    })
}

pub fn env_spec(name: &str) -> Result<EnvSpec, EnvError> {
    make_env(name).map(|e| e.spec().clone())
}

fn continuous_valid(action: &Action, dim: usize) -> bool {
    matches!(action, Action::Continuous(v) if v.len() == dim && v.iter().all(|x| x.is_finite()))
}

fn discrete_valid(action: &Action, n: usize) -> bool {
    matches!(action, Action::Discrete(a) if *a < n)
}
