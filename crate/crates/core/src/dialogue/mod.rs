//! Talking to trained policies through a chat model: route a human prompt to
//! an environment, turn it into a goal and a concrete state, let the policy
//! act, and voice the action with a tone taken from the critic.

mod agents;
mod llm;
mod mock;
mod pipeline;
mod prompts;

pub use agents::{Agent, AgentInfo, AgentSet};
pub use llm::{HttpLlm, LlmClient, LlmError, LlmRequest, OutputSchema, ENV_API_KEY, ENV_BASE_URL, ENV_MODEL};
pub use mock::{MockLlm, Tone};
pub use pipeline::{
    append_turn, compose_reply, delta_v, design_state, infer_goal, read_turns, reference_observation, reply_message, route_env, run_round,
    DialogueTurn,
};
pub use prompts::{fill, PromptVars, Stage};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("prompt template: {0}")]
    Template(String),
    #[error("{stage} stage: {source}")]
    Llm { stage: Stage, source: LlmError },
    #[error("{stage} stage: {message}")]
    Protocol { stage: Stage, message: String },
    #[error("no trained agent for {env_name}")]
    NoAgent { env_name: String },
    #[error(transparent)]
    Env(#[from] crate::envs::EnvError),
    #[error(transparent)]
    Policy(#[from] crate::policy::PolicyError),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for DialogueError {
    fn from(e: std::io::Error) -> Self {
        DialogueError::Io(e.to_string())
    }
}

#[cfg(test)]
mod tests;
