use std::io::{BufRead, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::agents::{AgentInfo, AgentSet};
use super::llm::{LlmClient, LlmRequest, OutputSchema};
use super::prompts::{fill, PromptVars, Stage};
use super::DialogueError;
use crate::envs::{env_description, env_descriptors, env_spec, format_env_list, make_env, Action, EnvDescriptor};
use crate::policy::PolicyNet;

/// Everything one round produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DialogueTurn {
    pub prompt_h: String,
    pub env_name: String,
    pub goal: String,
    pub designed_state: Vec<f64>,
    pub observation: Vec<f64>,
    pub action: Action,
    pub delta_v: f64,
    pub reply: String,
    pub seed: u64,
    pub agent: AgentInfo,
}

const ATTEMPTS: usize = 2;

fn ask(llm: &dyn LlmClient, stage: Stage, request: &LlmRequest) -> Result<String, DialogueError> {
    llm.send(request).map_err(|source| DialogueError::Llm { stage, source })
}

/// The environment choice inside a reply: `{"env_name": ...}` or bare text.
fn parse_env_choice(text: &str) -> String {
    if let Some(v) = extract_json(text) {
        if let Some(s) = v.get("env_name").and_then(|s| s.as_str()) {
            return s.to_string();
        }
    }
    text.trim().trim_matches(|c| c == '"' || c == '`' || c == '\'').trim().to_string()
}

/// The outermost `{...}` of `text` parsed as JSON, tolerating code fences
/// and trailing commas.
fn extract_json(text: &str) -> Option<serde_json::Value> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    if end < start {
        return None;
    }
    let body = &text[start..=end];
    serde_json::from_str(body).ok().or_else(|| serde_json::from_str(&strip_trailing_commas(body)).ok())
}

fn strip_trailing_commas(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    for (i, c) in chars.iter().enumerate() {
        if *c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(*c);
    }
    out
}

/// Asks the model which environment best frames `prompt`.
pub fn route_env(llm: &dyn LlmClient, prompt: &str, envs: &[EnvDescriptor]) -> Result<String, DialogueError> {
    if envs.is_empty() {
        return Err(DialogueError::Protocol { stage: Stage::Router, message: "no environments to choose from".into() });
    }
    let list = format_env_list(envs);
    let system = fill(Stage::Router.template(), &PromptVars { env_list: Some(&list), ..Default::default() })?;
    let values: Vec<String> = envs.iter().map(|e| e.name.clone()).collect();
    let request = LlmRequest {
        system,
        user: prompt.to_string(),
        schema: Some(OutputSchema::Enum { field: "env_name".into(), values: values.clone() }),
    };
    let mut last = String::new();
    for _ in 0..ATTEMPTS {
        let choice = parse_env_choice(&ask(llm, Stage::Router, &request)?);
        if values.contains(&choice) {
            return Ok(choice);
        }
        last = choice;
    }
    Err(DialogueError::Protocol { stage: Stage::Router, message: format!("'{last}' is not an available environment") })
}

fn env_vars<'a>(env_name: &'a str, desc: &'a str) -> PromptVars<'a> {
    PromptVars { env_name: Some(env_name), env_desc: Some(desc), env_list: None }
}

/// Translates `prompt` into a goal action within `env_name`.
pub fn infer_goal(llm: &dyn LlmClient, prompt: &str, env_name: &str) -> Result<String, DialogueError> {
    let desc = env_description(env_name)?;
    let system = fill(Stage::Goal.template(), &env_vars(env_name, desc))?;
    let request = LlmRequest { system, user: prompt.to_string(), schema: None };
    for _ in 0..ATTEMPTS {
        let goal = ask(llm, Stage::Goal, &request)?;
        if !goal.trim().is_empty() {
            return Ok(goal);
        }
    }
    Err(DialogueError::Protocol { stage: Stage::Goal, message: "empty goal".into() })
}

fn parse_state(text: &str, state_dim: usize) -> Result<Vec<f64>, String> {
    let value = extract_json(text).ok_or("the reply is not a JSON object")?;
    let list = value.get("state").and_then(|s| s.as_array()).ok_or("missing list under the key \"state\"")?;
    let state: Vec<f64> = list.iter().map(|v| v.as_f64().ok_or("non-numeric state component")).collect::<Result<_, _>>()?;
    if state.len() != state_dim {
        return Err(format!("the state must have {state_dim} components, got {}", state.len()));
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err("the state has non-finite components".into());
    }
    Ok(state)
}

/// Asks the model for an internal state of `env_name` that should elicit
/// `goal`. A malformed answer is retried once with the problem explained.
pub fn design_state(llm: &dyn LlmClient, goal: &str, env_name: &str) -> Result<Vec<f64>, DialogueError> {
    let spec = env_spec(env_name)?;
    let desc = env_description(env_name)?;
    let system = fill(Stage::StateDesign.template(), &env_vars(env_name, desc))?;
    let mut request = LlmRequest { system, user: goal.to_string(), schema: None };
    let mut problem = String::new();
    for _ in 0..ATTEMPTS {
        let text = ask(llm, Stage::StateDesign, &request)?;
        match parse_state(&text, spec.state_dim) {
            Ok(state) => return Ok(state),
            Err(e) => {
                request.user = format!(
                    "{goal}\n\nYour previous answer was rejected: {e}. Reply with JSON whose \"state\" is a list of {} numbers.",
                    spec.state_dim
                );
                problem = e;
            }
        }
    }
    Err(DialogueError::Protocol { stage: Stage::StateDesign, message: problem })
}

/// Seeded standard-normal reference observation.
pub fn reference_observation(obs_dim: usize, round_seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(round_seed);
    (0..obs_dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `V(designed_obs) − V(s₀)` with `s₀` the reference observation for
/// `round_seed`.
pub fn delta_v(policy: &PolicyNet, designed_obs: &[f64], round_seed: u64) -> Result<f64, DialogueError> {
    let s0 = reference_observation(policy.obs_dim(), round_seed);
    Ok(policy.forward_critic(designed_obs)? - policy.forward_critic(&s0)?)
}

fn action_text(action: &Action) -> String {
    match action {
        Action::Discrete(a) => format!("[{a}]"),
        Action::Continuous(v) => format!("{v:?}"),
    }
}

/// The reply-stage user message.
pub fn reply_message(state: &[f64], action: &Action, delta_v: f64) -> String {
    format!("state: {state:?}\naction: {}\ndelta_v: {delta_v:+.2}", action_text(action))
}

/// Asks the model to voice the agent's action, toned by ΔV.
pub fn compose_reply(llm: &dyn LlmClient, env_name: &str, state: &[f64], action: &Action, delta_v: f64) -> Result<String, DialogueError> {
    let desc = env_description(env_name)?;
    let system = fill(Stage::Reply.template(), &env_vars(env_name, desc))?;
    let request = LlmRequest { system, user: reply_message(state, action, delta_v), schema: None };
    for _ in 0..ATTEMPTS {
        let reply = ask(llm, Stage::Reply, &request)?;
        if !reply.trim().is_empty() {
            return Ok(reply.trim().to_string());
        }
    }
    Err(DialogueError::Protocol { stage: Stage::Reply, message: "empty reply".into() })
}

/// One full round: route, infer a goal, design a state, let the agent act on
/// it, measure ΔV and voice the result. Nothing carries over between rounds.
pub fn run_round(prompt: &str, agents: &AgentSet, llm: &dyn LlmClient, round_seed: u64) -> Result<DialogueTurn, DialogueError> {
    let env_name = route_env(llm, prompt, &env_descriptors())?;
    let agent = agents.get(&env_name).ok_or_else(|| DialogueError::NoAgent { env_name: env_name.clone() })?;
    let goal = infer_goal(llm, prompt, &env_name)?;
    let designed_state = design_state(llm, &goal, &env_name)?;
    let mut env = make_env(&env_name)?;
    let observation = env.set_internal_state(&designed_state)?;
    let action = agent.policy.forward_actor(&observation)?.mode();
    let delta_v = delta_v(&agent.policy, &observation, round_seed)?;
    let reply = compose_reply(llm, &env_name, &designed_state, &action, delta_v)?;
    Ok(DialogueTurn {
        prompt_h: prompt.to_string(),
        env_name,
        goal,
        designed_state,
        observation,
        action,
        delta_v,
        reply,
        seed: round_seed,
        agent: agent.info.clone(),
    })
}

/// Appends `turn` as one JSON line.
pub fn append_turn(path: &Path, turn: &DialogueTurn) -> Result<(), DialogueError> {
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(turn).map_err(|e| DialogueError::Io(e.to_string()))?;
    writeln!(f, "{line}")?;
    Ok(())
}

pub fn read_turns(path: &Path) -> Result<Vec<DialogueTurn>, DialogueError> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(f).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| DialogueError::Io(e.to_string()))?);
        }
    }
    Ok(out)
}
