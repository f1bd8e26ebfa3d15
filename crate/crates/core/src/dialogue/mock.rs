use serde_json::json;

use super::llm::{LlmClient, LlmError, LlmRequest, OutputSchema};
use crate::envs::{ACROBOT, CARTPOLE, MOUNTAIN_CAR_CONTINUOUS, PENDULUM};

/// Keyword weights used to pick an environment for a prompt.
const ROUTES: &[(&str, &[(&str, u32)])] = &[
    (CARTPOLE, &[("pole", 2), ("balance", 2), ("fall", 1), ("stay", 1), ("stabilize", 1), ("hold", 1), ("upright", 1), ("steady", 1)]),
    (PENDULUM, &[("swing up", 2), ("stabilize", 1), ("pendulum", 3), ("torque", 1)]),
    (ACROBOT, &[("reach the top", 2), ("swing", 1), ("reach", 1), ("acrobot", 3), ("links", 2)]),
    (MOUNTAIN_CAR_CONTINUOUS, &[("hill", 3), ("mountain", 3), ("momentum", 2), ("car", 1)]),
];

/// Offline stand-in for a chat model.
///
/// It recognizes the pipeline stage from the system prompt and answers from
/// fixed tables: keyword scores for routing, per-environment goal and state
/// templates, and a tone picked by thresholding ΔV. Identical requests always
/// get identical replies.
#[derive(Clone, Debug)]
pub struct MockLlm {
    /// |ΔV| at or below this is rendered in a neutral tone.
    pub tone_threshold: f64,
}

impl Default for MockLlm {
    fn default() -> Self {
        MockLlm { tone_threshold: 0.5 }
    }
}

/// Tone classes the mock renders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tone {
    Hopeful,
    Uneasy,
    Neutral,
}

impl Tone {
    pub fn of(delta_v: f64, threshold: f64) -> Tone {
        if delta_v > threshold {
            Tone::Hopeful
        } else if delta_v < -threshold {
            Tone::Uneasy
        } else {
            Tone::Neutral
        }
    }

    pub fn marker(self) -> &'static str {
        match self {
            Tone::Hopeful => "I'm feeling hopeful",
            Tone::Uneasy => "I'm feeling uneasy",
            Tone::Neutral => "appears stable",
        }
    }
}

/// Environment named in a first line such as "... in the X RL environment."
fn env_in(line: &str) -> Option<String> {
    let before = &line[..line.find(" RL environment")?];
    before.rsplit(' ').next().map(str::to_string)
}

impl MockLlm {
    fn route(&self, user: &str, schema: Option<&OutputSchema>) -> String {
        let choices: Vec<String> = match schema {
            Some(OutputSchema::Enum { values, .. }) => values.clone(),
            None => ROUTES.iter().map(|(e, _)| e.to_string()).collect(),
        };
        let text = user.to_lowercase();
        let score = |env: &str| -> u32 {
            ROUTES
                .iter()
                .find(|(e, _)| *e == env)
                .map(|(_, kws)| kws.iter().filter(|(k, _)| text.contains(k)).map(|(_, w)| w).sum())
                .unwrap_or(0)
        };
        let mut best = choices.first().cloned().unwrap_or_default();
        let mut best_score = 0;
        for c in &choices {
            let s = score(c);
            if s > best_score {
                best = c.clone();
                best_score = s;
            }
        }
        json!({ "env_name": best }).to_string()
    }

    fn goal(&self, env: &str, user: &str) -> String {
        let t = user.to_lowercase();
        let has = |words: &[&str]| words.iter().any(|w| t.contains(w));
        match env {
            CARTPOLE if has(&["fast", "speed", "run"]) => "Make the cart continuously move to left or right",
            CARTPOLE if has(&["left"]) => "Move to left",
            CARTPOLE if has(&["right"]) => "Move to right",
            CARTPOLE => "Keep the pole upright",
            PENDULUM => "Swing the pendulum up and hold it upright",
            ACROBOT => "Swing the free end above the target height",
            MOUNTAIN_CAR_CONTINUOUS => "Build momentum and drive up the hill to the flag",
            _ => "Act rationally",
        }
        .to_string()
    }

    fn state(&self, env: &str, goal: &str) -> String {
        let g = goal.to_lowercase();
        let state: Vec<f64> = match env {
            CARTPOLE if g.contains("left") && !g.contains("right") => vec![0.1, 0.0, -0.2, 0.0],
            CARTPOLE if g.contains("right") && !g.contains("left") => vec![-0.1, 0.0, 0.2, 0.0],
            CARTPOLE => vec![0.0, 0.0, 0.05, 0.0],
            PENDULUM => vec![3.0, 0.5],
            ACROBOT => vec![0.3, -0.2, 0.0, 0.0],
            MOUNTAIN_CAR_CONTINUOUS => vec![-0.5, 0.0],
            _ => vec![],
        };
        json!({ "state": state }).to_string()
    }

    fn reply(&self, env: &str, user: &str) -> String {
        let delta_v = user.lines().find_map(|l| l.strip_prefix("delta_v:")).and_then(|v| v.trim().parse::<f64>().ok()).unwrap_or(0.0);
        let action = user.lines().find_map(|l| l.strip_prefix("action:")).map(str::trim).unwrap_or("");
        let doing = describe_action(env, action);
        match Tone::of(delta_v, self.tone_threshold) {
            Tone::Hopeful => format!("{}, so I'm going to {doing}.", Tone::Hopeful.marker()),
            Tone::Uneasy => format!("{}, so I'm attempting to {doing}.", Tone::Uneasy.marker()),
            Tone::Neutral => format!("The situation {}, so I'll carefully {doing}.", Tone::Neutral.marker()),
        }
    }
}

fn describe_action(env: &str, action: &str) -> &'static str {
    let first: Option<f64> = action.trim_matches(|c| c == '[' || c == ']').split(',').next().and_then(|v| v.trim().parse().ok());
    match (env, first) {
        (CARTPOLE, Some(0.0)) => "push the cart to the left",
        (CARTPOLE, Some(_)) => "push the cart to the right",
        (ACROBOT, Some(0.0)) => "swing the joint backward",
        (ACROBOT, Some(1.0)) => "let the links swing freely",
        (ACROBOT, Some(_)) => "swing the joint forward",
        (PENDULUM, Some(a)) if a < 0.0 => "twist the pendulum clockwise",
        (PENDULUM, Some(_)) => "twist the pendulum counterclockwise",
        (MOUNTAIN_CAR_CONTINUOUS, Some(a)) if a < 0.0 => "roll back to gather momentum",
        (MOUNTAIN_CAR_CONTINUOUS, Some(_)) => "accelerate toward the hilltop",
        _ => "keep things under control",
    }
}

impl LlmClient for MockLlm {
    fn send(&self, request: &LlmRequest) -> Result<String, LlmError> {
        let first = request.system.lines().next().unwrap_or("");
        if first.starts_with("You select the most appropriate RL environment") {
            return Ok(self.route(&request.user, request.schema.as_ref()));
        }
        let env = env_in(first).ok_or_else(|| LlmError::Protocol("mock cannot identify the prompt stage".into()))?;
        if first.starts_with("You are translate human natural language") {
            Ok(self.goal(&env, &request.user))
        } else if first.starts_with("Given ") {
            Ok(self.state(&env, &request.user))
        } else if first.starts_with("You are an agent in") {
            Ok(self.reply(&env, &request.user))
        } else {
            Err(LlmError::Protocol("mock cannot identify the prompt stage".into()))
        }
    }

    fn name(&self) -> String {
        "mock".into()
    }
}
