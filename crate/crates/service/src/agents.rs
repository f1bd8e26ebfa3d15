use std::path::{Component, Path};

use langgame_core::analysis::find_checkpoints;
use langgame_core::policy::Checkpoint;
use langgame_core::reservoir::{Category, Registry};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    Ok,
    Unreadable,
}

/// One checkpoint found under the runs directory. Unreadable files are still
/// listed, with the identifying fields recovered from the path when possible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub reservoir_id: Option<String>,
    pub env_name: Option<String>,
    pub seed: Option<u64>,
    /// Relative to the runs directory, `/`-separated.
    pub checkpoint: String,
    pub final_reward: Option<f64>,
    pub steps: Option<u64>,
    pub category: Option<Category>,
    pub status: AgentStatus,
    pub error: Option<String>,
}

fn relative(runs: &Path, path: &Path) -> Vec<String> {
    path.strip_prefix(runs)
        .unwrap_or(path)
        .components()
        .filter_map(|c| match c {
            Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect()
}

/// Scans `runs` for final checkpoints, sorted by path. A checkpoint that
/// fails to parse or no longer matches its reservoir is flagged rather than
/// dropped. Returns the records and the checkpoints that loaded.
pub fn scan_agents(runs: &Path, registry: &Registry) -> (Vec<AgentRecord>, Vec<Checkpoint>) {
    let paths = if runs.is_dir() { find_checkpoints(runs).unwrap_or_default() } else { Vec::new() };
    let mut records = Vec::with_capacity(paths.len());
    let mut loaded = Vec::new();
    for path in paths {
        let parts = relative(runs, &path);
        let checkpoint = parts.join("/");
        let outcome = Checkpoint::load(&path).and_then(|c| {
            c.clone().into_policy(registry)?;
            Ok(c)
        });
        match outcome {
            Ok(c) => {
                records.push(AgentRecord {
                    reservoir_id: Some(c.reservoir_id.clone()),
                    env_name: Some(c.env_name.clone()),
                    seed: Some(c.seed),
                    checkpoint,
                    final_reward: c.final_reward,
                    steps: Some(c.steps),
                    category: registry.get(&c.reservoir_id).ok().map(|m| m.category()),
                    status: AgentStatus::Ok,
                    error: None,
                });
                loaded.push(c);
            }
            Err(e) => {
                let n = parts.len();
                let from_path = |k: usize| if n >= k { Some(parts[n - k].clone()) } else { None };
                records.push(AgentRecord {
                    reservoir_id: from_path(4),
                    env_name: from_path(3),
                    seed: from_path(2).and_then(|s| s.strip_prefix("seed_").and_then(|k| k.parse().ok())),
                    checkpoint,
                    final_reward: None,
                    steps: None,
                    category: None,
                    status: AgentStatus::Unreadable,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    (records, loaded)
}
