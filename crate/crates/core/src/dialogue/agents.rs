use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DialogueError;
use crate::analysis::find_checkpoints;
use crate::policy::{Checkpoint, PolicyNet};
use crate::reservoir::Registry;

/// Identity of a trained policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub reservoir_id: String,
    pub env_name: String,
    pub seed: u64,
    pub steps: u64,
    pub final_reward: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Agent {
    pub info: AgentInfo,
    pub policy: PolicyNet,
}

impl Agent {
    pub fn from_checkpoint(checkpoint: Checkpoint, registry: &Registry) -> Result<Self, DialogueError> {
        let info = AgentInfo {
            reservoir_id: checkpoint.reservoir_id.clone(),
            env_name: checkpoint.env_name.clone(),
            seed: checkpoint.seed,
            steps: checkpoint.steps,
            final_reward: checkpoint.final_reward,
        };
        Ok(Agent { info, policy: checkpoint.into_policy(registry)? })
    }
}

/// At most one answering policy per environment.
#[derive(Clone, Debug, Default)]
pub struct AgentSet {
    agents: BTreeMap<String, Agent>,
}

impl AgentSet {
    pub fn new() -> Self {
        AgentSet::default()
    }

    pub fn insert(&mut self, agent: Agent) {
        self.agents.insert(agent.info.env_name.clone(), agent);
    }

    pub fn get(&self, env_name: &str) -> Option<&Agent> {
        self.agents.get(env_name)
    }

    pub fn agents(&self) -> impl Iterator<Item = &Agent> {
        self.agents.values()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Every final checkpoint under `runs`, optionally restricted to one
    /// reservoir.
    pub fn list_runs(runs: &Path, reservoir: Option<&str>) -> Result<Vec<(std::path::PathBuf, Checkpoint)>, DialogueError> {
        let mut out = Vec::new();
        for path in find_checkpoints(runs)? {
            let c = Checkpoint::load(&path)?;
            if reservoir.is_none_or(|r| r == c.reservoir_id) {
                out.push((path, c));
            }
        }
        Ok(out)
    }

    /// Picks, per environment, the run with the highest final reward; ties go
    /// to the lower seed, then the lexicographically smaller reservoir id.
    pub fn from_runs(runs: &Path, registry: &Registry, reservoir: Option<&str>) -> Result<Self, DialogueError> {
        let checkpoints = AgentSet::list_runs(runs, reservoir)?.into_iter().map(|(_, c)| c);
        AgentSet::from_checkpoints(checkpoints, registry)
    }

    /// Same selection rule as [`AgentSet::from_runs`] over checkpoints that
    /// are already loaded.
    pub fn from_checkpoints(checkpoints: impl IntoIterator<Item = Checkpoint>, registry: &Registry) -> Result<Self, DialogueError> {
        let mut best: BTreeMap<String, Checkpoint> = BTreeMap::new();
        for c in checkpoints {
            let better = match best.get(&c.env_name) {
                None => true,
                Some(cur) => {
                    let key = |c: &Checkpoint| c.final_reward.unwrap_or(f64::NEG_INFINITY);
                    key(&c) > key(cur) || (key(&c) == key(cur) && (c.seed, &c.reservoir_id) < (cur.seed, &cur.reservoir_id))
                }
            };
            if better {
                best.insert(c.env_name.clone(), c);
            }
        }
        let mut set = AgentSet::new();
        for c in best.into_values() {
            set.insert(Agent::from_checkpoint(c, registry)?);
        }
        Ok(set)
    }
}
