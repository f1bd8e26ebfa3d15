use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::net::{PolicyConfig, PolicyNet, PolicyParams};
use super::PolicyError;
use crate::envs::ActionSpace;
use crate::reservoir::{ClampConfig, Registry, ReservoirModel};

pub const CHECKPOINT_FORMAT: &str = "langgame-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk form of a trained policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub reservoir_id: String,
    /// Checksum of the frozen reservoir parameters at save time.
    pub reservoir_checksum: u64,
    pub env_name: String,
    pub seed: u64,
    pub steps: u64,
    pub final_reward: Option<f64>,
    pub clamp: ClampConfig,
    pub obs_dim: usize,
    pub action_space: ActionSpace,
    pub config: PolicyConfig,
    pub params: PolicyParams,
}

impl Checkpoint {
    pub fn from_policy(policy: &PolicyNet, env_name: &str, seed: u64, steps: u64, final_reward: Option<f64>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            reservoir_id: policy.reservoir().id().to_string(),
            reservoir_checksum: policy.reservoir().checksum(),
            env_name: env_name.to_string(),
            seed,
            steps,
            final_reward,
            clamp: policy.config().clamp,
            obs_dim: policy.obs_dim(),
            action_space: policy.action_space(),
            config: policy.config().clone(),
            params: policy.params.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let text = serde_json::to_string(self).map_err(|e| PolicyError::Checkpoint(e.to_string()))?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| PolicyError::Checkpoint(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(PolicyError::Checkpoint(format!("unsupported checkpoint {} v{}", ckpt.format, ckpt.version)));
        }
        Ok(ckpt)
    }

    /// Rebuilds the policy, resolving its reservoir through `registry` and
    /// refusing a reservoir whose parameters changed since saving.
    pub fn into_policy(self, registry: &Registry) -> Result<PolicyNet, PolicyError> {
        let model = registry.get(&self.reservoir_id)?;
        if model.checksum() != self.reservoir_checksum {
            return Err(PolicyError::Checkpoint(format!(
                "reservoir '{}' checksum {} differs from saved {}",
                self.reservoir_id,
                model.checksum(),
                self.reservoir_checksum
            )));
        }
        self.into_policy_with(model)
    }

    fn into_policy_with(self, model: Arc<ReservoirModel>) -> Result<PolicyNet, PolicyError> {
        let d = model.dim();
        let p = &self.params;
        if p.encoder.in_dim != self.obs_dim || p.encoder.out_dim != d || p.decoder.in_dim != d {
            return Err(PolicyError::Checkpoint("parameter shapes do not match the reservoir".into()));
        }
        let mut config = self.config;
        config.clamp = self.clamp;
        Ok(PolicyNet::from_parts(self.params, model, self.obs_dim, self.action_space, config))
    }
}
