use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::policy::PolicyConfig;

/// PPO hyperparameters plus the bookkeeping knobs of a training run.
///
/// Deserializes from TOML with every key optional; missing keys take the
/// defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub n_envs: usize,
    pub n_steps: usize,
    pub batch_size: usize,
    pub n_epochs: usize,
    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub adam_eps: f64,
    pub reward_clip: f64,
    pub obs_clip: f64,
    pub normalize_reward: bool,
    pub normalize_obs: bool,
    pub total_steps: u64,
    /// Environment steps between evaluations; 0 evaluates only at the end.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Episodes in the closing evaluation that defines the final reward.
    pub final_eval_episodes: usize,
    /// Environment steps between numbered checkpoints; 0 disables them.
    pub checkpoint_interval: u64,
    /// Stop early once a periodic evaluation's mean reaches this value.
    pub target_reward: Option<f64>,
    /// Samples per gradient-accumulation chunk inside a minibatch.
    pub grad_chunk: usize,
    pub policy: PolicyConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            n_envs: 16,
            n_steps: 512,
            batch_size: 256,
            n_epochs: 10,
            lr: 5e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_range: 0.2,
            entropy_coef: 0.0,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            adam_eps: 1e-5,
            reward_clip: 10.0,
            obs_clip: 10.0,
            normalize_reward: true,
            normalize_obs: false,
            total_steps: 100_000,
            eval_interval: 16_384,
            eval_episodes: 20,
            final_eval_episodes: 20,
            checkpoint_interval: 0,
            target_reward: None,
            grad_chunk: 32,
            policy: PolicyConfig::default(),
        }
    }
}

impl PpoConfig {
    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        let cfg: PpoConfig = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn rollout_size(&self) -> usize {
        self.n_envs * self.n_steps
    }

    /// Rollouts needed to consume `total_steps` (the last one may overshoot).
    pub fn n_rollouts(&self) -> u64 {
        self.total_steps.div_ceil(self.rollout_size() as u64)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.n_envs == 0 || self.n_steps == 0 || self.batch_size == 0 || self.n_epochs == 0 {
            return bad("n_envs, n_steps, batch_size and n_epochs must be positive");
        }
        if !self.rollout_size().is_multiple_of(self.batch_size) {
            return bad("batch_size must divide n_envs * n_steps");
        }
        let rates = [self.lr, self.clip_range, self.reward_clip, self.obs_clip, self.max_grad_norm, self.adam_eps];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("lr, clip_range, reward_clip, obs_clip, max_grad_norm and adam_eps must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        if self.entropy_coef < 0.0 || self.value_coef < 0.0 {
            return bad("loss coefficients must be non-negative");
        }
        if self.normalize_obs {
            return bad("observation normalization is not supported");
        }
        if self.grad_chunk == 0 || self.final_eval_episodes == 0 {
            return bad("grad_chunk and final_eval_episodes must be positive");
        }
        self.policy.clamp.validate().map_err(|e| TrainError::Config(e.to_string()))
    }
}
