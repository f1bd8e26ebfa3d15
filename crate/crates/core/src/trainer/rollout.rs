use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gae::{compute_gae, StepFlag};
use super::normalize::RewardNormalizer;
use super::TrainError;
use crate::envs::{make_env, Action, ActionSpace, EnvSpec, Environment};
use crate::policy::PolicyNet;
use crate::Parallelism;

/// One finished training episode as seen by the per-environment monitor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Global environment step at which the episode finished.
    pub step: u64,
    pub reward: f64,
    pub length: usize,
    pub env_index: usize,
}

struct EnvSlot {
    env: Box<dyn Environment>,
    obs: Vec<f64>,
    rng: ChaCha8Rng,
    episode_return: f64,
    episode_length: usize,
}

/// A fixed set of independently seeded environment copies that are stepped
/// in lockstep, each resetting automatically when its episode ends.
pub struct VecEnv {
    slots: Vec<EnvSlot>,
    spec: EnvSpec,
    steps: u64,
}

pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03)) ^ stream
}

impl VecEnv {
    pub fn new(env_name: &str, n_envs: usize, seed: u64) -> Result<Self, TrainError> {
        let mut slots = Vec::with_capacity(n_envs);
        for i in 0..n_envs {
            let mut env = make_env(env_name).map_err(|source| TrainError::Env { index: i, source })?;
            let obs = env.reset(Some(mix_seed(seed, i as u64)));
            let rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1_000 + i as u64));
            slots.push(EnvSlot { env, obs, rng, episode_return: 0.0, episode_length: 0 });
        }
        let spec = slots.first().map(|s| s.env.spec().clone()).ok_or_else(|| TrainError::Config("n_envs must be positive".into()))?;
        Ok(VecEnv { slots, spec, steps: 0 })
    }

    pub fn n_envs(&self) -> usize {
        self.slots.len()
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    /// Environment steps consumed so far, summed over all copies.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        self.slots.iter().map(|s| s.obs.clone()).collect()
    }
}

/// Transitions of one rollout, indexed `[env][step]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBatch {
    pub n_envs: usize,
    pub n_steps: usize,
    pub observations: Vec<Vec<Vec<f64>>>,
    pub actions: Vec<Vec<Action>>,
    pub log_probs: Vec<Vec<f64>>,
    /// Rewards after normalization and clipping.
    pub rewards: Vec<Vec<f64>>,
    pub raw_rewards: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    pub flags: Vec<Vec<StepFlag>>,
    /// Critic value of each environment's observation after the last step.
    pub next_values: Vec<f64>,
    pub episodes: Vec<EpisodeRecord>,
    pub advantages: Vec<Vec<f64>>,
    pub returns: Vec<Vec<f64>>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.n_envs * self.n_steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Splits a flat sample index into `(env, step)`.
    pub fn locate(&self, k: usize) -> (usize, usize) {
        (k / self.n_steps, k % self.n_steps)
    }

    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<(), TrainError> {
        self.advantages.clear();
        self.returns.clear();
        for e in 0..self.n_envs {
            let (a, r) = compute_gae(&self.rewards[e], &self.values[e], self.next_values[e], &self.flags[e], gamma, lambda)?;
            self.advantages.push(a);
            self.returns.push(r);
        }
        Ok(())
    }

    pub fn all_observations(&self) -> Vec<Vec<f64>> {
        self.observations.iter().flatten().cloned().collect()
    }
}

struct Segment {
    observations: Vec<Vec<f64>>,
    actions: Vec<Action>,
    log_probs: Vec<f64>,
    raw_rewards: Vec<f64>,
    values: Vec<f64>,
    flags: Vec<StepFlag>,
    next_value: f64,
    finished: Vec<(usize, f64, usize)>,
}

fn env_action(sampled: &Action, space: ActionSpace) -> Action {
    match (sampled, space) {
        (Action::Continuous(v), ActionSpace::Continuous { low, high, .. }) => {
            Action::Continuous(v.iter().map(|x| x.clamp(low, high)).collect())
        }
        _ => sampled.clone(),
    }
}

fn run_segment(slot: &mut EnvSlot, policy: &PolicyNet, n_steps: usize) -> Result<Segment, crate::envs::EnvError> {
    let space = policy.action_space();
    let mut seg = Segment {
        observations: Vec::with_capacity(n_steps),
        actions: Vec::with_capacity(n_steps),
        log_probs: Vec::with_capacity(n_steps),
        raw_rewards: Vec::with_capacity(n_steps),
        values: Vec::with_capacity(n_steps),
        flags: Vec::with_capacity(n_steps),
        next_value: 0.0,
        finished: Vec::new(),
    };
    for t in 0..n_steps {
        let trace = policy.actor_trace(&slot.obs);
        let value = policy.critic_trace(&trace.encoded).value;
        let dist = policy.distribution_from_output(&trace.output);
        let action = dist.sample_with(&mut slot.rng);
        let log_prob = dist.log_prob(&action);
        let result = slot.env.step(&env_action(&action, space))?;
        slot.episode_return += result.reward;
        slot.episode_length += 1;
        let flag = if result.terminated {
            StepFlag::Terminated
        } else if result.truncated {
            StepFlag::Truncated { bootstrap: policy.critic_trace(&policy.encode(&result.observation)).value }
        } else {
            StepFlag::Continue
        };
        seg.observations.push(std::mem::take(&mut slot.obs));
        seg.actions.push(action);
        seg.log_probs.push(log_prob);
        seg.raw_rewards.push(result.reward);
        seg.values.push(value);
        seg.flags.push(flag);
        if result.terminated || result.truncated {
            seg.finished.push((t, slot.episode_return, slot.episode_length));
            slot.episode_return = 0.0;
            slot.episode_length = 0;
            slot.obs = slot.env.reset(None);
        } else {
            slot.obs = result.observation;
        }
    }
    seg.next_value = policy.critic_trace(&policy.encode(&slot.obs)).value;
    Ok(seg)
}

/// Steps every environment `n_steps` times under `policy` and normalizes the
/// rewards in time-major order, exactly as a synchronous vectorized loop
/// would. Environments run concurrently under `par`; results are merged in
/// environment order.
pub fn collect_rollouts(
    policy: &PolicyNet,
    envs: &mut VecEnv,
    normalizer: &mut RewardNormalizer,
    n_steps: usize,
    par: Parallelism,
) -> Result<RolloutBatch, TrainError> {
    let base = envs.steps;
    let n_envs = envs.n_envs();
    let segments = par.map_mut(&mut envs.slots, |slot| run_segment(slot, policy, n_steps));
    let mut segs = Vec::with_capacity(n_envs);
    for (index, s) in segments.into_iter().enumerate() {
        segs.push(s.map_err(|source| TrainError::Env { index, source })?);
    }
    envs.steps += (n_envs * n_steps) as u64;

    let mut rewards = vec![vec![0.0; n_steps]; n_envs];
    let mut step_rewards = vec![0.0; n_envs];
    let mut dones = vec![false; n_envs];
    #[allow(clippy::needless_range_loop)]
    for t in 0..n_steps {
        for ((seg, r), d) in segs.iter().zip(step_rewards.iter_mut()).zip(dones.iter_mut()) {
            *r = seg.raw_rewards[t];
            *d = !matches!(seg.flags[t], StepFlag::Continue);
        }
        for (e, r) in normalizer.step(&step_rewards, &dones).into_iter().enumerate() {
            rewards[e][t] = r;
        }
    }

    let mut episodes: Vec<EpisodeRecord> = segs
        .iter()
        .enumerate()
        .flat_map(|(e, seg)| {
            seg.finished.iter().map(move |&(t, reward, length)| EpisodeRecord {
                step: base + (t * n_envs + e + 1) as u64,
                reward,
                length,
                env_index: e,
            })
        })
        .collect();
    episodes.sort_by_key(|r| r.step);

    let mut batch = RolloutBatch {
        n_envs,
        n_steps,
        observations: Vec::with_capacity(n_envs),
        actions: Vec::with_capacity(n_envs),
        log_probs: Vec::with_capacity(n_envs),
        rewards,
        raw_rewards: Vec::with_capacity(n_envs),
        values: Vec::with_capacity(n_envs),
        flags: Vec::with_capacity(n_envs),
        next_values: Vec::with_capacity(n_envs),
        episodes,
        advantages: Vec::new(),
        returns: Vec::new(),
    };
    for seg in segs {
        batch.observations.push(seg.observations);
        batch.actions.push(seg.actions);
        batch.log_probs.push(seg.log_probs);
        batch.raw_rewards.push(seg.raw_rewards);
        batch.values.push(seg.values);
        batch.flags.push(seg.flags);
        batch.next_values.push(seg.next_value);
    }
    Ok(batch)
}
