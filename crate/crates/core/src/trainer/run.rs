use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::PpoConfig;
use super::convergence::{detect_convergence, BudgetRule, ConvergenceReport};
use super::normalize::RewardNormalizer;
use super::ppo::{ppo_update, Adam, UpdateStats};
use super::rollout::{collect_rollouts, mix_seed, EpisodeRecord, VecEnv};
use super::TrainError;
use crate::envs::{env_spec, make_env};
use crate::policy::{Checkpoint, PolicyNet};
use crate::reservoir::Registry;
use crate::Parallelism;

pub const METRICS_FILE: &str = "metrics.csv";
pub const EVALS_FILE: &str = "evals.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
const WARMUP_STEPS: usize = 64;
const EVAL_SEED_BASE: u64 = 0x00E7_A15E_ED00;

/// `<out>/<reservoir>/<env>/seed_<k>`
pub fn run_dir(out: &Path, reservoir_id: &str, env_name: &str, seed: u64) -> PathBuf {
    out.join(reservoir_id).join(env_name).join(format!("seed_{seed}"))
}

/// One row of the per-episode metrics file. Loss columns are empty until the
/// first update has happened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub episode_reward: f64,
    pub episode_length: usize,
    pub loss_policy: Option<f64>,
    pub loss_value: Option<f64>,
    pub entropy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: u64,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub episodes: usize,
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, TrainError> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(TrainError::from)).collect()
}

pub fn read_evals(path: &Path) -> Result<Vec<EvalRecord>, TrainError> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(TrainError::from)).collect()
}

/// Returns of `episodes` deterministic (distribution-mode) episodes, each on a
/// fresh environment seeded from `seed`.
pub fn evaluate(policy: &PolicyNet, env_name: &str, episodes: usize, seed: u64, par: Parallelism) -> Result<Vec<f64>, TrainError> {
    let results = par.map_range(episodes, |k| -> Result<f64, TrainError> {
        let mut env = make_env(env_name).map_err(|source| TrainError::Env { index: k, source })?;
        let mut obs = env.reset(Some(mix_seed(seed ^ EVAL_SEED_BASE, k as u64)));
        let mut total = 0.0;
        loop {
            let action = policy.forward_actor(&obs)?.mode();
            let action = match (action, policy.action_space()) {
                (crate::envs::Action::Continuous(v), crate::envs::ActionSpace::Continuous { low, high, .. }) => {
                    crate::envs::Action::Continuous(v.into_iter().map(|x| x.clamp(low, high)).collect())
                }
                (a, _) => a,
            };
            let r = env.step(&action).map_err(|source| TrainError::Env { index: k, source })?;
            total += r.reward;
            if r.terminated || r.truncated {
                return Ok(total);
            }
            obs = r.observation;
        }
    });
    results.into_iter().collect()
}

fn summarize(step: u64, rewards: &[f64]) -> EvalRecord {
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    EvalRecord { step, mean_reward: mean, std_reward: std, episodes: rewards.len() }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub policy: PolicyNet,
    /// Environment steps consumed by training rollouts.
    pub steps: u64,
    pub rollouts: u64,
    /// Mean return of the evaluation of the final policy (the last periodic
    /// one when it ran at the final step with enough episodes).
    pub final_reward: f64,
    pub evals: Vec<EvalRecord>,
    pub episodes: Vec<EpisodeRecord>,
    pub updates: Vec<UpdateStats>,
    /// First evaluation step whose mean reached the configured target.
    pub target_reached_at: Option<u64>,
    pub reservoir_checksum_before: u64,
    pub reservoir_checksum_after: u64,
    pub run_dir: Option<PathBuf>,
}

impl TrainOutcome {
    pub fn reward_trace(&self) -> Vec<(u64, f64)> {
        self.episodes.iter().map(|e| (e.step, e.reward)).collect()
    }
}

/// What to train and where to write it.
#[derive(Clone, Debug)]
pub struct TrainJob<'a> {
    pub registry: &'a Registry,
    pub reservoir_id: &'a str,
    pub env_name: &'a str,
    pub seed: u64,
    pub config: &'a PpoConfig,
    /// Root output directory; the run lands in [`run_dir`] below it.
    pub out: Option<&'a Path>,
    pub parallelism: Parallelism,
}

struct Writers {
    dir: PathBuf,
    metrics: csv::Writer<std::fs::File>,
    evals: csv::Writer<std::fs::File>,
}

impl Writers {
    fn open(dir: PathBuf) -> Result<Self, TrainError> {
        std::fs::create_dir_all(&dir)?;
        let builder = || {
            let mut b = csv::WriterBuilder::new();
            b.has_headers(false);
            b
        };
        let metrics = builder().from_path(dir.join(METRICS_FILE))?;
        let evals = builder().from_path(dir.join(EVALS_FILE))?;
        let mut w = Writers { dir, metrics, evals };
        w.metrics.write_record(["step", "episode_reward", "episode_length", "loss_policy", "loss_value", "entropy"])?;
        w.evals.write_record(["step", "mean_reward", "std_reward", "episodes"])?;
        w.flush()?;
        Ok(w)
    }

    fn flush(&mut self) -> Result<(), TrainError> {
        self.metrics.flush()?;
        self.evals.flush()?;
        Ok(())
    }
}

/// Collect, estimate advantages, update; repeated until the step budget is
/// spent or the target reward is reached.
pub fn train(job: &TrainJob<'_>) -> Result<TrainOutcome, TrainError> {
    let cfg = job.config;
    cfg.validate()?;
    let par = job.parallelism;
    let model = job.registry.get(job.reservoir_id)?;
    let spec = env_spec(job.env_name).map_err(|source| TrainError::Env { index: 0, source })?;
    let checksum_before = model.checksum();
    let mut policy = PolicyNet::new(model.clone(), spec.obs_dim, spec.action, cfg.policy.clone(), job.seed);

    let mut writers = match job.out {
        Some(out) => Some(Writers::open(run_dir(out, job.reservoir_id, job.env_name, job.seed))?),
        None => None,
    };
    let save = |policy: &PolicyNet, steps: u64, final_reward: Option<f64>, name: &str, dir: &Path| {
        Checkpoint::from_policy(policy, job.env_name, job.seed, steps, final_reward).save(&dir.join(name))
    };

    let mut warmup = VecEnv::new(job.env_name, cfg.n_envs, mix_seed(job.seed, 77))?;
    let mut scratch = RewardNormalizer::new(cfg.n_envs, cfg.gamma, cfg.reward_clip, false);
    let warm = collect_rollouts(&policy, &mut warmup, &mut scratch, WARMUP_STEPS, par)?;
    policy.refresh_norm_stats_with(&warm.all_observations(), 1.0);

    if let Some(w) = writers.as_mut() {
        save(&policy, 0, None, "checkpoint_0.json", &w.dir)?;
    }

    let mut envs = VecEnv::new(job.env_name, cfg.n_envs, job.seed)?;
    let mut normalizer = RewardNormalizer::new(cfg.n_envs, cfg.gamma, cfg.reward_clip, cfg.normalize_reward);
    let mut adam = Adam::new(policy.params.to_flat().len(), cfg.lr, cfg.adam_eps);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(job.seed, 99));
    let mut episodes = Vec::new();
    let mut updates: Vec<UpdateStats> = Vec::new();
    let mut evals = Vec::new();
    let mut target_reached_at = None;
    let mut next_eval = if cfg.eval_interval > 0 { cfg.eval_interval } else { u64::MAX };
    let mut next_ckpt = if cfg.checkpoint_interval > 0 { cfg.checkpoint_interval } else { u64::MAX };
    let mut rollouts = 0;

    while rollouts < cfg.n_rollouts() {
        let mut batch = collect_rollouts(&policy, &mut envs, &mut normalizer, cfg.n_steps, par)?;
        rollouts += 1;
        if let Some(w) = writers.as_mut() {
            let last = updates.last();
            for ep in &batch.episodes {
                w.metrics.serialize(MetricsRow {
                    step: ep.step,
                    episode_reward: ep.reward,
                    episode_length: ep.length,
                    loss_policy: last.map(|u| u.policy_loss),
                    loss_value: last.map(|u| u.value_loss),
                    entropy: last.map(|u| u.entropy),
                })?;
            }
        }
        batch.compute_advantages(cfg.gamma, cfg.gae_lambda)?;
        let stats = ppo_update(&mut policy, &batch, cfg, &mut adam, &mut shuffle_rng, par)?;
        policy.refresh_norm_stats(&batch.all_observations());
        updates.push(stats);
        episodes.extend(batch.episodes);
        let steps = envs.steps();

        if steps >= next_eval {
            while next_eval <= steps {
                next_eval = next_eval.saturating_add(cfg.eval_interval);
            }
            let rewards = evaluate(&policy, job.env_name, cfg.eval_episodes, job.seed, par)?;
            let record = summarize(steps, &rewards);
            if let Some(w) = writers.as_mut() {
                w.evals.serialize(&record)?;
            }
            let reached = cfg.target_reward.is_some_and(|t| record.mean_reward >= t);
            evals.push(record);
            if reached {
                target_reached_at = Some(steps);
            }
        }
        if steps >= next_ckpt {
            while next_ckpt <= steps {
                next_ckpt = next_ckpt.saturating_add(cfg.checkpoint_interval);
            }
            if let Some(w) = writers.as_ref() {
                save(&policy, steps, None, &format!("checkpoint_{steps}.json"), &w.dir)?;
            }
        }
        if let Some(w) = writers.as_mut() {
            w.flush()?;
        }
        if target_reached_at.is_some() {
            break;
        }
    }

    let steps = envs.steps();
    let reusable = evals.last().filter(|e| e.step == steps && e.episodes >= cfg.final_eval_episodes).cloned();
    let final_reward = match reusable {
        Some(record) => record.mean_reward,
        None => {
            let rewards = evaluate(&policy, job.env_name, cfg.final_eval_episodes, job.seed, par)?;
            let record = summarize(steps, &rewards);
            if let Some(w) = writers.as_mut() {
                w.evals.serialize(&record)?;
            }
            evals.push(record.clone());
            record.mean_reward
        }
    };
    let mut out_dir = None;
    if let Some(mut w) = writers {
        w.flush()?;
        save(&policy, steps, Some(final_reward), CHECKPOINT_FILE, &w.dir)?;
        out_dir = Some(w.dir);
    }
    Ok(TrainOutcome {
        reservoir_checksum_after: policy.reservoir().checksum(),
        policy,
        steps,
        rollouts,
        final_reward,
        evals,
        episodes,
        updates,
        target_reached_at,
        reservoir_checksum_before: checksum_before,
        run_dir: out_dir,
    })
}

#[derive(Clone, Debug)]
pub struct CalibrationOutcome {
    pub report: ConvergenceReport,
    pub calibration_budget: u64,
    pub budget: u64,
    pub training: TrainOutcome,
}

/// Trains the `mlp` control for `calibration_budget` steps, then proposes a
/// budget from its episode-reward trace.
#[allow(clippy::too_many_arguments)]
pub fn calibrate(
    registry: &Registry,
    env_name: &str,
    calibration_budget: u64,
    seed: u64,
    config: &PpoConfig,
    rule: &BudgetRule,
    out: Option<&Path>,
    par: Parallelism,
) -> Result<CalibrationOutcome, TrainError> {
    let cfg = PpoConfig { total_steps: calibration_budget, target_reward: None, ..config.clone() };
    let training = train(&TrainJob { registry, reservoir_id: "mlp", env_name, seed, config: &cfg, out, parallelism: par })?;
    let report = detect_convergence(&training.reward_trace())?;
    let budget = rule.apply(&report, calibration_budget);
    Ok(CalibrationOutcome { report, calibration_budget, budget, training })
}
