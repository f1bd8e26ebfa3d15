use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::PpoConfig;
use super::rollout::RolloutBatch;
use super::TrainError;
use crate::envs::Action;
use crate::policy::{ActionDistribution, PolicyNet, PolicyParams};
use crate::Parallelism;

/// First-order adaptive-moment optimizer over a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64, eps: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Loss terms of one minibatch, all as means over its samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MinibatchLoss {
    /// Mean of `min(r·A, clip(r)·A)`.
    pub surrogate: f64,
    /// Mean of `r·A` with no clipping.
    pub unclipped_surrogate: f64,
    pub mean_advantage: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub total: f64,
}

impl MinibatchLoss {
    fn add(&mut self, o: &MinibatchLoss) {
        self.surrogate += o.surrogate;
        self.unclipped_surrogate += o.unclipped_surrogate;
        self.mean_advantage += o.mean_advantage;
        self.value_loss += o.value_loss;
        self.entropy += o.entropy;
        self.approx_kl += o.approx_kl;
        self.clip_fraction += o.clip_fraction;
        self.total += o.total;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Mean clipped-surrogate loss (negated surrogate) over all minibatches.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
    /// Loss of the very first minibatch, evaluated before any parameter change.
    pub first: MinibatchLoss,
}

/// Output-side derivatives of `log π(a|s)` and of the entropy.
fn log_prob_grads(dist: &ActionDistribution, action: &Action) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    match dist {
        ActionDistribution::Categorical { .. } => {
            let p = dist.probs().expect("categorical");
            let a = match action {
                Action::Discrete(a) => *a,
                Action::Continuous(_) => unreachable!("continuous action for a categorical policy"),
            };
            let h = dist.entropy();
            let d_logp = p.iter().enumerate().map(|(j, pj)| (j == a) as u8 as f64 - pj).collect();
            let d_ent = p.iter().map(|pj| if *pj > 0.0 { -pj * (pj.ln() + h) } else { 0.0 }).collect();
            (d_logp, Vec::new(), d_ent, Vec::new())
        }
        ActionDistribution::Gaussian { mean, std } => {
            let a = match action {
                Action::Continuous(v) => v,
                Action::Discrete(_) => unreachable!("discrete action for a Gaussian policy"),
            };
            let z: Vec<f64> = a.iter().zip(mean).zip(std).map(|((a, m), s)| (a - m) / s).collect();
            let d_mean = z.iter().zip(std).map(|(z, s)| z / s).collect();
            let d_log_std = z.iter().map(|z| z * z - 1.0).collect();
            (d_mean, d_log_std, vec![0.0; mean.len()], vec![1.0; mean.len()])
        }
    }
}

/// Gradient of the PPO loss on the samples `indices` of `batch`, with
/// advantages standardized over those samples. The loss is
/// `-surrogate + value_coef·MSE - entropy_coef·entropy`.
pub fn minibatch_gradient(
    policy: &PolicyNet,
    batch: &RolloutBatch,
    indices: &[usize],
    cfg: &PpoConfig,
    par: Parallelism,
) -> (PolicyParams, MinibatchLoss) {
    let n = indices.len() as f64;
    let raw: Vec<f64> = indices
        .iter()
        .map(|&k| {
            let (e, t) = batch.locate(k);
            batch.advantages[e][t]
        })
        .collect();
    let adv_mean = raw.iter().sum::<f64>() / n;
    let adv: Vec<f64> = if indices.len() > 1 {
        let std = (raw.iter().map(|a| (a - adv_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        raw.iter().map(|a| (a - adv_mean) / (std + 1e-8)).collect()
    } else {
        raw
    };

    let chunks: Vec<(usize, usize)> =
        (0..indices.len()).step_by(cfg.grad_chunk).map(|s| (s, (s + cfg.grad_chunk).min(indices.len()))).collect();
    let partials = par.map(&chunks, |&(lo, hi)| {
        let mut grad = policy.params.zeros_like();
        let mut loss = MinibatchLoss::default();
        for j in lo..hi {
            let (e, t) = batch.locate(indices[j]);
            let obs = &batch.observations[e][t];
            let action = &batch.actions[e][t];
            let actor = policy.actor_trace(obs);
            let critic = policy.critic_trace(&actor.encoded);
            let dist = policy.distribution_from_output(&actor.output);
            let log_prob = dist.log_prob(action);
            let log_ratio = log_prob - batch.log_probs[e][t];
            let ratio = log_ratio.exp();
            let a = adv[j];
            let clipped_ratio = ratio.clamp(1.0 - cfg.clip_range, 1.0 + cfg.clip_range);
            let s1 = ratio * a;
            let s2 = clipped_ratio * a;
            let surrogate = s1.min(s2);
            let unclipped_active = s1 <= s2 || (ratio - clipped_ratio).abs() == 0.0;
            let entropy = dist.entropy();
            let err = critic.value - batch.returns[e][t];

            loss.surrogate += surrogate / n;
            loss.unclipped_surrogate += s1 / n;
            loss.mean_advantage += a / n;
            loss.value_loss += err * err / n;
            loss.entropy += entropy / n;
            loss.approx_kl += ((ratio - 1.0) - log_ratio) / n;
            loss.clip_fraction += ((ratio - 1.0).abs() > cfg.clip_range) as u8 as f64 / n;

            let d_logp = if unclipped_active { -a * ratio / n } else { 0.0 };
            let d_ent = -cfg.entropy_coef / n;
            let (g_out, g_log_std, h_out, h_log_std) = log_prob_grads(&dist, action);
            let d_output: Vec<f64> = g_out.iter().zip(&h_out).map(|(g, h)| d_logp * g + d_ent * h).collect();
            let d_log_std: Vec<f64> = g_log_std.iter().zip(&h_log_std).map(|(g, h)| d_logp * g + d_ent * h).collect();
            let d_value = cfg.value_coef * 2.0 * err / n;
            policy.backward(obs, &actor, &critic, &d_output, &d_log_std, d_value, &mut grad);
        }
        (grad, loss)
    });
    let mut iter = partials.into_iter();
    let (mut grad, mut loss) = iter.next().expect("at least one chunk");
    for (g, l) in iter {
        grad.add_assign(&g);
        loss.add(&l);
    }
    loss.total = -loss.surrogate + cfg.value_coef * loss.value_loss - cfg.entropy_coef * loss.entropy;
    (grad, loss)
}

/// Runs `n_epochs` passes of shuffled minibatches over `batch`, updating every
/// trainable parameter of `policy` with `adam`. The frozen reservoir is never
/// touched.
pub fn ppo_update(
    policy: &mut PolicyNet,
    batch: &RolloutBatch,
    cfg: &PpoConfig,
    adam: &mut Adam,
    rng: &mut ChaCha8Rng,
    par: Parallelism,
) -> Result<UpdateStats, TrainError> {
    if batch.advantages.len() != batch.n_envs {
        return Err(TrainError::Shape("advantages have not been computed".into()));
    }
    let mut stats = UpdateStats::default();
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut sum = MinibatchLoss::default();
    let mut grad_norm_sum = 0.0;
    for epoch in 0..cfg.n_epochs {
        order.shuffle(rng);
        for (mb, indices) in order.chunks(cfg.batch_size).enumerate() {
            let (grad, loss) = minibatch_gradient(policy, batch, indices, cfg, par);
            if !loss.total.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, minibatch: mb, detail: format!("{loss:?}") });
            }
            if stats.minibatches == 0 {
                stats.first = loss;
            }
            let mut flat_grad = grad.to_flat();
            let norm = flat_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, minibatch: mb, detail: "gradient norm".into() });
            }
            let coef = cfg.max_grad_norm / (norm + 1e-6);
            if coef < 1.0 {
                flat_grad.iter_mut().for_each(|g| *g *= coef);
            }
            let mut flat = policy.params.to_flat();
            adam.step(&mut flat, &flat_grad);
            policy.params.set_flat(&flat);
            sum.add(&loss);
            grad_norm_sum += norm;
            stats.minibatches += 1;
        }
    }
    let m = stats.minibatches.max(1) as f64;
    stats.policy_loss = -sum.surrogate / m;
    stats.value_loss = sum.value_loss / m;
    stats.entropy = sum.entropy / m;
    stats.approx_kl = sum.approx_kl / m;
    stats.clip_fraction = sum.clip_fraction / m;
    stats.grad_norm = grad_norm_sum / m;
    Ok(stats)
}
