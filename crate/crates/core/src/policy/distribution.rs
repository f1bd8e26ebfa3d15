use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::envs::Action;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionDistribution {
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    Categorical { logits: Vec<f64> },
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl ActionDistribution {
    pub fn probs(&self) -> Option<Vec<f64>> {
        match self {
            ActionDistribution::Categorical { logits } => {
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                Some(exps.into_iter().map(|e| e / total).collect())
            }
            ActionDistribution::Gaussian { .. } => None,
        }
    }

    /// Log density (Gaussian) or log mass (categorical) at `action`.
    pub fn log_prob(&self, action: &Action) -> f64 {
        match (self, action) {
            (ActionDistribution::Gaussian { mean, std }, Action::Continuous(a)) => a
                .iter()
                .zip(mean.iter().zip(std))
                .map(|(x, (m, s))| {
                    let z = (x - m) / s;
                    -0.5 * z * z - s.ln() - HALF_LN_2PI
                })
                .sum(),
            (ActionDistribution::Categorical { logits }, Action::Discrete(i)) => logits[*i] - log_sum_exp(logits),
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            ActionDistribution::Gaussian { std, .. } => std.iter().map(|s| s.ln() + 0.5 + HALF_LN_2PI).sum(),
            ActionDistribution::Categorical { logits } => {
                let lse = log_sum_exp(logits);
                -logits.iter().map(|l| (l - lse).exp() * (l - lse)).sum::<f64>()
            }
        }
    }

    /// Gaussian mean or the arg-max logit (lowest index on ties).
    pub fn mode(&self) -> Action {
        match self {
            ActionDistribution::Gaussian { mean, .. } => Action::Continuous(mean.clone()),
            ActionDistribution::Categorical { logits } => {
                let mut best = 0;
                for (i, l) in logits.iter().enumerate() {
                    if *l > logits[best] {
                        best = i;
                    }
                }
                Action::Discrete(best)
            }
        }
    }

    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> Action {
        match self {
            ActionDistribution::Gaussian { mean, std } => {
                Action::Continuous(mean.iter().zip(std).map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal)).collect())
            }
            ActionDistribution::Categorical { .. } => {
                let probs = self.probs().expect("categorical");
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Action::Discrete(i);
                    }
                }
                Action::Discrete(probs.len() - 1)
            }
        }
    }
}

/// Seeded draw returning the action and its exact log-probability.
pub fn sample_action(dist: &ActionDistribution, seed: u64) -> (Action, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let action = dist.sample_with(&mut rng);
    let lp = dist.log_prob(&action);
    (action, lp)
}
