use serde::{Deserialize, Serialize};

/// Streaming mean and (population) variance, merged batch by batch with the
/// parallel-variance formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningMeanStd {
    pub mean: f64,
    pub var: f64,
    pub count: f64,
}

impl Default for RunningMeanStd {
    fn default() -> Self {
        RunningMeanStd { mean: 0.0, var: 1.0, count: 0.0 }
    }
}

impl RunningMeanStd {
    pub fn update(&mut self, batch: &[f64]) {
        if batch.is_empty() {
            return;
        }
        let n = batch.len() as f64;
        let mean = batch.iter().sum::<f64>() / n;
        let var = batch.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        self.merge(mean, var, n);
    }

    pub fn merge(&mut self, batch_mean: f64, batch_var: f64, batch_count: f64) {
        if self.count == 0.0 {
            self.mean = batch_mean;
            self.var = batch_var;
            self.count = batch_count;
            return;
        }
        let total = self.count + batch_count;
        let delta = batch_mean - self.mean;
        let m2 = self.var * self.count + batch_var * batch_count + delta * delta * self.count * batch_count / total;
        self.mean += delta * batch_count / total;
        self.var = (m2 / total).max(0.0);
        self.count = total;
    }
}

/// Scales rewards by the running standard deviation of the discounted return
/// of each environment, then clips.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardNormalizer {
    pub enabled: bool,
    pub gamma: f64,
    pub clip: f64,
    pub epsilon: f64,
    pub stats: RunningMeanStd,
    returns: Vec<f64>,
}

impl RewardNormalizer {
    pub fn new(n_envs: usize, gamma: f64, clip: f64, enabled: bool) -> Self {
        RewardNormalizer { enabled, gamma, clip, epsilon: 1e-8, stats: RunningMeanStd::default(), returns: vec![0.0; n_envs] }
    }

    /// Normalizes one synchronous step across all environments. `dones[i]`
    /// resets environment `i`'s return accumulator after its reward is used.
    pub fn step(&mut self, rewards: &[f64], dones: &[bool]) -> Vec<f64> {
        debug_assert_eq!(rewards.len(), self.returns.len());
        let out = if self.enabled {
            for (ret, r) in self.returns.iter_mut().zip(rewards) {
                *ret = *ret * self.gamma + r;
            }
            self.stats.update(&self.returns);
            let scale = (self.stats.var + self.epsilon).sqrt();
            rewards.iter().map(|r| (r / scale).clamp(-self.clip, self.clip)).collect()
        } else {
            rewards.iter().map(|r| r.clamp(-self.clip, self.clip)).collect()
        };
        for (ret, done) in self.returns.iter_mut().zip(dones) {
            if *done {
                *ret = 0.0;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn streaming_matches_single_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..4096).map(|_| rng.random_range(-3.0..7.0)).collect();
        let mut rms = RunningMeanStd::default();
        for chunk in data.chunks(16) {
            rms.update(chunk);
        }
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(((rms.mean - mean) / mean).abs() < 1e-6);
        assert!(((rms.var - var) / var).abs() < 1e-6);
        assert_eq!(rms.count, n);
    }

    #[test]
    fn disabled_normalizer_only_clips() {
        let mut n = RewardNormalizer::new(3, 0.99, 10.0, false);
        assert_eq!(n.step(&[1.0, -25.0, 11.0], &[false; 3]), vec![1.0, -10.0, 10.0]);
    }

    #[test]
    fn done_resets_the_return_accumulator() {
        let mut n = RewardNormalizer::new(2, 0.5, 10.0, true);
        n.step(&[1.0, 1.0], &[true, false]);
        assert_eq!(n.returns, vec![0.0, 1.0]);
        n.step(&[1.0, 1.0], &[false, false]);
        assert_eq!(n.returns, vec![1.0, 1.5]);
    }

    #[test]
    fn normalized_rewards_stay_clipped() {
        let mut n = RewardNormalizer::new(1, 0.99, 10.0, true);
        for _ in 0..50 {
            n.step(&[0.0], &[false]);
        }
        let out = n.step(&[1e6], &[false]);
        assert!(out[0] <= 10.0);
    }
}
