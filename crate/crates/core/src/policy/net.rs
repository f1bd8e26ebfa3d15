use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::distribution::ActionDistribution;
use super::layers::{Affine, Normalizer};
use super::PolicyError;
use crate::envs::ActionSpace;
use crate::reservoir::{ClampConfig, ReservoirModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub critic_hidden: Vec<usize>,
    pub pre_norm: bool,
    pub post_norm: bool,
    pub clamp: ClampConfig,
    pub encoder_gain: f64,
    pub decoder_gain: f64,
    pub critic_gain: f64,
    pub critic_out_gain: f64,
    pub log_std_init: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            critic_hidden: vec![64, 64],
            pre_norm: true,
            post_norm: true,
            clamp: ClampConfig::default(),
            encoder_gain: 1.0,
            decoder_gain: 0.01,
            critic_gain: std::f64::consts::SQRT_2,
            critic_out_gain: 1.0,
            log_std_init: 0.0,
        }
    }
}

/// Every trainable tensor of a policy. The same shape doubles as the gradient
/// buffer; running normalization statistics ride along but are never
/// touched by the optimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub encoder: Affine,
    pub pre_norm: Normalizer,
    pub post_norm: Normalizer,
    pub decoder: Affine,
    pub log_std: Vec<f64>,
    pub critic: Vec<Affine>,
}

impl PolicyParams {
    pub fn zeros_like(&self) -> PolicyParams {
        let mut z = self.clone();
        z.for_each_group_mut(|_, g| g.iter_mut().for_each(|v| *v = 0.0));
        z
    }

    /// Visits trainable groups in a fixed order.
    pub fn for_each_group(&self, mut f: impl FnMut(&str, &[f64])) {
        f("encoder.weight", &self.encoder.weight);
        f("encoder.bias", &self.encoder.bias);
        f("pre_norm.scale", &self.pre_norm.scale);
        f("pre_norm.shift", &self.pre_norm.shift);
        f("post_norm.scale", &self.post_norm.scale);
        f("post_norm.shift", &self.post_norm.shift);
        f("decoder.weight", &self.decoder.weight);
        f("decoder.bias", &self.decoder.bias);
        f("log_std", &self.log_std);
        for (i, l) in self.critic.iter().enumerate() {
            f(&format!("critic.{i}.weight"), &l.weight);
            f(&format!("critic.{i}.bias"), &l.bias);
        }
    }

    pub fn for_each_group_mut(&mut self, mut f: impl FnMut(&str, &mut [f64])) {
        f("encoder.weight", &mut self.encoder.weight);
        f("encoder.bias", &mut self.encoder.bias);
        f("pre_norm.scale", &mut self.pre_norm.scale);
        f("pre_norm.shift", &mut self.pre_norm.shift);
        f("post_norm.scale", &mut self.post_norm.scale);
        f("post_norm.shift", &mut self.post_norm.shift);
        f("decoder.weight", &mut self.decoder.weight);
        f("decoder.bias", &mut self.decoder.bias);
        f("log_std", &mut self.log_std);
        for (i, l) in self.critic.iter_mut().enumerate() {
            f(&format!("critic.{i}.weight"), &mut l.weight);
            f(&format!("critic.{i}.bias"), &mut l.bias);
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.for_each_group(|_, g| out.extend_from_slice(g));
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.for_each_group_mut(|_, g| {
            g.copy_from_slice(&flat[offset..offset + g.len()]);
            offset += g.len();
        });
        debug_assert_eq!(offset, flat.len());
    }

    /// `(name, offset, len)` of every trainable group in flat order.
    pub fn layout(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        let mut offset = 0;
        self.for_each_group(|name, g| {
            out.push((name.to_string(), offset, g.len()));
            offset += g.len();
        });
        out
    }

    /// Elementwise `self += other` over trainable groups.
    pub fn add_assign(&mut self, other: &PolicyParams) {
        let flat = other.to_flat();
        let mut offset = 0;
        self.for_each_group_mut(|_, g| {
            for (a, b) in g.iter_mut().zip(&flat[offset..]) {
                *a += b;
            }
            offset += g.len();
        });
    }
}

/// Intermediate values of one actor forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorTrace {
    pub encoded: Vec<f64>,
    pub pre: Vec<f64>,
    /// Reservoir input after the positive-orthant projection (if any).
    pub reservoir_in: Vec<f64>,
    pub reservoir_out: Vec<f64>,
    pub post: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticTrace {
    /// Activations after each hidden layer's tanh.
    pub hidden: Vec<Vec<f64>>,
    pub value: f64,
}

/// `a = D(post_norm(f(project(pre_norm(E(s))))))` with a critic
/// `V(s) = MLP(E(s))` sharing the encoder.
#[derive(Clone, Debug)]
pub struct PolicyNet {
    pub params: PolicyParams,
    reservoir: Arc<ReservoirModel>,
    obs_dim: usize,
    action_space: ActionSpace,
    config: PolicyConfig,
}

impl PolicyNet {
    pub fn new(reservoir: Arc<ReservoirModel>, obs_dim: usize, action_space: ActionSpace, config: PolicyConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = reservoir.dim();
        let m = action_space.output_dim();
        let encoder = Affine::orthogonal(obs_dim, d, config.encoder_gain, &mut rng);
        let decoder = Affine::orthogonal(d, m, config.decoder_gain, &mut rng);
        let pre_shift = if reservoir.positive_orthant() { reservoir.nominal_state().to_vec() } else { vec![0.0; d] };
        let mut critic = Vec::new();
        let mut width = d;
        for &h in &config.critic_hidden {
            critic.push(Affine::orthogonal(width, h, config.critic_gain, &mut rng));
            width = h;
        }
        critic.push(Affine::orthogonal(width, 1, config.critic_out_gain, &mut rng));
        let log_std = if action_space.is_discrete() { Vec::new() } else { vec![config.log_std_init; m] };
        let params = PolicyParams {
            encoder,
            pre_norm: Normalizer::new(d, config.pre_norm, pre_shift),
            post_norm: Normalizer::new(d, config.post_norm, vec![0.0; d]),
            decoder,
            log_std,
            critic,
        };
        PolicyNet { params, reservoir, obs_dim, action_space, config }
    }

    pub(crate) fn from_parts(
        params: PolicyParams,
        reservoir: Arc<ReservoirModel>,
        obs_dim: usize,
        action_space: ActionSpace,
        config: PolicyConfig,
    ) -> Self {
        PolicyNet { params, reservoir, obs_dim, action_space, config }
    }

    pub fn reservoir(&self) -> &Arc<ReservoirModel> {
        &self.reservoir
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_space(&self) -> ActionSpace {
        self.action_space
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    /// The projection bounds, present only for positive-orthant reservoirs.
    pub fn clamp(&self) -> Option<ClampConfig> {
        self.reservoir.positive_orthant().then_some(self.config.clamp)
    }

    fn check_obs(&self, obs: &[f64]) -> Result<(), PolicyError> {
        if obs.len() != self.obs_dim {
            return Err(PolicyError::ObservationDimension { expected: self.obs_dim, got: obs.len() });
        }
        Ok(())
    }

    pub fn encode(&self, obs: &[f64]) -> Vec<f64> {
        self.params.encoder.apply(obs)
    }

    /// Actor forward pass keeping every intermediate.
    pub fn actor_trace(&self, obs: &[f64]) -> ActorTrace {
        let p = &self.params;
        let d = self.reservoir.dim();
        let encoded = p.encoder.apply(obs);
        let mut pre = vec![0.0; d];
        p.pre_norm.forward(&encoded, &mut pre);
        let reservoir_in = match self.clamp() {
            Some(c) => pre.iter().map(|v| c.clamp(*v)).collect(),
            None => pre.clone(),
        };
        let mut reservoir_out = vec![0.0; d];
        self.reservoir.eval_into(&reservoir_in, &mut reservoir_out);
        let mut post = vec![0.0; d];
        p.post_norm.forward(&reservoir_out, &mut post);
        let output = p.decoder.apply(&post);
        ActorTrace { encoded, pre, reservoir_in, reservoir_out, post, output }
    }

    pub fn critic_trace(&self, encoded: &[f64]) -> CriticTrace {
        let layers = &self.params.critic;
        let mut hidden = Vec::with_capacity(layers.len() - 1);
        let mut x = encoded.to_vec();
        for l in &layers[..layers.len() - 1] {
            let mut h = l.apply(&x);
            h.iter_mut().for_each(|v| *v = v.tanh());
            hidden.push(h.clone());
            x = h;
        }
        let value = layers[layers.len() - 1].apply(&x)[0];
        CriticTrace { hidden, value }
    }

    pub fn distribution_from_output(&self, output: &[f64]) -> ActionDistribution {
        match self.action_space {
            ActionSpace::Discrete { .. } => ActionDistribution::Categorical { logits: output.to_vec() },
            ActionSpace::Continuous { .. } => {
                ActionDistribution::Gaussian { mean: output.to_vec(), std: self.params.log_std.iter().map(|l| l.exp()).collect() }
            }
        }
    }

    /// Deterministic actor pass using the running normalization statistics.
    pub fn forward_actor(&self, obs: &[f64]) -> Result<ActionDistribution, PolicyError> {
        self.check_obs(obs)?;
        let t = self.actor_trace(obs);
        if let Some(stage) = t.first_non_finite() {
            return Err(PolicyError::NonFinite { stage });
        }
        Ok(self.distribution_from_output(&t.output))
    }

    pub fn forward_critic(&self, obs: &[f64]) -> Result<f64, PolicyError> {
        self.check_obs(obs)?;
        let v = self.critic_trace(&self.encode(obs)).value;
        if !v.is_finite() {
            return Err(PolicyError::NonFinite { stage: "critic" });
        }
        Ok(v)
    }

    /// Backpropagates output-side gradients through both heads into `grad`.
    ///
    /// `d_output` is dL/d(decoder output), `d_log_std` is dL/d(log_std) and
    /// `d_value` is dL/dV. The projection is straight-through: its backward
    /// pass is the identity.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        obs: &[f64],
        actor: &ActorTrace,
        critic: &CriticTrace,
        d_output: &[f64],
        d_log_std: &[f64],
        d_value: f64,
        grad: &mut PolicyParams,
    ) {
        let p = &self.params;
        let d = self.reservoir.dim();
        let mut d_post = vec![0.0; d];
        p.decoder.backward(&actor.post, d_output, &mut grad.decoder, Some(&mut d_post));
        let mut d_res_out = vec![0.0; d];
        p.post_norm.backward(&actor.reservoir_out, &d_post, &mut grad.post_norm, &mut d_res_out);
        let mut d_res_in = vec![0.0; d];
        self.reservoir.vjp_into(&actor.reservoir_in, &d_res_out, &mut d_res_in);
        let mut d_encoded = vec![0.0; d];
        p.pre_norm.backward(&actor.encoded, &d_res_in, &mut grad.pre_norm, &mut d_encoded);

        if d_value != 0.0 {
            let layers = &p.critic;
            let n = layers.len();
            let mut upstream = vec![d_value];
            for i in (0..n).rev() {
                let input = if i == 0 { &actor.encoded } else { &critic.hidden[i - 1] };
                let mut d_in = vec![0.0; layers[i].in_dim];
                layers[i].backward(input, &upstream, &mut grad.critic[i], Some(&mut d_in));
                if i > 0 {
                    for (g, h) in d_in.iter_mut().zip(&critic.hidden[i - 1]) {
                        *g *= 1.0 - h * h;
                    }
                }
                upstream = d_in;
            }
            for (a, b) in d_encoded.iter_mut().zip(&upstream) {
                *a += b;
            }
        }
        p.encoder.backward(obs, &d_encoded, &mut grad.encoder, None);
        for (g, v) in grad.log_std.iter_mut().zip(d_log_std) {
            *g += v;
        }
    }

    /// Refreshes both normalizers' running statistics from a batch of
    /// observations: pre-norm first, then post-norm under the updated pre-norm.
    pub fn refresh_norm_stats(&mut self, observations: &[Vec<f64>]) {
        let m = self.params.pre_norm.momentum;
        self.refresh_norm_stats_with(observations, m);
    }

    /// Like [`PolicyNet::refresh_norm_stats`] with an explicit momentum.
    pub fn refresh_norm_stats_with(&mut self, observations: &[Vec<f64>], momentum: f64) {
        let encoded: Vec<Vec<f64>> = observations.iter().map(|o| self.encode(o)).collect();
        self.params.pre_norm.update_stats_with(&encoded, momentum);
        if self.params.post_norm.enabled {
            let outs: Vec<Vec<f64>> = observations.iter().map(|o| self.actor_trace(o).reservoir_out).collect();
            self.params.post_norm.update_stats_with(&outs, momentum);
        }
    }
}

impl ActorTrace {
    fn first_non_finite(&self) -> Option<&'static str> {
        let stages: [(&'static str, &Vec<f64>); 5] = [
            ("encoder", &self.encoded),
            ("pre_norm", &self.pre),
            ("reservoir", &self.reservoir_out),
            ("post_norm", &self.post),
            ("decoder", &self.output),
        ];
        stages.into_iter().find(|(_, v)| v.iter().any(|x| !x.is_finite())).map(|(s, _)| s)
    }
}
