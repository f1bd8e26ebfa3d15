//! Reference computations shared by the oracle, gradient and acceptance
//! targets.
#![allow(dead_code)]

use langgame_core::envs::ActionSpace;
use langgame_core::policy::{PolicyConfig, PolicyNet};
use langgame_core::reservoir::{integrate_trajectory, ClampConfig, Registry};
use langgame_core::trainer::StepFlag;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-sided sign-test p from all `2^n` sign patterns.
pub fn sign_p_by_enumeration(k: u64, n: u32) -> f64 {
    let total = 1u64 << n;
    let (mut at_most, mut at_least) = (0u64, 0u64);
    for mask in 0..total {
        let plus = mask.count_ones() as u64;
        at_most += (plus <= k) as u64;
        at_least += (plus >= k) as u64;
    }
    (2.0 * at_most.min(at_least) as f64 / total as f64).min(1.0)
}

/// Two-sided p by walking every way of choosing the top half of 14 items.
pub fn fisher_by_subsets(members: u32, overlap: u32) -> f64 {
    let g = 14u32;
    let member_mask = (1u32 << members) - 1;
    let mut by_overlap = [0u64; 15];
    for top in 0u32..(1 << g) {
        if top.count_ones() == 7 {
            by_overlap[(top & member_mask).count_ones() as usize] += 1;
        }
    }
    let observed = by_overlap[overlap as usize];
    let total: u64 = by_overlap.iter().sum();
    let tail: u64 = by_overlap.iter().filter(|w| **w > 0 && **w <= observed).sum();
    tail as f64 / total as f64
}

/// q_i = min over all j with p_j >= p_i of m * p_j / rank_j, capped at 1.
pub fn bh_by_definition(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    p.iter()
        .map(|&pi| {
            p.iter()
                .filter(|&&pj| pj >= pi)
                .map(|&pj| {
                    let rank = p.iter().filter(|&&x| x <= pj).count();
                    m as f64 * pj / rank as f64
                })
                .fold(1.0f64, f64::min)
        })
        .collect()
}

/// Discounted return from `t` by walking forward to the end of the episode
/// or segment.
pub fn brute_force_return(rewards: &[f64], flags: &[StepFlag], next_value: f64, gamma: f64, t: usize) -> f64 {
    let n = rewards.len();
    let mut g = 0.0;
    let mut discount = 1.0;
    let mut u = t;
    loop {
        g += discount * rewards[u];
        discount *= gamma;
        match flags[u] {
            StepFlag::Terminated => return g,
            StepFlag::Truncated { bootstrap } => return g + discount * bootstrap,
            StepFlag::Continue if u + 1 == n => return g + discount * next_value,
            StepFlag::Continue => u += 1,
        }
    }
}

/// A random GAE input: rewards, values, flags and the bootstrap value.
pub fn random_trace(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<StepFlag>, f64) {
    let n = rng.random_range(1..60);
    let rewards = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let values = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let flags = (0..n)
        .map(|_| match rng.random_range(0..10) {
            0 => StepFlag::Terminated,
            1 => StepFlag::Truncated { bootstrap: rng.random_range(-5.0..5.0) },
            _ => StepFlag::Continue,
        })
        .collect();
    (rewards, values, flags, rng.random_range(-5.0..5.0))
}

pub fn endpoint_error(id: &str, x0: &[f64], horizon: f64, dt: f64) -> f64 {
    let registry = Registry::desk();
    let model = registry.get(id).unwrap();
    let clamp = ClampConfig::default();
    let run = |h: f64| integrate_trajectory(&model, x0, h, (horizon / h).round() as usize, &clamp).unwrap().pop().unwrap();
    let reference = run(dt / 64.0);
    let coarse = run(dt);
    coarse.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Step-halving error ratio of RK4 on `id` from `x0` over `horizon`.
pub fn halving_ratio(id: &str, x0: &[f64], horizon: f64, dt: f64) -> f64 {
    endpoint_error(id, x0, horizon, dt) / endpoint_error(id, x0, horizon, dt / 2.0)
}

// Finite-difference gradient checks. The projection onto the positive
// orthant is straight-through, so the reference forward pass freezes the
// projection offset `clamp(pre) - pre` at the unperturbed point and
// differentiates `pre + offset` instead.

pub const INSTANCES: u64 = 20;
const STEP: f64 = 1e-4;
const REL_TOL: f64 = 1e-3;

struct Cotangent {
    output: Vec<f64>,
    log_std: Vec<f64>,
    value: f64,
}

fn loss(p: &PolicyNet, obs: &[f64], offset: &[f64], ct: &Cotangent) -> f64 {
    let q = &p.params;
    let d = p.reservoir().dim();
    let encoded = q.encoder.apply(obs);
    let mut pre = vec![0.0; d];
    q.pre_norm.forward(&encoded, &mut pre);
    let input: Vec<f64> = pre.iter().zip(offset).map(|(a, b)| a + b).collect();
    let mut out = vec![0.0; d];
    p.reservoir().eval_into(&input, &mut out);
    let mut post = vec![0.0; d];
    q.post_norm.forward(&out, &mut post);
    let output = q.decoder.apply(&post);
    let value = p.critic_trace(&encoded).value;
    output.iter().zip(&ct.output).map(|(a, b)| a * b).sum::<f64>()
        + q.log_std.iter().zip(&ct.log_std).map(|(a, b)| a * b).sum::<f64>()
        + ct.value * value
}

fn instance(registry: &Registry, id: &str, k: u64) -> (PolicyNet, Vec<f64>, Cotangent) {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 * k + id.len() as u64);
    let (obs_dim, space) = if k.is_multiple_of(2) {
        (4, ActionSpace::Discrete { n: 2 })
    } else {
        (3, ActionSpace::Continuous { dim: 1, low: -2.0, high: 2.0 })
    };
    let config = PolicyConfig {
        critic_hidden: vec![6, 5],
        clamp: ClampConfig::new(1e-2, 1e3).unwrap(),
        encoder_gain: 1.5,
        ..PolicyConfig::default()
    };
    let mut p = PolicyNet::new(registry.get(id).unwrap(), obs_dim, space, config, k);
    let q = &mut p.params;
    q.decoder.weight.iter_mut().for_each(|w| *w *= 50.0);
    q.log_std.iter_mut().for_each(|v| *v = rng.random_range(-1.0..0.5));
    for n in [&mut q.pre_norm, &mut q.post_norm] {
        for i in 0..n.dim() {
            n.running_mean[i] = rng.random_range(-0.3..0.3);
            n.running_var[i] = rng.random_range(0.5..2.0);
            n.scale[i] = rng.random_range(0.5..1.5);
        }
    }
    for l in q.critic.iter_mut() {
        l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.2..0.2));
    }
    let obs: Vec<f64> = (0..obs_dim).map(|_| rng.random_range(-1.5..1.5)).collect();
    let ct = Cotangent {
        output: (0..space.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        log_std: (0..p.params.log_std.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        value: rng.random_range(-1.0..1.0),
    };
    (p, obs, ct)
}

/// Returns the number of clamped reservoir inputs seen across instances.
pub fn check_reservoir(registry: &Registry, id: &str) -> Result<usize, String> {
    let mut clamped = 0;
    for k in 0..INSTANCES {
        let (p, obs, ct) = instance(registry, id, k);
        let actor = p.actor_trace(&obs);
        let critic = p.critic_trace(&actor.encoded);
        let offset: Vec<f64> = actor.reservoir_in.iter().zip(&actor.pre).map(|(a, b)| a - b).collect();
        clamped += offset.iter().filter(|o| **o != 0.0).count();
        let mut grad = p.params.zeros_like();
        p.backward(&obs, &actor, &critic, &ct.output, &ct.log_std, ct.value, &mut grad);
        let analytic = grad.to_flat();
        let base = p.params.to_flat();
        let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let mut probe = p.clone();
        for i in 0..base.len() {
            let mut f = base.clone();
            f[i] = base[i] + STEP;
            probe.params.set_flat(&f);
            let up = loss(&probe, &obs, &offset, &ct);
            f[i] = base[i] - STEP;
            probe.params.set_flat(&f);
            let down = loss(&probe, &obs, &offset, &ct);
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic[i];
            let err = (numeric - a).abs();
            let denom = a.abs().max(numeric.abs()).max(1e-6 * scale).max(1e-9);
            if err / denom > REL_TOL {
                return Err(format!("{id} instance {k} param {i}: analytic {a} numeric {numeric}"));
            }
        }
    }
    Ok(clamped)
}
