use std::sync::Arc;

use super::*;
use crate::envs::ActionSpace;
use crate::reservoir::{Registry, ReservoirModel};

fn cartpole_space() -> ActionSpace {
    ActionSpace::Discrete { n: 2 }
}

fn pendulum_space() -> ActionSpace {
    ActionSpace::Continuous { dim: 1, low: -2.0, high: 2.0 }
}

fn net(model: ReservoirModel, space: ActionSpace, obs_dim: usize, seed: u64) -> PolicyNet {
    PolicyNet::new(Arc::new(model), obs_dim, space, PolicyConfig::default(), seed)
}

#[test]
fn same_seed_same_parameters() {
    let a = net(ReservoirModel::mlp(8, 3), cartpole_space(), 4, 11);
    let b = net(ReservoirModel::mlp(8, 3), cartpole_space(), 4, 11);
    let c = net(ReservoirModel::mlp(8, 3), cartpole_space(), 4, 12);
    assert_eq!(a.params, b.params);
    assert_ne!(a.params, c.params);
}

#[test]
fn identity_policy_without_norms_is_affine() {
    let cfg = PolicyConfig { pre_norm: false, post_norm: false, ..PolicyConfig::default() };
    let p = PolicyNet::new(Arc::new(ReservoirModel::identity(6)), 3, pendulum_space(), cfg, 5);
    let f = |x: &[f64]| match p.forward_actor(x).unwrap() {
        ActionDistribution::Gaussian { mean, .. } => mean[0],
        _ => unreachable!(),
    };
    let x = [0.3, -1.2, 0.7];
    let y = [-0.5, 0.4, 2.0];
    let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.25 * a + 0.75 * b).collect();
    assert!((f(&mix) - (0.25 * f(&x) + 0.75 * f(&y))).abs() < 1e-12);
}

#[test]
fn lorenz_feeds_its_vector_field_to_the_decoder() {
    let registry = Registry::desk();
    let cfg = PolicyConfig { pre_norm: false, post_norm: false, ..PolicyConfig::default() };
    let mut p = PolicyNet::new(registry.get("lorenz").unwrap(), 4, cartpole_space(), cfg, 0);
    p.params.encoder.weight.iter_mut().for_each(|w| *w = 0.0);
    p.params.encoder.bias = vec![1.0, 1.0, 1.0];
    let t = p.actor_trace(&[0.0; 4]);
    let expected = [0.0, 26.0, -5.0 / 3.0];
    for (a, b) in t.post.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{:?}", t.post);
    }
}

#[test]
fn positive_orthant_inputs_are_projected() {
    let registry = Registry::desk();
    let mut p = PolicyNet::new(registry.get("toggle_switch").unwrap(), 4, cartpole_space(), PolicyConfig::default(), 0);
    p.params.pre_norm.shift = vec![-5.0, 5000.0];
    let t = p.actor_trace(&[0.0; 4]);
    assert_eq!(t.reservoir_in, vec![1e-6, 1e3]);
    assert!(p.forward_actor(&[0.1, 0.2, 0.3, 0.4]).is_ok());
}

#[test]
fn critic_ignores_actor_only_parameters() {
    let mut p = net(ReservoirModel::mlp(8, 3), cartpole_space(), 4, 1);
    let obs = [0.1, -0.2, 0.03, 0.4];
    let v0 = p.forward_critic(&obs).unwrap();
    p.params.decoder.weight.iter_mut().for_each(|w| *w += 0.5);
    p.params.post_norm.shift.iter_mut().for_each(|w| *w += 0.5);
    assert_eq!(v0, p.forward_critic(&obs).unwrap());
}

#[test]
fn zeroed_critic_output_gives_zero_value() {
    let mut p = net(ReservoirModel::identity(8), cartpole_space(), 4, 1);
    let last = p.params.critic.last_mut().unwrap();
    last.weight.iter_mut().for_each(|w| *w = 0.0);
    last.bias = vec![0.0];
    assert_eq!(p.forward_critic(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.0);
}

#[test]
fn wrong_observation_length_is_rejected() {
    let p = net(ReservoirModel::identity(8), cartpole_space(), 4, 1);
    assert!(matches!(p.forward_actor(&[0.0; 3]), Err(PolicyError::ObservationDimension { .. })));
    assert!(p.forward_critic(&[0.0; 5]).is_err());
}

#[test]
fn flat_round_trip_and_layout() {
    let p = net(ReservoirModel::mlp(5, 3), pendulum_space(), 3, 1);
    let flat = p.params.to_flat();
    let layout = p.params.layout();
    let (_, off, len) = layout.last().unwrap();
    assert_eq!(off + len, flat.len());
    let mut q = p.params.zeros_like();
    assert!(q.to_flat().iter().all(|v| *v == 0.0));
    q.set_flat(&flat);
    assert_eq!(q.to_flat(), flat);
    assert_eq!(q.pre_norm.running_var, p.params.pre_norm.running_var);
}

#[test]
fn backward_matches_finite_differences_on_a_smooth_model() {
    let mut p = net(ReservoirModel::mlp(5, 3), pendulum_space(), 3, 2);
    p.params.decoder.weight.iter_mut().for_each(|w| *w *= 50.0);
    let obs = [0.2, -0.7, 0.4];
    let loss = |p: &PolicyNet| {
        let t = p.actor_trace(&obs);
        let v = p.critic_trace(&t.encoded).value;
        1.3 * t.output[0] + 0.5 * v * v
    };
    let t = p.actor_trace(&obs);
    let c = p.critic_trace(&t.encoded);
    let mut grad = p.params.zeros_like();
    p.backward(&obs, &t, &c, &[1.3], &[0.0], c.value, &mut grad);
    let analytic = grad.to_flat();
    let base = p.params.to_flat();
    let h = 1e-6;
    for i in 0..base.len() {
        let mut q = p.clone();
        let mut f = base.clone();
        f[i] += h;
        q.params.set_flat(&f);
        let up = loss(&q);
        f[i] -= 2.0 * h;
        q.params.set_flat(&f);
        let down = loss(&q);
        let num = (up - down) / (2.0 * h);
        assert!((num - analytic[i]).abs() < 1e-6 * (1.0 + num.abs()), "param {i}: {num} vs {}", analytic[i]);
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let registry = Registry::desk_with_control_dim(8);
    let p = PolicyNet::new(registry.get("mlp").unwrap(), 4, cartpole_space(), PolicyConfig::default(), 9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    Checkpoint::from_policy(&p, "CartPole-v1", 9, 1000, Some(500.0)).save(&path).unwrap();
    let q = Checkpoint::load(&path).unwrap().into_policy(&registry).unwrap();
    assert_eq!(p.params, q.params);
    let obs = [0.01, 0.2, -0.03, 0.1];
    assert_eq!(p.forward_actor(&obs).unwrap(), q.forward_actor(&obs).unwrap());

    let other = Registry::desk_with_control_dim(9);
    assert!(Checkpoint::load(&path).unwrap().into_policy(&other).is_err());
}
