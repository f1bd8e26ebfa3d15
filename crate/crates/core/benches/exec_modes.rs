//! Sequential versus rayon execution of the data-parallel hot loops.

use std::collections::{BTreeMap, BTreeSet};
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use langgame_core::analysis::{action_matrix, fisher_cells, similarity_matrix, RewardEntry, RewardTable, Taxonomy};
use langgame_core::envs::ActionSpace;
use langgame_core::policy::{PolicyConfig, PolicyNet};
use langgame_core::reservoir::{PropertyTag, Registry};
use langgame_core::trainer::{collect_rollouts, minibatch_gradient, PpoConfig, RewardNormalizer, VecEnv};
use langgame_core::Parallelism;

fn cartpole_policy(registry: &Registry, id: &str, seed: u64) -> PolicyNet {
    PolicyNet::new(registry.get(id).unwrap(), 4, ActionSpace::Discrete { n: 2 }, PolicyConfig::default(), seed)
}

fn rollouts(c: &mut Criterion) {
    let registry = Registry::desk();
    let mut group = c.benchmark_group("collect_rollouts");
    group.sample_size(10);
    for id in ["mlp", "repressilator"] {
        let policy = cartpole_policy(&registry, id, 0);
        for par in Parallelism::available() {
            group.bench_with_input(BenchmarkId::new(par.name(), id), &par, |b, &par| {
                b.iter(|| {
                    let mut envs = VecEnv::new("CartPole-v1", 16, 0).unwrap();
                    let mut norm = RewardNormalizer::new(16, 0.99, 10.0, true);
                    black_box(collect_rollouts(&policy, &mut envs, &mut norm, 64, par).unwrap())
                })
            });
        }
    }
    group.finish();
}

fn gradients(c: &mut Criterion) {
    let registry = Registry::desk();
    let policy = cartpole_policy(&registry, "toggle_switch", 1);
    let cfg = PpoConfig::default();
    let mut envs = VecEnv::new("CartPole-v1", 16, 1).unwrap();
    let mut norm = RewardNormalizer::new(16, cfg.gamma, cfg.reward_clip, true);
    let mut batch = collect_rollouts(&policy, &mut envs, &mut norm, 64, Parallelism::Sequential).unwrap();
    batch.compute_advantages(cfg.gamma, cfg.gae_lambda).unwrap();
    let indices: Vec<usize> = (0..cfg.batch_size).map(|i| (i * 7) % batch.len()).collect();
    let mut group = c.benchmark_group("minibatch_gradient");
    for par in Parallelism::available() {
        group.bench_function(par.name(), |b| b.iter(|| black_box(minibatch_gradient(&policy, &batch, &indices, &cfg, par))));
    }
    group.finish();
}

fn similarity(c: &mut Criterion) {
    let registry = Registry::desk();
    let ids = ["mlp", "identity", "lorenz", "toggle_switch", "repressilator", "goodwin_circadian"];
    let matrices: Vec<_> = ids
        .iter()
        .flat_map(|id| (0..4).map(move |s| (id, s)))
        .map(|(id, s)| action_matrix(&format!("{id}/{s}"), &cartpole_policy(&registry, id, s), "CartPole-v1", 10_000).unwrap())
        .collect();
    let mut group = c.benchmark_group("similarity_matrix");
    for par in Parallelism::available() {
        group.bench_function(par.name(), |b| b.iter(|| black_box(similarity_matrix(&matrices, par).unwrap())));
    }
    group.finish();
}

fn fisher(c: &mut Criterion) {
    let grns: Vec<String> = (0..14).map(|i| format!("grn_{i:02}")).collect();
    let mut properties: BTreeMap<PropertyTag, BTreeSet<String>> = BTreeMap::new();
    for (p, tag) in PropertyTag::ALL.iter().enumerate() {
        let members = grns.iter().enumerate().filter(|(i, _)| (i * 5 + p * 3) % 7 < 3).map(|(_, g)| g.clone()).collect();
        properties.insert(*tag, members);
    }
    let taxonomy = Taxonomy { grns: grns.iter().cloned().collect(), properties };
    let mut entries = Vec::new();
    for (e, env) in ["CartPole-v1", "Acrobot-v1", "MountainCarContinuous-v0", "Pendulum-v1"].iter().enumerate() {
        for (i, g) in grns.iter().enumerate() {
            for seed in 0..3u64 {
                let final_reward = ((i * 37 + e * 11 + seed as usize * 5) % 101) as f64;
                entries.push(RewardEntry { reservoir_id: g.clone(), env_name: env.to_string(), seed, final_reward });
            }
        }
    }
    let table = RewardTable::new(entries).unwrap();
    let mut group = c.benchmark_group("fisher_cells");
    for par in Parallelism::available() {
        group.bench_function(par.name(), |b| b.iter(|| black_box(fisher_cells(&table, &taxonomy, false, par).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, rollouts, gradients, similarity, fisher);
criterion_main!(benches);
