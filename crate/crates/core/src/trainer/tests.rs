use super::*;
use crate::reservoir::Registry;
use crate::Parallelism;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config() -> PpoConfig {
    PpoConfig {
        n_envs: 4,
        n_steps: 64,
        batch_size: 64,
        n_epochs: 2,
        total_steps: 512,
        eval_interval: 256,
        eval_episodes: 2,
        final_eval_episodes: 2,
        ..PpoConfig::default()
    }
}

fn small_registry() -> Registry {
    Registry::desk_with_control_dim(8)
}

fn rollout(par: Parallelism, normalize: bool) -> RolloutBatch {
    let registry = small_registry();
    let policy =
        crate::policy::PolicyNet::new(registry.get("mlp").unwrap(), 4, crate::envs::ActionSpace::Discrete { n: 2 }, Default::default(), 3);
    let mut envs = VecEnv::new("CartPole-v1", 4, 5).unwrap();
    let mut norm = RewardNormalizer::new(4, 0.99, 10.0, normalize);
    collect_rollouts(&policy, &mut envs, &mut norm, 100, par).unwrap()
}

#[test]
fn rollout_shapes_and_step_accounting() {
    let b = rollout(Parallelism::default(), true);
    assert_eq!(b.observations.len(), 4);
    assert!(b.observations.iter().all(|o| o.len() == 100 && o.iter().all(|x| x.len() == 4)));
    assert_eq!(b.flags[3].len(), 100);
    assert!(!b.episodes.is_empty());
    assert!(b.episodes.windows(2).all(|w| w[0].step <= w[1].step));
    assert!(b.episodes.iter().all(|e| e.step <= 400));
}

#[test]
fn rollouts_are_deterministic_across_strategies() {
    let reference = rollout(Parallelism::Sequential, true);
    for p in Parallelism::available() {
        assert_eq!(rollout(p, true), reference, "{}", p.name());
    }
}

#[test]
fn disabled_normalizer_passes_rewards_through() {
    let b = rollout(Parallelism::default(), false);
    assert_eq!(b.rewards, b.raw_rewards);
}

#[test]
fn first_minibatch_has_unit_ratio() {
    let registry = small_registry();
    let cfg = small_config();
    let mut policy = crate::policy::PolicyNet::new(
        registry.get("identity").unwrap(),
        4,
        crate::envs::ActionSpace::Discrete { n: 2 },
        cfg.policy.clone(),
        1,
    );
    let mut envs = VecEnv::new("CartPole-v1", cfg.n_envs, 2).unwrap();
    let mut norm = RewardNormalizer::new(cfg.n_envs, cfg.gamma, cfg.reward_clip, true);
    let mut batch = collect_rollouts(&policy, &mut envs, &mut norm, cfg.n_steps, Parallelism::default()).unwrap();
    batch.compute_advantages(cfg.gamma, cfg.gae_lambda).unwrap();
    let indices: Vec<usize> = (0..cfg.batch_size).collect();
    let (_, loss) = minibatch_gradient(&policy, &batch, &indices, &cfg, Parallelism::default());
    assert_eq!(loss.approx_kl, 0.0);
    assert_eq!(loss.clip_fraction, 0.0);
    assert!((loss.surrogate - loss.mean_advantage).abs() < 1e-12);

    let mut adam = Adam::new(policy.params.to_flat().len(), cfg.lr, cfg.adam_eps);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let before = policy.reservoir().checksum();
    let stats = ppo_update(&mut policy, &batch, &cfg, &mut adam, &mut rng, Parallelism::default()).unwrap();
    assert_eq!(stats.minibatches, cfg.n_epochs * cfg.n_envs * cfg.n_steps / cfg.batch_size);
    assert!((stats.first.surrogate - stats.first.mean_advantage).abs() < 1e-12);
    assert_eq!(before, policy.reservoir().checksum());
}

#[test]
fn clipped_surrogate_never_exceeds_unclipped() {
    let registry = small_registry();
    let cfg = small_config();
    let mut policy =
        crate::policy::PolicyNet::new(registry.get("mlp").unwrap(), 4, crate::envs::ActionSpace::Discrete { n: 2 }, cfg.policy.clone(), 1);
    let mut envs = VecEnv::new("CartPole-v1", cfg.n_envs, 2).unwrap();
    let mut norm = RewardNormalizer::new(cfg.n_envs, cfg.gamma, cfg.reward_clip, true);
    let mut batch = collect_rollouts(&policy, &mut envs, &mut norm, cfg.n_steps, Parallelism::default()).unwrap();
    batch.compute_advantages(cfg.gamma, cfg.gae_lambda).unwrap();
    policy.params.decoder.weight.iter_mut().enumerate().for_each(|(i, w)| *w += 0.3 * (i as f64).sin());
    for chunk in (0..batch.len()).collect::<Vec<_>>().chunks(32) {
        let (_, loss) = minibatch_gradient(&policy, &batch, chunk, &cfg, Parallelism::default());
        assert!(loss.surrogate <= loss.unclipped_surrogate + 1e-12);
    }
}

#[test]
fn zero_advantages_leave_only_value_gradient_on_the_actor_head() {
    let registry = small_registry();
    let cfg = small_config();
    let policy =
        crate::policy::PolicyNet::new(registry.get("mlp").unwrap(), 4, crate::envs::ActionSpace::Discrete { n: 2 }, cfg.policy.clone(), 1);
    let mut envs = VecEnv::new("CartPole-v1", cfg.n_envs, 2).unwrap();
    let mut norm = RewardNormalizer::new(cfg.n_envs, cfg.gamma, cfg.reward_clip, true);
    let mut batch = collect_rollouts(&policy, &mut envs, &mut norm, cfg.n_steps, Parallelism::default()).unwrap();
    batch.compute_advantages(cfg.gamma, cfg.gae_lambda).unwrap();
    batch.advantages.iter_mut().flatten().for_each(|a| *a = 0.0);
    let (grad, loss) = minibatch_gradient(&policy, &batch, &(0..64).collect::<Vec<_>>(), &cfg, Parallelism::default());
    assert_eq!(loss.surrogate, 0.0);
    assert!(grad.decoder.weight.iter().chain(&grad.decoder.bias).all(|g| *g == 0.0));
    assert!(grad.critic.iter().any(|l| l.weight.iter().any(|g| *g != 0.0)));
}

#[test]
fn zero_budget_writes_an_initial_checkpoint() {
    let registry = small_registry();
    let dir = tempfile::tempdir().unwrap();
    let cfg = PpoConfig { total_steps: 0, ..small_config() };
    let job = TrainJob {
        registry: &registry,
        reservoir_id: "identity",
        env_name: "CartPole-v1",
        seed: 0,
        config: &cfg,
        out: Some(dir.path()),
        parallelism: Parallelism::default(),
    };
    let out = train(&job).unwrap();
    assert_eq!(out.steps, 0);
    assert!(out.updates.is_empty());
    let run = run_dir(dir.path(), "identity", "CartPole-v1", 0);
    assert!(run.join("checkpoint_0.json").exists());
    assert!(run.join(CHECKPOINT_FILE).exists());
    let header = std::fs::read_to_string(run.join(METRICS_FILE)).unwrap();
    assert_eq!(header.trim(), "step,episode_reward,episode_length,loss_policy,loss_value,entropy");
}

#[test]
fn identical_seeds_give_identical_metrics() {
    let registry = small_registry();
    let cfg = small_config();
    let read = |par: Parallelism| {
        let dir = tempfile::tempdir().unwrap();
        let job = TrainJob {
            registry: &registry,
            reservoir_id: "mlp",
            env_name: "CartPole-v1",
            seed: 4,
            config: &cfg,
            out: Some(dir.path()),
            parallelism: par,
        };
        let out = train(&job).unwrap();
        assert_eq!(out.steps, 512);
        assert_eq!(out.reservoir_checksum_before, out.reservoir_checksum_after);
        std::fs::read_to_string(run_dir(dir.path(), "mlp", "CartPole-v1", 4).join(METRICS_FILE)).unwrap()
    };
    let a = read(Parallelism::Sequential);
    assert!(a.lines().count() > 2);
    assert!(a.lines().nth(1).unwrap().ends_with(",,,"));
    for p in Parallelism::available() {
        assert_eq!(read(p), a);
    }
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = PpoConfig::from_toml("n_envs = 8\nn_steps = 128\ntotal_steps = 1000\n").unwrap();
    assert_eq!(cfg.n_envs, 8);
    assert_eq!(cfg.batch_size, 256);
    assert!(PpoConfig::from_toml("batch_size = 300").is_err());
    assert!(PpoConfig::from_toml("normalize_obs = true").is_err());
    let text = toml::to_string(&PpoConfig::default()).unwrap();
    assert_eq!(PpoConfig::from_toml(&text).unwrap(), PpoConfig::default());
}
