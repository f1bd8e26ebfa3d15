use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{continuous_valid, Action, ActionSpace, Dynamics, EnvSpec, MOUNTAIN_CAR_CONTINUOUS};

const MIN_ACTION: f64 = -1.0;
const MAX_ACTION: f64 = 1.0;
const MIN_POSITION: f64 = -1.2;
const MAX_POSITION: f64 = 0.6;
const MAX_SPEED: f64 = 0.07;
const GOAL_POSITION: f64 = 0.45;
const GOAL_VELOCITY: f64 = 0.0;
const POWER: f64 = 0.0015;

/// State `[position, velocity]`; observation = state.
#[derive(Clone, Copy, Debug, Default)]
pub struct MountainCarContinuous;

impl Dynamics for MountainCarContinuous {
    fn spec() -> EnvSpec {
        EnvSpec {
            name: MOUNTAIN_CAR_CONTINUOUS.to_string(),
            obs_dim: 2,
            state_dim: 2,
            action: ActionSpace::Continuous { dim: 1, low: MIN_ACTION, high: MAX_ACTION },
            horizon: 999,
            solved_threshold: None,
        }
    }

    fn initial_state(rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.random_range(-0.6..-0.4), 0.0]
    }

    fn transition(s: &mut [f64], action: &Action) -> (f64, bool) {
        let Action::Continuous(a) = action else { unreachable!("validated") };
        let (mut position, mut velocity) = (s[0], s[1]);
        let force = a[0].clamp(MIN_ACTION, MAX_ACTION);
        velocity += force * POWER - 0.0025 * (3.0 * position).cos();
        velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
        position += velocity;
        position = position.clamp(MIN_POSITION, MAX_POSITION);
        if position == MIN_POSITION && velocity < 0.0 {
            velocity = 0.0;
        }
        let terminated = position >= GOAL_POSITION && velocity >= GOAL_VELOCITY;
        // the control penalty uses the raw, unclipped action
        let reward = if terminated { 100.0 } else { 0.0 } - a[0] * a[0] * 0.1;
        s[0] = position;
        s[1] = velocity;
        (reward, terminated)
    }

    fn observe(s: &[f64]) -> Vec<f64> {
        s.to_vec()
    }

    fn action_valid(action: &Action) -> bool {
        continuous_valid(action, 1)
    }
}
