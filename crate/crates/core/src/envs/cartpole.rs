use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{discrete_valid, Action, ActionSpace, Dynamics, EnvSpec, CARTPOLE};

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
const X_THRESHOLD: f64 = 2.4;

/// State `[cart_pos, cart_vel, pole_angle, pole_vel]`; observation = state.
/// Action 0 pushes left, 1 pushes right. Explicit Euler integration.
#[derive(Clone, Copy, Debug, Default)]
pub struct CartPole;

impl Dynamics for CartPole {
    fn spec() -> EnvSpec {
        EnvSpec {
            name: CARTPOLE.to_string(),
            obs_dim: 4,
            state_dim: 4,
            action: ActionSpace::Discrete { n: 2 },
            horizon: 500,
            solved_threshold: Some(475.0),
        }
    }

    fn initial_state(rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..4).map(|_| rng.random_range(-0.05..0.05)).collect()
    }

    fn transition(s: &mut [f64], action: &Action) -> (f64, bool) {
        let force = if matches!(action, Action::Discrete(1)) { FORCE_MAG } else { -FORCE_MAG };
        let (x, x_dot, theta, theta_dot) = (s[0], s[1], s[2], s[3]);
        let (sin, cos) = theta.sin_cos();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin - cos * temp) / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
        s[0] = x + TAU * x_dot;
        s[1] = x_dot + TAU * x_acc;
        s[2] = theta + TAU * theta_dot;
        s[3] = theta_dot + TAU * theta_acc;
        let terminated = s[0] < -X_THRESHOLD || s[0] > X_THRESHOLD || s[2] < -THETA_THRESHOLD || s[2] > THETA_THRESHOLD;
        (1.0, terminated)
    }

    fn observe(state: &[f64]) -> Vec<f64> {
        state.to_vec()
    }

    fn action_valid(action: &Action) -> bool {
        discrete_valid(action, 2)
    }
}
