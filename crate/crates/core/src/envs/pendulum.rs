use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{continuous_valid, Action, ActionSpace, Dynamics, EnvSpec, PENDULUM};

const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const DT: f64 = 0.05;
const G: f64 = 10.0;
const M: f64 = 1.0;
const L: f64 = 1.0;

/// State `[theta, theta_dot]` with `theta = 0` upright; observation
/// `[cos theta, sin theta, theta_dot]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Pendulum;

pub(crate) fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl Dynamics for Pendulum {
    fn spec() -> EnvSpec {
        EnvSpec {
            name: PENDULUM.to_string(),
            obs_dim: 3,
            state_dim: 2,
            action: ActionSpace::Continuous { dim: 1, low: -MAX_TORQUE, high: MAX_TORQUE },
            horizon: 200,
            solved_threshold: None,
        }
    }

    fn initial_state(rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.random_range(-PI..PI), rng.random_range(-1.0..1.0)]
    }

    fn transition(s: &mut [f64], action: &Action) -> (f64, bool) {
        let Action::Continuous(a) = action else { unreachable!("validated") };
        let (th, thdot) = (s[0], s[1]);
        let u = a[0].clamp(-MAX_TORQUE, MAX_TORQUE);
        let cost = angle_normalize(th).powi(2) + 0.1 * thdot * thdot + 0.001 * u * u;
        let new_thdot = (thdot + (3.0 * G / (2.0 * L) * th.sin() + 3.0 / (M * L * L) * u) * DT).clamp(-MAX_SPEED, MAX_SPEED);
        s[0] = th + new_thdot * DT;
        s[1] = new_thdot;
        (-cost, false)
    }

    fn observe(s: &[f64]) -> Vec<f64> {
        vec![s[0].cos(), s[0].sin(), s[1]]
    }

    fn action_valid(action: &Action) -> bool {
        continuous_valid(action, 1)
    }
}
