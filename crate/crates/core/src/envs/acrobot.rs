use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{discrete_valid, Action, ActionSpace, Dynamics, EnvSpec, ACROBOT};

const DT: f64 = 0.2;
const LINK_LENGTH_1: f64 = 1.0;
const LINK_MASS_1: f64 = 1.0;
const LINK_MASS_2: f64 = 1.0;
const LINK_COM_POS_1: f64 = 0.5;
const LINK_COM_POS_2: f64 = 0.5;
const LINK_MOI: f64 = 1.0;
const MAX_VEL_1: f64 = 4.0 * PI;
const MAX_VEL_2: f64 = 9.0 * PI;
const AVAIL_TORQUE: [f64; 3] = [-1.0, 0.0, 1.0];
const G: f64 = 9.8;

/// Two-link underactuated pendulum, "book" dynamics, one RK4 step per action.
/// State `[theta1, theta2, dtheta1, dtheta2]`; observation
/// `[cos t1, sin t1, cos t2, sin t2, dt1, dt2]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Acrobot;

fn dsdt(s: &[f64; 4], torque: f64) -> [f64; 4] {
    let (m1, m2, l1, lc1, lc2, i1, i2) = (LINK_MASS_1, LINK_MASS_2, LINK_LENGTH_1, LINK_COM_POS_1, LINK_COM_POS_2, LINK_MOI, LINK_MOI);
    let [theta1, theta2, dtheta1, dtheta2] = *s;
    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * G * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin() - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * G * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 =
        (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2) / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

fn wrap(mut x: f64, lo: f64, hi: f64) -> f64 {
    let diff = hi - lo;
    while x > hi {
        x -= diff;
    }
    while x < lo {
        x += diff;
    }
    x
}

fn terminal(s: &[f64]) -> bool {
    -s[0].cos() - (s[1] + s[0]).cos() > 1.0
}

impl Dynamics for Acrobot {
    fn spec() -> EnvSpec {
        EnvSpec {
            name: ACROBOT.to_string(),
            obs_dim: 6,
            state_dim: 4,
            action: ActionSpace::Discrete { n: 3 },
            horizon: 500,
            solved_threshold: Some(-100.0),
        }
    }

    fn initial_state(rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..4).map(|_| rng.random_range(-0.1..0.1)).collect()
    }

    fn transition(s: &mut [f64], action: &Action) -> (f64, bool) {
        let Action::Discrete(a) = *action else { unreachable!("validated") };
        let torque = AVAIL_TORQUE[a];
        let y0 = [s[0], s[1], s[2], s[3]];
        let add = |y: &[f64; 4], k: &[f64; 4], h: f64| -> [f64; 4] { std::array::from_fn(|i| y[i] + h * k[i]) };
        let k1 = dsdt(&y0, torque);
        let k2 = dsdt(&add(&y0, &k1, DT / 2.0), torque);
        let k3 = dsdt(&add(&y0, &k2, DT / 2.0), torque);
        let k4 = dsdt(&add(&y0, &k3, DT), torque);
        let ns: [f64; 4] = std::array::from_fn(|i| y0[i] + DT / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        s[0] = wrap(ns[0], -PI, PI);
        s[1] = wrap(ns[1], -PI, PI);
        s[2] = ns[2].clamp(-MAX_VEL_1, MAX_VEL_1);
        s[3] = ns[3].clamp(-MAX_VEL_2, MAX_VEL_2);
        let done = terminal(s);
        (if done { 0.0 } else { -1.0 }, done)
    }

    fn observe(s: &[f64]) -> Vec<f64> {
        vec![s[0].cos(), s[0].sin(), s[1].cos(), s[1].sin(), s[2], s[3]]
    }

    fn action_valid(action: &Action) -> bool {
        discrete_valid(action, 3)
    }
}

#[cfg(test)]
mod tests {
    use super::super::make_env;
    use super::*;

    #[test]
    fn tip_above_bar_terminates_with_zero_reward() {
        let mut env = make_env(ACROBOT).unwrap();
        // both links pointing straight up
        env.set_internal_state(&[PI - 0.01, 0.0, 0.0, 0.0]).unwrap();
        let r = env.step(&Action::Discrete(1)).unwrap();
        assert!(r.terminated);
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn wrap_matches_reference_semantics() {
        assert!((wrap(3.5, -PI, PI) - (3.5 - 2.0 * PI)).abs() < 1e-15);
        assert_eq!(wrap(1.0, -PI, PI), 1.0);
        assert!((wrap(-7.0, -PI, PI) - (-7.0 + 2.0 * PI)).abs() < 1e-12);
    }
}
