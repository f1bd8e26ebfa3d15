use serde::{Deserialize, Serialize};

use super::TrainError;

/// How a transition ended.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StepFlag {
    Continue,
    /// Episode ended in a terminal state: no bootstrap.
    Terminated,
    /// Episode hit its time limit; `bootstrap` is the critic's value of the
    /// final observation.
    Truncated {
        bootstrap: f64,
    },
}

/// Generalized advantage estimation over one environment's trajectory
/// segment. `next_value` bootstraps the step after the last one when that
/// step is `Continue`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    next_value: f64,
    flags: &[StepFlag],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), TrainError> {
    let n = rewards.len();
    if values.len() != n || flags.len() != n {
        return Err(TrainError::Shape(format!("gae inputs differ in length: rewards {n}, values {}, flags {}", values.len(), flags.len())));
    }
    let mut adv = vec![0.0; n];
    let mut last = 0.0;
    for t in (0..n).rev() {
        let following = if t + 1 < n { values[t + 1] } else { next_value };
        let (bootstrap, carry) = match flags[t] {
            StepFlag::Continue => (following, 1.0),
            StepFlag::Terminated => (0.0, 0.0),
            StepFlag::Truncated { bootstrap } => (bootstrap, 0.0),
        };
        let delta = rewards[t] + gamma * bootstrap - values[t];
        last = delta + gamma * lambda * carry * last;
        adv[t] = last;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}
