use serde::{Deserialize, Serialize};

use super::{env_spec, ActionSpace, EnvError, ACROBOT, CARTPOLE, ENV_NAMES, MOUNTAIN_CAR_CONTINUOUS, PENDULUM};

/// Short catalog entry consumed by the router and the console.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvDescriptor {
    pub name: String,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub action: ActionSpace,
    pub horizon: usize,
    pub state_labels: Vec<String>,
    pub description: String,
}

fn summary(name: &str) -> (&'static str, &'static [&'static str]) {
    match name {
        CARTPOLE => (
            "Balance a pole hinged on a cart by pushing the cart left or right. \
             It is about stability, balance and keeping something upright without letting it fall.",
            &["cart_position", "cart_velocity", "pole_angle", "pole_angular_velocity"],
        ),
        ACROBOT => (
            "A two-link arm hangs from a bar and must swing its free end up above a target height. \
             It is about building energy through rhythmic effort to reach something high.",
            &["theta1", "theta2", "theta1_velocity", "theta2_velocity"],
        ),
        MOUNTAIN_CAR_CONTINUOUS => (
            "An underpowered car in a valley has to rock back and forth to get over the hill to the flag. \
             It is about persistence and building momentum when a direct push is not enough.",
            &["position", "velocity"],
        ),
        PENDULUM => (
            "A pendulum on a motorized pivot must be swung up and held upright. \
             It is about swinging up from the bottom and then stabilizing at the top with minimal effort.",
            &["theta", "theta_velocity"],
        ),
        _ => ("", &[]),
    }
}

/// Detailed documentation text substituted for `{env_desc}`.
pub fn env_description(name: &str) -> Result<&'static str, EnvError> {
    Ok(match name {
        CARTPOLE => include_str!("../../assets/envs/CartPole-v1.md"),
        ACROBOT => include_str!("../../assets/envs/Acrobot-v1.md"),
        MOUNTAIN_CAR_CONTINUOUS => include_str!("../../assets/envs/MountainCarContinuous-v0.md"),
        PENDULUM => include_str!("../../assets/envs/Pendulum-v1.md"),
        other => return Err(EnvError::Unknown(other.to_string())),
    })
}

pub fn env_descriptors() -> Vec<EnvDescriptor> {
    ENV_NAMES
        .iter()
        .map(|name| {
            let spec = env_spec(name).expect("roster names are valid");
            let (description, labels) = summary(name);
            EnvDescriptor {
                name: spec.name,
                obs_dim: spec.obs_dim,
                state_dim: spec.state_dim,
                action: spec.action,
                horizon: spec.horizon,
                state_labels: labels.iter().map(|s| s.to_string()).collect(),
                description: description.to_string(),
            }
        })
        .collect()
}

/// One `- name: description` line per environment.
pub fn format_env_list(descriptors: &[EnvDescriptor]) -> String {
    descriptors.iter().map(|d| format!("- {}: {}", d.name, d.description)).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_env_has_docs_and_labels() {
        for d in env_descriptors() {
            assert_eq!(d.state_labels.len(), d.state_dim);
            assert!(!d.description.is_empty());
            assert!(env_description(&d.name).unwrap().len() > 100);
        }
        let list = format_env_list(&env_descriptors());
        assert_eq!(list.lines().count(), 4);
        assert!(list.starts_with("- CartPole-v1: "));
    }
}
