"""Record reference trajectories for the classic-control environments.

Each trajectory starts from an explicitly set internal state and applies a
fixed action sequence. The output is consumed by the envs golden tests.
"""
import json
import math
import sys

import gymnasium as gym
import numpy as np


def run(name, state, actions):
    env = gym.make(name).unwrapped
    env.reset(seed=0)
    env.state = np.array(state, dtype=np.float64)
    steps = []
    for a in actions:
        act = np.array([a], dtype=np.float32) if isinstance(a, float) else a
        obs, reward, terminated, truncated, _ = env.step(act)
        steps.append({
            "action": a,
            "observation": [float(x) for x in np.asarray(obs, dtype=np.float64)],
            "state": [float(x) for x in np.asarray(env.state, dtype=np.float64)],
            "reward": float(reward),
            "terminated": bool(terminated),
        })
        if terminated:
            break
    return {"env": name, "initial_state": state, "steps": steps}


def main(out):
    rng = np.random.default_rng(7)
    cases = []
    cases.append(run("CartPole-v1", [0.01, -0.02, 0.03, 0.01],
                     [int(x) for x in rng.integers(0, 2, 60)]))
    cases.append(run("CartPole-v1", [0.0, 0.0, 0.15, 0.5], [1] * 20))
    cases.append(run("Acrobot-v1", [0.05, -0.03, 0.02, 0.01],
                     [int(x) for x in rng.integers(0, 3, 60)]))
    cases.append(run("Pendulum-v1", [2.5, -0.4],
                     [float(x) for x in rng.uniform(-3.0, 3.0, 60)]))
    cases.append(run("MountainCarContinuous-v0", [-0.5, 0.0],
                     [float(x) for x in rng.uniform(-1.5, 1.5, 60)]))
    cases.append(run("MountainCarContinuous-v0", [0.44, 0.02], [1.0] * 5))
    with open(out, "w") as f:
        json.dump(cases, f, indent=1)


if __name__ == "__main__":
    main(sys.argv[1])
