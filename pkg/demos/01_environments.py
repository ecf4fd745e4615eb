"""Tour of the symbolic environments: observations, dynamics, outcomes.

Rolls random-policy episodes in each grid kind and a short Pong game,
printing the observation layout and the distribution of episode outcomes.
"""
import numpy as np

from modrl.envs import KINDS, axis_groups, make_env, observation_labels

rng = np.random.default_rng(0)

for kind in KINDS:
    env = make_env(kind, seed=42)
    obs = env.observe()
    print(f"\n=== {kind} ===")
    print(f"actions: {env.n_actions}  groups: {sorted(set(axis_groups(kind).values()))}")
    print("observation:", ", ".join(
        f"{name}={val:+.2f}" for name, val in zip(observation_labels(kind), obs)))

    outcomes: dict[str, int] = {}
    lengths = []
    episodes = 200 if kind != "pong" else 5
    for _ in range(episodes):
        env.reset()
        done = False
        steps = 0
        while not done:
            _, _, done, cause = env.step(int(rng.integers(env.n_actions)))
            steps += 1
        outcomes[cause] = outcomes.get(cause, 0) + 1
        lengths.append(steps)
    print(f"random policy, {episodes} episodes: "
          + "  ".join(f"{k}={v}" for k, v in sorted(outcomes.items())))
    print(f"episode length: mean {np.mean(lengths):.1f}, max {max(lengths)}")

# the sparse grid reward makes mean return equal the success rate exactly
env = make_env("do", seed=7)
total, wins = 0.0, 0
for _ in range(300):
    env.reset()
    done = False
    while not done:
        _, r, done, cause = env.step(int(rng.integers(4)))
        total += r
    wins += cause == "goal"
print(f"\nDO random policy: mean return {total / 300:.4f} "
      f"== success rate {wins / 300:.4f}")
