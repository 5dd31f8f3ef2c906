"""
Training on uniformly random levels
===================================

The simplest loop: every cycle draws fresh levels, rolls out, and takes one
PPO update. A couple of minutes of CPU is enough to see learning on small
mazes; scale total_env_steps back up for real runs.
"""

import numpy as np

from ued_forge import MazeEnv, PpoConfig, UedConfig, evaluate, network_policy, train
from ued_forge.evaluation import holdout_levels
from ued_forge.rng import key_from_seed

config = UedConfig(
    algorithm="dr",
    width=9,
    height=9,
    max_walls=10,
    total_env_steps=400_000,          # ~50 cycles at the default T=256, N=32
    ppo=PpoConfig(lr=5e-4),
)

result = train(config, seed=0)
print(f"trained for {result.env_steps} env steps, {result.updates} updates")

solve = [m["solve_rate"] for m in result.metrics]
print("train solve rate, first 5 cycles:", np.round(solve[:5], 2))
print("train solve rate, last 5 cycles: ", np.round(solve[-5:], 2))

# evaluate on the packaged easy holdout; sampling actions matches how the
# policy behaved during training, greedy argmax is the deterministic variant
env = MazeEnv(max_steps=250, view_size=config.view_size)
levels = holdout_levels("easy_9x9")
for sample in (True, False):
    policy = network_policy(result.params, env, sample=sample)
    report = evaluate(env, policy, levels, episodes=10, key=key_from_seed(1))
    kind = "sampled" if sample else "greedy"
    print(f"{kind:8s} holdout solve {report.solve_rate_mean:.2f} "
          f"return {report.return_mean:.3f} (iqm {report.return_iqm:.3f})")
