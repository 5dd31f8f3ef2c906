"""
A level-building adversary
==========================

Two students play every level: the protagonist is the one we keep, the
antagonist sets the benchmark. An editor network builds each level one
placement at a time and is paid the regret, the gap between the best
antagonist episode and the protagonist's average. Rising regret means the
adversary found levels one student solves and the other does not.
"""

import numpy as np

from ued_forge import PpoConfig, UedConfig, train

config = UedConfig(
    algorithm="paired",
    width=9,
    height=9,
    wall_budget=12,                    # editor gets 12 wall edits + goal + agent
    total_env_steps=40 * 2 * 64 * 16,  # 40 iterations, two students
    ppo=PpoConfig(rollout_steps=64, n_envs=16, lr=5e-4),
)

result = train(config, seed=0)
print(f"{len(result.metrics)} adversary iterations, {result.updates} updates "
      f"(3 per iteration), {result.env_steps} student env steps")

regret = np.array([m["mean_regret"] for m in result.metrics])
print("mean regret, blocks of 10 iterations:", np.round(
    regret.reshape(-1, 10).mean(axis=1), 4))

last = result.metrics[-1]
print("final iteration:",
      {k: round(v, 4) for k, v in last.items()
       if k in ("mean_regret", "solve_rate", "antagonist_solve_rate",
                "adversary_entropy")})

# all three parameter sets are returned; the protagonist is the deliverable
print("protagonist params:", result.params.n_params,
      "antagonist:", result.antagonist.n_params,
      "adversary:", result.adversary.n_params)
