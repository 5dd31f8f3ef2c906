"""Curriculum training loops over a level-replay buffer.

Five algorithms share one chassis:

* ``dr``: domain randomization; every cycle rolls out on freshly generated
  levels and trains on them. No buffer.
* ``plr``: prioritized level replay. A two-node meta automaton decides each
  cycle between generating new levels and replaying high-regret ones from
  the buffer; both kinds of cycle train the policy.
* ``plr_robust``: same automaton, but gradient updates happen only on
  replayed levels; new levels are rolled out just to score them.
* ``accel``: robust replay plus an edit step. After a replay cycle the
  automaton can mutate the just-replayed levels, score the mutants, and
  insert them; mutation cycles never train.
* ``paired``: a level-editor adversary builds levels one edit at a time; an
  antagonist and a protagonist both train on the built levels, and the
  adversary trains on the regret signal (best antagonist return minus mean
  protagonist return) delivered on its final edit.

The meta automaton has two nodes. From node A it replays with probability
``p`` and generates otherwise; from node B it mutates with probability
``q``, else replays with probability ``p``. The node is B exactly after a
replay, so with q = 1 every replay is followed by a mutation. Until the
buffer reaches its fill threshold, cycles are forced to generate new levels
without consuming a random draw.

Levels are scored either by positive-value-loss (mean clipped GAE advantage)
or by a maximum-Monte-Carlo gap (mean of ``max(0, R_max - V(s))`` with
``R_max`` the best discounted return ever observed on that level); scores
drive the buffer's rank-based replay distribution.

Every loop draws its per-cycle randomness as ``fold_in(run_key, cycle)``, so
a run checkpointed mid-stream resumes on the exact random sequence. Metrics
are emitted as one JSON object per cycle with sorted keys; identical seeds
give byte-identical metrics and checkpoints regardless of the rollout
thread count.
"""

from __future__ import annotations

import base64
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from . import rng as rng_mod
from .env_core import AutoReplayWrapper, AutoResetWrapper, WrappedState
from .level_sampler import (
    LevelBuffer,
    SamplerConfig,
    buffer_from_text,
    buffer_to_text,
    insert_batch,
    new_buffer,
    sample_levels,
    update_batch,
)
from .maze import (
    MazeEditorEnv,
    MazeEnv,
    MazeLevel,
    MazeState,
    empty_level,
    format_level,
    generate_random_level,
    mutate_level,
    parse_level,
)
from .rl_core import (
    ActorCriticParams,
    NetConfig,
    PpoConfig,
    Trajectory,
    annealed_lr,
    compute_gae,
    episode_returns,
    init_params,
    max_episode_discounted_returns,
    params_from_bytes,
    params_to_bytes,
    ppo_update,
    rollout,
    save_params,
)

ALGORITHMS = ("dr", "plr", "plr_robust", "accel", "paired")
SCORING = ("pvl", "maxmc")

OP_NEW = "new"
OP_REPLAY = "replay"
OP_MUTATE = "mutate"

NODE_A = "a"
NODE_B = "b"


class UedError(Exception):
    pass


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UedConfig:
    """Everything that defines a training run except the seed."""

    algorithm: str = "dr"
    scoring: str = "maxmc"
    total_env_steps: int = 245_760_000
    width: int = 13
    height: int = 13
    max_walls: int = 25
    view_size: int = 5
    max_episode_steps: int = 250
    n_edits: int = 20
    wall_budget: int = 20
    buffer_capacity: int = 4000
    replay_prob: float | None = None    # default 0.8 for accel, 0.5 otherwise
    mutation_prob: float | None = None  # default 1.0 for accel, 0.0 otherwise
    temperature: float = 0.3
    staleness_coeff: float = 0.3
    min_fill_ratio: float = 0.5
    hidden: int = 32
    torso: str = "mlp"
    conv_filters: int = 16
    adversary_conv_filters: int = 128
    adversary_ent_coeff: float = 5e-2
    discounted_regret: bool = False
    ppo: PpoConfig = field(default_factory=PpoConfig)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.scoring not in SCORING:
            raise ValueError(f"unknown scoring {self.scoring!r}")
        if self.total_env_steps <= 0:
            raise ValueError("total_env_steps must be positive")
        if self.buffer_capacity <= 0:
            raise ValueError("buffer_capacity must be positive")
        if self.n_edits < 1:
            raise ValueError("n_edits must be at least 1")
        for name in ("replay_prob", "mutation_prob"):
            p = getattr(self, name)
            if p is not None and not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")

    @property
    def resolved_replay_prob(self) -> float:
        if self.replay_prob is not None:
            return self.replay_prob
        return 0.8 if self.algorithm == "accel" else 0.5

    @property
    def resolved_mutation_prob(self) -> float:
        if self.mutation_prob is not None:
            return self.mutation_prob
        return 1.0 if self.algorithm == "accel" else 0.0

    @property
    def robust(self) -> bool:
        """Train only on replayed levels (never on fresh or mutated ones)."""
        return self.algorithm in ("plr_robust", "accel")


def ued_config_from_dict(data: dict) -> UedConfig:
    """Build a config from plain JSON data, rejecting unknown keys."""
    data = dict(data)
    ppo_data = data.pop("ppo", None)
    known = {f for f in UedConfig.__dataclass_fields__ if f != "ppo"}
    for key in data:
        if key not in known:
            raise UedError(f"unknown config key: {key}")
    kwargs = dict(data)
    if ppo_data is not None:
        ppo_known = set(PpoConfig.__dataclass_fields__)
        for key in ppo_data:
            if key not in ppo_known:
                raise UedError(f"unknown config key: ppo.{key}")
        kwargs["ppo"] = PpoConfig(**ppo_data)
    try:
        return UedConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise UedError(str(exc)) from exc


def ued_config_to_dict(config: UedConfig) -> dict:
    return asdict(config)


def _sampler_config(config: UedConfig) -> SamplerConfig:
    return SamplerConfig(
        temperature=config.temperature,
        staleness_coeff=config.staleness_coeff,
        prioritization="rank",
        replay_prob=config.resolved_replay_prob,
        min_fill_ratio=config.min_fill_ratio,
        dedup=True,
    )


def student_net_config(config: UedConfig) -> NetConfig:
    v = config.view_size
    return NetConfig(
        image_shape=(v, v, 3),
        extra_dim=4,
        n_actions=3,
        hidden=config.hidden,
        torso=config.torso,
        conv_filters=config.conv_filters,
    )


def adversary_net_config(config: UedConfig) -> NetConfig:
    return NetConfig(
        image_shape=(config.height, config.width, 4),
        extra_dim=1,
        n_actions=config.width * config.height,
        hidden=config.hidden,
        torso=config.torso,
        conv_filters=config.adversary_conv_filters,
    )


# ---------------------------------------------------------------------------
# Meta automaton and accounting
# ---------------------------------------------------------------------------

def meta_policy_next(
    node: str, replay_prob: float, mutation_prob: float, rng: np.random.Generator
) -> tuple[str, str]:
    """One transition of the two-node cycle automaton.

    Returns (operation, next node). Consumes exactly one uniform draw. The
    next node is B exactly when the operation is a replay.
    """
    if node not in (NODE_A, NODE_B):
        raise UedError(f"unknown automaton node {node!r}")
    u = rng.random()
    if node == NODE_A:
        op = OP_REPLAY if u < replay_prob else OP_NEW
    else:
        if u < mutation_prob:
            op = OP_MUTATE
        elif u < mutation_prob + (1.0 - mutation_prob) * replay_prob:
            op = OP_REPLAY
        else:
            op = OP_NEW
    return op, (NODE_B if op == OP_REPLAY else NODE_A)


def steps_per_cycle(config: UedConfig) -> int:
    """Environment steps banked by one training cycle.

    Students step ``n_envs * rollout_steps`` per rollout; the paired setup
    runs two students per iteration and does not count editor steps.
    """
    per = config.ppo.n_envs * config.ppo.rollout_steps
    return 2 * per if config.algorithm == "paired" else per


def planned_cycles(config: UedConfig) -> int:
    return math.ceil(config.total_env_steps / steps_per_cycle(config))


def dry_run_env_steps(config: UedConfig, n_cycles: int | None = None) -> dict:
    """Simulate the step-accounting loop without touching an environment.

    Mirrors the real stopping rule: with ``n_cycles`` given, run that many
    cycles; otherwise run until the step budget is reached.
    """
    env_steps = 0
    cycles = 0
    per = steps_per_cycle(config)
    while (cycles < n_cycles) if n_cycles is not None else (env_steps < config.total_env_steps):
        env_steps += per
        cycles += 1
    return {"cycles": cycles, "env_steps": env_steps}


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

def score_pvl(advantages: np.ndarray) -> np.ndarray:
    """Positive-value-loss: per env column, mean over steps of max(0, A_t)."""
    adv = np.asarray(advantages, dtype=np.float64)
    return np.maximum(adv, 0.0).mean(axis=0)


def score_maxmc(values: np.ndarray, max_returns: np.ndarray) -> np.ndarray:
    """Monte-Carlo gap: per env column, mean of max(0, R_max - V_t)."""
    vals = np.asarray(values, dtype=np.float64)
    gaps = np.asarray(max_returns, dtype=np.float64)[None, :] - vals
    return np.maximum(gaps, 0.0).mean(axis=0)


def _score_trajectory(
    config: UedConfig,
    traj: Trajectory,
    advantages: np.ndarray,
    prior_max: np.ndarray | None,
):
    """Scores plus per-level extras for buffer bookkeeping."""
    if config.scoring == "pvl":
        return score_pvl(advantages), [{} for _ in range(traj.n_envs)]
    best = max_episode_discounted_returns(traj, config.ppo.gamma)
    if prior_max is not None:
        best = np.maximum(best, np.asarray(prior_max, dtype=np.float64))
    scores = score_maxmc(traj.values, best)
    return scores, [{"max_return": float(b)} for b in best]


def _episode_returns_per_env(traj: Trajectory, gamma: float | None):
    """Completed-episode returns grouped by env column.

    ``gamma=None`` gives undiscounted sums; otherwise discounted from each
    episode's first step.
    """
    out = [[] for _ in range(traj.n_envs)]
    for e in range(traj.n_envs):
        rew = traj.rewards[:, e].astype(np.float64)
        ends = np.flatnonzero(traj.dones[:, e])
        start = 0
        for end in ends:
            seg = rew[start:end + 1]
            if gamma is None:
                out[e].append(float(seg.sum()))
            else:
                out[e].append(float(seg @ (gamma ** np.arange(seg.size))))
            start = end + 1
    return out


# ---------------------------------------------------------------------------
# Shared cycle plumbing
# ---------------------------------------------------------------------------

@dataclass
class ReplayState:
    """Mutable loop state for the buffer-based algorithms."""

    params: ActorCriticParams
    buffer: LevelBuffer
    node: str = NODE_A
    cycle: int = 0
    env_steps: int = 0
    updates: int = 0
    last_replayed: tuple | None = None


def _reset_to_levels(env, levels, key: rng_mod.Key):
    states, observations = [], []
    for level, k in zip(levels, rng_mod.split(key, len(levels))):
        state, obs = env.reset_to_level(level, rng_mod.generator(k))
        states.append(state)
        observations.append(obs)
    return states, observations


def rollout_on_levels(
    config: UedConfig,
    env,
    params: ActorCriticParams,
    levels,
    key: rng_mod.Key,
    n_steps: int | None = None,
):
    """Reset one env per level and collect a fixed-length batched rollout."""
    k_reset, k_roll = rng_mod.split(key)
    states, observations = _reset_to_levels(env, levels, k_reset)
    traj, states, observations = rollout(
        env, params, states, observations,
        config.ppo.rollout_steps if n_steps is None else n_steps, k_roll,
    )
    adv, targets = compute_gae(traj, config.ppo.gamma, config.ppo.gae_lambda)
    return traj, adv, targets, states


def _episode_metrics(traj: Trajectory) -> dict:
    stats = episode_returns(traj)
    n = int(stats.returns.size)
    return {
        "n_episodes": n,
        "mean_return": float(stats.returns.mean()) if n else 0.0,
        "solve_rate": float(stats.solved.mean()) if n else 0.0,
    }


def _buffer_metrics(buffer: LevelBuffer) -> dict:
    size = buffer.size
    mean_score = float(buffer.scores[:size].mean()) if size else 0.0
    return {"buffer_size": size, "mean_buffer_score": mean_score}


def _train_metrics(stats: dict) -> dict:
    return {
        "policy_loss": float(stats["policy_loss"]),
        "value_loss": float(stats["value_loss"]),
        "entropy": float(stats["entropy"]),
        "approx_kl": float(stats["approx_kl"]),
    }


def _lr_for_cycle(config: UedConfig, cycle: int) -> float:
    return annealed_lr(config.ppo, cycle, planned_cycles(config))


# ---------------------------------------------------------------------------
# Buffer-based cycle subroutines
# ---------------------------------------------------------------------------

def on_new_levels(config: UedConfig, env, state: ReplayState, key: rng_mod.Key):
    """Generate, roll out, score, and insert a batch of fresh levels.

    Trains on them unless the algorithm is replay-only ("robust").
    """
    k_gen, k_roll = rng_mod.split(key)
    levels = [
        generate_random_level(
            rng_mod.generator(k), config.width, config.height, config.max_walls
        )
        for k in rng_mod.split(k_gen, config.ppo.n_envs)
    ]
    traj, adv, targets, _ = rollout_on_levels(config, env, state.params, levels, k_roll)
    scores, extras = _score_trajectory(config, traj, adv, prior_max=None)

    metrics = {"cycle_type": OP_NEW, "trained": not config.robust}
    params, updates = state.params, state.updates
    if not config.robust:
        lr = _lr_for_cycle(config, state.cycle)
        params, stats = ppo_update(params, traj, adv, targets, config.ppo, lr)
        updates += 1
        metrics.update(_train_metrics(stats), lr=lr)

    buffer = insert_batch(state.buffer, levels, scores, extras)
    metrics.update(_episode_metrics(traj))
    new_state = replace(
        state,
        params=params,
        buffer=buffer,
        updates=updates,
        env_steps=state.env_steps + config.ppo.n_envs * traj.n_steps,
    )
    return new_state, metrics


def on_replay_levels(config: UedConfig, env, state: ReplayState, key: rng_mod.Key):
    """Replay buffered levels, always train, and refresh their scores."""
    k_sample, k_roll = rng_mod.split(key)
    buffer, indices, levels = sample_levels(
        state.buffer, _sampler_config(config), rng_mod.generator(k_sample),
        config.ppo.n_envs,
    )
    traj, adv, targets, _ = rollout_on_levels(config, env, state.params, levels, k_roll)
    if config.scoring == "maxmc":
        prior = np.array(
            [buffer.extras[i].get("max_return", 0.0) for i in indices],
            dtype=np.float64,
        )
    else:
        prior = None
    scores, extras = _score_trajectory(config, traj, adv, prior_max=prior)

    lr = _lr_for_cycle(config, state.cycle)
    params, stats = ppo_update(state.params, traj, adv, targets, config.ppo, lr)
    buffer = update_batch(buffer, indices, scores, extras)

    metrics = {"cycle_type": OP_REPLAY, "trained": True, "lr": lr}
    metrics.update(_train_metrics(stats))
    metrics.update(_episode_metrics(traj))
    new_state = replace(
        state,
        params=params,
        buffer=buffer,
        updates=state.updates + 1,
        env_steps=state.env_steps + config.ppo.n_envs * traj.n_steps,
        last_replayed=tuple(levels),
    )
    return new_state, metrics


def on_mutate_levels(config: UedConfig, env, state: ReplayState, key: rng_mod.Key):
    """Mutate the most recently replayed levels, score, insert. Never trains."""
    if not state.last_replayed:
        raise UedError("mutation requested before any replay cycle")
    k_mut, k_roll = rng_mod.split(key)
    levels = [
        mutate_level(level, rng_mod.generator(k), config.n_edits)
        for level, k in zip(state.last_replayed, rng_mod.split(k_mut, len(state.last_replayed)))
    ]
    traj, adv, targets, _ = rollout_on_levels(config, env, state.params, levels, k_roll)
    scores, extras = _score_trajectory(config, traj, adv, prior_max=None)
    buffer = insert_batch(state.buffer, levels, scores, extras)

    metrics = {"cycle_type": OP_MUTATE, "trained": False}
    metrics.update(_episode_metrics(traj))
    new_state = replace(
        state,
        buffer=buffer,
        env_steps=state.env_steps + config.ppo.n_envs * traj.n_steps,
    )
    return new_state, metrics


# ---------------------------------------------------------------------------
# Metrics / output plumbing
# ---------------------------------------------------------------------------

def metrics_line(entry: dict) -> str:
    return json.dumps(entry, sort_keys=True, separators=(",", ":"))


class _RunWriter:
    """Streams metrics lines and drops final checkpoints into a directory."""

    def __init__(self, out_dir: str | None):
        self.out_dir = out_dir
        self._fh = None
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            self._fh = open(os.path.join(out_dir, "metrics.jsonl"), "w", encoding="utf-8", newline="\n")

    def metrics(self, entry: dict) -> None:
        if self._fh is not None:
            self._fh.write(metrics_line(entry) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def path(self, name: str):
        return None if self.out_dir is None else os.path.join(self.out_dir, name)


@dataclass
class TrainResult:
    params: ActorCriticParams            # the evaluated policy
    metrics: list
    env_steps: int
    updates: int
    buffer: LevelBuffer | None = None
    antagonist: ActorCriticParams | None = None
    adversary: ActorCriticParams | None = None


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------

def train(
    config: UedConfig,
    seed: int,
    out_dir: str | None = None,
    cycle_callback: Callable | None = None,
    max_cycles: int | None = None,
) -> TrainResult:
    """Run the configured algorithm from scratch.

    Stops at the step budget, or after ``max_cycles`` cycles of this call if
    that comes first (the budget stays in the config, so a saved run state
    resumes toward the same target).
    """
    if config.algorithm == "dr":
        return train_dr(config, seed, out_dir, cycle_callback, max_cycles)
    if config.algorithm == "paired":
        return train_paired(config, seed, out_dir, cycle_callback, max_cycles)
    return train_replay(config, seed, out_dir, cycle_callback, max_cycles)


def _base_metrics(config: UedConfig, state_env_steps, cycle, updates) -> dict:
    return {
        "algorithm": config.algorithm,
        "cycle": cycle,
        "env_steps": state_env_steps,
        "updates": updates,
    }


def _dr_fresh_level(config: UedConfig):
    def fresh_level(gen):
        return generate_random_level(gen, config.width, config.height, config.max_walls)
    return fresh_level


def train_dr(config, seed, out_dir=None, cycle_callback=None, max_cycles=None) -> TrainResult:
    master = rng_mod.key_from_seed(seed)
    k_init, k_reset, _ = rng_mod.split(master, 3)
    params = init_params(rng_mod.generator(k_init), student_net_config(config))

    base_env = MazeEnv(max_steps=config.max_episode_steps, view_size=config.view_size)
    fresh_level = _dr_fresh_level(config)
    env = AutoResetWrapper(base_env, fresh_level)
    states = []
    for k in rng_mod.split(k_reset, config.ppo.n_envs):
        gen = rng_mod.generator(k)
        state, _ = env.reset_to_level(fresh_level(gen), gen)
        states.append(state)
    return _run_dr_loop(config, master, params, states, 0, 0, 0,
                        out_dir, cycle_callback, max_cycles)


def _run_dr_loop(config, master, params, states, cycle, env_steps, updates,
                 out_dir, cycle_callback, max_cycles) -> TrainResult:
    _, _, k_run = rng_mod.split(master, 3)
    base_env = MazeEnv(max_steps=config.max_episode_steps, view_size=config.view_size)
    env = AutoResetWrapper(base_env, _dr_fresh_level(config))
    observations = [base_env.observe(s.inner) for s in states]

    writer = _RunWriter(out_dir)
    metrics_log = []
    cycles_done = 0
    try:
        while env_steps < config.total_env_steps and (
            max_cycles is None or cycles_done < max_cycles
        ):
            key_c = rng_mod.fold_in(k_run, cycle)
            traj, states, observations = rollout(
                env, params, states, observations, config.ppo.rollout_steps, key_c
            )
            adv, targets = compute_gae(traj, config.ppo.gamma, config.ppo.gae_lambda)
            lr = _lr_for_cycle(config, cycle)
            params, stats = ppo_update(params, traj, adv, targets, config.ppo, lr)
            env_steps += config.ppo.n_envs * traj.n_steps
            updates += 1
            cycle += 1
            cycles_done += 1

            entry = _base_metrics(config, env_steps, cycle, updates)
            entry.update(cycle_type=OP_NEW, trained=True, lr=lr)
            entry.update(_train_metrics(stats))
            entry.update(_episode_metrics(traj))
            metrics_log.append(entry)
            writer.metrics(entry)
            if cycle_callback is not None:
                cycle_callback(entry, params)
    finally:
        writer.close()

    if out_dir is not None:
        save_params(params, writer.path("params.bin"))
        _save_run_state_dr(
            writer.path("state.json"), config, master, cycle, env_steps,
            updates, params, states,
        )
    return TrainResult(params=params, metrics=metrics_log, env_steps=env_steps, updates=updates)


def train_replay(config, seed, out_dir=None, cycle_callback=None, max_cycles=None) -> TrainResult:
    master = rng_mod.key_from_seed(seed)
    return _run_replay_loop(config, master, _fresh_replay_state(config, master),
                            out_dir, cycle_callback, max_cycles)


def _fresh_replay_state(config: UedConfig, master: rng_mod.Key) -> ReplayState:
    k_init, _ = rng_mod.split(master)
    params = init_params(rng_mod.generator(k_init), student_net_config(config))
    return ReplayState(params=params, buffer=new_buffer(config.buffer_capacity))


def _run_replay_loop(config, master, state: ReplayState, out_dir, cycle_callback,
                     max_cycles=None):
    _, k_run = rng_mod.split(master)
    base_env = MazeEnv(max_steps=config.max_episode_steps, view_size=config.view_size)
    env = AutoReplayWrapper(base_env)
    p = config.resolved_replay_prob
    q = config.resolved_mutation_prob
    fill_target = config.min_fill_ratio * config.buffer_capacity

    writer = _RunWriter(out_dir)
    metrics_log = []
    cycles_done = 0
    try:
        while state.env_steps < config.total_env_steps and (
            max_cycles is None or cycles_done < max_cycles
        ):
            key_c = rng_mod.fold_in(k_run, state.cycle)
            k_decide, k_op = rng_mod.split(key_c)
            if state.buffer.size < fill_target:
                # Below the fill threshold every cycle generates; the
                # automaton draw is not consumed.
                op, state.node = OP_NEW, NODE_A
            else:
                op, state.node = meta_policy_next(
                    state.node, p, q, rng_mod.generator(k_decide)
                )
            if op == OP_NEW:
                state, entry = on_new_levels(config, env, state, k_op)
            elif op == OP_REPLAY:
                state, entry = on_replay_levels(config, env, state, k_op)
            else:
                state, entry = on_mutate_levels(config, env, state, k_op)
            state.cycle += 1
            cycles_done += 1

            full = _base_metrics(config, state.env_steps, state.cycle, state.updates)
            full.update(entry)
            full.update(_buffer_metrics(state.buffer))
            metrics_log.append(full)
            writer.metrics(full)
            if cycle_callback is not None:
                cycle_callback(full, state.params)
    finally:
        writer.close()

    if out_dir is not None:
        save_params(state.params, writer.path("params.bin"))
        with open(writer.path("buffer.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(buffer_to_text(state.buffer))
        _save_run_state_replay(writer.path("state.json"), config, master, state)
    return TrainResult(
        params=state.params, metrics=metrics_log, env_steps=state.env_steps,
        updates=state.updates, buffer=state.buffer,
    )


def train_paired(config, seed, out_dir=None, cycle_callback=None, max_cycles=None) -> TrainResult:
    master = rng_mod.key_from_seed(seed)
    k_pro, k_ant, k_adv, _ = rng_mod.split(master, 4)
    net_cfg = student_net_config(config)
    protagonist = init_params(rng_mod.generator(k_pro), net_cfg)
    antagonist = init_params(rng_mod.generator(k_ant), net_cfg)
    adversary = init_params(rng_mod.generator(k_adv), adversary_net_config(config))
    return _run_paired_loop(config, master, protagonist, antagonist, adversary,
                            0, 0, 0, out_dir, cycle_callback, max_cycles)


def _run_paired_loop(config, master, protagonist, antagonist, adversary,
                     cycle, env_steps, updates, out_dir, cycle_callback,
                     max_cycles=None) -> TrainResult:
    _, _, _, k_run = rng_mod.split(master, 4)
    base_env = MazeEnv(max_steps=config.max_episode_steps, view_size=config.view_size)
    student_env = AutoReplayWrapper(base_env)
    editor_env = MazeEditorEnv(
        width=config.width, height=config.height, wall_budget=config.wall_budget
    )
    adv_ppo = replace(config.ppo, ent_coeff=config.adversary_ent_coeff)
    n = config.ppo.n_envs
    canvas = empty_level(config.width, config.height)
    regret_gamma = config.ppo.gamma if config.discounted_regret else None

    writer = _RunWriter(out_dir)
    metrics_log = []
    cycles_done = 0
    try:
        while env_steps < config.total_env_steps and (
            max_cycles is None or cycles_done < max_cycles
        ):
            key_c = rng_mod.fold_in(k_run, cycle)
            k_ed, k_pro_roll, k_ant_roll = rng_mod.split(key_c, 3)
            lr = _lr_for_cycle(config, cycle)

            # Adversary builds one level per env, one edit per step.
            ed_states, ed_obs = [], []
            for _ in range(n):
                s, o = editor_env.reset_to_level(canvas, None)
                ed_states.append(s)
                ed_obs.append(o)
            ed_traj, ed_states, _ = rollout(
                editor_env, adversary, ed_states, ed_obs,
                editor_env.episode_steps, k_ed,
            )
            levels = [s.level for s in ed_states]

            pro_traj, pro_adv, pro_tgt, _ = rollout_on_levels(
                config, student_env, protagonist, levels, k_pro_roll
            )
            ant_traj, ant_adv, ant_tgt, _ = rollout_on_levels(
                config, student_env, antagonist, levels, k_ant_roll
            )

            pro_rets = _episode_returns_per_env(pro_traj, regret_gamma)
            ant_rets = _episode_returns_per_env(ant_traj, regret_gamma)
            regret = np.array(
                [
                    (max(ant_rets[e]) if ant_rets[e] else 0.0)
                    - (float(np.mean(pro_rets[e])) if pro_rets[e] else 0.0)
                    for e in range(n)
                ],
                dtype=np.float64,
            )

            protagonist, pro_stats = ppo_update(
                protagonist, pro_traj, pro_adv, pro_tgt, config.ppo, lr
            )
            antagonist, ant_stats = ppo_update(
                antagonist, ant_traj, ant_adv, ant_tgt, config.ppo, lr
            )
            updates += 2

            # Regret lands as the reward on the adversary's final edit.
            ed_rewards = ed_traj.rewards.copy()
            ed_rewards[-1, :] = regret.astype(np.float32)
            ed_traj = replace(ed_traj, rewards=ed_rewards)
            ed_adv, ed_tgt = compute_gae(ed_traj, adv_ppo.gamma, adv_ppo.gae_lambda)
            adversary, adv_stats = ppo_update(
                adversary, ed_traj, ed_adv, ed_tgt, adv_ppo, lr
            )
            updates += 1

            env_steps += 2 * n * config.ppo.rollout_steps
            cycle += 1
            cycles_done += 1

            entry = _base_metrics(config, env_steps, cycle, updates)
            entry.update(cycle_type="paired", trained=True, lr=lr)
            entry.update(mean_regret=float(regret.mean()))
            entry.update({f"protagonist_{k}": v for k, v in _train_metrics(pro_stats).items()})
            entry.update({f"antagonist_{k}": v for k, v in _train_metrics(ant_stats).items()})
            entry.update({f"adversary_{k}": v for k, v in _train_metrics(adv_stats).items()})
            entry.update(_episode_metrics(pro_traj))
            entry.update({f"antagonist_{k}": v for k, v in _episode_metrics(ant_traj).items()})
            metrics_log.append(entry)
            writer.metrics(entry)
            if cycle_callback is not None:
                cycle_callback(entry, protagonist)
    finally:
        writer.close()

    if out_dir is not None:
        save_params(protagonist, writer.path("params.bin"))
        save_params(antagonist, writer.path("antagonist.bin"))
        save_params(adversary, writer.path("adversary.bin"))
        _save_run_state_paired(
            writer.path("state.json"), config, master, cycle, env_steps,
            updates, protagonist, antagonist, adversary,
        )
    return TrainResult(
        params=protagonist, metrics=metrics_log, env_steps=env_steps,
        updates=updates, antagonist=antagonist, adversary=adversary,
    )


# ---------------------------------------------------------------------------
# Run-state checkpoints (exact resume)
# ---------------------------------------------------------------------------

_STATE_VERSION = 1


def _b64(params: ActorCriticParams) -> str:
    return base64.b64encode(params_to_bytes(params)).decode("ascii")


def _unb64(text: str) -> ActorCriticParams:
    return params_from_bytes(base64.b64decode(text.encode("ascii")))


def _state_header(config, master, cycle, env_steps, updates) -> dict:
    return {
        "version": _STATE_VERSION,
        "config": ued_config_to_dict(config),
        "master_key": master,
        "cycle": cycle,
        "env_steps": env_steps,
        "updates": updates,
    }


def _write_state(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(payload, sort_keys=True, separators=(",", ":")))
        fh.write("\n")


def _maze_state_to_dict(ws: WrappedState) -> dict:
    inner: MazeState = ws.inner
    return {
        "level": format_level(ws.level),
        "inner_level": format_level(inner.level),
        "agent_pos": list(inner.agent_pos),
        "agent_dir": inner.agent_dir,
        "timestep": inner.timestep,
    }


def _maze_state_from_dict(d: dict) -> WrappedState:
    inner = MazeState(
        level=parse_level(d["inner_level"]),
        agent_pos=tuple(d["agent_pos"]),
        agent_dir=d["agent_dir"],
        timestep=d["timestep"],
    )
    return WrappedState(inner=inner, level=parse_level(d["level"]))


def _save_run_state_dr(path, config, master, cycle, env_steps, updates, params, states):
    payload = _state_header(config, master, cycle, env_steps, updates)
    payload["params"] = _b64(params)
    payload["env_states"] = [_maze_state_to_dict(s) for s in states]
    _write_state(path, payload)


def _save_run_state_replay(path, config, master, state: ReplayState):
    payload = _state_header(config, master, state.cycle, state.env_steps, state.updates)
    payload["params"] = _b64(state.params)
    payload["node"] = state.node
    payload["buffer"] = buffer_to_text(state.buffer)
    payload["last_replayed"] = (
        None if state.last_replayed is None
        else [format_level(lv) for lv in state.last_replayed]
    )
    _write_state(path, payload)


def _save_run_state_paired(path, config, master, cycle, env_steps, updates,
                           protagonist, antagonist, adversary):
    payload = _state_header(config, master, cycle, env_steps, updates)
    payload["params"] = _b64(protagonist)
    payload["antagonist"] = _b64(antagonist)
    payload["adversary"] = _b64(adversary)
    _write_state(path, payload)


def load_run_state(path) -> dict:
    """Parsed run-state checkpoint with params decoded and config rebuilt."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != _STATE_VERSION:
        raise UedError(f"unsupported run state version {payload.get('version')}")
    for required in ("config", "params", "master_key", "cycle", "env_steps", "updates"):
        if required not in payload:
            raise UedError(f"run state missing field {required!r}")
    out = dict(payload)
    out["config"] = ued_config_from_dict(payload["config"])
    out["params"] = _unb64(payload["params"])
    for name in ("antagonist", "adversary"):
        if payload.get(name):
            out[name] = _unb64(payload[name])
    if payload.get("buffer"):
        out["buffer"] = buffer_from_text(payload["buffer"])
    if payload.get("last_replayed"):
        out["last_replayed"] = tuple(parse_level(t) for t in payload["last_replayed"])
    return out


def resume_run(state_path, out_dir=None, cycle_callback=None,
               max_cycles=None) -> TrainResult:
    """Continue a saved run toward its original step budget.

    Every per-cycle key is folded from the stored master key and cycle
    index, so the continuation reproduces an uninterrupted run exactly.
    """
    loaded = load_run_state(state_path)
    config: UedConfig = loaded["config"]
    master = loaded["master_key"]
    if config.algorithm == "dr":
        states = [_maze_state_from_dict(d) for d in loaded["env_states"]]
        return _run_dr_loop(
            config, master, loaded["params"], states, loaded["cycle"],
            loaded["env_steps"], loaded["updates"], out_dir, cycle_callback,
            max_cycles,
        )
    if config.algorithm == "paired":
        return _run_paired_loop(
            config, master, loaded["params"], loaded["antagonist"],
            loaded["adversary"], loaded["cycle"], loaded["env_steps"],
            loaded["updates"], out_dir, cycle_callback, max_cycles,
        )
    state = ReplayState(
        params=loaded["params"],
        buffer=loaded["buffer"],
        node=loaded["node"],
        cycle=loaded["cycle"],
        env_steps=loaded["env_steps"],
        updates=loaded["updates"],
        last_replayed=loaded.get("last_replayed"),
    )
    return _run_replay_loop(config, master, state, out_dir, cycle_callback, max_cycles)
