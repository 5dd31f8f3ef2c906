"""Underspecified-environment interface and auto-resetting wrappers.

An underspecified environment has no built-in level distribution: instead of
``reset()`` it exposes ``reset_to_level(level, rng)``, leaving the choice of
levels entirely to the caller (a training algorithm, an evaluation loop, a
curriculum). ``step`` and ``reset_to_level`` are pure given an explicit RNG
state: calling them with equal inputs and generators at equal state yields
identical outputs, which is what makes batched rollouts reproducible
regardless of how they are parallelized.

Fixed-length rollouts need episodes to restart mid-rollout, so two wrappers
are provided:

* ``AutoReplayWrapper`` resets to the level that was just played.
* ``AutoResetWrapper`` resets to a fresh level drawn from a caller-supplied
  source.

Both follow the terminal-transition convention: when the inner episode ends,
the returned ``StepResult`` carries the *terminal* reward and ``done=True``
together with the *post-reset* state and observation, so no terminal reward
is ever lost inside a fixed-length rollout and value bootstrapping can key
off the done flag alone.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple

import numpy as np


class EnvError(Exception):
    """Contract violation: invalid action, malformed level, bad state."""


class StepResult(NamedTuple):
    state: Any
    observation: Any
    reward: float
    done: bool


class UnderspecifiedEnv(ABC):
    """Environment without an implicit level distribution.

    Implementations must be pure: no internal mutable state, all randomness
    drawn from the generator passed in. ``num_actions`` is the size of the
    discrete action space; levels are opaque to this interface.
    """

    @property
    @abstractmethod
    def num_actions(self) -> int: ...

    @abstractmethod
    def reset_to_level(
        self, level: Any, rng: np.random.Generator
    ) -> tuple[Any, Any]:
        """Initial (state, observation) for the episode induced by ``level``."""

    @abstractmethod
    def step(
        self, state: Any, action: int, rng: np.random.Generator
    ) -> StepResult: ...

    def encode_observation(self, obs: Any) -> tuple[np.ndarray, np.ndarray]:
        """Split an observation into (image, extra-features) for a policy net.

        Library plumbing used by the RL layer; not part of the core contract.
        """
        raise NotImplementedError


@dataclass(frozen=True)
class WrappedState:
    """State of a wrapped env: the inner state plus the level to replay."""

    inner: Any
    level: Any


class AutoReplayWrapper(UnderspecifiedEnv):
    """On episode end, immediately reset to the previously played level."""

    def __init__(self, env: UnderspecifiedEnv):
        self.env = env

    @property
    def num_actions(self) -> int:
        return self.env.num_actions

    def reset_to_level(self, level, rng):
        state, obs = self.env.reset_to_level(level, rng)
        return WrappedState(inner=state, level=level), obs

    def step(self, state: WrappedState, action: int, rng: np.random.Generator):
        inner_res = self.env.step(state.inner, action, rng)
        if not inner_res.done:
            return StepResult(
                WrappedState(inner=inner_res.state, level=state.level),
                inner_res.observation,
                inner_res.reward,
                False,
            )
        fresh_state, fresh_obs = self.env.reset_to_level(state.level, rng)
        return StepResult(
            WrappedState(inner=fresh_state, level=state.level),
            fresh_obs,
            inner_res.reward,
            True,
        )

    def encode_observation(self, obs):
        return self.env.encode_observation(obs)


class AutoResetWrapper(UnderspecifiedEnv):
    """On episode end, reset to a fresh level drawn from ``level_source``."""

    def __init__(
        self,
        env: UnderspecifiedEnv,
        level_source: Callable[[np.random.Generator], Any],
    ):
        self.env = env
        self.level_source = level_source

    @property
    def num_actions(self) -> int:
        return self.env.num_actions

    def reset_to_level(self, level, rng):
        state, obs = self.env.reset_to_level(level, rng)
        return WrappedState(inner=state, level=level), obs

    def step(self, state: WrappedState, action: int, rng: np.random.Generator):
        inner_res = self.env.step(state.inner, action, rng)
        if not inner_res.done:
            return StepResult(
                WrappedState(inner=inner_res.state, level=state.level),
                inner_res.observation,
                inner_res.reward,
                False,
            )
        new_level = self.level_source(rng)
        fresh_state, fresh_obs = self.env.reset_to_level(new_level, rng)
        return StepResult(
            WrappedState(inner=fresh_state, level=new_level),
            fresh_obs,
            inner_res.reward,
            True,
        )

    def encode_observation(self, obs):
        return self.env.encode_observation(obs)
