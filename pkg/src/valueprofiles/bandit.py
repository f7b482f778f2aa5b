"""Two-armed bandit with latent volatility contexts.

The environment alternates between a *volatile* regime (moderate reward
discrimination, better arm flipping on a fixed period) and a *stable* regime
(strong discrimination, better arm fixed for the whole block). Every trial
emits three observations: a hint cue, a reward outcome and an echo of the
executed action.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, fields
from typing import Any, Mapping, NamedTuple

import numpy as np

from .errors import ConfigError, SequenceExhaustedError

ACTIONS = ("start", "hint", "left", "right")
START, HINT, LEFT, RIGHT = range(4)

CONTEXTS = ("volatile", "stable")
VOLATILE, STABLE = range(2)

ARMS = ("left", "right")

HINT_OUTCOMES = ("null", "hint_left", "hint_right")
REWARD_OUTCOMES = ("null", "loss", "win")
CHOICE_OUTCOMES = ACTIONS

NULL = 0
LOSS, WIN = 1, 2


@dataclass(frozen=True)
class TaskConfig:
    """Task parameters. Probability pairs are ``(good arm, bad arm)``."""

    n_trials: int = 400
    context_block_len: int = 40
    volatile_arm_switch_period: int = 10
    p_reward_volatile: tuple[float, float] = (0.70, 0.30)
    p_reward_stable: tuple[float, float] = (0.90, 0.10)
    hint_accuracy: float = 0.85
    seed: int = 0
    first_context: str = "volatile"

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_reward_volatile", tuple(float(p) for p in self.p_reward_volatile))
        object.__setattr__(self, "p_reward_stable", tuple(float(p) for p in self.p_reward_stable))
        self.validate()

    def validate(self) -> None:
        if self.n_trials < 1:
            raise ConfigError(f"n_trials must be positive, got {self.n_trials}")
        if self.context_block_len < 1:
            raise ConfigError(f"context_block_len must be positive, got {self.context_block_len}")
        if self.volatile_arm_switch_period < 1:
            raise ConfigError(
                f"volatile_arm_switch_period must be positive, got {self.volatile_arm_switch_period}"
            )
        for name in ("p_reward_volatile", "p_reward_stable"):
            pair = getattr(self, name)
            if len(pair) != 2:
                raise ConfigError(f"{name} must be a (good, bad) pair, got {pair}")
            good, bad = pair
            if not (0.0 <= bad <= 1.0 and 0.0 <= good <= 1.0):
                raise ConfigError(f"{name} probabilities must lie in [0, 1], got {pair}")
            if not good > bad:
                raise ConfigError(f"{name}: good arm probability must exceed bad, got {pair}")
        if not 0.0 <= self.hint_accuracy <= 1.0:
            raise ConfigError(f"hint_accuracy must lie in [0, 1], got {self.hint_accuracy}")
        if self.first_context not in CONTEXTS:
            raise ConfigError(f"first_context must be one of {CONTEXTS}, got {self.first_context!r}")
        if self.n_trials % self.context_block_len:
            warnings.warn(
                f"n_trials={self.n_trials} is not a multiple of context_block_len="
                f"{self.context_block_len}; the last block is truncated",
                stacklevel=3,
            )

    def reward_pair(self, context: int) -> tuple[float, float]:
        return self.p_reward_volatile if context == VOLATILE else self.p_reward_stable

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "TaskConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown task keys: {sorted(unknown)}")
        return cls(**dict(values))


class EnvState(NamedTuple):
    trial_index: int
    context: int
    better_arm: int


class Observation(NamedTuple):
    """Indices into ``HINT_OUTCOMES``, ``REWARD_OUTCOMES`` and ``CHOICE_OUTCOMES``."""

    hint: int
    reward: int
    choice: int

    def describe(self) -> tuple[str, str, str]:
        return HINT_OUTCOMES[self.hint], REWARD_OUTCOMES[self.reward], CHOICE_OUTCOMES[self.choice]


def context_schedule(config: TaskConfig) -> np.ndarray:
    """Ground-truth context per trial; blocks alternate strictly."""
    first = CONTEXTS.index(config.first_context)
    blocks = np.arange(config.n_trials) // config.context_block_len
    return ((first + blocks) % 2).astype(np.int64)


class BanditEnvironment:
    """Seeded environment. Its random stream is private and independent of any agent.

    The per-block better-arm draws happen at construction; each step then
    consumes exactly one uniform variate, so the observation stream depends
    only on the seed and the action sequence.
    """

    def __init__(self, config: TaskConfig, rng: np.random.Generator | None = None) -> None:
        config.validate()
        self.config = config
        self._rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.contexts = context_schedule(config)
        self.better_arms = self._draw_arm_schedule()
        self.trial_index = 0

    def _draw_arm_schedule(self) -> np.ndarray:
        cfg = self.config
        arms = np.empty(cfg.n_trials, dtype=np.int64)
        n_blocks = -(-cfg.n_trials // cfg.context_block_len)
        initial = self._rng.integers(0, 2, size=n_blocks)
        for b in range(n_blocks):
            lo = b * cfg.context_block_len
            hi = min(lo + cfg.context_block_len, cfg.n_trials)
            offsets = np.arange(hi - lo)
            if self.contexts[lo] == VOLATILE:
                arms[lo:hi] = (initial[b] + offsets // cfg.volatile_arm_switch_period) % 2
            else:
                arms[lo:hi] = initial[b]
        return arms

    @property
    def done(self) -> bool:
        return self.trial_index >= self.config.n_trials

    @property
    def state(self) -> EnvState:
        """Ground truth for the trial about to be played."""
        if self.done:
            raise SequenceExhaustedError("no trials remain")
        t = self.trial_index
        return EnvState(t, int(self.contexts[t]), int(self.better_arms[t]))

    def state_at(self, trial: int) -> EnvState:
        return EnvState(trial, int(self.contexts[trial]), int(self.better_arms[trial]))

    def step(self, action: int) -> Observation:
        if self.done:
            raise SequenceExhaustedError(
                f"environment exhausted after {self.config.n_trials} trials"
            )
        if action not in range(4):
            raise ValueError(f"unknown action {action!r}")
        _, context, better = self.state
        u = self._rng.random()
        hint = reward = NULL
        if action == HINT:
            correct = u < self.config.hint_accuracy
            cued_arm = better if correct else 1 - better
            hint = 1 + cued_arm
        elif action in (LEFT, RIGHT):
            good, bad = self.config.reward_pair(context)
            p_win = good if action - LEFT == better else bad
            reward = WIN if u < p_win else LOSS
        self.trial_index += 1
        return Observation(hint, reward, int(action))
