"""The agents' shared world model for the volatility bandit.

Hidden state factors: ``context`` (volatile, stable), ``better_arm`` (left,
right) and ``choice`` (start, hint, left, right). Observation modalities:
``hint`` (3 outcomes), ``reward`` (3 outcomes) and ``choice`` echo (4 outcomes).

Likelihood arrays are indexed ``A[m][outcome, context, better_arm, choice]``
and transition arrays ``B[f][next, previous, action]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bandit import HINT, LEFT, LOSS, NULL, RIGHT, STABLE, VOLATILE, WIN, TaskConfig
from .errors import ConfigError

FACTORS = ("context", "better_arm", "choice")
MODALITIES = ("hint", "reward", "choice")
STATE_SHAPE = (2, 2, 4)
N_POLICIES = 4

_TOL = 1e-10


@dataclass(frozen=True)
class ModelHyperParams:
    arm_switch_prob: float = 0.05
    context_stay_prob: float = 0.98

    def __post_init__(self) -> None:
        if not 0.0 <= self.arm_switch_prob <= 1.0:
            raise ConfigError(f"arm_switch_prob must lie in [0, 1], got {self.arm_switch_prob}")
        if not 0.0 <= self.context_stay_prob <= 1.0:
            raise ConfigError(
                f"context_stay_prob must lie in [0, 1], got {self.context_stay_prob}"
            )


@dataclass(frozen=True)
class GenerativeModel:
    A: tuple[np.ndarray, np.ndarray, np.ndarray]
    B: tuple[np.ndarray, np.ndarray, np.ndarray]
    D: tuple[np.ndarray, np.ndarray, np.ndarray]
    policies: tuple[int, ...] = (0, 1, 2, 3)

    @property
    def A_hint(self) -> np.ndarray:
        return self.A[0]

    @property
    def A_reward(self) -> np.ndarray:
        return self.A[1]

    @property
    def A_choice(self) -> np.ndarray:
        return self.A[2]

    def validate(self) -> None:
        for name, a in zip(MODALITIES, self.A):
            if a.shape[1:] != STATE_SHAPE:
                raise ConfigError(f"A[{name}] has state shape {a.shape[1:]}, expected {STATE_SHAPE}")
            if np.any(a < 0) or not np.allclose(a.sum(axis=0), 1.0, atol=_TOL, rtol=0):
                raise ConfigError(f"A[{name}] outcome distributions must sum to 1")
        for name, b, n in zip(FACTORS, self.B, STATE_SHAPE):
            if b.shape != (n, n, N_POLICIES):
                raise ConfigError(f"B[{name}] has shape {b.shape}, expected {(n, n, N_POLICIES)}")
            if np.any(b < 0) or not np.allclose(b.sum(axis=0), 1.0, atol=_TOL, rtol=0):
                raise ConfigError(f"B[{name}] columns must sum to 1")
        for name, d, n in zip(FACTORS, self.D, STATE_SHAPE):
            if d.shape != (n,) or np.any(d < 0) or abs(d.sum() - 1.0) > _TOL:
                raise ConfigError(f"D[{name}] must be a distribution over {n} states")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def build_model(config: TaskConfig, hyper: ModelHyperParams | None = None) -> GenerativeModel:
    """Build the A/B/D arrays matching ``config``; the arrays are read-only."""
    hyper = hyper or ModelHyperParams()
    config.validate()

    a_hint = np.zeros((3, *STATE_SHAPE))
    a_reward = np.zeros((3, *STATE_SHAPE))
    a_choice = np.zeros((4, *STATE_SHAPE))
    acc = config.hint_accuracy
    for ctx in (VOLATILE, STABLE):
        good, bad = config.reward_pair(ctx)
        for arm in (0, 1):
            for choice in range(4):
                if choice == HINT:
                    a_hint[1 + arm, ctx, arm, choice] = acc
                    a_hint[2 - arm, ctx, arm, choice] = 1.0 - acc
                else:
                    a_hint[NULL, ctx, arm, choice] = 1.0
                if choice in (LEFT, RIGHT):
                    p_win = good if choice - LEFT == arm else bad
                    a_reward[WIN, ctx, arm, choice] = p_win
                    a_reward[LOSS, ctx, arm, choice] = 1.0 - p_win
                else:
                    a_reward[NULL, ctx, arm, choice] = 1.0
                a_choice[choice, ctx, arm, choice] = 1.0

    def sticky(stay: float) -> np.ndarray:
        m = np.array([[stay, 1.0 - stay], [1.0 - stay, stay]])
        return np.repeat(m[:, :, None], N_POLICIES, axis=2)

    b_choice = np.zeros((4, 4, N_POLICIES))
    for action in range(N_POLICIES):
        b_choice[action, :, action] = 1.0

    model = GenerativeModel(
        A=(_readonly(a_hint), _readonly(a_reward), _readonly(a_choice)),
        B=(
            _readonly(sticky(hyper.context_stay_prob)),
            _readonly(sticky(1.0 - hyper.arm_switch_prob)),
            _readonly(b_choice),
        ),
        D=(
            _readonly(np.full(2, 0.5)),
            _readonly(np.full(2, 0.5)),
            _readonly(np.eye(4)[0]),
        ),
    )
    model.validate()
    return model
