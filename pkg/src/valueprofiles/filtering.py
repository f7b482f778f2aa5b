"""Categorical filtering over the factorized hidden state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bandit import Observation
from .errors import DegenerateEvidenceError
from .generative_model import GenerativeModel


@dataclass(frozen=True)
class FactorizedBeliefs:
    """Per-factor marginals over context, better arm and choice state."""

    context: np.ndarray
    better_arm: np.ndarray
    choice: np.ndarray

    @classmethod
    def from_prior(cls, model: GenerativeModel) -> "FactorizedBeliefs":
        return cls(*(np.array(d, dtype=float) for d in model.D))

    @property
    def factors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.context, self.better_arm, self.choice)

    def joint(self) -> np.ndarray:
        """Product distribution with shape ``(2, 2, 4)``."""
        return np.einsum("i,j,k->ijk", self.context, self.better_arm, self.choice)

    def is_normalized(self, tol: float = 1e-10) -> bool:
        return all(np.all(f >= 0) and abs(f.sum() - 1.0) <= tol for f in self.factors)


def predict(beliefs: FactorizedBeliefs, action: int, model: GenerativeModel) -> FactorizedBeliefs:
    """Propagate every factor through its transition matrix under ``action``."""
    return FactorizedBeliefs(*(b[:, :, action] @ q for b, q in zip(model.B, beliefs.factors)))


def observation_likelihood(obs: Observation, model: GenerativeModel) -> np.ndarray:
    """Joint likelihood of all three modalities for each of the 16 hidden states."""
    return model.A_hint[obs.hint] * model.A_reward[obs.reward] * model.A_choice[obs.choice]


def update(prior: FactorizedBeliefs, obs: Observation, model: GenerativeModel) -> FactorizedBeliefs:
    """Exact Bayes update on the full joint, re-marginalized per factor.

    Raises
    ------
    DegenerateEvidenceError
        If the observation has zero probability under the prior.
    """
    posterior = observation_likelihood(obs, model) * prior.joint()
    total = posterior.sum()
    if not total > 0.0:
        raise DegenerateEvidenceError(f"observation {obs.describe()} has zero likelihood")
    posterior /= total
    return FactorizedBeliefs(
        posterior.sum(axis=(1, 2)),
        posterior.sum(axis=(0, 2)),
        posterior.sum(axis=(0, 1)),
    )


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())
