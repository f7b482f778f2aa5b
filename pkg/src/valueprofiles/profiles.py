"""Value profiles, the context-to-profile assignment and belief-weighted mixing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, ContractError


def _centered(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x - x.mean()


@dataclass(frozen=True)
class ValueProfile:
    """Outcome-preference logits, policy-prior logits and policy precision.

    Both logit vectors are mean-centered on construction; ``xi_raw`` keeps the
    uncentered policy logits for reporting.
    """

    C_logits: np.ndarray
    xi_logits: np.ndarray
    gamma: float

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ConfigError(f"profile precision must be positive, got {self.gamma}")
        object.__setattr__(self, "xi_raw", np.asarray(self.xi_logits, dtype=float).copy())
        object.__setattr__(self, "C_logits", _centered(self.C_logits))
        object.__setattr__(self, "xi_logits", _centered(self.xi_logits))
        object.__setattr__(self, "gamma", float(self.gamma))


@dataclass(frozen=True)
class EffectiveParams:
    C_eff: np.ndarray
    xi_eff: np.ndarray
    gamma_eff: float
    weights: np.ndarray
    xi_raw_eff: np.ndarray | None = None


def assignment_matrix(Z, tol: float = 1e-10) -> np.ndarray:
    """Validate a row-stochastic context-by-profile matrix."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise ContractError(f"assignment matrix must be 2-D, got shape {Z.shape}")
    if np.any(Z < 0) or np.any(Z > 1) or not np.allclose(Z.sum(axis=1), 1.0, atol=tol, rtol=0):
        raise ConfigError("assignment matrix rows must lie on the simplex")
    return Z


def profile_weights(q_context: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Pool context beliefs through ``Z``: ``w[k] = sum_s q[s] Z[s, k]``."""
    q_context = np.asarray(q_context, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if q_context.shape[-1] != Z.shape[0]:
        raise ContractError(
            f"context belief has {q_context.shape[-1]} states but Z has {Z.shape[0]} rows"
        )
    return q_context @ Z


def mix(profiles: Sequence[ValueProfile], weights: np.ndarray) -> EffectiveParams:
    """Linear mixture of logits and precision under ``weights``."""
    if not profiles:
        raise ConfigError("at least one value profile is required")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(profiles),):
        raise ContractError(f"{len(profiles)} profiles but weights have shape {weights.shape}")
    C = np.stack([p.C_logits for p in profiles])
    xi = np.stack([p.xi_logits for p in profiles])
    xi_raw = np.stack([p.xi_raw for p in profiles])
    gammas = np.array([p.gamma for p in profiles])
    return EffectiveParams(
        C_eff=weights @ C,
        xi_eff=weights @ xi,
        gamma_eff=float(weights @ gammas),
        weights=weights,
        xi_raw_eff=weights @ xi_raw,
    )
