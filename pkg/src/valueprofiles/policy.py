"""Expected free energy, the policy posterior and action likelihoods.

Policies are single actions, so predicting the state under policy ``a`` is one
application of ``B[:, :, a]``. Risk is the KL divergence from predicted reward
outcomes to the preferred distribution ``softmax(C)``; hint and choice
preferences are flat and contribute nothing. Information gain is the mutual
information between hidden states and outcomes, summed over all modalities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import log_softmax, xlogy

from .filtering import FactorizedBeliefs, predict
from .generative_model import N_POLICIES, GenerativeModel

LOGLIK_FLOOR = 1e-12
LOG_FLOOR = float(np.log(LOGLIK_FLOOR))


class OutcomeForecast(NamedTuple):
    """Per-policy quantities that do not depend on preferences or precision.

    ``reward_probs`` has shape ``(..., 4, 3)``, ``info_gain`` shape ``(..., 4)``.
    """

    reward_probs: np.ndarray
    info_gain: np.ndarray


@dataclass(frozen=True)
class PolicyEvaluation:
    G: np.ndarray
    risk: np.ndarray
    info_gain: np.ndarray
    posterior: np.ndarray


def _neg_entropy(p: np.ndarray, axis: int = 0) -> np.ndarray:
    return xlogy(p, p).sum(axis=axis)


def _conditional_entropy(A: np.ndarray) -> np.ndarray:
    """Entropy of each outcome distribution in ``A``, shape ``A.shape[1:]``."""
    return -_neg_entropy(A, axis=0)


def forecast_outcomes(beliefs: FactorizedBeliefs, model: GenerativeModel) -> OutcomeForecast:
    reward_probs = np.empty((N_POLICIES, model.A_reward.shape[0]))
    info_gain = np.zeros(N_POLICIES)
    for a in model.policies:
        joint = predict(beliefs, a, model).joint()
        for m, A in enumerate(model.A):
            q_o = np.tensordot(A, joint, axes=3)
            ambiguity = float((_conditional_entropy(A) * joint).sum())
            info_gain[a] += -_neg_entropy(q_o) - ambiguity
            if m == 1:
                reward_probs[a] = q_o
    return OutcomeForecast(reward_probs, info_gain)


def risk_from_forecast(reward_probs: np.ndarray, C_eff: np.ndarray) -> np.ndarray:
    """``KL(q(o) || softmax(C))`` over the reward modality, broadcast over leading axes."""
    log_pref = log_softmax(np.asarray(C_eff, dtype=float), axis=-1)
    return _neg_entropy(reward_probs, axis=-1) - np.einsum("...ao,...o->...a", reward_probs, log_pref)


def expected_free_energy(
    beliefs: FactorizedBeliefs, model: GenerativeModel, C_eff: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(risk, info_gain)``; the expected free energy is ``risk - info_gain``."""
    fc = forecast_outcomes(beliefs, model)
    return risk_from_forecast(fc.reward_probs, C_eff), fc.info_gain


def policy_posterior(G: np.ndarray, xi_eff: np.ndarray, gamma_eff: float) -> np.ndarray:
    """``softmax(-gamma * G + xi)``."""
    G = np.asarray(G, dtype=float)
    if not np.all(np.isfinite(G)):
        raise FloatingPointError(f"non-finite expected free energy: {G}")
    if not gamma_eff > 0:
        raise ValueError(f"policy precision must be positive, got {gamma_eff}")
    logits = -gamma_eff * G + np.asarray(xi_eff, dtype=float)
    logits = logits - logits.max()
    p = np.exp(logits)
    return p / p.sum()


def evaluate_policies(
    beliefs: FactorizedBeliefs,
    model: GenerativeModel,
    C_eff: np.ndarray,
    xi_eff: np.ndarray,
    gamma_eff: float,
) -> PolicyEvaluation:
    risk, info_gain = expected_free_energy(beliefs, model, C_eff)
    G = risk - info_gain
    return PolicyEvaluation(G, risk, info_gain, policy_posterior(G, xi_eff, gamma_eff))


def sample_action(posterior: np.ndarray, rng: np.random.Generator) -> int:
    """Categorical draw consuming exactly one uniform variate."""
    cdf = np.cumsum(posterior)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, len(posterior) - 1)


def action_loglik(posterior: np.ndarray, action: int) -> float:
    """Log posterior mass at ``action``, floored at ``log(1e-12)``."""
    return float(np.log(max(float(posterior[action]), LOGLIK_FLOOR)))


def is_floored(posterior: np.ndarray, action: int) -> bool:
    return float(posterior[action]) < LOGLIK_FLOOR
