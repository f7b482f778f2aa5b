"""Behavioral models: three active-inference variants and two Q-learning baselines.

``M1``
    Static precision, fixed outcome preferences, flat policy prior.
``M2``
    Precision ``gamma_base / (1 + kappa * H(q_better_arm))`` with ``H`` in nats.
``M3``
    Two value profiles recruited by context beliefs through an assignment
    matrix; the effective policy logits, preferences and precision are the
    belief-weighted mixture.
``EpsGreedy`` / ``SoftmaxQ``
    Delta-rule action values over the four native actions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .bandit import LOSS, WIN, Observation
from .errors import ConfigError, ContractError
from .filtering import FactorizedBeliefs, entropy, predict, update
from .generative_model import N_POLICIES, GenerativeModel
from .policy import OutcomeForecast, forecast_outcomes, policy_posterior, risk_from_forecast
from .profiles import ValueProfile, assignment_matrix, mix, profile_weights

BAYESIAN_KINDS = ("M1", "M2", "M3")
Q_KINDS = ("EpsGreedy", "SoftmaxQ")
KINDS = BAYESIAN_KINDS + Q_KINDS

PARAM_NAMES: dict[str, tuple[str, ...]] = {
    "M1": ("gamma",),
    "M2": ("gamma_base", "kappa"),
    "M3": ("gamma0", "gamma1", "hint_scale", "arm_scale"),
    "EpsGreedy": ("epsilon", "alpha"),
    "SoftmaxQ": ("beta", "alpha"),
}

DEFAULT_PARAMS: dict[str, dict[str, float]] = {
    "M1": {"gamma": 2.5},
    "M2": {"gamma_base": 2.5, "kappa": 1.0},
    "M3": {"gamma0": 2.0, "gamma1": 4.0, "hint_scale": 1.0, "arm_scale": 1.0},
    "EpsGreedy": {"epsilon": 0.1, "alpha": 0.1},
    "SoftmaxQ": {"beta": 1.0, "alpha": 0.1},
}

N_FREE_PARAMS = {"M1": 1, "M2": 2, "M3": 4}

DEFAULT_C = (0.0, -5.0, 5.0)
# Base policy logits over (start, hint, left, right); profile 0 is anchored to
# the volatile context, profile 1 to the stable one.
DEFAULT_XI_BASE = ((0.0, 3.0, 0.0, 0.0), (0.0, 0.5, 0.0, 0.0))
DEFAULT_Z = ((1.0, 0.0), (0.0, 1.0))

Q_REWARD = {WIN: 1.0, LOSS: -1.0}


@dataclass(frozen=True)
class AgentSpec:
    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    C: tuple[float, ...] = DEFAULT_C
    xi_base: tuple[tuple[float, ...], ...] = DEFAULT_XI_BASE
    Z: tuple[tuple[float, ...], ...] = DEFAULT_Z

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown agent kind {self.kind!r}; expected one of {KINDS}")
        params = {**DEFAULT_PARAMS[self.kind], **{k: float(v) for k, v in self.params.items()}}
        unknown = set(params) - set(PARAM_NAMES[self.kind])
        if unknown:
            raise ConfigError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        object.__setattr__(self, "params", params)
        self._check()

    def _check(self) -> None:
        p = self.params
        if self.kind in ("EpsGreedy", "SoftmaxQ"):
            if not 0.0 < p["alpha"] <= 1.0:
                raise ConfigError(f"alpha must lie in (0, 1], got {p['alpha']}")
            if self.kind == "EpsGreedy" and not 0.0 <= p["epsilon"] <= 1.0:
                raise ConfigError(f"epsilon must lie in [0, 1], got {p['epsilon']}")
            if self.kind == "SoftmaxQ" and not p["beta"] > 0:
                raise ConfigError(f"beta must be positive, got {p['beta']}")
            return
        if self.kind == "M2":
            if not p["gamma_base"] > 0 or not p["kappa"] >= 0:
                raise ConfigError(f"M2 needs gamma_base > 0 and kappa >= 0, got {p}")
            return
        for name, value in p.items():
            if not value > 0:
                raise ConfigError(f"{self.kind} parameter {name} must be positive, got {value}")
        if self.kind == "M3":
            assignment_matrix(self.Z)
            if len(self.xi_base) != len(self.Z[0]):
                raise ConfigError("M3 needs one base policy-logit vector per profile")

    @property
    def param_tuple(self) -> tuple[float, ...]:
        return tuple(self.params[n] for n in PARAM_NAMES[self.kind])

    @property
    def is_bayesian(self) -> bool:
        return self.kind in BAYESIAN_KINDS

    def profiles(self) -> list[ValueProfile]:
        """M3 profiles: hint and arm entries of every base vector scaled by the shared factors."""
        if self.kind != "M3":
            raise ContractError(f"{self.kind} has no value profiles")
        scale = np.array([1.0, self.params["hint_scale"], self.params["arm_scale"], self.params["arm_scale"]])
        gammas = (self.params["gamma0"], self.params["gamma1"])
        if len(self.xi_base) != 2:
            raise ContractError("scaled M3 parameterisation is defined for two profiles")
        return [
            ValueProfile(np.array(self.C), np.asarray(xi, dtype=float) * scale, g)
            for xi, g in zip(self.xi_base, gammas)
        ]


@dataclass(frozen=True)
class AgentState:
    beliefs: FactorizedBeliefs | None = None
    q_values: np.ndarray | None = None
    last_action: int | None = None


@dataclass(frozen=True)
class AgentDecision:
    """Action distribution plus the effective control parameters behind it."""

    posterior: np.ndarray
    gamma_eff: float | None = None
    xi_eff: np.ndarray | None = None
    xi_hint_eff: float | None = None
    weights: np.ndarray | None = None
    G: np.ndarray | None = None


def initial_state(spec: AgentSpec, model: GenerativeModel) -> AgentState:
    if spec.is_bayesian:
        return AgentState(beliefs=FactorizedBeliefs.from_prior(model))
    return AgentState(q_values=np.zeros(N_POLICIES))


def _check_state(spec: AgentSpec, state: AgentState) -> None:
    if spec.is_bayesian and (state.beliefs is None or state.q_values is not None):
        raise ContractError(f"{spec.kind} requires a belief state")
    if not spec.is_bayesian and (state.q_values is None or state.beliefs is not None):
        raise ContractError(f"{spec.kind} requires action values")


def eps_greedy_policy(q_values: np.ndarray, epsilon: float) -> np.ndarray:
    """Greedy mass ``1 - epsilon`` split over tied maxima, ``epsilon`` spread uniformly."""
    greedy = (q_values == q_values.max()).astype(float)
    return (1.0 - epsilon) * greedy / greedy.sum() + epsilon / len(q_values)


def softmax_q_policy(q_values: np.ndarray, beta: float) -> np.ndarray:
    z = beta * q_values
    z = np.exp(z - z.max())
    return z / z.sum()


def decide_from_forecast(
    spec: AgentSpec,
    forecast: OutcomeForecast,
    q_context: np.ndarray,
    q_better_arm: np.ndarray,
) -> AgentDecision:
    """Policy posterior of a Bayesian agent given its (predictive) beliefs.

    ``q_context`` and ``q_better_arm`` are the predictive marginals for the
    current trial; they drive profile recruitment (M3) and entropy coupling (M2).
    """
    p = spec.params
    if spec.kind == "M3":
        eff = mix(spec.profiles(), profile_weights(q_context, np.asarray(spec.Z)))
        G = risk_from_forecast(forecast.reward_probs, eff.C_eff) - forecast.info_gain
        return AgentDecision(
            policy_posterior(G, eff.xi_eff, eff.gamma_eff),
            gamma_eff=eff.gamma_eff,
            xi_eff=eff.xi_eff,
            xi_hint_eff=float(eff.xi_raw_eff[1]),
            weights=eff.weights,
            G=G,
        )
    C = np.asarray(spec.C, dtype=float)
    C = C - C.mean()
    G = risk_from_forecast(forecast.reward_probs, C) - forecast.info_gain
    if spec.kind == "M1":
        gamma = p["gamma"]
    else:
        gamma = p["gamma_base"] / (1.0 + p["kappa"] * entropy(q_better_arm))
    xi = np.zeros(N_POLICIES)
    return AgentDecision(policy_posterior(G, xi, gamma), gamma_eff=gamma, xi_eff=xi, xi_hint_eff=0.0, G=G)


def decide(spec: AgentSpec, state: AgentState, model: GenerativeModel) -> AgentDecision:
    _check_state(spec, state)
    if spec.kind == "EpsGreedy":
        return AgentDecision(eps_greedy_policy(state.q_values, spec.params["epsilon"]))
    if spec.kind == "SoftmaxQ":
        return AgentDecision(softmax_q_policy(state.q_values, spec.params["beta"]))
    # context and arm transitions are action-independent
    predictive = predict(state.beliefs, 0, model)
    return decide_from_forecast(
        spec, forecast_outcomes(state.beliefs, model), predictive.context, predictive.better_arm
    )


def agent_policy_posterior(spec: AgentSpec, state: AgentState, model: GenerativeModel) -> np.ndarray:
    return decide(spec, state, model).posterior


def agent_step(
    spec: AgentSpec, state: AgentState, action: int, obs: Observation, model: GenerativeModel
) -> AgentState:
    _check_state(spec, state)
    if spec.is_bayesian:
        return AgentState(beliefs=update(predict(state.beliefs, action, model), obs, model), last_action=action)
    q = state.q_values.copy()
    q[action] += spec.params["alpha"] * (Q_REWARD.get(obs.reward, 0.0) - q[action])
    return AgentState(q_values=q, last_action=action)
