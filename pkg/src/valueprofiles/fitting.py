"""Action-sequence likelihoods, grid search and within-run cross-validation.

Replay always runs over the whole session so that beliefs at held-out trials
reflect the full history; masks only select which trials enter the sum.

For the active-inference models the belief trajectory is a function of the
recorded actions and observations alone, so :func:`build_trace` computes the
per-trial outcome forecasts once and :func:`batch_trial_logliks` evaluates a
whole parameter grid against it with array operations. :func:`sequence_loglik`
is the step-by-step replay through the agent interface and serves as the
reference path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np
from scipy.special import logsumexp

from .agents import (
    BAYESIAN_KINDS,
    N_FREE_PARAMS,
    PARAM_NAMES,
    AgentSpec,
    AgentState,
    agent_step,
    decide,
    initial_state,
)
from .bandit import EnvState, Observation
from .errors import ConfigError, ContractError, DegenerateEvidenceError
from .filtering import FactorizedBeliefs, entropy, predict, update
from .generative_model import GenerativeModel
from .policy import LOG_FLOOR, action_loglik, forecast_outcomes, is_floored, risk_from_forecast

M1_COARSE = (0.5, 1.0, 1.5, 2.5, 4.0, 8.0, 12.0, 16.0)
M1_FINE_POINTS = 7
M2_COARSE_GAMMA = (0.5, 1.0, 1.5, 2.5, 4.0, 8.0)
M2_COARSE_KAPPA = (0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0)
M2_FINE_POINTS = 6
M3_GAMMA = (1.0, 2.5, 5.0)
M3_HINT_SCALE = (0.5, 1.0, 2.0, 4.0)
M3_ARM_SCALE = (0.5, 1.0, 2.0)

# log-likelihoods closer than this count as tied
TIE_TOL = 1e-9


@dataclass(frozen=True)
class RunData:
    """Recorded actions, observations and ground truth of one session."""

    actions: np.ndarray
    hints: np.ndarray
    rewards: np.ndarray
    choices: np.ndarray
    contexts: np.ndarray
    better_arms: np.ndarray
    label: str | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        n = len(self.actions)
        for name in ("hints", "rewards", "choices", "contexts", "better_arms"):
            if len(getattr(self, name)) != n:
                raise ContractError(f"RunData.{name} length differs from actions")
        if not np.array_equal(self.actions, self.choices):
            raise ContractError("choice echo must match the executed action on every trial")

    @classmethod
    def from_records(cls, records: Sequence, label: str | None = None, seed: int | None = None) -> "RunData":
        def col(fn):
            return np.array([fn(r) for r in records], dtype=np.int64)

        return cls(
            actions=col(lambda r: r.action),
            hints=col(lambda r: r.obs.hint),
            rewards=col(lambda r: r.obs.reward),
            choices=col(lambda r: r.obs.choice),
            contexts=col(lambda r: r.truth.context),
            better_arms=col(lambda r: r.truth.better_arm),
            label=label,
            seed=seed,
        )

    @property
    def n_trials(self) -> int:
        return len(self.actions)

    def observation(self, t: int) -> Observation:
        return Observation(int(self.hints[t]), int(self.rewards[t]), int(self.choices[t]))

    def truth(self, t: int) -> EnvState:
        return EnvState(t, int(self.contexts[t]), int(self.better_arms[t]))

    def unlabeled(self) -> "RunData":
        return replace(self, label=None)


@dataclass(frozen=True)
class ReplayTrace:
    """Parameter-free quantities along the replayed belief trajectory.

    ``q_context`` and ``arm_entropy`` come from the predictive prior of each
    trial; ``degenerate`` flags trials whose observation had zero likelihood
    (the belief update is skipped there).
    """

    reward_probs: np.ndarray
    info_gain: np.ndarray
    q_context: np.ndarray
    q_better_arm: np.ndarray
    arm_entropy: np.ndarray
    degenerate: np.ndarray


def _advance(beliefs: FactorizedBeliefs, action: int, obs: Observation, model: GenerativeModel):
    prior = predict(beliefs, action, model)
    try:
        return update(prior, obs, model), False
    except DegenerateEvidenceError:
        return prior, True


def build_trace(data: RunData, model: GenerativeModel) -> ReplayTrace:
    n = data.n_trials
    reward_probs = np.empty((n, 4, model.A_reward.shape[0]))
    info_gain = np.empty((n, 4))
    q_context = np.empty((n, 2))
    q_arm = np.empty((n, 2))
    degenerate = np.zeros(n, dtype=bool)
    beliefs = FactorizedBeliefs.from_prior(model)
    for t in range(n):
        fc = forecast_outcomes(beliefs, model)
        reward_probs[t], info_gain[t] = fc.reward_probs, fc.info_gain
        pred = predict(beliefs, 0, model)
        q_context[t], q_arm[t] = pred.context, pred.better_arm
        beliefs, degenerate[t] = _advance(beliefs, int(data.actions[t]), data.observation(t), model)
    arm_entropy = np.array([entropy(q) for q in q_arm])
    return ReplayTrace(reward_probs, info_gain, q_context, q_arm, arm_entropy, degenerate)


def replay_trial_logliks(spec: AgentSpec, data: RunData, model: GenerativeModel) -> tuple[np.ndarray, np.ndarray]:
    """Step-by-step replay; returns per-trial log-likelihoods and floor/degeneracy flags."""
    state = initial_state(spec, model)
    ll = np.empty(data.n_trials)
    flags = np.zeros(data.n_trials, dtype=bool)
    for t in range(data.n_trials):
        a = int(data.actions[t])
        posterior = decide(spec, state, model).posterior
        ll[t] = action_loglik(posterior, a)
        flags[t] = is_floored(posterior, a)
        obs = data.observation(t)
        try:
            state = agent_step(spec, state, a, obs, model)
        except DegenerateEvidenceError:
            state = AgentState(beliefs=predict(state.beliefs, a, model), last_action=a)
            flags[t] = True
    return ll, flags


def sequence_loglik(
    spec: AgentSpec,
    data: RunData,
    model: GenerativeModel,
    trial_mask: np.ndarray | None = None,
    trace: ReplayTrace | None = None,
) -> float:
    """Sum of action log-likelihoods over masked trials, replaying every trial.

    With a precomputed ``trace`` the Bayesian kinds take the vectorized path.
    """
    if trace is not None and spec.is_bayesian:
        ll = batch_trial_logliks(spec.kind, np.array([spec.param_tuple]), trace, data.actions, spec)[0]
    else:
        ll, _ = replay_trial_logliks(spec, data, model)
    if trial_mask is None:
        return float(ll.sum())
    return float(ll[np.asarray(trial_mask, dtype=bool)].sum())


def batch_trial_logliks(
    kind: str,
    candidates: np.ndarray,
    trace: ReplayTrace,
    actions: np.ndarray,
    template: AgentSpec | None = None,
) -> np.ndarray:
    """Per-trial floored log-likelihoods, shape ``(n_candidates, n_trials)``.

    ``candidates`` rows follow ``PARAM_NAMES[kind]``. Fixed structure
    (preferences, base policy logits, assignment) comes from ``template``.
    """
    if kind not in BAYESIAN_KINDS:
        raise ContractError(f"vectorized likelihood is defined for {BAYESIAN_KINDS}, not {kind}")
    template = template if template is not None and template.kind == kind else AgentSpec(kind)
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    n = len(actions)

    if kind == "M3":
        Z = np.asarray(template.Z, dtype=float)
        w = trace.q_context @ Z  # (n, K)
        C = np.asarray(template.C, dtype=float)
        C = np.broadcast_to(C - C.mean(), (Z.shape[1], C.size))
        G = risk_from_forecast(trace.reward_probs, w @ C) - trace.info_gain
        base = np.asarray(template.xi_base, dtype=float)  # (K, 4)
        scale = np.stack(
            [np.ones(len(cand)), cand[:, 2], cand[:, 3], cand[:, 3]], axis=1
        )  # (m, 4)
        xi = base[None] * scale[:, None, :]
        xi = xi - xi.mean(axis=-1, keepdims=True)  # (m, K, 4)
        gamma = cand[:, :2] @ w.T  # (m, n)
        xi_eff = np.einsum("nk,mkj->mnj", w, xi)
    else:
        C = np.asarray(template.C, dtype=float)
        G = risk_from_forecast(trace.reward_probs, C - C.mean()) - trace.info_gain
        if kind == "M1":
            gamma = np.repeat(cand[:, :1], n, axis=1)
        else:
            gamma = cand[:, :1] / (1.0 + cand[:, 1:2] * trace.arm_entropy[None, :])
        xi_eff = 0.0
    if not np.all(np.isfinite(G)):
        raise FloatingPointError("non-finite expected free energy in replay")
    logits = -gamma[:, :, None] * G[None] + xi_eff
    chosen = logits[:, np.arange(n), actions]
    return np.maximum(chosen - logsumexp(logits, axis=-1), LOG_FLOOR)


@dataclass
class GridSearchResult:
    best_params: dict[str, float]
    best_ll: float
    coarse_best: tuple[float, ...]
    search_trace: list[tuple[tuple[float, ...], float]] = field(default_factory=list)


def select_best(candidates: np.ndarray, lls: np.ndarray) -> int:
    """Index of the highest log-likelihood; near-ties go to the smallest parameter tuple."""
    order = np.lexsort(candidates.T[::-1])
    best = lls.max()
    for i in order:
        if lls[i] >= best - TIE_TOL:
            return int(i)
    raise AssertionError("unreachable")


def _neighbors(grid: Sequence[float], value: float) -> tuple[float, float]:
    i = list(grid).index(value)
    return grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]


def coarse_grid(kind: str) -> np.ndarray:
    if kind == "M1":
        return np.array(M1_COARSE)[:, None]
    if kind == "M2":
        return np.array(list(itertools.product(M2_COARSE_GAMMA, M2_COARSE_KAPPA)))
    if kind == "M3":
        return np.array(list(itertools.product(M3_GAMMA, M3_GAMMA, M3_HINT_SCALE, M3_ARM_SCALE)))
    raise ContractError(f"no search grid for {kind}")


def fine_grid(kind: str, coarse_best: tuple[float, ...]) -> np.ndarray | None:
    """Linearly spaced closed intervals spanning the coarse neighbors of the best point."""
    if kind == "M1":
        lo, hi = _neighbors(M1_COARSE, coarse_best[0])
        return np.linspace(lo, hi, M1_FINE_POINTS)[:, None]
    if kind == "M2":
        g = np.linspace(*_neighbors(M2_COARSE_GAMMA, coarse_best[0]), M2_FINE_POINTS)
        k = np.linspace(*_neighbors(M2_COARSE_KAPPA, coarse_best[1]), M2_FINE_POINTS)
        return np.array(list(itertools.product(g, k)))
    return None


def grid_search(
    kind: str,
    data: RunData,
    train_mask: np.ndarray,
    model: GenerativeModel,
    trace: ReplayTrace | None = None,
    template: AgentSpec | None = None,
) -> GridSearchResult:
    """Two-stage coarse-then-fine search (single stage for M3) maximizing training LL.

    The final choice is the best over every evaluated candidate, so the fine
    stage can never do worse than the coarse one.
    """
    if kind not in BAYESIAN_KINDS:
        raise ContractError(f"grid search is defined for {BAYESIAN_KINDS}, not {kind}")
    trace = trace if trace is not None else build_trace(data, model)
    mask = np.asarray(train_mask, dtype=bool)

    def score(cands: np.ndarray) -> np.ndarray:
        return batch_trial_logliks(kind, cands, trace, data.actions, template)[:, mask].sum(axis=1)

    coarse = coarse_grid(kind)
    coarse_ll = score(coarse)
    coarse_best = tuple(float(x) for x in coarse[select_best(coarse, coarse_ll)])
    stages = [(coarse, coarse_ll)]
    fine = fine_grid(kind, coarse_best)
    if fine is not None:
        stages.append((fine, score(fine)))
    cands = np.concatenate([c for c, _ in stages])
    lls = np.concatenate([ll for _, ll in stages])
    i = select_best(cands, lls)
    best = tuple(float(x) for x in cands[i])
    return GridSearchResult(
        best_params=dict(zip(PARAM_NAMES[kind], best)),
        best_ll=float(lls[i]),
        coarse_best=coarse_best,
        search_trace=[(tuple(float(x) for x in c), float(v)) for c, v in zip(cands, lls)],
    )


def aic(n_params: int, loglik: float) -> float:
    return 2.0 * n_params - 2.0 * loglik


def bic(n_params: int, loglik: float, n_obs: int) -> float:
    return n_params * float(np.log(n_obs)) - 2.0 * loglik


@dataclass
class FoldResult:
    fold: int
    best_params: dict[str, float]
    train_ll: float
    test_ll: float
    search_trace: list[tuple[tuple[float, ...], float]] = field(default_factory=list, repr=False)


@dataclass
class FitResult:
    kind: str
    n_params: int
    n_test: int
    folds: list[FoldResult]
    mean_test_ll: float
    se_test_ll: float
    aic: float
    bic: float

    def to_dict(self, include_trace: bool = False) -> dict[str, Any]:
        folds = []
        for f in self.folds:
            d = {"fold": f.fold, "best_params": f.best_params, "train_ll": f.train_ll, "test_ll": f.test_ll}
            if include_trace:
                d["search_trace"] = [[list(p), ll] for p, ll in f.search_trace]
            folds.append(d)
        return {
            "kind": self.kind,
            "n_params": self.n_params,
            "n_test": self.n_test,
            "mean_test_ll": self.mean_test_ll,
            "se_test_ll": self.se_test_ll,
            "aic": self.aic,
            "bic": self.bic,
            "folds": folds,
        }


def fold_masks(n_trials: int, n_folds: int = 5) -> list[np.ndarray]:
    """Boolean test masks for consecutive equal-size folds."""
    if n_folds < 2 or n_trials % n_folds:
        raise ConfigError(f"{n_trials} trials cannot be split into {n_folds} equal consecutive folds")
    size = n_trials // n_folds
    idx = np.arange(n_trials)
    return [(idx >= f * size) & (idx < (f + 1) * size) for f in range(n_folds)]


def cross_validate(
    kind: str,
    data: RunData,
    model: GenerativeModel,
    n_folds: int = 5,
    trace: ReplayTrace | None = None,
    template: AgentSpec | None = None,
) -> FitResult:
    """Fit on ``n_folds - 1`` consecutive blocks, score the held-out block, for every fold."""
    data = data.unlabeled()
    masks = fold_masks(data.n_trials, n_folds)
    trace = trace if trace is not None else build_trace(data, model)
    folds = []
    for f, test in enumerate(masks):
        search = grid_search(kind, data, ~test, model, trace=trace, template=template)
        spec = AgentSpec(kind, search.best_params) if template is None else replace(template, params=search.best_params)
        ll = batch_trial_logliks(kind, np.array([spec.param_tuple]), trace, data.actions, spec)[0]
        folds.append(FoldResult(f, search.best_params, float(ll[~test].sum()), float(ll[test].sum()), search.search_trace))
    test_lls = np.array([f.test_ll for f in folds])
    mean = float(test_lls.mean())
    se = float(test_lls.std(ddof=1) / np.sqrt(n_folds))
    p = N_FREE_PARAMS[kind]
    n_test = data.n_trials // n_folds
    return FitResult(kind, p, n_test, folds, mean, se, aic(p, mean), bic(p, mean, n_test))
