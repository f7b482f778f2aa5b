"""Closed-loop analyses of fitted models around context and arm reversals."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .agents import AgentSpec
from .bandit import CONTEXTS, HINT, STABLE, VOLATILE, TaskConfig
from .errors import ContractError
from .generative_model import ModelHyperParams, build_model
from .simulation import TrialRecord, simulate

Runs = Sequence[Sequence[TrialRecord]]

DIRECTIONS = {"vol_to_stable": (VOLATILE, STABLE), "stable_to_vol": (STABLE, VOLATILE), "any": None}


@dataclass(frozen=True)
class AlignedSeries:
    """Event-aligned means; ``mean`` and ``se`` have one column per quantity."""

    columns: tuple[str, ...]
    offsets: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    counts: np.ndarray
    n_events: int

    @property
    def empty(self) -> bool:
        return self.n_events == 0

    def at(self, offset: int) -> np.ndarray:
        return self.mean[list(self.offsets).index(offset)]


def reversal_events(records: Sequence[TrialRecord], direction: str = "any") -> list[int]:
    """Trial indices at which the ground-truth context switches."""
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {tuple(DIRECTIONS)}, got {direction!r}")
    ctx = [r.truth.context for r in records]
    want = DIRECTIONS[direction]
    return [
        t
        for t in range(1, len(ctx))
        if ctx[t] != ctx[t - 1] and (want is None or (ctx[t - 1], ctx[t]) == want)
    ]


def _sem(x: np.ndarray) -> np.ndarray:
    if len(x) < 2:
        return np.full(x.shape[1:], np.nan)
    return x.std(axis=0, ddof=1) / np.sqrt(len(x))


def _align(runs: Runs, values: Sequence[np.ndarray], columns, direction: str, window: tuple[int, int]) -> AlignedSeries:
    pre, post = window
    by_offset: dict[int, list[np.ndarray]] = {o: [] for o in range(-pre, post + 1)}
    n_events = 0
    for records, vals in zip(runs, values):
        for t in reversal_events(records, direction):
            n_events += 1
            for o in by_offset:
                if 0 <= t + o < len(records):
                    by_offset[o].append(vals[t + o])
    kept = [o for o, v in by_offset.items() if v]
    k = len(columns)
    if not kept:
        return AlignedSeries(tuple(columns), np.array([], dtype=int), np.empty((0, k)), np.empty((0, k)), np.array([], dtype=int), 0)
    stacks = [np.array(by_offset[o]).reshape(-1, k) for o in kept]
    return AlignedSeries(
        tuple(columns),
        np.array(kept),
        np.array([s.mean(axis=0) for s in stacks]),
        np.array([_sem(s) for s in stacks]),
        np.array([len(s) for s in stacks]),
        n_events,
    )


def _weights(records: Sequence[TrialRecord]) -> np.ndarray:
    if any(r.weights is None for r in records):
        raise ContractError("profile weights are only defined for M3 records")
    return np.array([r.weights for r in records])


def align_to_reversals(runs: Runs, direction: str, window: tuple[int, int] = (10, 40)) -> AlignedSeries:
    """Profile weights (w0, w1) averaged over every reversal event of ``direction``."""
    weights = [_weights(r) for r in runs]
    cols = tuple(f"w{k}" for k in range(weights[0].shape[1])) if weights else ("w0", "w1")
    return _align(runs, weights, cols, direction, window)


def reversal_aligned_gamma(
    runs_by_model: Mapping[str, Runs], window: tuple[int, int] = (20, 20), direction: str = "any"
) -> dict[str, AlignedSeries]:
    out = {}
    for name, runs in runs_by_model.items():
        gammas = []
        for records in runs:
            if any(r.gamma_eff is None for r in records):
                raise ContractError(f"{name} records carry no effective precision")
            gammas.append(np.array([r.gamma_eff for r in records]))
        out[name] = _align(runs, gammas, ("gamma",), direction, window)
    return out


@dataclass(frozen=True)
class ContextStats:
    context: str
    n_trials: int
    mean_gamma: float
    hint_rate: float


def context_conditional_stats(runs: Runs) -> dict[str, ContextStats]:
    """Mean effective precision and hint-request rate per ground-truth context."""
    rows = [r for records in runs for r in records]
    out = {}
    for c, name in enumerate(CONTEXTS):
        sel = [r for r in rows if r.truth.context == c]
        if not sel:
            continue
        gammas = [r.gamma_eff for r in sel]
        mean_gamma = float("nan") if any(g is None for g in gammas) else float(np.mean(gammas))
        hint_rate = sum(r.action == HINT for r in sel) / len(sel)
        out[name] = ContextStats(name, len(sel), mean_gamma, float(hint_rate))
    return out


@dataclass(frozen=True)
class StabilityResult:
    w0: np.ndarray  # (n_sims, n_trials)
    micro_reversal: np.ndarray
    identical_profiles: bool

    @property
    def mean_w0(self) -> np.ndarray:
        return self.w0.mean(axis=0)

    @property
    def mean_w1(self) -> np.ndarray:
        return 1.0 - self.mean_w0

    @property
    def se_w0(self) -> np.ndarray | None:
        return None if len(self.w0) < 2 else _sem(self.w0)


def pure_volatile_task(n_trials: int, template: TaskConfig | None = None, seed: int = 0) -> TaskConfig:
    template = template or TaskConfig()
    return replace(template, n_trials=n_trials, context_block_len=n_trials, first_context="volatile", seed=seed)


def profile_stability(
    spec: AgentSpec,
    n_sims: int = 10,
    n_trials: int = 200,
    base_seed: int = 0,
    task: TaskConfig | None = None,
    hyper: ModelHyperParams | None = None,
) -> StabilityResult:
    """Weight trajectories of ``spec`` in a volatile regime with no context reversals."""
    if spec.kind != "M3":
        raise ContractError("profile stability is defined for M3 agents")
    cfg = pure_volatile_task(n_trials, task)
    model = build_model(cfg, hyper)
    w0 = np.array([[r.weights[0] for r in simulate(spec, cfg, model, seed=base_seed + i)] for i in range(n_sims)])
    t = np.arange(n_trials)
    micro = (t > 0) & (t % cfg.volatile_arm_switch_period == 0)
    profiles = spec.profiles()
    identical = all(
        np.allclose(p.xi_logits, profiles[0].xi_logits)
        and np.allclose(p.C_logits, profiles[0].C_logits)
        and p.gamma == profiles[0].gamma
        for p in profiles
    )
    return StabilityResult(w0, micro, identical)


@dataclass(frozen=True)
class MicroReversalTest:
    mean_diff: float
    ci_low: float
    ci_high: float
    n_boot: int

    @property
    def contains_zero(self) -> bool:
        return self.ci_low <= 0.0 <= self.ci_high


def micro_reversal_test(
    result: StabilityResult, n_boot: int = 2000, seed: int = 0, start: int = 1, lag: int = 1, level: float = 0.95
) -> MicroReversalTest:
    """Mean |Δw0| on trials following a micro-reversal minus the mean on all other trials.

    ``lag`` is the distance from the reversal trial to the first trial whose
    weights can reflect the new contingency. The CI comes from a percentile
    bootstrap that resamples whole simulations.
    """
    dw = np.abs(np.diff(result.w0, axis=1))  # dw[:, t-1] = |w0[t] - w0[t-1]|
    trials = np.arange(1, result.w0.shape[1])
    reversal_trials = np.flatnonzero(result.micro_reversal)
    marked = np.isin(trials, reversal_trials + lag)
    keep = trials >= start
    on, off = marked & keep, ~marked & keep
    if not on.any() or not off.any():
        raise ValueError("need trials both on and off micro-reversals")

    def stat(idx):
        d = dw[idx]
        return d[:, on].mean() - d[:, off].mean()

    rng = np.random.default_rng(seed)
    n = len(dw)
    boots = np.array([stat(rng.integers(0, n, size=n)) for _ in range(n_boot)])
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(boots, [alpha, 1.0 - alpha])
    return MicroReversalTest(float(stat(np.arange(n))), float(lo), float(hi), n_boot)


def simulate_runs(spec: AgentSpec, task: TaskConfig, hyper: ModelHyperParams | None, seeds: Sequence[int]) -> list[list[TrialRecord]]:
    model = build_model(task, hyper)
    return [simulate(spec, task, model, seed=s) for s in seeds]
