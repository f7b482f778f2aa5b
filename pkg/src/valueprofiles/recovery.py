"""Model-recovery experiment: simulate every generator, fit M1/M2/M3 blind, tabulate."""

from __future__ import annotations

import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .agents import BAYESIAN_KINDS, AgentSpec
from .bandit import TaskConfig
from .errors import ConfigError
from .fitting import FitResult, RunData, build_trace, cross_validate
from .generative_model import ModelHyperParams, build_model
from .simulation import simulate

DEFAULT_GENERATORS = tuple(AgentSpec(k) for k in ("M1", "M2", "M3", "EpsGreedy", "SoftmaxQ"))


class RecoveryError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    task: TaskConfig = field(default_factory=TaskConfig)
    hyper: ModelHyperParams = field(default_factory=ModelHyperParams)
    generators: tuple[AgentSpec, ...] = DEFAULT_GENERATORS
    runs_per_generator: int = 5
    base_seed: int = 0
    n_folds: int = 5
    fitted_models: tuple[str, ...] = BAYESIAN_KINDS

    def __post_init__(self) -> None:
        if self.runs_per_generator < 1:
            raise ConfigError("runs_per_generator must be at least 1")
        labels = [g.kind for g in self.generators]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"generator kinds must be unique, got {labels}")
        for kind in self.fitted_models:
            if kind not in BAYESIAN_KINDS:
                raise ConfigError(f"cannot fit {kind}; fittable kinds are {BAYESIAN_KINDS}")
        if self.task.n_trials % self.n_folds:
            raise ConfigError(f"n_trials={self.task.n_trials} is not divisible by n_folds={self.n_folds}")

    @property
    def generator_labels(self) -> tuple[str, ...]:
        return tuple(g.kind for g in self.generators)

    def run_seed(self, run: int) -> int:
        return self.base_seed + run


@dataclass
class RunOutcome:
    generator: str
    run: int
    seed: int
    data: RunData
    fits: dict[str, FitResult]


@dataclass(frozen=True)
class ConfusionMatrix:
    """Generator-by-fitted-model table of mean and standard error across runs."""

    metric: str
    generators: tuple[str, ...]
    models: tuple[str, ...]
    mean: np.ndarray
    se: np.ndarray
    lower_is_better: bool

    def winners(self) -> list[int]:
        pick = np.argmin if self.lower_is_better else np.argmax
        return [int(pick(row)) for row in self.mean]

    def cell(self, generator: str, model: str) -> tuple[float, float]:
        i, j = self.generators.index(generator), self.models.index(model)
        return float(self.mean[i, j]), float(self.se[i, j])


@dataclass(frozen=True)
class WinnerRow:
    generator: str
    winner: str
    runner_up: str | None
    delta: float
    tie: bool


def summarize_winners(matrix: ConfusionMatrix) -> list[WinnerRow]:
    """Winner per generator and its margin over the runner-up; ties go to the lower index."""
    rows = []
    sign = 1.0 if matrix.lower_is_better else -1.0
    for g, values in zip(matrix.generators, matrix.mean):
        order = np.argsort(sign * values, kind="stable")
        win = int(order[0])
        if len(order) == 1:
            rows.append(WinnerRow(g, matrix.models[win], None, float("nan"), False))
            continue
        second = int(order[1])
        delta = float(abs(values[second] - values[win]))
        rows.append(WinnerRow(g, matrix.models[win], matrix.models[second], delta, delta == 0.0))
    return rows


def standard_error(values: np.ndarray, axis: int = 0) -> np.ndarray:
    n = values.shape[axis]
    if n < 2:
        return np.full(np.delete(values.shape, axis), np.nan)
    return values.std(axis=axis, ddof=1) / np.sqrt(n)


def _recover_one(job: tuple) -> RunOutcome:
    spec, run, seed, task, hyper, n_folds, fitted = job
    try:
        model = build_model(task, hyper)
        records = simulate(spec, task, model, seed=seed)
        data = RunData.from_records(records, label=spec.kind, seed=seed)
        blind = data.unlabeled()
        trace = build_trace(blind, model)
        fits = {k: cross_validate(k, blind, model, n_folds=n_folds, trace=trace) for k in fitted}
    except Exception as exc:
        raise RecoveryError(f"run {spec.kind}#{run} (seed {seed}) failed: {exc}") from exc
    return RunOutcome(spec.kind, run, seed, data, fits)


@dataclass
class RecoveryResult:
    config: ExperimentConfig
    outcomes: dict[tuple[str, int], RunOutcome]
    aic: ConfusionMatrix
    test_ll: ConfusionMatrix
    bic: ConfusionMatrix
    param_recovery: list[dict]

    def fits_for(self, generator: str, run: int) -> dict[str, FitResult]:
        return self.outcomes[(generator, run)].fits


def _matrix(config, outcomes, metric: str, lower_is_better: bool) -> ConfusionMatrix:
    gens, models = config.generator_labels, config.fitted_models
    values = np.array(
        [
            [[getattr(outcomes[(g, r)].fits[m], metric) for m in models] for g in gens]
            for r in range(config.runs_per_generator)
        ]
    )  # (runs, generators, models)
    return ConfusionMatrix(metric, gens, models, values.mean(axis=0), standard_error(values), lower_is_better)


def m3_parameter_rows(outcomes: dict[tuple[str, int], RunOutcome], template: AgentSpec | None = None) -> list[dict]:
    """Per-fold recovered M3 parameters for M3-generated runs, with effective hint logits."""
    rows = []
    for (gen, run), out in sorted(outcomes.items()):
        if gen != "M3" or "M3" not in out.fits:
            continue
        for fold in out.fits["M3"].folds:
            spec = AgentSpec("M3", fold.best_params) if template is None else AgentSpec(
                "M3", fold.best_params, template.C, template.xi_base, template.Z
            )
            hints = [float(p.xi_raw[1]) for p in spec.profiles()]
            rows.append(
                {
                    "run": run,
                    "fold": fold.fold,
                    **fold.best_params,
                    "xi_hint_profile0": hints[0],
                    "xi_hint_profile1": hints[1],
                    "hint_ratio": hints[0] / hints[1] if hints[1] else float("inf"),
                }
            )
    return rows


def fold_agreement(rows: Sequence[dict]) -> dict[int, int]:
    """Per run, the number of folds sharing that run's most common M3 selection."""
    by_run: dict[int, Counter] = {}
    for r in rows:
        key = (r["gamma0"], r["gamma1"], r["hint_scale"], r["arm_scale"])
        by_run.setdefault(r["run"], Counter())[key] += 1
    return {run: c.most_common(1)[0][1] for run, c in sorted(by_run.items())}


def representative_run(rows: Sequence[dict]) -> int | None:
    """Run with the highest fold-to-fold agreement (lowest index on ties)."""
    agreement = fold_agreement(rows)
    if not agreement:
        return None
    return max(agreement, key=lambda run: (agreement[run], -run))


def run_recovery(config: ExperimentConfig, jobs: int | None = 1) -> RecoveryResult:
    """Simulate ``runs_per_generator`` sessions per generator and cross-validate every fitted model.

    Jobs are independent; results are keyed by (generator, run) so the tables
    do not depend on completion order.
    """
    work = [
        (spec, run, config.run_seed(run), config.task, config.hyper, config.n_folds, config.fitted_models)
        for spec in config.generators
        for run in range(config.runs_per_generator)
    ]
    jobs = jobs or os.cpu_count() or 1
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_recover_one, work))
    else:
        results = [_recover_one(job) for job in work]
    outcomes = {(r.generator, r.run): r for r in results}
    m3_template = next((g for g in config.generators if g.kind == "M3"), None)
    return RecoveryResult(
        config=config,
        outcomes=outcomes,
        aic=_matrix(config, outcomes, "aic", True),
        test_ll=_matrix(config, outcomes, "mean_test_ll", False),
        bic=_matrix(config, outcomes, "bic", True),
        param_recovery=m3_parameter_rows(outcomes, m3_template),
    )
