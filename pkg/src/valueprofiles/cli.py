"""Command-line entry point: ``valueprofiles simulate|recover|analyze``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .agents import AgentSpec
from .bandit import ACTIONS, ARMS, CHOICE_OUTCOMES, CONTEXTS, HINT_OUTCOMES, REWARD_OUTCOMES
from .config import load_config
from .errors import ConfigError
from .generative_model import build_model
from .mechanisms import (
    align_to_reversals,
    context_conditional_stats,
    micro_reversal_test,
    profile_stability,
    reversal_aligned_gamma,
    simulate_runs,
)
from .recovery import ConfusionMatrix, RecoveryResult, fold_agreement, run_recovery, summarize_winners
from .simulation import TrialRecord, simulate
from . import svg

TRIAL_COLUMNS = (
    "run_id", "trial", "true_context", "true_better_arm", "action", "obs_hint", "obs_reward",
    "obs_choice", "q_ctx_volatile", "q_arm_left", "w0", "w1", "gamma_eff", "xi_hint_eff", "action_loglik",
)  # fmt: skip


def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(value)


def _round(obj: Any) -> Any:
    if isinstance(obj, float):
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def trial_rows(run_id: int, records: Sequence[TrialRecord]):
    for r in records:
        yield (
            run_id,
            r.trial,
            CONTEXTS[r.truth.context],
            ARMS[r.truth.better_arm],
            ACTIONS[r.action],
            HINT_OUTCOMES[r.obs.hint],
            REWARD_OUTCOMES[r.obs.reward],
            CHOICE_OUTCOMES[r.obs.choice],
            r.q_ctx_volatile,
            r.q_arm_left,
            None if r.weights is None else r.weights[0],
            None if r.weights is None else r.weights[1],
            r.gamma_eff,
            r.xi_hint_eff,
            r.action_loglik,
        )


class _Staging:
    """Collect outputs in a scratch directory and move them into place only on success."""

    def __init__(self, out_dir: Path) -> None:
        self.out_dir = out_dir
        out_dir.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir.parent))

    def write(self, name: str, text: str) -> None:
        path = self.tmp / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)

    def commit(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for src in sorted(self.tmp.rglob("*")):
            if src.is_file():
                dst = self.out_dir / src.relative_to(self.tmp)
                dst.parent.mkdir(parents=True, exist_ok=True)
                os.replace(src, dst)
        self.discard()

    def discard(self) -> None:
        shutil.rmtree(self.tmp, ignore_errors=True)


def _staged(out_dir, fn):
    stage = _Staging(Path(out_dir))
    try:
        fn(stage)
    except BaseException:
        stage.discard()
        raise
    stage.commit()


def cmd_simulate(config_path, out_dir) -> list[Path]:
    cfg = load_config(config_path)
    spec = cfg.agent(cfg.simulate.kind)
    model = build_model(cfg.task, cfg.hyper)
    names = []

    def body(stage):
        for run in range(cfg.simulate.runs):
            records = simulate(spec, cfg.task, model, seed=cfg.simulate.base_seed + run)
            name = f"{spec.kind}_run{run:03d}.csv"
            stage.write(name, csv_text(TRIAL_COLUMNS, trial_rows(run, records)))
            names.append(name)

    _staged(out_dir, body)
    return [Path(out_dir) / n for n in names]


def matrix_csv(m: ConfusionMatrix) -> str:
    header = ["generator"] + [c for model in m.models for c in (model, f"{model}_se")] + ["winner"]
    winners = m.winners()
    rows = []
    for i, g in enumerate(m.generators):
        cells = [v for j in range(len(m.models)) for v in (m.mean[i, j], m.se[i, j])]
        rows.append([g, *cells, m.models[winners[i]]])
    return csv_text(header, rows)


def matrix_table(m: ConfusionMatrix, title: str) -> str:
    winners = m.winners()
    width = 18
    lines = [title, "generator".ljust(12) + "".join(model.rjust(width) for model in m.models)]
    for i, g in enumerate(m.generators):
        cells = []
        for j in range(len(m.models)):
            star = "*" if winners[i] == j else " "
            cells.append(f"{m.mean[i, j]:.1f} ± {m.se[i, j]:.1f}{star}".rjust(width))
        lines.append(g.ljust(12) + "".join(cells))
    return "\n".join(lines) + "\n"


def summary_text(result: RecoveryResult) -> str:
    parts = [
        matrix_table(result.aic, "AIC (mean ± SE across runs; * marks the winner per generator)"),
        matrix_table(result.test_ll, "Mean held-out log-likelihood per fold (mean ± SE across runs)"),
        matrix_table(result.bic, "BIC (n = trials per test fold)"),
        "Winners by AIC",
    ]
    for w in summarize_winners(result.aic):
        tie = " (tie)" if w.tie else ""
        parts.append(f"  {w.generator:<10} {w.winner} beats {w.runner_up} by {w.delta:.1f}{tie}")
    agreement = fold_agreement(result.param_recovery)
    if agreement:
        parts.append("")
        parts.append("M3-on-M3 fold agreement per run: " + ", ".join(f"run {r}: {n}/{result.config.n_folds}" for r, n in agreement.items()))
    return "\n".join(parts) + "\n"


def write_recovery(result: RecoveryResult, stage: _Staging, config_text: str) -> None:
    stage.write("config.ini", config_text)
    stage.write("aic_confusion.csv", matrix_csv(result.aic))
    stage.write("ll_confusion.csv", matrix_csv(result.test_ll))
    stage.write("bic_confusion.csv", matrix_csv(result.bic))
    cols = ("run", "fold", "gamma0", "gamma1", "hint_scale", "arm_scale", "xi_hint_profile0", "xi_hint_profile1", "hint_ratio")
    stage.write("param_recovery.csv", csv_text(cols, ([r[c] for c in cols] for r in result.param_recovery)))
    stage.write("summary.txt", summary_text(result))
    for (gen, run), out in sorted(result.outcomes.items()):
        for kind, fit in out.fits.items():
            doc = {"generator": gen, "run": run, "seed": out.seed, **fit.to_dict(include_trace=True)}
            stage.write(f"fits/{gen}_run{run}_{kind}.json", json.dumps(_round(doc), indent=1, sort_keys=True) + "\n")


def cmd_recover(config_path, out_dir, jobs: int | None = None) -> RecoveryResult:
    cfg = load_config(config_path)
    config_text = Path(config_path).read_text()
    result = run_recovery(cfg.experiment, jobs=jobs)
    _staged(out_dir, lambda stage: write_recovery(result, stage, config_text))
    return result


def _fold0_params(fit_dir: Path, generator: str, run: int, kind: str) -> dict[str, float]:
    path = fit_dir / "fits" / f"{generator}_run{run}_{kind}.json"
    if not path.exists():
        raise FileNotFoundError(f"missing fit {path}; run `valueprofiles recover` first")
    doc = json.loads(path.read_text())
    return doc["folds"][0]["best_params"]


def analyze(fit_dir, n_sims: int = 10, n_trials: int = 200) -> dict[str, Any]:
    """Compute all mechanism panels from completed recovery outputs."""
    fit_dir = Path(fit_dir)
    config_path = fit_dir / "config.ini"
    if not config_path.exists():
        raise FileNotFoundError(f"{config_path} not found; is {fit_dir} a recover output directory?")
    cfg = load_config(config_path)
    exp = cfg.experiment
    specs = {k: AgentSpec(k, _fold0_params(fit_dir, "M3", 0, k)) for k in ("M1", "M2", "M3")}
    seeds = [exp.run_seed(r) for r in range(exp.runs_per_generator)]
    runs = {k: simulate_runs(s, cfg.task, cfg.hyper, seeds) for k, s in specs.items()}
    stability = profile_stability(specs["M3"], n_sims=n_sims, n_trials=n_trials, base_seed=exp.base_seed, task=cfg.task, hyper=cfg.hyper)
    return {
        "specs": specs,
        "runs": runs,
        "A": align_to_reversals(runs["M3"], "vol_to_stable", (10, 40)),
        "B": align_to_reversals(runs["M3"], "stable_to_vol", (10, 40)),
        "C": reversal_aligned_gamma(runs, (20, 20)),
        "DE": {k: context_conditional_stats(r) for k, r in runs.items()},
        "F": stability,
        "micro": micro_reversal_test(stability),
    }


def _aligned_csv(series, label_col: str | None = None) -> tuple[list[str], list[list]]:
    header = ["offset"] + [c for col in series.columns for c in (f"mean_{col}", f"se_{col}")] + ["n"]
    rows = []
    for i, o in enumerate(series.offsets):
        vals = [v for j in range(len(series.columns)) for v in (series.mean[i, j], series.se[i, j])]
        rows.append([int(o), *vals, int(series.counts[i])])
    return header, rows


def write_analysis(panels: dict[str, Any], stage: _Staging) -> None:
    for key, direction in (("A", "volatile → stable"), ("B", "stable → volatile")):
        s = panels[key]
        header, rows = _aligned_csv(s)
        stage.write(f"panel_{key.lower()}.csv", csv_text(header, rows))
        lines = [svg.Line(f"w{j}", s.offsets, s.mean[:, j], s.se[:, j]) for j in range(len(s.columns))]
        stage.write(
            f"panel_{key.lower()}.svg",
            svg.line_plot(lines, f"Profile weights around {direction} reversals", "trials from reversal", "weight", vlines=[0], ylim=(0, 1)),
        )

    rows = []
    lines = []
    for model, s in panels["C"].items():
        rows += [[model, int(o), s.mean[i, 0], s.se[i, 0], int(s.counts[i])] for i, o in enumerate(s.offsets)]
        lines.append(svg.Line(model, s.offsets, s.mean[:, 0], s.se[:, 0]))
    stage.write("panel_c.csv", csv_text(["model", "offset", "mean_gamma", "se_gamma", "n"], rows))
    stage.write("panel_c.svg", svg.line_plot(lines, "Effective precision around context reversals", "trials from reversal", "gamma", vlines=[0]))

    stats = panels["DE"]
    d_rows = [[m, c, s.mean_gamma, s.n_trials] for m, by_ctx in stats.items() for c, s in by_ctx.items()]
    e_rows = [[m, c, s.hint_rate, s.n_trials] for m, by_ctx in stats.items() for c, s in by_ctx.items()]
    stage.write("panel_d.csv", csv_text(["model", "context", "mean_gamma", "n_trials"], d_rows))
    stage.write("panel_e.csv", csv_text(["model", "context", "hint_rate", "n_trials"], e_rows))
    for key, attr, title in (("d", "mean_gamma", "Context-conditional precision"), ("e", "hint_rate", "Context-conditional hint rate")):
        series = {m: [getattr(by_ctx[c], attr) if c in by_ctx else float("nan") for c in CONTEXTS] for m, by_ctx in stats.items()}
        stage.write(f"panel_{key}.svg", svg.bar_plot(CONTEXTS, series, title, attr))

    f = panels["F"]
    trials = np.arange(f.w0.shape[1])
    stage.write(
        "panel_f.csv",
        csv_text(["trial", "mean_w0", "mean_w1", "is_micro_reversal"], zip(trials, f.mean_w0, f.mean_w1, f.micro_reversal)),
    )
    se = f.se_w0
    stage.write(
        "panel_f.svg",
        svg.line_plot(
            [svg.Line("w0", trials, f.mean_w0, se), svg.Line("w1", trials, f.mean_w1, se)],
            "Profile weights in a pure volatile regime",
            "trial",
            "weight",
            vlines=list(trials[f.micro_reversal]),
            ylim=(0, 1),
        ),
    )
    m = panels["micro"]
    note = "profiles identical; weights do not affect behavior\n" if f.identical_profiles else ""
    stage.write(
        "micro_reversal_test.txt",
        note
        + f"mean |dw0| after micro-reversal minus elsewhere: {fmt(m.mean_diff)}\n"
        + f"95% bootstrap CI: [{fmt(m.ci_low)}, {fmt(m.ci_high)}] (contains 0: {m.contains_zero})\n",
    )


def cmd_analyze(fit_dir, out_dir) -> dict[str, Any]:
    panels = analyze(fit_dir)
    _staged(out_dir, lambda stage: write_analysis(panels, stage))
    return panels


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="valueprofiles", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="write per-trial logs for the [simulate] agent")
    p.add_argument("config")
    p.add_argument("out_dir")
    p = sub.add_parser("recover", help="run the model-recovery experiment")
    p.add_argument("config")
    p.add_argument("out_dir")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    p = sub.add_parser("analyze", help="mechanism panels from recover outputs")
    p.add_argument("fit_dir")
    p.add_argument("out_dir")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cmd_simulate(args.config, args.out_dir)
        elif args.command == "recover":
            result = cmd_recover(args.config, args.out_dir, jobs=args.jobs)
            print(summary_text(result), end="")
        else:
            cmd_analyze(args.fit_dir, args.out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report and map to exit code 2
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
