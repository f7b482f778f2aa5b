"""INI configuration files: one section per concern, keys named after fields.

Example::

    [task]
    n_trials = 400
    p_reward_volatile = 0.70, 0.30

    [model]
    context_stay_prob = 0.98

    [experiment]
    generators = M1, M2, M3, EpsGreedy, SoftmaxQ
    runs_per_generator = 5

    [generator.M3]
    gamma0 = 2.0

    [simulate]
    kind = M3
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .agents import KINDS, PARAM_NAMES, AgentSpec
from .bandit import TaskConfig
from .errors import ConfigError
from .generative_model import ModelHyperParams
from .recovery import ExperimentConfig

REQUIRED_SECTIONS = ("task", "model", "experiment")
EXPERIMENT_KEYS = ("generators", "runs_per_generator", "base_seed", "n_folds")
SIMULATE_KEYS = ("kind", "runs", "base_seed")


@dataclass(frozen=True)
class SimulateConfig:
    kind: str = "M3"
    runs: int = 1
    base_seed: int = 0


@dataclass(frozen=True)
class AppConfig:
    task: TaskConfig
    hyper: ModelHyperParams
    experiment: ExperimentConfig
    simulate: SimulateConfig
    agents: dict[str, AgentSpec] = field(default_factory=dict)

    def agent(self, kind: str) -> AgentSpec:
        return self.agents.get(kind) or AgentSpec(kind)


class _Located:
    """Map ``(section, key)`` to the line where it is defined, for diagnostics."""

    def __init__(self, path: Path, text: str) -> None:
        self.path = path
        self.lines: dict[tuple[str, str | None], int] = {}
        section = None
        for n, line in enumerate(text.splitlines(), 1):
            m = re.match(r"\s*\[([^\]]+)\]", line)
            if m:
                section = m.group(1).strip()
                self.lines[(section, None)] = n
                continue
            m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
            if m and section is not None:
                self.lines[(section, m.group(1).strip().lower())] = n

    def error(self, section: str, key: str | None, message: str) -> ConfigError:
        line = self.lines.get((section, key), self.lines.get((section, None)))
        where = f"{self.path}:{line}" if line else str(self.path)
        return ConfigError(f"{where}: [{section}]{' ' + key if key else ''}: {message}")


def _parse_value(raw: str, annotation: Any) -> Any:
    kind = str(annotation)
    if "tuple" in kind:
        return tuple(float(x) for x in raw.split(","))
    if kind in ("int", "<class 'int'>"):
        return int(raw)
    if kind in ("float", "<class 'float'>"):
        return float(raw)
    return raw.strip()


def _section(parser, loc: _Located, name: str, cls) -> dict[str, Any]:
    types = {f.name: f.type for f in fields(cls)}
    out = {}
    for key, raw in parser[name].items():
        if key not in types:
            raise loc.error(name, key, f"unknown key; expected one of {sorted(types)}")
        try:
            out[key] = _parse_value(raw, types[key])
        except ValueError as exc:
            raise loc.error(name, key, f"cannot parse {raw!r}: {exc}") from None
    return out


def _build(loc: _Located, section: str, factory, values):
    try:
        return factory(**values)
    except (ConfigError, TypeError) as exc:
        # point at the offending key when the message names one
        key = next((k for k in values if re.search(rf"\b{re.escape(k)}\b", str(exc))), None)
        raise loc.error(section, key, str(exc)) from None


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from None
    loc = _Located(path, text)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    for name in REQUIRED_SECTIONS:
        if not parser.has_section(name):
            raise ConfigError(f"{path}: missing required section [{name}]")
    for name in parser.sections():
        if name not in REQUIRED_SECTIONS + ("simulate",) and not name.startswith("generator."):
            raise loc.error(name, None, "unknown section")

    task = _build(loc, "task", TaskConfig, _section(parser, loc, "task", TaskConfig))
    hyper = _build(loc, "model", ModelHyperParams, _section(parser, loc, "model", ModelHyperParams))

    agents: dict[str, AgentSpec] = {}
    for name in parser.sections():
        if not name.startswith("generator."):
            continue
        kind = name.split(".", 1)[1]
        if kind not in KINDS:
            raise loc.error(name, None, f"unknown agent kind; expected one of {KINDS}")
        params = {}
        for key, raw in parser[name].items():
            if key not in PARAM_NAMES[kind]:
                raise loc.error(name, key, f"unknown parameter; expected one of {PARAM_NAMES[kind]}")
            try:
                params[key] = float(raw)
            except ValueError:
                raise loc.error(name, key, f"cannot parse {raw!r} as a number") from None
        agents[kind] = _build(loc, name, AgentSpec, {"kind": kind, "params": params})

    exp = parser["experiment"]
    for key in exp:
        if key not in EXPERIMENT_KEYS:
            raise loc.error("experiment", key, f"unknown key; expected one of {EXPERIMENT_KEYS}")
    try:
        labels = [g.strip() for g in exp.get("generators", "M1, M2, M3, EpsGreedy, SoftmaxQ").split(",") if g.strip()]
        runs = int(exp.get("runs_per_generator", "5"))
        base_seed = int(exp.get("base_seed", "0"))
        n_folds = int(exp.get("n_folds", "5"))
    except ValueError as exc:
        raise loc.error("experiment", None, str(exc)) from None
    for g in labels:
        if g not in KINDS:
            raise loc.error("experiment", "generators", f"unknown generator {g!r}")
    experiment = _build(
        loc,
        "experiment",
        ExperimentConfig,
        {
            "task": task,
            "hyper": hyper,
            "generators": tuple(agents.get(g) or AgentSpec(g) for g in labels),
            "runs_per_generator": runs,
            "base_seed": base_seed,
            "n_folds": n_folds,
        },
    )

    simulate = SimulateConfig()
    if parser.has_section("simulate"):
        values = _section(parser, loc, "simulate", SimulateConfig)
        simulate = _build(loc, "simulate", SimulateConfig, values)
        if simulate.kind not in KINDS:
            raise loc.error("simulate", "kind", f"unknown agent kind {simulate.kind!r}")
    return AppConfig(task, hyper, experiment, simulate, agents)


def task_to_ini(task: TaskConfig) -> str:
    lines = ["[task]"]
    for key, value in task.to_dict().items():
        if isinstance(value, tuple):
            value = ", ".join(repr(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def task_from_ini(text: str) -> TaskConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(text)
    loc = _Located(Path("<string>"), text)
    return _build(loc, "task", TaskConfig, _section(parser, loc, "task", TaskConfig))
