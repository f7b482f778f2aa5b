from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from valueprofiles import TaskConfig, build_model  # noqa: E402

SHIPPED_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.ini"


@pytest.fixture(scope="session")
def task():
    return TaskConfig()


@pytest.fixture(scope="session")
def model(task):
    return build_model(task)


@pytest.fixture(scope="session")
def shipped_config():
    return SHIPPED_CONFIG


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config._criterion_lines = []


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line per acceptance criterion for the end-of-run summary."""

    def _report(number: int, title: str, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number:>2}: {title} | {detail}"
        request.config._criterion_lines.append((number, line))
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(config._criterion_lines)
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def recover_outputs(tmp_path_factory, shipped_config):
    """Two independent invocations of the recover command on the shipped config."""
    from valueprofiles.cli import cmd_recover

    root = tmp_path_factory.mktemp("recover")
    result = cmd_recover(shipped_config, root / "a", jobs=1)
    cmd_recover(shipped_config, root / "b", jobs=1)
    return result, root / "a", root / "b"


@pytest.fixture(scope="session")
def analysis(recover_outputs):
    from valueprofiles.cli import analyze

    return analyze(recover_outputs[1])
