import json
import os
import subprocess
import sys

import numpy as np
import pytest

from bgp_blindspot.dataset import FeatureSchema, FeatureSeries
from bgp_blindspot.evaluation import ExperimentConfig

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """Collect one pass/fail line per acceptance criterion for the terminal summary."""

    def record(number, name, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        _ACCEPTANCE_LINES.append(f"[{status}] criterion {number}: {name}  {detail}".rstrip())
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def schema10():
    return FeatureSchema(tuple(f"f{i}" for i in range(10)))


@pytest.fixture
def small_series():
    schema = FeatureSchema(("a", "b", "c"))
    values = np.array([[1.0, 10.0, 5.0], [2.0, 20.0, 5.0], [3.0, 30.0, 5.0], [4.0, 40.0, 5.0]])
    return FeatureSeries(schema, values)


def run_cli(*args, env=None, check=True):
    full_env = dict(os.environ)
    full_env.pop("BGPBS_SEED", None)
    if env:
        full_env.update(env)
    proc = subprocess.run(
        [sys.executable, "-m", "bgp_blindspot", *args],
        capture_output=True, text=True, env=full_env,
    )
    if check and proc.returncode != 0:
        raise AssertionError(f"exit {proc.returncode}: {proc.stderr}")
    return proc


@pytest.fixture(scope="session")
def default_evaluations(tmp_path_factory):
    """Two CLI ``evaluate`` runs of the default experiment config.

    Returns ``(dir_a, dir_b, seconds_for_first_run)``.
    """
    import time

    root = tmp_path_factory.mktemp("default_eval")
    config = root / "config.json"
    config.write_text(json.dumps(ExperimentConfig().to_dict()), encoding="utf-8")
    dirs = []
    elapsed = None
    for name in ("run_a", "run_b"):
        t0 = time.perf_counter()
        run_cli("evaluate", "--config", str(config), "--out", str(root / name))
        if elapsed is None:
            elapsed = time.perf_counter() - t0
        dirs.append(root / name)
    return dirs[0], dirs[1], elapsed


@pytest.fixture(scope="session")
def default_report(default_evaluations):
    return json.loads((default_evaluations[0] / "report.json").read_text(encoding="utf-8"))
