"""Shared fixtures and the acceptance-criteria result banner."""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

STUB_DIR = Path(__file__).parent / "stubs"
DATA_DIR = Path(__file__).parent / "data"

# One human-readable line per acceptance criterion, printed after the run.
ACCEPTANCE_LABELS = {
    "test_metric_oracle_equivalence":
        "metric oracle equivalence (100 random sets, exact ranks, 1e-12)",
    "test_worked_example":
        "fairness worked example (rank_disparity/disparity/error_ratio/ratio)",
    "test_asha_invariants":
        "ASHA invariants under 1,000-trial shuffled simulation",
    "test_parego_formula_and_monotonicity":
        "ParEGO formula exact to 1e-12 and monotone on 10,000 triples",
    "test_pareto_and_hypervolume":
        "Pareto front vs brute force; hypervolume 0.61 (1e-9, grid 2e-3)",
    "test_end_to_end_search_quality":
        "search beats random at equal fidelity budget (>= 8/10 seeds)",
    "test_determinism":
        "byte-identical run logs for fixed seed, single worker",
    "test_config_space":
        "10,000 space samples valid; known configurations validate",
    "test_protocol_and_log_golden":
        "protocol golden transcripts; truncated log skips one record",
}

_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].split("[")[0]
    _acceptance_results.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_results:
        status = "PASS" if outcome == "passed" else "FAIL"
        label = ACCEPTANCE_LABELS.get(name, name)
        terminalreporter.write_line(f"[{status}] {label}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def stub_worker():
    """Command line that runs one of the stub worker scripts."""
    def command(name: str) -> str:
        path = STUB_DIR / f"{name}.py"
        assert path.exists(), path
        return f"{sys.executable} {path}"
    return command


@pytest.fixture
def worked_example_csv(tmp_path) -> Path:
    """The two-group 1-D embedding set with hand-computed metrics."""
    path = tmp_path / "worked.csv"
    path.write_text(
        "image_id,identity,group,e0\n"
        "m1a,m1,M,0.0\n"
        "m1b,m1,M,0.1\n"
        "f1a,f1,F,1.0\n"
        "f1b,f1,F,1.3\n"
        "f2a,f2,F,1.1\n",
        encoding="utf-8")
    return path
