"""Shared fixtures and the cross-component criteria banner."""
from __future__ import annotations

import shlex
import sys

import pytest

from toytrainer.data import make_toy_faces

# One line per cross-component acceptance criterion, printed after the run.
SECONDARY_LABELS = {
    "test_margin_gradients":
        "margin-loss gradients vs central differences (1e-4); m=0 reduction",
    "test_cross_component_metric_agreement":
        "worker metrics equal search-package metrics on the exported file",
    "test_orchestrated_toy_search":
        "20-trial search drives the toy worker; front non-empty, quotas hold",
}

_secondary_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_secondary_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].split("[")[0]
    _secondary_results.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _secondary_results:
        return
    terminalreporter.write_sep("-", "cross-component criteria")
    for name, outcome in _secondary_results:
        status = "PASS" if outcome == "passed" else "FAIL"
        label = SECONDARY_LABELS.get(name, name)
        terminalreporter.write_line(f"[{status}] {label}")


@pytest.fixture(scope="session")
def faces():
    return make_toy_faces()


@pytest.fixture(scope="session")
def worker_argv() -> list[str]:
    return [sys.executable, "-m", "toytrainer.worker"]


@pytest.fixture(scope="session")
def worker_command() -> str:
    """The same invocation as one shell-ready string."""
    return f"{shlex.quote(sys.executable)} -m toytrainer.worker"
