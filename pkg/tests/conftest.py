"""Shared fixtures plus a summary hook for the acceptance gate.

Every test in test_acceptance.py corresponds to one release criterion; the
hook below re-emits a one-line [PASS]/[FAIL] verdict per criterion in the
terminal summary so the gate is readable without -s.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from smoothcert import write_tensor

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        _ACCEPTANCE_RESULTS[report.nodeid] = report.outcome


@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in sorted(_ACCEPTANCE_RESULTS.items()):
        tag = "PASS" if outcome == "passed" else outcome.upper()
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"[{tag}] {name}")


@pytest.fixture
def oracle_workspace(tmp_path: Path) -> Path:
    """A tensor + threshold-classifier manifest pair for CLI runs."""
    write_tensor(np.array([0.5]), tmp_path / "x.mst1")
    (tmp_path / "oracle.json").write_text(
        json.dumps({"type": "threshold", "pixel_value": 0.5, "threshold": 0.25})
    )
    return tmp_path
