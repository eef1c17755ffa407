import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

TESTS = Path(__file__).resolve().parent
ROOT = TESTS.parent
SCENES = ROOT / "scenes"
GOLDEN = TESTS / "golden"

sys.path.insert(0, str(TESTS))

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_criteria: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def criterion():
    """Record ``(number, name, passed, detail)`` for the end-of-run acceptance summary."""

    def record(number: int, name: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        print(line)
        prev = _criteria.get(number)
        if prev is not None:
            passed = passed and prev[1]
            detail = f"{prev[2]}; {detail}"
        _criteria[number] = (name, passed, detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        name, passed, detail = _criteria[number]
        terminalreporter.write_line(f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
