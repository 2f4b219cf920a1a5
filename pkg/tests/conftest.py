import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; the terminal summary prints them in order."""

    def record(number: int, name: str, passed: bool, detail: str = "") -> bool:
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {name}"
        if detail:
            line += f"  ({detail})"
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
