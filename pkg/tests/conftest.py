import numpy as np
import pytest

from clwelab.harness.rng import make_rng


@pytest.fixture
def rng(request):
    """Deterministic per-test stream keyed by the test name."""
    return make_rng(20240917, request.node.name)


def binomial_z(successes: int, trials: int, p: float) -> float:
    return (successes - trials * p) / np.sqrt(trials * p * (1 - p))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
