import numpy as np
import pytest

from degenwell.model import Params


@pytest.fixture
def p_default():
    """lambda=(1,1,1), sigma0=1, sigma1=0, theta=pi/4, eps=0.1, eps0=0.5."""
    return Params()


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


# test_acceptance.py appends "criterion N (...): PASS/FAIL" lines here so the
# verdict survives pytest's output capture and lands at the end of the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record one verdict line per acceptance criterion, then assert it."""

    def record(number: int, name: str, ok: bool, detail: str = ""):
        line = f"criterion {number:>2} ({name}): {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        ACCEPTANCE_LINES.append(line)
        assert ok, line

    return record
