import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pathgp.numerics import RandomSource

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rs():
    return RandomSource(1234)


def mc_se(samples, axis=0):
    """Standard error of the mean along ``axis``."""
    samples = np.asarray(samples)
    return samples.std(axis=axis, ddof=1) / np.sqrt(samples.shape[axis])


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE = []


def record(number, title, ok, detail=""):
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
