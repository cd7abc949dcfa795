import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def gen():
    from netnorm import rng

    return rng.stream(1234, "tests")


def basis(d, i):
    P = np.zeros((d, d), dtype=complex)
    P[i, i] = 1
    return P


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


def record(criterion, passed, detail):
    line = f"acceptance {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
