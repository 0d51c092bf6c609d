import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from cbfmt.filterbank import FilterBankParams

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SMALL_PARAMS = [(2, 2, 8), (2, 3, 12), (4, 4, 16), (4, 6, 24), (3, 4, 24), (4, 5, 20), (2, 4, 16)]


@st.composite
def filter_bank_params(draw, max_M=48):
    """Valid small ``(K, N, M)`` triples."""
    K = draw(st.integers(2, 5))
    N = draw(st.integers(K, K + 3))
    base = K * N // math.gcd(K, N)
    reps = draw(st.integers(1, max(1, max_M // base)))
    M = base * reps
    if M > max_M and base <= max_M:
        M = base
    return FilterBankParams(K, N, M)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


_ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance check; the terminal summary prints one line per criterion."""

    def record(number: int, passed: bool, detail: str):
        entry = _ACCEPTANCE.setdefault(number, [True, []])
        entry[0] = entry[0] and bool(passed)
        entry[1].append(("ok  " if passed else "MISS") + " " + detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, details = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}")
        for line in details:
            terminalreporter.write_line(f"    {line}")
