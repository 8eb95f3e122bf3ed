import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def explicit_H(n):
    return np.eye(n) - np.ones((n, n)) / n


def random_psd(rng, n, rank=None):
    A = rng.standard_normal((n, rank or n))
    return A @ A.T


# filled by test_acceptance.py, printed once at the end of the run
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {name}: {detail}")
