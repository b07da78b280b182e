import numpy as np
import pytest

from conformal_zeros.pseudo_euclidean import MetricSpace

SIGNATURES = [(3, 0), (2, 1), (1, 2), (4, 0), (3, 1), (2, 2), (1, 3), (3, 2), (2, 4), (3, 3)]

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture(params=SIGNATURES, ids=lambda pq: f"sig{pq[0]}{pq[1]}")
def space(request):
    p, q = request.param
    return MetricSpace(p + q, p, q)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
