import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from argem.datasets import synthetic_citation_graph

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", parent=settings.get_profile("default"), max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_graph():
    return synthetic_citation_graph(n=120, k=3, m=40, avg_degree=4.0, words_per_node=6, seed=5)


@pytest.fixture(scope="session")
def tiny_graph():
    # 10 nodes: the size the gradient checks run at
    return synthetic_citation_graph(n=10, k=2, m=6, avg_degree=2.5, words_per_node=3, seed=3)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line for an acceptance criterion; printed in the terminal summary."""

    def report(criterion, ok, detail):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{status} criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
