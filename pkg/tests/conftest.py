import numpy as np
import pytest
from hypothesis import settings

from sspkit.fixtures import random_ssp

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

CORPUS_SEEDS = range(100)


def corpus_model(seed):
    # 1..7 non-terminal states, so at most 8 states with t
    return random_ssp(seed, n_states=1 + seed % 7)


@pytest.fixture(scope="session")
def corpus():
    return [corpus_model(s) for s in CORPUS_SEEDS]


@pytest.fixture(scope="session")
def corpus_truth(corpus):
    from oracles import optimal_values

    return [optimal_values(m) for m in corpus]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# filled by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
