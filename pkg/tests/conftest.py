import numpy as np
import pytest
from hypothesis import settings

from sktlab.model import ModelSpec
from sktlab.reactions import ReactionSpec

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def sym2():
    """Two species, symmetric cross-diffusion, no reactions."""
    return ModelSpec.build([1.0, 1.0], [[1.0, 0.5], [0.5, 1.0]])


@pytest.fixture
def db2():
    """Detailed balance with unequal weights: pi_1 a_12 = pi_2 a_21."""
    return ModelSpec.build([1.0, 0.5], [[1.0, 2.0], [1.0, 1.5]], pi=[1.0, 2.0])


def relaxation_spec(a=((1.0, 0.5), (2.0, 1.0)), a0=(1.0, 0.5), lam=(1.0, 1.0), pi=None):
    return ModelSpec.build(list(a0), [list(r) for r in a], pi=pi, lam=list(lam),
                           reaction=ReactionSpec.relaxation(list(lam)))


def logistic_spec():
    return ModelSpec.build([1.0, 0.5], [[1.0, 0.5], [2.0, 1.0]],
                           reaction=ReactionSpec.logistic([1.0, 1.0], np.ones((2, 2))))


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
