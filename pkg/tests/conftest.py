import numpy as np
import pytest

from ambimatch.model import validate_distribution


@pytest.fixture
def corr():
    return validate_distribution([[0.45, 0.05], [0.05, 0.45]])


@pytest.fixture
def indep():
    return validate_distribution([[0.25, 0.25], [0.25, 0.25]])


@pytest.fixture
def perfect():
    return validate_distribution([[0.5, 0.0], [0.0, 0.5]])


@pytest.fixture
def tern():
    return validate_distribution([[0.2, 0.05, 0.05], [0.03, 0.25, 0.02], [0.05, 0.05, 0.3]])


def random_dist(rng, ell=2, zeros=False):
    p = rng.dirichlet(np.ones(ell * ell))
    if zeros:
        p[rng.random(ell * ell) < 0.25] = 0.0
        if p.sum() == 0:
            p[0] = 1.0
    return validate_distribution((p / p.sum()).reshape(ell, ell))
