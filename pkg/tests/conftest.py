import math
import sys

import numpy as np
import pytest

from garsamp import model as M
from garsamp.harness.config import builtin_config


def example1_model():
    """y1 = exp(x) + N(0, 1/2), y2* = exp(-x) + centred gamma(2, 1); prior N(0, 2)."""
    return M.ObservationModel(
        (2.0, 5.0),
        (M.exponential(1.0), M.exponential(-1.0)),
        (M.quadratic(1.0), M.gamma_shifted(2.0, 1.0)),
        prior=M.Prior(M.gaussian(2.0), 0.0),
    )


def example2_model(alpha=0.2, y=5.0, eta=10.0):
    return M.ObservationModel((y, eta), (M.square(), M.exp_abs()), (M.cosh_potential(), M.quadratic(alpha)))


def example1_potential(x):
    """Hand-written observation potential of the first example (no prior)."""
    x = np.asarray(x, dtype=float)
    t2 = 5.0 - np.exp(-x)
    with np.errstate(invalid="ignore", divide="ignore"):
        v2 = np.where(t2 + 1 > 0, -np.log(t2 + 1) + t2 + 1, np.inf)
    return (2.0 - np.exp(x)) ** 2 + v2


def example2_potential(x, alpha=0.2):
    x = np.asarray(x, dtype=float)
    return np.cosh(5.0 - x ** 2) + alpha * (10.0 - np.exp(np.abs(x))) ** 2


@pytest.fixture
def ex1():
    return example1_model()


@pytest.fixture
def ex2():
    return example2_model()


@pytest.fixture(scope="session")
def cfg1():
    return builtin_config(1)


@pytest.fixture(scope="session")
def cfg2():
    return builtin_config(2)


@pytest.fixture(scope="session")
def cfg3():
    return builtin_config(3)



def grid_min(V, lo, hi, n=400_001):
    xs = np.linspace(lo, hi, n)
    v = V(xs)
    k = int(np.argmin(v))
    return float(xs[k]), float(v[k])


SQRT5 = math.sqrt(5.0)
LOG10 = math.log(10.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
