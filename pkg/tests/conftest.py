import math

import pytest

from permadde import HistorySpec, TimeFunction, preset


@pytest.fixture
def quadratic_sin():
    """alpha(t) = 2 + sin t, kappa = 1, one unit delay."""
    return preset("bastinec-quadratic",
                  {"alpha": TimeFunction.sinusoid(2, 1, 1, 0), "beta": 1.0, "tau": 1.0})


@pytest.fixture
def bh_constant():
    return preset("bh-logistic", {"alpha": 2.0, "beta": 1.0, "mu": 0.0, "kappa": 1.0,
                                  "tau": 1.0})


@pytest.fixture
def bh_sin():
    return preset("bh-logistic", {"alpha": TimeFunction.sinusoid(2, 0.5, 1.3, 0.2),
                                  "beta": 0.5, "mu": 0.2, "kappa": 1.0,
                                  "tau": TimeFunction.sinusoid(0.6, 0.3, 0.7, 0)})


@pytest.fixture
def nicholson_sin():
    return preset("nicholson", {"d": 1.0, "beta": TimeFunction.sinusoid(2, 0.5, 1, 0),
                                "tau": 1.0})


@pytest.fixture
def nicholson_e():
    return preset("nicholson-autonomous", {"d": 1.0, "beta": math.e, "tau": 0.5})


@pytest.fixture
def unit_history():
    return HistorySpec.constant(1.0)
