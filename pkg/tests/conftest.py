"""Common test fixtures for fracvar."""

import logging

import numpy as np
import pytest

from fracvar.entities.grid import GridFunction
from fracvar.entities.kernel import (
    KernelSpec,
    NormalizationFunction,
    OrderFunction,
    WarpFunction,
)
from fracvar.scripts.analysis import BASE_CORPUS
from fracvar.scripts.operators import make_special_case

logging.getLogger("hypothesis").setLevel(logging.WARNING)


@pytest.fixture
def unit_interval():
    return (0.0, 1.0)


@pytest.fixture
def cf_spec():
    """Caputo-Fabrizio kernel, alpha = 0.5, M = 1 on [0, 1]: H = exp(-(t - tau))."""
    return make_special_case("caputo_fabrizio", 0.5)


@pytest.fixture
def ml_spec():
    """Mittag-Leffler kernel with gamma = beta = 0.6 and a varying order."""
    order = OrderFunction.from_expression("0.4 + 0.2*t", 0.3, 0.7)
    return KernelSpec(
        0.6, 0.6, order, WarpFunction.identity(), NormalizationFunction.unit(), 0.0, 1.0
    )


@pytest.fixture
def order_spec():
    """Factory for identity-warp kernels with a constant order on [0, 1]."""

    def build(alpha, gamma=1.0, beta=1.0):
        return KernelSpec(
            gamma,
            beta,
            OrderFunction.constant(alpha),
            WarpFunction.identity(),
            NormalizationFunction.unit(),
            0.0,
            1.0,
        )

    return build


@pytest.fixture
def grid():
    """Factory for grid functions on [0, 1] from a callable and its derivative."""

    def build(func, deriv=None, n=512, a=0.0, b=1.0):
        return GridFunction.from_callable(func, a, b, n, deriv=deriv)

    return build


@pytest.fixture
def corpus():
    return list(BASE_CORPUS)


@pytest.fixture
def t_func():
    return lambda t: np.asarray(t, dtype=float)
