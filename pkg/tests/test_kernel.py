"""Tests for order, warp and normalization functions and the kernel."""

import numpy as np
import pytest

from fracvar.entities.kernel import (
    KernelRows,
    KernelSpec,
    NormalizationFunction,
    OrderFunction,
    WarpFunction,
    kernel_eval,
    kernel_prefactor,
    kernel_tau_derivative,
)
from fracvar.utils.exceptions import DomainError, InvalidParam, SingularOrder


def test_kernel_is_one_on_the_diagonal(cf_spec, ml_spec):
    """H(t, t) = E_beta(0) = 1."""
    for spec in (cf_spec, ml_spec):
        for t in (0.0, 0.3, 1.0):
            assert kernel_eval(spec, t, t) == 1.0


def test_exponential_kernel_value(cf_spec):
    """gamma = beta = 1, alpha = 0.5: H(1, 0) = exp(-1)."""
    assert kernel_eval(cf_spec, 1.0, 0.0) == pytest.approx(np.exp(-1.0), rel=1e-14)


@pytest.mark.parametrize("warp", [WarpFunction.identity(), WarpFunction.log(), WarpFunction.sin()])
def test_kernel_tends_to_one_as_order_vanishes(warp):
    """alpha = 1e-8 gives H = 1 within 1e-6 for every built-in warp."""
    spec = KernelSpec(
        0.7, 0.7, OrderFunction.constant(1e-8), warp, NormalizationFunction.unit(), 1.0, 1.5
    )
    for t, tau in ((1.5, 1.0), (1.2, 1.1)):
        assert kernel_eval(spec, t, tau) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize(
    "warp, interval",
    [
        (WarpFunction.identity(), (0.0, 1.0)),
        (WarpFunction.log(), (1.0, 2.0)),
        (WarpFunction.sin(), (0.0, 1.0)),
    ],
)
def test_small_order_kernel_on_a_full_grid(warp, interval):
    """alpha = 1e-6: every H(t_n, t_j) on a 512-interval grid is within 1e-4 of 1."""
    a, b = interval
    spec = KernelSpec(0.7, 0.7, OrderFunction.constant(1e-6), warp, NormalizationFunction.unit(), a, b)
    t = np.linspace(a, b, 513)
    rows = KernelRows(spec, t)
    deviation = max(float(np.max(np.abs(rows.row(n) - 1.0))) for n in range(1, t.size))
    assert deviation <= 1e-4
    assert deviation > 0.0


def test_kernel_values_in_unit_interval(ml_spec):
    """0 <= H <= 1 and H increases toward the diagonal."""
    tau = np.linspace(0.0, 1.0, 41)
    values = [kernel_eval(ml_spec, 1.0, x) for x in tau]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert np.all(np.diff(values) > 0.0)


def test_shift_invariance_for_identity_warp(order_spec):
    """With the identity warp and a constant order, H depends on t - tau only."""
    spec = order_spec(0.4, gamma=0.8, beta=0.9)
    assert kernel_eval(spec, 0.9, 0.5) == pytest.approx(kernel_eval(spec, 0.6, 0.2), rel=1e-13)


@pytest.mark.parametrize(
    "norm, alpha, expected",
    [("1", 0.5, 2.0), ("1", 0.0, 1.0), ("1 - alpha + alpha^2", 0.5, 1.5)],
)
def test_prefactor(order_spec, norm, alpha, expected):
    """M(alpha) / (1 - alpha)."""
    spec = order_spec(alpha)
    spec = KernelSpec(
        spec.gamma, spec.beta, spec.order, spec.warp,
        NormalizationFunction.from_expression(norm), spec.a, spec.b,
    )
    assert kernel_prefactor(spec, 0.7) == pytest.approx(expected, rel=1e-14)


def test_singular_order(order_spec):
    """Orders within 1e-12 of 1 are rejected by the kernel and the prefactor."""
    spec = order_spec(1.0)
    with pytest.raises(SingularOrder):
        kernel_eval(spec, 1.0, 0.0)
    with pytest.raises(SingularOrder):
        kernel_prefactor(spec, 0.5)


def test_domain_errors(cf_spec):
    """tau must not exceed t, and both must lie in [a, b]."""
    with pytest.raises(DomainError):
        kernel_eval(cf_spec, 0.2, 0.5)
    with pytest.raises(DomainError):
        kernel_eval(cf_spec, 1.5, 0.0)
    with pytest.raises(DomainError):
        kernel_prefactor(cf_spec, -0.1)


def test_order_bounds_are_validated():
    """Sampled orders outside the declared bounds are rejected."""
    order = OrderFunction.from_expression("0.5 + 0.4*t", 0.5, 0.8)
    with pytest.raises(InvalidParam):
        KernelSpec(1.0, 1.0, order, WarpFunction.identity(), NormalizationFunction.unit(), 0.0, 1.0)
    with pytest.raises(InvalidParam):
        OrderFunction.constant(1.2)


def test_normalization_must_be_one_at_the_ends():
    with pytest.raises(InvalidParam):
        NormalizationFunction.from_expression("1 + alpha")


@pytest.mark.parametrize(
    "warp, interval",
    [
        (WarpFunction.log(), (0.0, 1.0)),
        (WarpFunction.sin(), (0.0, 2.0)),
        (WarpFunction.from_expression("-t"), (0.0, 1.0)),
    ],
)
def test_warp_validation(warp, interval):
    """Warps must be defined and strictly increasing on the interval."""
    with pytest.raises(InvalidParam):
        warp.validate(*interval)


def test_warp_derivative_is_checked():
    """A derivative that disagrees with the warp is rejected."""
    warp = WarpFunction(np.exp, lambda t: 2.0 * np.exp(t), "broken")
    with pytest.raises(InvalidParam):
        warp.validate(0.0, 1.0)


def test_expression_warp_matches_builtin():
    """ln(t) parsed from text behaves like the built-in log warp."""
    parsed = WarpFunction.from_expression("ln(t)")
    t = np.linspace(1.0, 2.0, 7)
    np.testing.assert_allclose(parsed(t), np.log(t))
    np.testing.assert_allclose(parsed.derivative(t), 1.0 / t)
    assert WarpFunction.from_expression(" t ").is_identity


def test_tied_order_follows_alpha():
    """With a tied order the kernel uses beta = gamma = alpha(t)."""
    order = OrderFunction.from_expression("0.3 + 0.3*t", 0.2, 0.7)
    spec = KernelSpec(
        0.5, 0.5, order, WarpFunction.identity(), NormalizationFunction.unit(), 0.0, 1.0,
        order_tied=True,
    )
    assert spec.orders_at(1.0) == pytest.approx((0.6, 0.6))
    assert spec.with_beta(0.5).orders_at(1.0) == pytest.approx((0.6, 0.6))


def test_order_bounds_are_read_off_the_interval():
    """Without declared bounds the range of alpha(t) on the interval is used."""
    order = OrderFunction.from_expression("0.5 + 0.1*sin(t)", interval=(0.0, 1.0))
    assert order.declared_min == pytest.approx(0.5)
    assert order.declared_max == pytest.approx(0.5 + 0.1 * np.sin(1.0))
    spec = KernelSpec(
        0.5, 0.5, order, WarpFunction.identity(), NormalizationFunction.unit(), 0.0, 1.0,
        order_tied=True,
    )
    assert spec.orders_at(1.0) == pytest.approx((order.declared_max,) * 2)
    assert OrderFunction.from_expression("0.4 + 0.2*t", 0.3, interval=(0.0, 1.0)).declared_min == 0.3
    with pytest.raises(InvalidParam):
        OrderFunction.from_expression("0.5 + t", interval=(0.0, 1.0))


def test_tau_derivative(cf_spec, ml_spec):
    """dH/dtau matches the closed form for the exponential kernel and is positive."""
    assert kernel_tau_derivative(cf_spec, 1.0, 0.0) == pytest.approx(np.exp(-1.0), rel=1e-14)
    h = 1e-5
    tau = 0.4
    central = (kernel_eval(ml_spec, 1.0, tau + h) - kernel_eval(ml_spec, 1.0, tau - h)) / (2 * h)
    slope = kernel_tau_derivative(ml_spec, 1.0, tau)
    assert slope > 0.0
    assert slope == pytest.approx(central, rel=1e-4)


def test_tau_derivative_needs_equal_orders(order_spec):
    with pytest.raises(InvalidParam):
        kernel_tau_derivative(order_spec(0.5, gamma=0.5, beta=0.8), 1.0, 0.2)


@pytest.mark.parametrize("midpoints", [False, True])
def test_rows_reuse_matches_direct_evaluation(order_spec, midpoints):
    """Reused rows equal rows evaluated at their own output time."""
    spec = order_spec(0.6, gamma=0.7, beta=0.7)
    t = np.linspace(0.0, 1.0, 33)
    rows = KernelRows(spec, t, midpoints=midpoints)
    nodes = 0.5 * (t[1:] + t[:-1]) if midpoints else t
    for n in (1, 10, 32):
        count = n if midpoints else n + 1
        expected = spec.kernel_values(t[n], nodes[:count])
        np.testing.assert_allclose(rows.row(n), expected, rtol=1e-12)
