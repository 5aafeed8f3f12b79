"""
Variable-order operators on uniform grids.

The non-singular operators integrate the kernel row H(t_n, .) against the data
with the product trapezoid rule (or its midpoint variant). The classical
power-law operators integrate the weakly singular factor exactly against
piecewise-linear data (`power_weights`). Every result carries a Richardson
estimate obtained by repeating the computation on the coarsened grid.
"""

from typing import Callable, Union

import numpy as np
from scipy.special import rgamma

from ..config import SCHEMES, SPECIAL_CASES, GridLimits, Tolerances
from ..entities.grid import GridFunction, OperatorResult
from ..entities.kernel import (
    KernelRows,
    KernelSpec,
    NormalizationFunction,
    OrderFunction,
    WarpFunction,
)
from ..utils.exceptions import DegenerateGrid, InvalidParam, QuadratureFailure, SingularOrder
from ..utils.logger import logger
from ..utils.quadrature import power_weights


def _check_inputs(spec: KernelSpec, f: GridFunction, scheme: str = SCHEMES[0]):
    if scheme not in SCHEMES:
        raise InvalidParam(f"Unknown scheme {scheme!r}, expected one of {SCHEMES}")
    tol = 1e-12 * (spec.b - spec.a)
    if abs(f.a - spec.a) > tol or abs(f.b - spec.b) > tol:
        raise InvalidParam(
            f"Grid function lives on [{f.a}, {f.b}], kernel on [{spec.a}, {spec.b}]"
        )


def _estimate(
    compute: Callable[[GridFunction], np.ndarray],
    f: GridFunction,
    scheme: str,
    name: str,
    min_nodes: int = GridLimits.MIN_NODES,
    skip: int = 2,
) -> OperatorResult:
    """
    Run `compute` on f and on every other node of f. The largest gap over the
    shared nodes past the first `skip`, divided by 3, is the error estimate of a
    second-order scheme. For odd n the last node is dropped before coarsening.
    """
    values = compute(f)
    base, fine = (f, values) if f.n % 2 == 0 else (f.head(f.n - 1), values[:-1])
    estimate = 0.0
    if base.n // 2 >= min_nodes:
        coarse = compute(base.coarsen())
        gaps = np.abs(fine[::2] - coarse)[skip:]
        estimate = float(np.max(gaps)) / 3.0 if gaps.size else 0.0
    else:
        logger.debug(f"No coarse grid for {name} at n={f.n}; error estimate set to 0")

    budget = Tolerances.QUAD_BUDGET * (1.0 + float(np.max(np.abs(values))))
    if not np.isfinite(estimate) or estimate > budget:
        raise QuadratureFailure(f"{name}: error estimate {estimate:.3e} exceeds {budget:.3e}")
    return OperatorResult(f.with_values(values, name=name), estimate, scheme)


def _aux_1_values(spec: KernelSpec, f: GridFunction, scheme: str) -> np.ndarray:
    t = f.t
    # integrate in s = psi(tau), so ds = psi'(tau) dtau
    steps = np.diff(np.asarray(spec.warp(t), dtype=float))
    data = f.values
    midpoint = scheme == "product_midpoint"
    rows = KernelRows(spec, t, midpoints=midpoint)
    values = np.zeros(f.n + 1)
    for n in range(1, f.n + 1):
        kernel = rows.row(n)
        if midpoint:
            values[n] = np.dot(steps[:n] * kernel, 0.5 * (data[:n] + data[1 : n + 1]))
        else:
            weighted = kernel * data[: n + 1]
            values[n] = 0.5 * np.dot(steps[:n], weighted[:-1] + weighted[1:])
    return values


def _aux_2_values(spec: KernelSpec, f: GridFunction, scheme: str) -> np.ndarray:
    slope = f.deriv_values
    midpoint = scheme == "product_midpoint"
    rows = KernelRows(spec, f.t, midpoints=midpoint)
    h = f.h
    values = np.zeros(f.n + 1)
    for n in range(1, f.n + 1):
        kernel = rows.row(n)
        if midpoint:
            values[n] = h * np.dot(kernel, 0.5 * (slope[:n] + slope[1 : n + 1]))
        else:
            weighted = kernel * slope[: n + 1]
            values[n] = 0.5 * h * np.sum(weighted[:-1] + weighted[1:])
    return values


def aux_integral_1(
    spec: KernelSpec, f: GridFunction, scheme: str = "product_trapezoid"
) -> OperatorResult:
    """int_a^t psi'(tau) H(t, tau) f(tau) dtau at every node."""
    _check_inputs(spec, f, scheme)
    return _estimate(lambda g: _aux_1_values(spec, g, scheme), f, scheme, "aux_integral_1")


def aux_integral_2(
    spec: KernelSpec, f: GridFunction, scheme: str = "product_trapezoid"
) -> OperatorResult:
    """int_a^t H(t, tau) f'(tau) dtau at every node."""
    _check_inputs(spec, f, scheme)
    return _estimate(lambda g: _aux_2_values(spec, g, scheme), f, scheme, "aux_integral_2")


def rl_deriv_ns(
    spec: KernelSpec, f: GridFunction, scheme: str = "product_trapezoid"
) -> OperatorResult:
    """
    M(alpha(t)) / (1 - alpha(t)) * (1 / psi'(t)) * d/dt of the first auxiliary
    integral, with second-order differences for d/dt.
    """
    _check_inputs(spec, f, scheme)

    def compute(g: GridFunction) -> np.ndarray:
        t = g.t
        inner = _aux_1_values(spec, g, scheme)
        slope = np.gradient(inner, g.h, edge_order=2)
        return spec.prefactors(t) * slope / np.asarray(spec.warp.derivative(t), dtype=float)

    return _estimate(compute, f, scheme, "rl_ns")


def caputo_deriv_ns(
    spec: KernelSpec, f: GridFunction, scheme: str = "product_trapezoid"
) -> OperatorResult:
    """M(alpha(t)) / (1 - alpha(t)) times the second auxiliary integral."""
    _check_inputs(spec, f, scheme)

    def compute(g: GridFunction) -> np.ndarray:
        return spec.prefactors(g.t) * _aux_2_values(spec, g, scheme)

    return _estimate(compute, f, scheme, "caputo_ns")


def _orders_on_grid(spec: KernelSpec, t: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(spec.order(t), dtype=float), t.shape)


def rl_integral_varorder(
    spec: KernelSpec, f: GridFunction, exponent_at: str = "t"
) -> OperatorResult:
    """
    (1 / Gamma(alpha(t))) int_a^t psi'(tau) (psi(t) - psi(tau))^(alpha - 1) f(tau) dtau.

    The exponent uses alpha(t) by default; `exponent_at="tau"` takes alpha at
    the midpoint of each cell instead. Integration runs in s = psi(tau) with the
    power factor integrated exactly against piecewise-linear f.
    """
    _check_inputs(spec, f)
    if exponent_at not in ("t", "tau"):
        raise InvalidParam(f"exponent_at must be 't' or 'tau', got {exponent_at!r}")

    def compute(g: GridFunction) -> np.ndarray:
        t = g.t
        alpha = _orders_on_grid(spec, t)
        if np.any(alpha <= 0.0):
            raise InvalidParam("The fractional integral needs alpha(t) > 0")
        s = np.asarray(spec.warp(t), dtype=float)
        cell_alpha = _orders_on_grid(spec, 0.5 * (t[1:] + t[:-1]))
        values = np.zeros(g.n + 1)
        for n in range(1, g.n + 1):
            mu = alpha[n] - 1.0 if exponent_at == "t" else cell_alpha[:n] - 1.0
            weights = power_weights(s[: n + 1], mu)
            values[n] = rgamma(alpha[n]) * np.dot(weights, g.values[: n + 1])
        return values

    return _estimate(compute, f, "product_trapezoid", "rl_integral")


def _check_below_one(alpha: np.ndarray):
    if np.any(1.0 - alpha < Tolerances.SINGULAR_ORDER):
        raise SingularOrder("Classical derivatives need alpha(t) < 1")


def rl_deriv_classical(spec: KernelSpec, f: GridFunction) -> OperatorResult:
    """
    (1 / Gamma(1 - alpha(t))) (1 / psi'(t)) d/dt int_a^t psi'(tau)
    (psi(t) - psi(tau))^(-alpha(t)) f(tau) dtau. The value at t = a comes from a
    one-sided stencil and is not meaningful when the derivative blows up there.
    """
    _check_inputs(spec, f)
    if f.n < GridLimits.MIN_DERIV_NODES:
        raise DegenerateGrid(
            f"Outer derivative needs n >= {GridLimits.MIN_DERIV_NODES}, got {f.n}"
        )

    def compute(g: GridFunction) -> np.ndarray:
        t = g.t
        alpha = _orders_on_grid(spec, t)
        _check_below_one(alpha)
        s = np.asarray(spec.warp(t), dtype=float)
        inner = np.zeros(g.n + 1)
        for n in range(1, g.n + 1):
            inner[n] = np.dot(power_weights(s[: n + 1], -alpha[n]), g.values[: n + 1])
        slope = np.gradient(inner, g.h, edge_order=2)
        return rgamma(1.0 - alpha) * slope / np.asarray(spec.warp.derivative(t), dtype=float)

    return _estimate(compute, f, "product_trapezoid", "rl_classical", GridLimits.MIN_DERIV_NODES)


def caputo_deriv_classical(
    spec: KernelSpec, f: GridFunction, standard_psi_caputo: bool = False
) -> OperatorResult:
    """
    (1 / Gamma(1 - alpha(t))) int_a^t (psi(t) - psi(tau))^(-alpha(t)) f'(tau) dtau.

    The default form factors the singularity as ((psi(t) - psi(tau)) / (t - tau))^(-alpha)
    (t - tau)^(-alpha) and integrates in tau. `standard_psi_caputo` evaluates
    I^(1 - alpha; psi) of f' / psi' in s = psi(tau) instead; both give the same
    value up to discretisation error.
    """
    _check_inputs(spec, f)

    def compute(g: GridFunction) -> np.ndarray:
        t = g.t
        alpha = _orders_on_grid(spec, t)
        _check_below_one(alpha)
        s = np.asarray(spec.warp(t), dtype=float)
        slope = g.deriv_values
        values = np.zeros(g.n + 1)
        if standard_psi_caputo:
            data = slope / np.asarray(spec.warp.derivative(t), dtype=float)
            for n in range(1, g.n + 1):
                values[n] = np.dot(power_weights(s[: n + 1], -alpha[n]), data[: n + 1])
        else:
            warp_slope = np.asarray(spec.warp.derivative(t), dtype=float)
            for n in range(1, g.n + 1):
                gap = t[n] - t[:n]
                ratio = np.empty(n + 1)
                ratio[:n] = (s[n] - s[:n]) / gap
                ratio[n] = warp_slope[n]
                data = ratio ** (-alpha[n]) * slope[: n + 1]
                values[n] = np.dot(power_weights(t[: n + 1], -alpha[n]), data)
        return rgamma(1.0 - alpha) * values

    return _estimate(compute, f, "product_trapezoid", "caputo_classical")


def caputo_fabrizio_direct(
    alpha: float, f: GridFunction, norm: NormalizationFunction = None
) -> OperatorResult:
    """M(alpha) / (1 - alpha) int_a^t exp(-alpha (t - tau) / (1 - alpha)) f'(tau) dtau."""
    factor, rate = _exponential_constants(alpha, norm)

    def compute(g: GridFunction) -> np.ndarray:
        t, slope, h = g.t, g.deriv_values, g.h
        values = np.zeros(g.n + 1)
        for n in range(1, g.n + 1):
            weighted = np.exp(-rate * (t[n] - t[: n + 1])) * slope[: n + 1]
            values[n] = 0.5 * h * np.sum(weighted[:-1] + weighted[1:])
        return factor * values

    return _estimate(compute, f, "product_trapezoid", "caputo_fabrizio")


def yang_machado_direct(
    alpha: float, f: GridFunction, norm: NormalizationFunction = None
) -> OperatorResult:
    """M(alpha) / (1 - alpha) d/dt int_a^t exp(-alpha (t - tau) / (1 - alpha)) f(tau) dtau."""
    factor, rate = _exponential_constants(alpha, norm)

    def compute(g: GridFunction) -> np.ndarray:
        t, data, h = g.t, g.values, g.h
        inner = np.zeros(g.n + 1)
        for n in range(1, g.n + 1):
            weighted = np.exp(-rate * (t[n] - t[: n + 1])) * data[: n + 1]
            inner[n] = 0.5 * h * np.sum(weighted[:-1] + weighted[1:])
        return factor * np.gradient(inner, h, edge_order=2)

    return _estimate(compute, f, "product_trapezoid", "yang_machado")


def _exponential_constants(alpha: float, norm: NormalizationFunction = None):
    if not (0.0 <= alpha < 1.0 - Tolerances.SINGULAR_ORDER):
        raise InvalidParam(f"Exponential kernels need 0 <= alpha < 1, got {alpha}")
    norm = norm or NormalizationFunction.unit()
    return float(norm(alpha)) / (1.0 - alpha), alpha / (1.0 - alpha)


def make_special_case(
    name: str,
    alpha: Union[float, OrderFunction],
    norm: NormalizationFunction = None,
    interval=(0.0, 1.0),
    gamma: float = 1.0,
    beta: float = 1.0,
) -> KernelSpec:
    """
    Kernel specs of the named special cases. `gamma` and `beta` are used by the
    warped cases only; the others fix them.
    """
    if name not in SPECIAL_CASES:
        raise InvalidParam(f"Unknown special case {name!r}, expected one of {SPECIAL_CASES}")
    order = alpha if isinstance(alpha, OrderFunction) else OrderFunction.constant(alpha)
    norm = norm or NormalizationFunction.unit()
    a, b = (float(x) for x in interval)

    if name in ("atangana", "yang_machado", "caputo_fabrizio", "unit_norm_exp"):
        if not order.is_constant:
            raise InvalidParam(f"{name} needs a constant order")
        value = order.declared_min
        if not (0.0 < value < 1.0):
            raise InvalidParam(f"{name} needs 0 < alpha < 1, got {value}")

    identity = WarpFunction.identity()
    if name == "variable_ml":
        nominal = float(order(a))
        return KernelSpec(nominal, nominal, order, identity, norm, a, b, order_tied=True)
    if name == "atangana":
        return KernelSpec(value, value, order, identity, norm, a, b)
    if name in ("yang_machado", "caputo_fabrizio"):
        return KernelSpec(1.0, 1.0, order, identity, norm, a, b)
    if name == "unit_norm_exp":
        return KernelSpec(1.0, 1.0, order, identity, NormalizationFunction.unit(), a, b)
    if name == "log_warp":
        if a <= 0.0:
            raise InvalidParam(f"log_warp needs a > 0, got a = {a}")
        return KernelSpec(gamma, beta, order, WarpFunction.log(), norm, a, b)
    return KernelSpec(gamma, beta, order, WarpFunction.sin(), norm, a, b)


def apply_operator(name: str, spec: KernelSpec, f: GridFunction, **options) -> OperatorResult:
    """Dispatch by operator name; options not used by the operator are ignored."""
    scheme = options.get("scheme", "product_trapezoid")
    if name == "rl_ns":
        return rl_deriv_ns(spec, f, scheme)
    if name == "caputo_ns":
        return caputo_deriv_ns(spec, f, scheme)
    if name == "rl_classical":
        return rl_deriv_classical(spec, f)
    if name == "caputo_classical":
        return caputo_deriv_classical(
            spec, f, standard_psi_caputo=options.get("standard_psi_caputo", False)
        )
    if name == "rl_integral":
        return rl_integral_varorder(spec, f, exponent_at=options.get("exponent_at", "t"))
    if name == "aux_1":
        return aux_integral_1(spec, f, scheme)
    if name == "aux_2":
        return aux_integral_2(spec, f, scheme)
    raise InvalidParam(f"Unknown operator {name!r}")
