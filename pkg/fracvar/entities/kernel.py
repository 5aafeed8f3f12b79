"""
Order, warp and normalization functions and the non-singular kernel

    H(t, tau) = E_beta[-alpha(t) (psi(t) - psi(tau))^gamma / (1 - alpha(t))].
"""

from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np

from ..config import GridLimits, Tolerances
from ..utils.exceptions import DomainError, InvalidParam, SingularOrder
from ..utils.logger import logger
from ..utils.mittag_leffler import MLParams, ml_eval, ml_spectral_slope
from .expression import Expression


def _sample_points(a: float, b: float) -> np.ndarray:
    return np.linspace(a, b, GridLimits.ORDER_SAMPLES)


class OrderFunction:
    """
    alpha(t) with user-declared bounds. The closed range [0, 1] is admitted so
    that the integer-order endpoints stay representable; operators that divide
    by 1 - alpha or by Gamma(alpha) reject the endpoint themselves.
    """

    def __init__(
        self,
        func: Callable,
        declared_min: float,
        declared_max: float,
        source: Optional[str] = None,
        constant: Optional[float] = None,
    ):
        if not (0.0 <= declared_min <= declared_max <= 1.0):
            raise InvalidParam(
                f"Declared order bounds must satisfy 0 <= min <= max <= 1, "
                f"got [{declared_min}, {declared_max}]"
            )
        self._func = func
        self._min = float(declared_min)
        self._max = float(declared_max)
        self._source = source
        self._constant = constant

    @classmethod
    def constant(cls, value: float) -> "OrderFunction":
        value = float(value)
        if not (0.0 <= value <= 1.0):
            raise InvalidParam(f"Order must lie in [0, 1], got {value}")
        return cls(
            lambda t: np.full(np.shape(t), value) if np.ndim(t) else value,
            value,
            value,
            source=repr(value),
            constant=value,
        )

    @classmethod
    def from_expression(
        cls,
        source: str,
        declared_min: Optional[float] = None,
        declared_max: Optional[float] = None,
        interval: Optional[Tuple[float, float]] = None,
    ) -> "OrderFunction":
        """
        alpha(t) from an expression in t. Missing bounds are read off samples on
        `interval` when one is given, otherwise they default to [0, 1].
        """
        expression = Expression(source, {"t"})
        if expression.is_constant():
            value = float(expression())
            if declared_min is None and declared_max is None:
                return cls.constant(value)
        low, high = 0.0, 1.0
        if interval is not None and (declared_min is None or declared_max is None):
            points = _sample_points(*interval)
            samples = np.broadcast_to(expression(t=points), points.shape)
            low, high = float(np.min(samples)), float(np.max(samples))
        return cls(
            lambda t: expression(t=t),
            low if declared_min is None else declared_min,
            high if declared_max is None else declared_max,
            source=source,
        )

    def __call__(self, t):
        return self._func(t)

    @property
    def declared_min(self) -> float:
        return self._min

    @property
    def declared_max(self) -> float:
        return self._max

    @property
    def is_constant(self) -> bool:
        return self._constant is not None

    @property
    def source(self) -> Optional[str]:
        return self._source

    def validate(self, a: float, b: float):
        samples = np.asarray(self(_sample_points(a, b)), dtype=float)
        if not np.all(np.isfinite(samples)):
            raise InvalidParam(f"Order {self._source} is not finite on [{a}, {b}]")
        low, high = samples.min(), samples.max()
        if low < self._min or high > self._max:
            raise InvalidParam(
                f"Order {self._source} ranges over [{low:.6g}, {high:.6g}] on [{a}, {b}], "
                f"outside its declared bounds [{self._min}, {self._max}]"
            )

    def __repr__(self):
        return f"OrderFunction({self._source})"


class WarpFunction:
    """psi(t) with its derivative psi'(t)."""

    def __init__(self, func: Callable, deriv: Callable, name: str):
        self._func = func
        self._deriv = deriv
        self._name = name

    @classmethod
    def identity(cls) -> "WarpFunction":
        return cls(
            lambda t: np.asarray(t, dtype=float) if np.ndim(t) else float(t),
            lambda t: np.ones(np.shape(t)) if np.ndim(t) else 1.0,
            "t",
        )

    @classmethod
    def log(cls) -> "WarpFunction":
        return cls(np.log, lambda t: 1.0 / np.asarray(t, dtype=float), "ln(t)")

    @classmethod
    def sin(cls) -> "WarpFunction":
        return cls(np.sin, np.cos, "sin(t)")

    @classmethod
    def from_expression(cls, source: str) -> "WarpFunction":
        if source.replace(" ", "") == "t":
            return cls.identity()
        expression = Expression(source, {"t"})
        slope = expression.derivative("t")
        return cls(lambda t: expression(t=t), lambda t: slope(t=t), source)

    def __call__(self, t):
        return self._func(t)

    def derivative(self, t):
        return self._deriv(t)

    @property
    def name(self) -> str:
        return self._name

    @property
    def is_identity(self) -> bool:
        return self._name == "t"

    def validate(self, a: float, b: float):
        if self._name == "ln(t)" and a <= 0.0:
            raise InvalidParam(f"Warp ln(t) needs a > 0, got a = {a}")
        if self._name == "sin(t)" and not np.all(np.cos(_sample_points(a, b)) > 0.0):
            raise InvalidParam(f"Warp sin(t) needs cos(t) > 0 on [{a}, {b}]")

        t = _sample_points(a, b)
        values = np.asarray(self(t), dtype=float)
        slopes = np.asarray(self.derivative(t), dtype=float)
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(slopes))):
            raise InvalidParam(f"Warp {self._name} is not finite on [{a}, {b}]")
        if np.any(slopes <= 0.0):
            raise InvalidParam(f"Warp {self._name} must be increasing on [{a}, {b}]")

        step = Tolerances.WARP_FD_STEP * (b - a)
        probe = np.linspace(a + step, b - step, 17)
        central = (np.asarray(self(probe + step)) - np.asarray(self(probe - step))) / (2 * step)
        exact = np.asarray(self.derivative(probe), dtype=float)
        mismatch = np.abs(central - exact) / (1.0 + np.abs(exact))
        if np.max(mismatch) > Tolerances.WARP_FD_TOL:
            raise InvalidParam(
                f"Derivative of warp {self._name} disagrees with central differences "
                f"(relative mismatch {np.max(mismatch):.2e})"
            )

    def __repr__(self):
        return f"WarpFunction({self._name})"


class NormalizationFunction:
    """M(alpha) > 0 on [0, 1] with M(0) = M(1) = 1."""

    def __init__(self, func: Callable, name: str):
        self._func = func
        self._name = name
        self.validate()

    @classmethod
    def unit(cls) -> "NormalizationFunction":
        return cls(lambda alpha: np.ones(np.shape(alpha)) if np.ndim(alpha) else 1.0, "1")

    @classmethod
    def from_expression(cls, source: str) -> "NormalizationFunction":
        expression = Expression(source, {"alpha"})
        if expression.is_constant() and float(expression()) == 1.0:
            return cls.unit()
        return cls(lambda alpha: expression(alpha=alpha), source)

    def __call__(self, alpha):
        return self._func(alpha)

    @property
    def name(self) -> str:
        return self._name

    def validate(self):
        for endpoint in (0.0, 1.0):
            value = float(self(endpoint))
            if abs(value - 1.0) > 1e-12:
                raise InvalidParam(
                    f"Normalization {self._name} must equal 1 at alpha = {endpoint}, got {value}"
                )
        samples = np.asarray(self(np.linspace(0.0, 1.0, GridLimits.NORM_SAMPLES)))
        if not np.all(np.isfinite(samples)) or np.any(samples <= 0.0):
            raise InvalidParam(f"Normalization {self._name} must be positive on [0, 1]")

    def __repr__(self):
        return f"NormalizationFunction({self._name})"


@dataclass(frozen=True)
class KernelSpec:
    """
    Kernel parameters on [a, b]. With `order_tied` the Mittag-Leffler order and
    the power follow the order function, beta = gamma = alpha(t), evaluated at
    the output time.
    """

    gamma: float
    beta: float
    order: OrderFunction
    warp: WarpFunction
    norm: NormalizationFunction
    a: float
    b: float
    order_tied: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b) and self.a < self.b):
            raise InvalidParam(f"Interval must be finite with a < b, got [{self.a}, {self.b}]")
        if not (0.0 < self.gamma <= 1.0):
            raise InvalidParam(f"gamma must lie in (0, 1], got {self.gamma}")
        if not (0.0 < self.beta <= 1.0):
            raise InvalidParam(f"beta must lie in (0, 1], got {self.beta}")
        self.order.validate(self.a, self.b)
        self.warp.validate(self.a, self.b)
        if self.order_tied and self.order.declared_min <= 0.0:
            raise InvalidParam("A tied Mittag-Leffler order needs alpha(t) > 0")
        logger.debug(f"Kernel spec ready: {self.describe()}")

    @property
    def interval(self):
        return (self.a, self.b)

    def with_order(self, order: OrderFunction) -> "KernelSpec":
        return replace(self, order=order)

    def with_beta(self, beta: float) -> "KernelSpec":
        return replace(self, beta=beta)

    def describe(self) -> str:
        if self.order_tied:
            orders = "beta=gamma=alpha(t)"
        else:
            orders = f"gamma={self.gamma}, beta={self.beta}"
        return (
            f"{orders}, alpha={self.order.source}, psi={self.warp.name}, "
            f"M={self.norm.name}, [{self.a}, {self.b}]"
        )

    def orders_at(self, t: float):
        """(gamma, beta) used by the kernel at output time t."""
        if self.order_tied:
            alpha = float(self.order(t))
            return alpha, alpha
        return self.gamma, self.beta

    def kernel_values(self, t: float, tau) -> np.ndarray:
        """
        H(t, tau) for one output time and an array of tau <= t. No range
        checks; used by the operators on grid rows.
        """
        tau = np.asarray(tau, dtype=float)
        alpha = float(self.order(t))
        if alpha <= 0.0:
            return np.ones_like(tau)
        if 1.0 - alpha < Tolerances.SINGULAR_ORDER:
            raise SingularOrder(f"Kernel is singular at alpha({t}) = {alpha}")
        gamma, beta = self.orders_at(t)
        distance = np.maximum(self.warp(t) - np.asarray(self.warp(tau), dtype=float), 0.0)
        argument = -alpha * distance ** gamma / (1.0 - alpha)
        return np.asarray(ml_eval(MLParams(beta), argument), dtype=float)

    def prefactors(self, t) -> np.ndarray:
        """M(alpha(t)) / (1 - alpha(t)) at an array of times."""
        alpha = np.atleast_1d(np.asarray(self.order(t), dtype=float))
        if np.any(1.0 - alpha < Tolerances.SINGULAR_ORDER):
            raise SingularOrder(
                f"Prefactor is singular: 1 - alpha(t) drops to {np.min(1.0 - alpha):.3e}"
            )
        return np.asarray(self.norm(alpha), dtype=float) / (1.0 - alpha)


def _check_times(spec: KernelSpec, t: float, tau: float):
    slack = 1e-12 * (spec.b - spec.a)
    if not (spec.a - slack <= tau <= t + slack and t <= spec.b + slack):
        raise DomainError(
            f"Kernel needs a <= tau <= t <= b, got tau={tau}, t={t} on [{spec.a}, {spec.b}]"
        )


def kernel_eval(spec: KernelSpec, t: float, tau: float) -> float:
    _check_times(spec, t, tau)
    if tau >= t:
        return 1.0
    value = float(spec.kernel_values(t, np.array([tau]))[0])
    return min(max(value, 0.0), 1.0)


def kernel_prefactor(spec: KernelSpec, t: float) -> float:
    if not (spec.a <= t <= spec.b):
        raise DomainError(f"t = {t} lies outside [{spec.a}, {spec.b}]")
    return float(spec.prefactors(t)[0])


def kernel_tau_derivative(spec: KernelSpec, t: float, tau: float) -> float:
    """
    dH/dtau at tau < t for beta = gamma. Non-negative: the kernel increases
    toward the diagonal.
    """
    _check_times(spec, t, tau)
    gamma, beta = spec.orders_at(t)
    if beta != gamma:
        raise InvalidParam("The tau-derivative is available for beta = gamma only")
    alpha = float(spec.order(t))
    if alpha <= 0.0:
        return 0.0
    if 1.0 - alpha < Tolerances.SINGULAR_ORDER:
        raise SingularOrder(f"Kernel is singular at alpha({t}) = {alpha}")
    rate = alpha / (1.0 - alpha)
    slope = float(spec.warp.derivative(tau))
    distance = max(float(spec.warp(t)) - float(spec.warp(tau)), 0.0)
    if gamma == 1.0:
        return rate * slope * float(np.exp(-rate * distance))
    # H = E_gamma(-s^gamma) with s = rate^(1/gamma) (psi(t) - psi(tau))
    scale = rate ** (1.0 / gamma)
    return scale * slope * ml_spectral_slope(gamma, scale * distance)


class KernelRows:
    """
    Rows H(t_n, tau_j) on a grid, tau_j the nodes or the cell midpoints. With a
    constant order and the identity warp the kernel depends on t_n - tau only,
    and one evaluation at t_N serves every row.
    """

    def __init__(self, spec: KernelSpec, t: np.ndarray, midpoints: bool = False):
        self._spec = spec
        self._t = t
        self._midpoints = midpoints
        self._nodes = 0.5 * (t[1:] + t[:-1]) if midpoints else t
        self._last = t.size - 1
        self._base = None
        if spec.order.is_constant and not spec.order_tied and spec.warp.is_identity:
            self._base = spec.kernel_values(t[-1], self._nodes)

    def row(self, n: int) -> np.ndarray:
        count = n if self._midpoints else n + 1
        if self._base is not None:
            start = self._last - n
            return self._base[start : start + count]
        return self._spec.kernel_values(self._t[n], self._nodes[:count])
