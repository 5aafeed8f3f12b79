from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..config import SCHEMES, GridLimits
from ..utils.exceptions import DegenerateGrid, DomainFault, InvalidParam
from ..utils.logger import CustomFormatter as cf
from ..utils.logger import logger
from .expression import Expression


class GridFunction:
    """
    Samples of f on the uniform grid t_i = a + i (b - a) / n, i = 0..n, with an
    optional analytic derivative. Instances are immutable.
    """

    def __init__(self, a, b, values, deriv_values=None, name=None):
        a, b = float(a), float(b)
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise InvalidParam(f"Interval must satisfy a < b, got [{a}, {b}]")
        values = np.array(values, dtype=float)
        if values.ndim != 1:
            raise InvalidParam("Grid values must be one-dimensional")
        n = values.size - 1
        if n < GridLimits.MIN_NODES:
            raise DegenerateGrid(f"Grid needs n >= {GridLimits.MIN_NODES}, got {n}")
        if not np.all(np.isfinite(values)):
            raise InvalidParam("Grid values must be finite")
        values.setflags(write=False)

        self._a = a
        self._b = b
        self._values = values
        self._name = name
        self._deriv = None
        if deriv_values is not None:
            deriv = np.array(deriv_values, dtype=float)
            if deriv.shape != values.shape or not np.all(np.isfinite(deriv)):
                raise InvalidParam("Derivative values must be finite and match the grid")
            deriv.setflags(write=False)
            self._deriv = deriv
            self._check_derivative()

    @classmethod
    def from_callable(
        cls,
        func: Callable,
        a: float,
        b: float,
        n: int,
        deriv: Optional[Callable] = None,
        name: Optional[str] = None,
    ) -> "GridFunction":
        t = np.linspace(a, b, int(n) + 1)
        values = np.broadcast_to(func(t), t.shape)
        deriv_values = None if deriv is None else np.broadcast_to(deriv(t), t.shape)
        return cls(a, b, values, deriv_values, name=name)

    @classmethod
    def from_expression(cls, source: str, a: float, b: float, n: int) -> "GridFunction":
        """
        Sample an expression in t. A derivative that faults on the grid (sqrt(t)
        at t = 0) is dropped and finite differences take its place.
        """
        expression = Expression(source, {"t"})
        t = np.linspace(a, b, int(n) + 1)
        values = np.broadcast_to(expression(t=t), t.shape)
        try:
            deriv_values = np.broadcast_to(expression.derivative("t")(t=t), t.shape)
        except DomainFault as e:
            logger.warning(f"{cf.YELLOW}No analytic derivative for {source}: {e}{cf.RESET}")
            deriv_values = None
        return cls(a, b, values, deriv_values, name=source)

    def _check_derivative(self):
        """Warn when the supplied derivative disagrees with central differences."""
        h = self.h
        central = (self._values[2:] - self._values[:-2]) / (2.0 * h)
        mismatch = np.max(np.abs(central - self._deriv[1:-1]))
        # h^2/6 |f'''|, with f''' estimated from the derivative samples
        curvature = np.abs(np.diff(self._deriv, 2)) / (h * h)
        allowed = 4.0 * h * h / 6.0 * (np.max(curvature) + 1.0) + 1e-8 * (
            1.0 + np.max(np.abs(self._deriv))
        )
        if mismatch > allowed:
            logger.warning(
                f"{cf.YELLOW}Derivative of {self._name or 'grid function'} differs from "
                f"central differences by {mismatch:.3e}{cf.RESET}"
            )

    @property
    def a(self) -> float:
        return self._a

    @property
    def b(self) -> float:
        return self._b

    @property
    def interval(self):
        return (self._a, self._b)

    @property
    def n(self) -> int:
        return self._values.size - 1

    @property
    def h(self) -> float:
        return (self._b - self._a) / self.n

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self._a, self._b, self.n + 1)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def name(self) -> Optional[str]:
        return self._name

    @property
    def has_derivative(self) -> bool:
        return self._deriv is not None

    @property
    def deriv_values(self) -> np.ndarray:
        """Supplied f', or second-order finite differences of the values."""
        if self._deriv is not None:
            return self._deriv
        return np.gradient(self._values, self.h, edge_order=2)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self._values)))

    def same_grid(self, other: "GridFunction") -> bool:
        return self.n == other.n and self.interval == other.interval

    def with_values(self, values, deriv_values=None, name=None) -> "GridFunction":
        return GridFunction(self._a, self._b, values, deriv_values, name=name)

    def head(self, m: int) -> "GridFunction":
        """The first `m` intervals, on [a, a + m h]."""
        if not 0 < m <= self.n:
            raise InvalidParam(f"Cannot take {m} of {self.n} intervals")
        deriv = None if self._deriv is None else self._deriv[: m + 1]
        return GridFunction(self._a, self._a + m * self.h, self._values[: m + 1], deriv, name=self._name)

    def coarsen(self) -> "GridFunction":
        """Every other node; needs an even n."""
        if self.n % 2:
            raise DegenerateGrid(f"Cannot coarsen a grid with odd n = {self.n}")
        deriv = None if self._deriv is None else self._deriv[::2]
        return GridFunction(self._a, self._b, self._values[::2], deriv, name=self._name)

    def _combine(self, other, op):
        if isinstance(other, GridFunction):
            if not self.same_grid(other):
                raise InvalidParam("Grid functions live on different grids")
            deriv = None
            if self.has_derivative and other.has_derivative:
                deriv = op(self._deriv, other._deriv)
            return GridFunction(self._a, self._b, op(self._values, other._values), deriv)
        return NotImplemented

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        deriv = None if self._deriv is None else scalar * self._deriv
        return GridFunction(self._a, self._b, scalar * self._values, deriv)

    __rmul__ = __mul__

    def __repr__(self):
        label = f" {self._name!r}" if self._name else ""
        return f"GridFunction{label} on [{self._a}, {self._b}] with n={self.n}"


@dataclass(frozen=True)
class OperatorResult:
    values: GridFunction
    quad_error_estimate: float
    scheme: str = "product_trapezoid"

    def __post_init__(self):
        if not self.quad_error_estimate >= 0.0:
            raise InvalidParam("Quadrature error estimate must be non-negative")
        if self.scheme not in SCHEMES:
            raise InvalidParam(f"Unknown scheme {self.scheme!r}")

    @property
    def t(self) -> np.ndarray:
        return self.values.t

    def at(self, t: float) -> float:
        """Value at the grid node nearest to `t`."""
        index = int(round((t - self.values.a) / self.values.h))
        return float(self.values.values[min(max(index, 0), self.values.n)])
