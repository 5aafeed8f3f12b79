from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..config import GridLimits, SolverConfig
from ..utils.exceptions import DegenerateGrid, InvalidParam
from .expression import Expression
from .grid import GridFunction
from .kernel import KernelSpec


@dataclass(frozen=True)
class FdeProblem:
    """
    Caputo-type equation D u = f(t, u) on the kernel's interval with u(a) = initial.

    `rhs` and the optional `rhs_du` (df/du) take numpy arrays or floats.
    `compatibility` is "relax" to subtract f(a, u0) H(t, a) from the right-hand
    side, or "strict" to impose f unchanged.
    """

    spec: KernelSpec
    rhs: Callable
    initial: float
    grid_n: int
    rhs_du: Optional[Callable] = None
    compatibility: str = "relax"
    name: str = "f(t,u)"

    def __post_init__(self):
        if self.grid_n < GridLimits.MIN_DERIV_NODES:
            raise DegenerateGrid(
                f"FDE grids need n >= {GridLimits.MIN_DERIV_NODES}, got {self.grid_n}"
            )
        if not np.isfinite(self.initial):
            raise InvalidParam(f"Initial value must be finite, got {self.initial}")
        if self.compatibility not in SolverConfig.COMPATIBILITY_MODES:
            raise InvalidParam(
                f"Unknown compatibility mode {self.compatibility!r}, "
                f"expected one of {SolverConfig.COMPATIBILITY_MODES}"
            )
        start = self.rhs(self.spec.a, float(self.initial))
        if not np.isfinite(start):
            raise InvalidParam(f"Right-hand side {self.name} is not finite at (a, u0)")

    @classmethod
    def from_expression(
        cls, spec: KernelSpec, source: str, initial: float, grid_n: int, **kwargs
    ) -> "FdeProblem":
        expression = Expression(source, {"t", "u"})
        slope = expression.derivative("u")
        return cls(
            spec,
            lambda t, u: expression(t=t, u=u),
            float(initial),
            int(grid_n),
            rhs_du=lambda t, u: slope(t=t, u=u),
            name=source,
            **kwargs,
        )

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.spec.a, self.spec.b, self.grid_n + 1)

    @property
    def start_value(self) -> float:
        """f(a, u0); zero when the equation is compatible at t = a."""
        return float(self.rhs(self.spec.a, self.initial))

    def slope(self, t, u):
        """df/du, by central differences when no derivative was supplied."""
        if self.rhs_du is not None:
            return self.rhs_du(t, u)
        step = SolverConfig.DU_STEP * np.maximum(1.0, np.abs(u))
        return (self.rhs(t, u + step) - self.rhs(t, u - step)) / (2.0 * step)


@dataclass(frozen=True)
class LinearBound:
    """The linear right-hand side lam * u + h(t) of a bounding problem."""

    lam: float
    h: GridFunction

    def __post_init__(self):
        if not self.lam < 0.0:
            raise InvalidParam(f"Bounding problems need lambda < 0, got {self.lam}")

    def __call__(self, t, u):
        return self.lam * u + np.interp(t, self.h.t, self.h.values)


@dataclass
class BoundCheck:
    lower: GridFunction
    upper: GridFunction
    violations: int
    first_violation: Optional[int] = None


@dataclass
class SolveReport:
    solution: GridFunction
    newton_iters: np.ndarray
    residual_norm: float
    compatibility_gap: float = 0.0
    bound_check: Optional[BoundCheck] = None
    notes: list = field(default_factory=list)

    @property
    def final_value(self) -> float:
        return float(self.solution.values[-1])

    def summary(self) -> dict:
        info = {
            "final_value": self.final_value,
            "residual_norm": self.residual_norm,
            "max_newton_iters": int(np.max(self.newton_iters)) if self.newton_iters.size else 0,
            "compatibility_gap": self.compatibility_gap,
        }
        if self.bound_check is not None:
            info["violations"] = self.bound_check.violations
        return info
