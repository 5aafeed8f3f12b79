"""
Implicit marching solver for D u = f(t, u) with the Caputo-type operator, and
the checks built on it: comparison principle, uniqueness, sandwich bounds.

At node n the product-trapezoid discretisation reads

    P_n [ sum_{j<n} c_{n,j} (u_j - u_{j-1}) + c_{n,n} (u_n - u_{n-1}) ] = f(t_n, u_n) - s_n

with c_{n,j} = (H(t_n, t_{j-1}) + H(t_n, t_j)) / 2, P_n the prefactor and s_n
the compatibility shift f(a, u0) H(t_n, a) ("relax") or 0 ("strict").
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from ..config import SolverConfig
from ..entities.grid import GridFunction
from ..entities.kernel import KernelRows, KernelSpec
from ..entities.problem import BoundCheck, FdeProblem, LinearBound, SolveReport
from ..utils.exceptions import (
    BoundViolation,
    HypothesisViolation,
    InvalidParam,
    NewtonDivergence,
)
from ..utils.helpers import parallel_map
from ..utils.logger import CustomFormatter as cf
from ..utils.logger import logger
from .operators import caputo_deriv_ns


class _Memory:
    """Kernel weights c_{n,j} and prefactors of one grid."""

    def __init__(self, spec: KernelSpec, t: np.ndarray):
        self._rows = KernelRows(spec, t)
        self.prefactors = spec.prefactors(t)

    def weights(self, n: int):
        row = self._rows.row(n)
        return 0.5 * (row[:-1] + row[1:]), row[0]


def _scale(u) -> float:
    return max(1.0, float(np.max(np.abs(u))))


def _solve_node(problem, t_n, lhs_rate, lhs_const, start, tol, node):
    """
    Root of G(x) = lhs_rate * x + lhs_const - f(t_n, x). Newton from `start`,
    then bisection on a bracket grown around `start`. Returns (root, iterations).
    """

    def residual(x):
        return lhs_rate * x + lhs_const - float(problem.rhs(t_n, x))

    x = start
    for iteration in range(1, SolverConfig.NEWTON_MAX_ITER + 1):
        value = residual(x)
        if abs(value) <= tol * max(1.0, abs(x)):
            return x, iteration - 1
        slope = lhs_rate - float(problem.slope(t_n, x))
        if slope == 0.0 or not np.isfinite(slope):
            break
        x = x - value / slope
        if not np.isfinite(x):
            break
    else:
        if abs(residual(x)) <= tol * max(1.0, abs(x)):
            return x, SolverConfig.NEWTON_MAX_ITER

    logger.debug(f"Newton stalled at node {node}; falling back to bisection")
    width = 1e-3 * max(1.0, abs(start))
    lo, hi = start - width, start + width
    g_lo, g_hi = residual(lo), residual(hi)
    expansions = 0
    while np.sign(g_lo) == np.sign(g_hi):
        expansions += 1
        if expansions > SolverConfig.BISECTION_MAX_EXPAND or not (
            np.isfinite(g_lo) and np.isfinite(g_hi)
        ):
            raise NewtonDivergence(node, "No sign change found around the previous value")
        width *= 2.0
        lo, hi = start - width, start + width
        g_lo, g_hi = residual(lo), residual(hi)

    iterations = SolverConfig.NEWTON_MAX_ITER
    for _ in range(SolverConfig.BISECTION_MAX_ITER):
        iterations += 1
        mid = 0.5 * (lo + hi)
        g_mid = residual(mid)
        if abs(g_mid) <= tol * max(1.0, abs(mid)):
            return mid, iterations
        if np.sign(g_mid) == np.sign(g_lo):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    raise NewtonDivergence(node, "Bisection did not converge")


def _residuals(problem: FdeProblem, memory: _Memory, t, u, shift) -> np.ndarray:
    """Discretised equation at every node n >= 1, applied to `u`."""
    steps = np.diff(u)
    out = np.zeros_like(u)
    for n in range(1, u.size):
        weights, _ = memory.weights(n)
        lhs = memory.prefactors[n] * np.dot(weights, steps[:n])
        out[n] = lhs - (float(problem.rhs(t[n], u[n])) - shift[n])
    return out


def solve_fde(problem: FdeProblem, guess_offsets: Optional[np.ndarray] = None) -> SolveReport:
    """
    March the implicit scheme from u(a) = u0. `guess_offsets[n]` shifts the
    Newton starting point at node n away from u_{n-1}.
    """
    spec = problem.spec
    t = problem.t
    tol = SolverConfig.TOL
    memory = _Memory(spec, t)

    start_value = problem.start_value
    gap = abs(start_value)
    notes = []
    if gap > tol:
        mode = problem.compatibility
        message = f"f(a, u0) = {start_value:.6g} is not zero ({mode} mode)"
        notes.append(message)
        logger.info(message)

    u = np.empty(t.size)
    u[0] = problem.initial
    shift = np.zeros(t.size)
    iterations = np.zeros(t.size - 1, dtype=int)

    for n in range(1, t.size):
        weights, h_start = memory.weights(n)
        if problem.compatibility == "relax":
            shift[n] = start_value * h_start
        history = np.dot(weights[:-1], np.diff(u[:n]))
        rate = memory.prefactors[n] * weights[-1]
        const = memory.prefactors[n] * (history - weights[-1] * u[n - 1]) + shift[n]
        start = u[n - 1]
        if guess_offsets is not None:
            start = start + guess_offsets[n]
        u[n], iterations[n - 1] = _solve_node(problem, t[n], rate, const, start, tol, n)

    residual = _residuals(problem, memory, t, u, shift)
    residual_norm = float(np.max(np.abs(residual)))
    limit = 10.0 * tol * _scale(u)
    if residual_norm > limit:
        node = int(np.argmax(np.abs(residual)))
        raise NewtonDivergence(node, f"Residual {residual_norm:.3e} exceeds {limit:.3e}")

    solution = GridFunction(spec.a, spec.b, u, name=problem.name)
    logger.debug(
        f"Solved {problem.name} on n={problem.grid_n}: u(b)={u[-1]:.12g}, "
        f"residual {residual_norm:.2e}"
    )
    return SolveReport(solution, iterations, residual_norm, gap, notes=notes)


def solve_fde_sweeps(problem: FdeProblem, node_order) -> np.ndarray:
    """
    Nonlinear Gauss-Seidel over the whole grid: each sweep solves the equation
    of node n for u_n with the current values elsewhere, visiting the nodes in
    `node_order`. Node n couples to nodes <= n only, so any order settles
    within n sweeps.
    """
    spec = problem.spec
    t = problem.t
    tol = SolverConfig.TOL
    memory = _Memory(spec, t)
    node_order = [int(n) for n in node_order]
    if sorted(node_order) != list(range(1, t.size)):
        raise InvalidParam("node_order must visit every node 1..n once")

    u = np.full(t.size, problem.initial, dtype=float)
    shift = np.zeros(t.size)
    if problem.compatibility == "relax":
        for n in range(1, t.size):
            shift[n] = problem.start_value * memory.weights(n)[1]

    for sweep in range(1, t.size + 2):
        previous = u.copy()
        for n in node_order:
            weights, _ = memory.weights(n)
            history = np.dot(weights[:-1], np.diff(u[:n]))
            rate = memory.prefactors[n] * weights[-1]
            const = memory.prefactors[n] * (history - weights[-1] * u[n - 1]) + shift[n]
            u[n], _ = _solve_node(problem, t[n], rate, const, u[n], tol, n)
        change = np.abs(u - previous)
        if np.max(change) <= tol * _scale(u):
            logger.debug(f"Sweeps settled after {sweep} passes")
            return u
    raise NewtonDivergence(int(np.argmax(change)), "Sweeps did not settle")


@lru_cache(maxsize=1)
def _log_comparison_tension():
    logger.warning(
        f"{cf.YELLOW}Comparison check: the hypothesis q >= 0 with q(a) != 0 is used as "
        f"stated; the argument at t = a instead yields q(a) <= 0{cf.RESET}"
    )


@dataclass
class ComparisonReport:
    status: str  # PASS, VIOLATION or NOT_APPLICABLE
    max_inequality: float
    max_u: float
    node: Optional[int] = None


def check_comparison(
    spec: KernelSpec, u: GridFunction, q: GridFunction, tol: Optional[float] = None
) -> ComparisonReport:
    """
    If D u + q u <= 0 on the grid, u must be <= 0. Reports NOT_APPLICABLE when
    the inequality itself fails.
    """
    if not u.same_grid(q):
        raise InvalidParam("u and q must share a grid")
    if np.any(q.values < 0.0):
        raise HypothesisViolation(f"q is negative at node {int(np.argmax(q.values < 0.0))}")
    if q.values[0] == 0.0:
        raise HypothesisViolation("q(a) must be non-zero")
    _log_comparison_tension()

    tol = SolverConfig.BOUND_SLACK * _scale(u.values) if tol is None else tol
    inequality = caputo_deriv_ns(spec, u).values.values + q.values * u.values
    max_inequality = float(np.max(inequality))
    max_u = float(np.max(u.values))
    if max_inequality > tol:
        node = int(np.argmax(inequality))
        return ComparisonReport("NOT_APPLICABLE", max_inequality, max_u, node)
    if max_u > tol:
        node = int(np.argmax(u.values > tol))
        logger.warning(f"{cf.RED}Comparison conclusion fails at node {node}{cf.RESET}")
        return ComparisonReport("VIOLATION", max_inequality, max_u, node)
    return ComparisonReport("PASS", max_inequality, max_u)


@dataclass
class TrialsReport:
    cases: int
    passes: int
    violations: int
    not_applicable: int


def comparison_trials(
    spec: KernelSpec, cases: int = 100, seed: int = 2024, n: int = 256
) -> TrialsReport:
    """
    Random pairs u = -shift + amp sin(k pi x + phase), q = q0 + q1 x with
    x = (t - a) / (b - a). u is neither signed nor monotone, so the inequality
    holds for some pairs and fails for others; no pair may pass it with u > 0.
    """
    rng = np.random.default_rng(seed)
    a, b = spec.interval
    passes = violations = not_applicable = 0
    for _ in range(cases):
        shift, amp = rng.uniform(0.0, 2.0), rng.uniform(0.05, 1.0)
        k, phase = int(rng.integers(1, 4)), rng.uniform(0.0, 2.0 * np.pi)
        q0, q1 = rng.uniform(0.5, 3.0), rng.uniform(0.0, 2.0)

        def u_func(t, shift=shift, amp=amp, k=k, phase=phase):
            x = (t - a) / (b - a)
            return -shift + amp * np.sin(k * np.pi * x + phase)

        def u_slope(t, amp=amp, k=k, phase=phase):
            x = (t - a) / (b - a)
            return amp * k * np.pi / (b - a) * np.cos(k * np.pi * x + phase)

        u = GridFunction.from_callable(u_func, a, b, n, deriv=u_slope)
        q = GridFunction.from_callable(lambda t: q0 + q1 * (t - a) / (b - a), a, b, n)
        report = check_comparison(spec, u, q)
        if report.status == "PASS":
            passes += 1
        elif report.status == "VIOLATION":
            violations += 1
        else:
            not_applicable += 1
    logger.info(
        f"Comparison trials: {passes} pass, {violations} violations, "
        f"{not_applicable} not applicable"
    )
    return TrialsReport(cases, passes, violations, not_applicable)


def _check_monotone(problem: FdeProblem, low: float, high: float):
    t = problem.t[:: max(1, problem.grid_n // 64)]
    u = np.linspace(low, high, 33)
    tt, uu = np.meshgrid(t, u)
    slopes = np.asarray(problem.slope(tt, uu), dtype=float)
    if np.any(slopes > 1e-12):
        worst = float(np.max(slopes))
        raise HypothesisViolation(f"df/du reaches {worst:.3g} > 0; f must be non-increasing in u")


@dataclass
class UniquenessReport:
    perturbations: int
    orderings: int
    max_divergence: float
    reference: GridFunction


def uniqueness_probe(problem: FdeProblem, perturbations: int = 8, seed: int = 2024):
    """
    Re-solve from randomly perturbed Newton starting points, and by whole-grid
    sweeps in reversed and shuffled node order, then report the largest
    pairwise distance between the solutions.
    """
    u0 = problem.initial
    _check_monotone(problem, u0 - 1.0, u0 + 1.0)
    reference = solve_fde(problem)
    values = reference.solution.values
    margin = 0.1 * _scale(values)
    _check_monotone(problem, values.min() - margin, values.max() + margin)

    rng = np.random.default_rng(seed)
    offsets = [
        rng.normal(scale=0.5 * _scale(values), size=problem.grid_n + 1)
        for _ in range(perturbations)
    ]
    nodes = np.arange(1, problem.grid_n + 1)
    orderings = [nodes[::-1], rng.permutation(nodes)]
    runs = parallel_map(lambda offset: solve_fde(problem, offset).solution.values, offsets)
    runs += parallel_map(lambda order: solve_fde_sweeps(problem, order), orderings)
    stack = np.vstack([values] + list(runs))
    divergence = 0.0
    for i in range(stack.shape[0]):
        divergence = max(divergence, float(np.max(np.abs(stack[i + 1 :] - stack[i]), initial=0.0)))
    logger.info(
        f"Uniqueness probe: {perturbations} perturbed and {len(orderings)} reordered runs, "
        f"max divergence {divergence:.3e}"
    )
    return UniquenessReport(perturbations, len(orderings), divergence, reference.solution)


def _check_envelope(problem, lower, upper, u: np.ndarray):
    t = problem.t
    margin = 0.1 * _scale(u)
    for level in np.linspace(-margin, margin, 9):
        x = u + level
        value = np.asarray(problem.rhs(t, x), dtype=float)
        tol = SolverConfig.BOUND_SLACK * _scale(x)
        if np.any(value > upper(t, x) + tol):
            raise HypothesisViolation("f(t, u) exceeds the upper bound lam1 u + h1(t)")
        if np.any(value < lower(t, x) - tol):
            raise HypothesisViolation("f(t, u) falls below the lower bound lam2 u + h2(t)")


def sandwich_check(
    problem: FdeProblem,
    lower: LinearBound,
    upper: LinearBound,
    verify_hypotheses: bool = True,
) -> SolveReport:
    """
    Solve u and the two linear bounding problems v1 (upper) and v2 (lower) on the
    same grid and check v2 - tol <= u <= v1 + tol at every node. The bounding
    problems carry the same compatibility shift as u.
    """
    for bound in (lower, upper):
        if bound.h.n != problem.grid_n or bound.h.interval != problem.spec.interval:
            raise InvalidParam("Bound functions must live on the problem grid")

    report = solve_fde(problem)
    u = report.solution.values
    if verify_hypotheses:
        _check_envelope(problem, lower, upper, u)

    spec = problem.spec
    start_value = problem.start_value if problem.compatibility == "relax" else 0.0
    start_row = KernelRows(spec, problem.t)

    def shifted(bound):
        t_grid = problem.t
        h_start = np.array([start_row.row(n)[0] for n in range(t_grid.size)])

        def rhs(t, v):
            return bound(t, v) - start_value * np.interp(t, t_grid, h_start)

        return FdeProblem(
            spec,
            rhs,
            problem.initial,
            problem.grid_n,
            rhs_du=lambda t, v: bound.lam * np.ones_like(np.asarray(v, dtype=float)),
            compatibility="strict",
            name=f"{bound.lam} u + h(t)",
        )

    v_upper, v_lower = parallel_map(lambda b: solve_fde(shifted(b)), [upper, lower])
    tol = SolverConfig.BOUND_SLACK * _scale(u)
    bad = (u > v_upper.solution.values + tol) | (u < v_lower.solution.values - tol)
    violations = int(np.count_nonzero(bad))
    first = int(np.argmax(bad)) if violations else None
    report.bound_check = BoundCheck(v_lower.solution, v_upper.solution, violations, first)
    if violations:
        logger.error(f"{cf.RED}Sandwich bound violated at {violations} nodes{cf.RESET}")
        raise BoundViolation(first, report)
    logger.info(f"{cf.GREEN}Sandwich bounds hold at all {u.size} nodes{cf.RESET}")
    return report
