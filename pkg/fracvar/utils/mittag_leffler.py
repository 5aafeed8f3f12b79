"""
One-parameter Mittag-Leffler function E_beta(z) = sum_k z^k / Gamma(beta k + 1)
for real arguments, and the spectral density K_gamma(r) with

    E_gamma(-t^gamma) = int_0^inf exp(-r t) K_gamma(r) dr,   0 < gamma < 1.

The series is summed with compensated (Kahan) summation on numpy arrays.
Arguments where the series cannot be certified (|z| too large, or the
alternating terms cancel beyond the requested tolerance) are re-evaluated
through the algebraic expansion at -infinity, then through the spectral
integral. beta = 1 is exp.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gammaln, rgamma

from ..config import Tolerances
from .exceptions import InvalidParam, NonConvergent
from .logger import logger
from .quadrature import adaptive_gauss_legendre

ArrayLike = Union[float, np.ndarray]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class MLParams:
    beta: float
    tol: float = Tolerances.ML_SERIES

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise InvalidParam(f"Mittag-Leffler order must lie in (0, 1], got {self.beta}")
        if not self.tol > 0.0:
            raise InvalidParam(f"Tolerance must be positive, got {self.tol}")


def _series(beta: float, z: np.ndarray, tol: float, max_terms: int):
    """
    Sum the power series element-wise.

    Returns (value, certified) where `certified` flags entries whose truncation
    and cancellation errors are both below `tol` relative to the value.
    """
    total = np.ones_like(z)
    carry = np.zeros_like(z)
    peak = np.ones_like(z)
    nonzero = z != 0.0
    log_abs = np.zeros_like(z)
    log_abs[nonzero] = np.log(np.abs(z[nonzero]))
    negative = z < 0.0
    active = nonzero.copy()

    for k in range(1, max_terms):
        if not active.any():
            break
        log_gamma = gammaln(beta * k + 1.0)
        magnitude = np.exp(k * log_abs[active] - log_gamma)
        term = np.where(negative[active] & (k % 2 == 1), -magnitude, magnitude)

        # Kahan step on the active entries
        y = term - carry[active]
        t = total[active] + y
        carry[active] = (t - total[active]) - y
        total[active] = t
        peak[active] = np.maximum(peak[active], magnitude)

        # Past the peak the term ratio is < 1 and the tail is bounded by a
        # geometric series with that ratio
        ratio = np.exp(log_abs[active] + log_gamma - gammaln(beta * (k + 1) + 1.0))
        tail = np.where(ratio < 0.5, magnitude * ratio / (1.0 - ratio), np.inf)
        done = tail <= tol * np.abs(total[active])
        indices = np.flatnonzero(active)
        active[indices[done]] = False

    cancellation = peak * _EPS * 4.0
    certified = (~active) & (cancellation <= tol * np.maximum(np.abs(total), _EPS))
    return total, certified


def _asymptotic(beta: float, z: np.ndarray, tol: float, max_terms: int):
    """
    E_beta(z) ~ -sum_k z^(-k) / Gamma(1 - beta k) for z -> -inf, 0 < beta < 1.

    Summed until a term drops below `tol` relative to the total; entries whose
    terms start growing first are returned uncertified. The expansion drops an
    exponentially small part of size (1/beta) exp(-|z|^(1/beta) |cos(pi/beta)|),
    which dominates the algebraic terms as beta -> 1; entries where that part
    is not below `tol` relative to the total stay uncertified too.
    """
    total = np.zeros_like(z)
    previous = np.full_like(z, np.inf)
    certified = np.zeros_like(z, dtype=bool)
    active = np.ones_like(z, dtype=bool)
    log_abs = np.log(np.abs(z))
    for k in range(1, max_terms):
        if not active.any():
            break
        weight = rgamma(1.0 - beta * k)
        if weight == 0.0:
            continue
        with np.errstate(under="ignore"):
            magnitude = np.exp(-k * log_abs[active]) * abs(weight)
        sign = -np.sign(weight) * (1.0 if k % 2 == 0 else -1.0)
        growing = magnitude > previous[active]
        total[active] += np.where(growing, 0.0, sign * magnitude)
        done = ~growing & (magnitude <= tol * np.abs(total[active]))
        indices = np.flatnonzero(active)
        certified[indices[done]] = True
        previous[active] = magnitude
        active[indices[done | growing]] = False

    with np.errstate(under="ignore"):
        exponential = np.exp(-np.exp(log_abs / beta) * abs(np.cos(np.pi / beta))) / beta
    certified &= exponential <= tol * np.abs(total)
    return total, certified


def ml_eval(params: MLParams, z: ArrayLike) -> ArrayLike:
    """
    E_beta(z) for real z (scalar or array) to relative accuracy `params.tol`.

    Entries the power series cannot certify are retried with the large-|z|
    expansion, then with the spectral integral. Raises NonConvergent when none
    of them can certify an entry.
    """
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if not np.all(np.isfinite(z)):
        raise InvalidParam("Mittag-Leffler argument must be finite")

    if params.beta == 1.0:
        result = np.exp(z)
        return float(result[0]) if scalar else result

    result = np.empty_like(z)
    small = np.abs(z) <= Tolerances.ML_FALLBACK_ABS_Z
    certified = np.zeros_like(z, dtype=bool)
    if small.any():
        values, ok = _series(params.beta, z[small], params.tol, Tolerances.ML_MAX_TERMS)
        result[small] = values
        certified[small] = ok

    pending = np.flatnonzero(~certified)
    if pending.size:
        if np.any(z[pending] > 0.0):
            raise NonConvergent(
                "Mittag-Leffler series not certified for a positive argument"
            )
        values, ok = _asymptotic(params.beta, z[pending], params.tol, Tolerances.ML_ASYMPTOTIC_TERMS)
        result[pending] = values
        pending = pending[~ok]
    if pending.size:
        logger.warning(f"Spectral fallback for {pending.size} Mittag-Leffler arguments")
        for index in pending:
            t = (-z[index]) ** (1.0 / params.beta)
            # the expansion value sets the scale of the absolute quadrature tolerance
            scale = abs(result[index])
            tol = min(Tolerances.SPECTRAL_QUAD, params.tol * scale) if scale > 0.0 else Tolerances.SPECTRAL_QUAD
            result[index] = ml_eval_spectral(params.beta, t, tol)

    return float(result[0]) if scalar else result


def spectral_density(gamma: float, r: ArrayLike) -> ArrayLike:
    """
    K_gamma(r) = (1/pi) r^(gamma-1) sin(gamma pi) / (r^(2 gamma) + 2 r^gamma cos(gamma pi) + 1).
    """
    if not (0.0 < gamma < 1.0):
        raise InvalidParam(f"Spectral density needs 0 < gamma < 1, got {gamma}")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0.0):
        raise InvalidParam("Spectral density is defined for r > 0 only")
    r_gamma = r_arr ** gamma
    density = (
        r_arr ** (gamma - 1.0)
        * np.sin(gamma * np.pi)
        / (np.pi * (r_gamma * r_gamma + 2.0 * r_gamma * np.cos(gamma * np.pi) + 1.0))
    )
    return float(density) if np.ndim(r) == 0 else density


def ml_eval_spectral(
    gamma: float, t: float, tol: float = Tolerances.SPECTRAL_QUAD
) -> float:
    """
    E_gamma(-t^gamma) from the spectral integral.

    [0, 1] is mapped by r = s^(1/gamma) and [1, inf) by r = s^(-1/gamma); after
    both substitutions the density factor reduces to
    sin(gamma pi) / (gamma pi (1 + 2 s cos(gamma pi) + s^2)) on s in [0, 1].
    """
    if not (0.0 < gamma < 1.0):
        raise InvalidParam(f"Spectral representation needs 0 < gamma < 1, got {gamma}")
    if t < 0.0:
        raise InvalidParam(f"Spectral representation needs t >= 0, got {t}")

    sin_g = np.sin(gamma * np.pi)
    cos_g = np.cos(gamma * np.pi)
    inv_gamma = 1.0 / gamma

    def weight(s):
        return sin_g / (gamma * np.pi * (1.0 + 2.0 * s * cos_g + s * s))

    def head(s):
        return np.exp(-t * s ** inv_gamma) * weight(s)

    def tail(s):
        s = np.maximum(s, 1e-300)
        with np.errstate(over="ignore"):
            decay = np.exp(-t * s ** (-inv_gamma)) if t > 0.0 else np.ones_like(s)
        return decay * weight(s)

    head_value, head_error = adaptive_gauss_legendre(head, 0.0, 1.0, tol=0.5 * tol)
    tail_value, tail_error = adaptive_gauss_legendre(tail, 0.0, 1.0, tol=0.5 * tol)
    if head_error + tail_error > tol:
        raise NonConvergent(
            f"Spectral quadrature error {head_error + tail_error:.2e} exceeds {tol:.1e}"
        )
    return head_value + tail_value


def ml_spectral_slope(
    gamma: float, t: float, tol: float = Tolerances.SPECTRAL_QUAD
) -> float:
    """
    -d/dt E_gamma(-t^gamma) = int_0^inf r exp(-r t) K_gamma(r) dr >= 0, for t > 0.

    Same substitutions as `ml_eval_spectral`; the extra factor r becomes
    s^(1/gamma) on the head and s^(-1/gamma) on the tail.
    """
    if not (0.0 < gamma < 1.0):
        raise InvalidParam(f"Spectral representation needs 0 < gamma < 1, got {gamma}")
    if t < 0.0:
        raise InvalidParam(f"Spectral representation needs t >= 0, got {t}")
    if t == 0.0:
        return np.inf

    sin_g = np.sin(gamma * np.pi)
    cos_g = np.cos(gamma * np.pi)
    inv_gamma = 1.0 / gamma

    def weight(s):
        return sin_g / (gamma * np.pi * (1.0 + 2.0 * s * cos_g + s * s))

    def head(s):
        r = s ** inv_gamma
        return r * np.exp(-t * r) * weight(s)

    def tail(s):
        s = np.maximum(s, 1e-300)
        with np.errstate(over="ignore", invalid="ignore"):
            r = s ** (-inv_gamma)
            decay = np.where(np.isfinite(r), r * np.exp(-t * r), 0.0)
        return decay * weight(s)

    head_value, _ = adaptive_gauss_legendre(head, 0.0, 1.0, tol=0.5 * tol)
    tail_value, _ = adaptive_gauss_legendre(tail, 0.0, 1.0, tol=0.5 * tol)
    return head_value + tail_value
