"""Skellam distribution mathematics: modified Bessel I, PMF and log-PMF.

The Skellam law is the distribution of the difference of two independent
Poisson counts; it is the model's one-step return law in jump units.  Its
PMF needs the modified Bessel function of the first kind at integer order.

Evaluation strategy
-------------------
``I_a(x)`` is computed from its power series in ratio form,

    I_a(x) = (x/2)^a / a!  *  sum_k c_k,   c_0 = 1,
    c_{k+1} = c_k * (x^2/4) / ((k+1)(a+k+1)),

with the partial sum renormalized whenever it approaches the double range,
so the same code path stays finite for arguments far beyond exp overflow
(the rescale exponent is carried into the returned logarithm).  The series
is summed past its peak term until it stops contributing at double
precision, giving relative error well below 1e-12 for x <= 700.

The log-PMF is assembled entirely in log space; the direct PMF exponentiates
it.  Intensities of order 10^3 and beyond therefore stay finite where the
textbook product form would overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from numba import njit

_LOG_MAX_DOUBLE = 709.782712893384
_RESCALE = 1e250
_LOG_RESCALE = math.log(_RESCALE)


@dataclass(frozen=True)
class SkellamParams:
    """Per-step Poisson means of the up and down counts."""

    lambda_plus: float
    lambda_minus: float

    def __post_init__(self):
        for name in ("lambda_plus", "lambda_minus"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")


@njit(cache=True, nogil=True)
def _log_bessel_series(order, x):
    """Power series in ratio form; cost grows like x/2 terms."""
    a = float(order)
    q = 0.25 * x * x
    s = 1.0
    c = 1.0
    shift = 0.0
    k_peak = 0.5 * (math.sqrt((a + 1.0) * (a + 1.0) + x * x) - (a + 1.0))
    k = 1
    while True:
        c *= q / (k * (a + k))
        s += c
        if c > _RESCALE:
            c /= _RESCALE
            s /= _RESCALE
            shift += _LOG_RESCALE
        elif k > k_peak and c < s * 1e-17:
            break
        k += 1
    return a * math.log(0.5 * x) - math.lgamma(a + 1.0) + math.log(s) + shift


@njit(cache=True, nogil=True)
def _log_bessel_hankel(order, x):
    """Large-argument asymptotic expansion, truncated at its smallest term;
    machine accurate for x >= order^2 (and x > 700)."""
    mu = 4.0 * float(order) * float(order)
    s = 1.0
    term = 1.0
    prev = 1.0
    for k in range(1, 80):
        term *= -(mu - (2.0 * k - 1.0) ** 2) / (8.0 * k * x)
        if abs(term) > prev:
            break
        prev = abs(term)
        s += term
        if abs(term) < 1e-18 * abs(s):
            break
    return x - 0.5 * math.log(2.0 * math.pi * x) + math.log(s)


@njit(cache=True, nogil=True)
def _log_bessel_miller(order, x):
    """Backward recurrence with exponential scaling, normalized by the
    identity I_0(x) + 2 * sum_k I_k(x) = e^x.  The order value and the
    normalization sum carry separate log scales so deep relative underflow
    stays representable in the returned logarithm."""
    top = x if x > order else float(order)
    nstart = int(top + 12.0 * math.sqrt(top) + 60.0)
    y_next = 0.0
    y_cur = 1e-290
    ssum = 0.0
    scale = 0.0
    y_order = 0.0
    scale_order = 0.0
    for k in range(nstart, 0, -1):
        y_prev = y_next + (2.0 * k / x) * y_cur
        y_next = y_cur
        y_cur = y_prev
        if k - 1 >= 1:
            ssum += 2.0 * y_cur
        else:
            ssum += y_cur
        if k - 1 == order:
            y_order = y_cur
            scale_order = scale
        if y_cur > _RESCALE:
            y_cur /= _RESCALE
            y_next /= _RESCALE
            ssum /= _RESCALE
            scale += _LOG_RESCALE
    return x + math.log(y_order) + scale_order - math.log(ssum) - scale


@njit(cache=True, nogil=True)
def _log_bessel_kernel(order, x):
    """log I_order(x) for integer order >= 0, x >= 0."""
    if math.isnan(x):
        return math.nan
    if x == math.inf:
        return math.inf
    if x == 0.0:
        return 0.0 if order == 0 else -math.inf
    a = float(order)
    if x <= 700.0:
        return _log_bessel_series(order, x)
    if x >= a * a:
        return _log_bessel_hankel(order, x)
    # remaining band: x > 700 with order > sqrt(x); series is cheap when its
    # peak term comes early (order >> x), else the scaled recurrence
    k_peak = 0.5 * (math.sqrt((a + 1.0) * (a + 1.0) + x * x) - (a + 1.0))
    if k_peak <= 400.0:
        return _log_bessel_series(order, x)
    return _log_bessel_miller(order, x)


@njit(cache=True, nogil=True)
def _skellam_logpmf_kernel(m, lam_plus, lam_minus):
    """log PMF of the Poisson difference at integer m, means lam_plus/minus.

    Returns -inf for degenerate or non-finite means so that filtered
    likelihoods reject pathological parameter regions at bounded cost.
    """
    if not (0.0 < lam_plus < math.inf and 0.0 < lam_minus < math.inf):
        return -math.inf
    x = 2.0 * math.sqrt(lam_plus * lam_minus)
    return (-lam_plus - lam_minus
            + 0.5 * m * (math.log(lam_plus) - math.log(lam_minus))
            + _log_bessel_kernel(abs(m), x))


def _check_bessel_args(order: int, x: float) -> None:
    if order != int(order) or order < 0:
        raise ValueError(f"order must be a nonnegative integer, got {order!r}")
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x!r}")
    if x < 0.0:
        raise ValueError(f"x must be nonnegative, got {x!r}")


def log_bessel_i(order: int, x: float) -> float:
    """log of the modified Bessel function of the first kind, integer order.

    Returns ``-inf`` at x = 0 for positive order.
    """
    _check_bessel_args(order, x)
    return _log_bessel_kernel(int(order), float(x))


def bessel_i(order: int, x: float) -> float:
    """Modified Bessel function of the first kind at integer order.

    Overflows to ``inf`` once even the result of the log-scaled evaluation
    exceeds the double exponent range; use :func:`log_bessel_i` there.
    """
    _check_bessel_args(order, x)
    lv = _log_bessel_kernel(int(order), float(x))
    if lv > _LOG_MAX_DOUBLE:
        return math.inf
    if lv == -math.inf:
        return 0.0
    return math.exp(lv)


def skellam_log_pmf(m: int, p: SkellamParams) -> float:
    """log PMF of the count difference at integer m, computed in log space."""
    return _skellam_logpmf_kernel(int(m), p.lambda_plus, p.lambda_minus)


def skellam_pmf(m: int, p: SkellamParams) -> float:
    """PMF of the count difference at integer m."""
    return math.exp(skellam_log_pmf(m, p))
