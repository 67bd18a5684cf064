"""Jump-intensity model core: parameters, state, return decomposition, recursions.

The asset log-price moves on a lattice of size ``delta``, driven by two
conditionally Poisson counts whose per-unit-time intensities follow
GARCH-type recursions on the past return shock.  A GJR variant adds extra
weight to negative shocks through an indicator term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class RecursionKind(str, Enum):
    GARCH = "garch"
    GJR = "gjr"


@dataclass(frozen=True)
class ModelParams:
    """Full parameterization: jump size, step length, per-sign recursion coefficients."""

    delta: float
    dt: float
    omega_plus: float
    alpha_plus: float
    beta_plus: float
    omega_minus: float
    alpha_minus: float
    beta_minus: float
    gamma_plus: float = 0.0
    gamma_minus: float = 0.0
    recursion_kind: RecursionKind = RecursionKind.GARCH

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta > 0.0):
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        for sign in ("plus", "minus"):
            omega = getattr(self, f"omega_{sign}")
            alpha = getattr(self, f"alpha_{sign}")
            beta = getattr(self, f"beta_{sign}")
            gamma = getattr(self, f"gamma_{sign}")
            if not (math.isfinite(omega) and omega > 0.0):
                raise ValueError(f"omega_{sign} must be positive, got {omega!r}")
            if not (math.isfinite(alpha) and alpha >= 0.0):
                raise ValueError(f"alpha_{sign} must be nonnegative, got {alpha!r}")
            if not (math.isfinite(beta) and 0.0 <= beta < 1.0):
                raise ValueError(f"beta_{sign} must lie in [0, 1), got {beta!r}")
            if not (math.isfinite(gamma) and gamma >= 0.0):
                raise ValueError(f"gamma_{sign} must be nonnegative, got {gamma!r}")
            if self.recursion_kind is RecursionKind.GARCH and gamma != 0.0:
                raise ValueError(
                    f"gamma_{sign} must be zero under the plain GARCH recursion, got {gamma!r}")

    def initial_intensities(self) -> tuple[float, float]:
        """Zero-shock fixed point of the recursion, the default start state."""
        return (self.omega_plus / (1.0 - self.beta_plus),
                self.omega_minus / (1.0 - self.beta_minus))


@dataclass(frozen=True)
class IntensityState:
    """Current per-unit-time intensities plus the most recent shock."""

    lambda_plus: float
    lambda_minus: float
    last_eps: float = 0.0

    def __post_init__(self):
        for name in ("lambda_plus", "lambda_minus"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if not math.isfinite(self.last_eps):
            raise ValueError(f"last_eps must be finite, got {self.last_eps!r}")


@dataclass(frozen=True)
class ReturnDecomposition:
    """Log-return split into drift, convexity correction and shock: X = mu - gamma + eps."""

    mu: float
    gamma: float
    eps: float


def initial_state(params: ModelParams,
                  lambda0: tuple[float, float] | None = None) -> IntensityState:
    """Start state for simulation and filtering; defaults to the fixed point."""
    lp, lm = params.initial_intensities() if lambda0 is None else lambda0
    return IntensityState(lambda_plus=lp, lambda_minus=lm, last_eps=0.0)


def conditional_moments(state: IntensityState, params: ModelParams) -> tuple[float, float]:
    """One-step conditional mean and variance of the log-return."""
    mean = params.delta * (state.lambda_plus - state.lambda_minus) * params.dt
    variance = params.delta ** 2 * (state.lambda_plus + state.lambda_minus) * params.dt
    return mean, variance


def decompose(state: IntensityState, params: ModelParams,
              realized_log_return: float) -> ReturnDecomposition:
    """Split a realized log-return into drift, correction and shock terms.

    ``mu`` is the exponential-moment drift, ``gamma`` the gap between it and
    the arithmetic conditional mean, and ``eps`` the mean-zero shock; the
    identity mu - gamma = delta * (lambda_plus - lambda_minus) * dt holds in
    exact arithmetic.
    """
    d = params.delta
    a = math.expm1(d)
    b = math.expm1(-d)
    mu = (a * state.lambda_plus + b * state.lambda_minus) * params.dt
    gamma = ((a - d) * state.lambda_plus + (b + d) * state.lambda_minus) * params.dt
    mean = d * (state.lambda_plus - state.lambda_minus) * params.dt
    return ReturnDecomposition(mu=mu, gamma=gamma, eps=realized_log_return - mean)


def step_intensity(state: IntensityState, params: ModelParams, eps: float) -> IntensityState:
    """Advance both intensities one step on the shock eps.

    Negative shocks add the leverage weight gamma to the squared-shock
    coefficient; positivity is automatic from the coefficient signs.
    """
    ind = 1.0 if eps < 0.0 else 0.0
    lam_plus = (params.omega_plus
                + (params.alpha_plus + params.gamma_plus * ind) * eps * eps
                + params.beta_plus * state.lambda_plus)
    lam_minus = (params.omega_minus
                 + (params.alpha_minus + params.gamma_minus * ind) * eps * eps
                 + params.beta_minus * state.lambda_minus)
    return IntensityState(lambda_plus=lam_plus, lambda_minus=lam_minus, last_eps=eps)


def variance_recursion_check(params: ModelParams, state: IntensityState,
                             eps: float) -> tuple[float, bool]:
    """Cross-check the variance recursion against the intensity recursions.

    With equal persistence on both signs and no leverage term, the one-step
    conditional variance rate h = delta^2 (lambda_plus + lambda_minus) itself
    follows a GARCH recursion; this evaluates that recursion and compares it
    with the variance implied by stepping the intensities directly.
    """
    if params.recursion_kind is not RecursionKind.GARCH:
        raise ValueError("variance recursion check requires the plain GARCH recursion")
    if params.beta_plus != params.beta_minus:
        raise ValueError(
            f"variance recursion check requires beta_plus == beta_minus, "
            f"got {params.beta_plus!r} and {params.beta_minus!r}")
    d2 = params.delta ** 2
    h = d2 * (state.lambda_plus + state.lambda_minus)
    h_next = (d2 * (params.omega_plus + params.omega_minus)
              + params.beta_plus * h
              + d2 * (params.alpha_plus + params.alpha_minus) * eps * eps)
    stepped = step_intensity(state, params, eps)
    h_stepped = d2 * (stepped.lambda_plus + stepped.lambda_minus)
    consistent = abs(h_next - h_stepped) <= 1e-12 * max(abs(h_next), abs(h_stepped))
    return h_next, consistent
