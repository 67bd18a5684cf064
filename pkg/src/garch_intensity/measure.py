"""Equivalent-martingale-measure construction for the fixed-jump-size model.

The drift equation

    (e^delta - 1) * lt_plus + (e^-delta - 1) * lt_minus = r

is one equation in two unknown risk-neutral intensities; a policy closes it.
The variance-preserving policy keeps the intensity sum (hence the one-step
conditional return variance) unchanged; the volatility-scaled policy
multiplies the sum by a constant; the explicit policy pins the down
intensity per step.  The density process relating the two measures is
accumulated in log space along each path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import InfeasibleDrift
from .model import IntensityState, ModelParams


class PolicyKind(str, Enum):
    VARIANCE_PRESERVING = "variance_preserving"
    VOLATILITY_SCALED = "volatility_scaled"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class MeasurePolicy:
    """Rule selecting risk-neutral intensities, plus the risk-free rate."""

    kind: PolicyKind = PolicyKind.VARIANCE_PRESERVING
    risk_free_rate: float = 0.0
    scale: float = 1.0
    lambda_minus_tilde: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.risk_free_rate) and self.risk_free_rate >= 0.0):
            raise ValueError(
                f"risk_free_rate must be nonnegative and finite, got {self.risk_free_rate!r}")
        if self.kind is PolicyKind.VOLATILITY_SCALED:
            if not (math.isfinite(self.scale) and self.scale > 0.0):
                raise ValueError(f"scale must be positive, got {self.scale!r}")
        if self.kind is PolicyKind.EXPLICIT:
            v = self.lambda_minus_tilde
            if v is None or not (math.isfinite(v) and v > 0.0):
                raise ValueError(
                    f"explicit policy requires a positive lambda_minus_tilde, got {v!r}")


def solve_drift_equation(lam_plus: float, lam_minus: float, a: float, b: float,
                         policy: MeasurePolicy, rate: float) -> tuple[float, float]:
    """Solve a*lt_plus + b*lt_minus = rate under the policy's closure.

    ``a`` and ``b`` are the per-jump price-relative drift coefficients
    (a > 0 for up jumps, b < 0 for down jumps).  Raises InfeasibleDrift when
    the solution has a non-positive component.
    """
    if policy.kind is PolicyKind.EXPLICIT:
        lt_minus = policy.lambda_minus_tilde
        lt_plus = (rate - b * lt_minus) / a
    else:
        total = lam_plus + lam_minus
        if policy.kind is PolicyKind.VOLATILITY_SCALED:
            total = policy.scale * total
        lt_plus = (rate - b * total) / (a - b)
        lt_minus = total - lt_plus
    if lt_plus <= 0.0 or lt_minus <= 0.0:
        raise InfeasibleDrift(
            f"rate {rate!r} is unattainable: solved intensities "
            f"({lt_plus!r}, {lt_minus!r}) are not both positive")
    return lt_plus, lt_minus


def solve_risk_neutral_intensities(state: IntensityState, params: ModelParams,
                                   policy: MeasurePolicy) -> tuple[float, float]:
    """Risk-neutral intensity pair satisfying the drift equation at this state."""
    a = math.expm1(params.delta)
    b = math.expm1(-params.delta)
    return solve_drift_equation(state.lambda_plus, state.lambda_minus, a, b,
                                policy, policy.risk_free_rate)


@dataclass(frozen=True)
class RadonNikodymAccumulator:
    """Running log density-process value plus the latest step's components."""

    log_z: float = 0.0
    last_d: float = 0.0
    last_u: float = 0.0


def rn_step(acc: RadonNikodymAccumulator, lam: IntensityState,
            lam_tilde: tuple[float, float], jumps: tuple[int, int],
            dt: float) -> RadonNikodymAccumulator:
    """Advance the density process one step.

    The increment is D*dt + U with D the intensity drift difference and U the
    jump-count log-ratio sum; under the variance-preserving policy D is
    exactly zero.
    """
    lt_plus, lt_minus = lam_tilde
    if min(lam.lambda_plus, lam.lambda_minus, lt_plus, lt_minus) <= 0.0:
        raise ValueError("all intensities must be positive")
    up, down = jumps
    # grouped so identical measures and sum-preserving solutions give exactly 0
    d = (lam.lambda_plus + lam.lambda_minus) - (lt_plus + lt_minus)
    u = up * math.log(lt_plus / lam.lambda_plus) + down * math.log(lt_minus / lam.lambda_minus)
    return RadonNikodymAccumulator(log_z=acc.log_z + d * dt + u, last_d=d, last_u=u)


def rn_expectation_check(params: ModelParams, policy: MeasurePolicy,
                         horizon_steps: int, n_paths: int, seed: int,
                         lambda0: tuple[float, float] | None = None,
                         workers: int | None = None) -> tuple[float, float]:
    """Sample mean and standard error of the terminal density-process value.

    Simulates under the physical measure while accumulating the companion
    density process; the mean must sit within Monte Carlo error of one.
    """
    if n_paths < 100:
        raise ValueError(f"n_paths must be at least 100, got {n_paths}")
    from . import montecarlo

    spec = montecarlo.SimulationSpec(
        params=params,
        measure=montecarlo.MeasureKind.PHYSICAL,
        policy=policy,
        horizon_steps=horizon_steps,
        n_paths=n_paths,
        seed=seed,
        lambda0=lambda0,
    )
    result = montecarlo.simulate(spec, workers=workers)
    import numpy as np

    z = np.exp(result.log_z)
    mean = float(z.mean())
    stderr = float(z.std(ddof=1) / math.sqrt(n_paths))
    return mean, stderr
