"""Maximum-likelihood estimation from quantized return series.

Returns are snapped onto the jump lattice, the intensity filter runs the
recursion forward from the zero-shock fixed point, and each observation
contributes its conditional log-PMF.  The optimizer is a derivative-free
simplex search over log/logit-transformed coefficients, so positivity and
the persistence bound hold by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .errors import EmptyInput, NonFiniteInput
from .model import ModelParams, RecursionKind
from .skellam import _skellam_logpmf_kernel

_GROUPS = ("omega", "alpha", "beta", "gamma")


@dataclass
class ReturnSeries:
    """Observed log-returns quantized onto the jump lattice."""

    observations: np.ndarray
    delta: float
    dt: float
    max_residual: float = 0.0

    @property
    def count(self) -> int:
        return int(self.observations.size)


def ingest_returns(raw_log_returns, delta: float, dt: float) -> ReturnSeries:
    """Quantize raw log-returns into lattice counts.

    Each return maps to the nearest integer multiple of ``delta``; the
    largest quantization residual is recorded on the series.
    """
    if not (math.isfinite(delta) and delta > 0.0):
        raise ValueError(f"delta must be positive, got {delta!r}")
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    x = np.asarray(raw_log_returns, dtype=np.float64)
    if x.size == 0:
        raise EmptyInput("no returns to ingest")
    if not np.all(np.isfinite(x)):
        bad = int(np.nonzero(~np.isfinite(x))[0][0])
        raise NonFiniteInput(f"non-finite return at position {bad}")
    m = np.rint(x / delta).astype(np.int64)
    residuals = np.abs(x - m * delta)
    max_residual = float(residuals.max())
    if max_residual > 0.5 * delta + 1e-12:
        raise ValueError(f"quantization residual {max_residual!r} exceeds delta/2")
    return ReturnSeries(observations=m, delta=delta, dt=dt, max_residual=max_residual)


def read_returns_csv(path: str) -> np.ndarray:
    """Read one-column (return) or two-column (date, return) CSV of log-returns.

    Parsing failures report the offending line number; a single leading
    header line is tolerated.
    """
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            fields = text.split(",")
            if len(fields) == 1:
                token = fields[0]
            elif len(fields) == 2:
                token = fields[1]
            else:
                raise ValueError(f"line {lineno}: expected 1 or 2 fields, got {len(fields)}")
            try:
                values.append(float(token))
            except ValueError:
                if lineno == 1:
                    continue  # header line
                raise ValueError(f"line {lineno}: cannot parse return {token!r}") from None
    if not values:
        raise EmptyInput(f"no returns found in {path}")
    return np.array(values, dtype=np.float64)


@njit(cache=True, nogil=True)
def _loglik_kernel(obs, delta, dt, wp, ap, bp, gp, wm, am, bm, gm, lp0, lm0):
    lp = lp0
    lm = lm0
    total = 0.0
    for i in range(obs.size):
        # bail out of diverging filter regions; such candidates are rejected
        if not (lp < 1e300 and lm < 1e300):
            return -math.inf
        total += _skellam_logpmf_kernel(obs[i], lp * dt, lm * dt)
        eps = obs[i] * delta - delta * (lp - lm) * dt
        ind = 1.0 if eps < 0.0 else 0.0
        lp_next = wp + (ap + gp * ind) * eps * eps + bp * lp
        lm_next = wm + (am + gm * ind) * eps * eps + bm * lm
        lp = lp_next
        lm = lm_next
    return total


def log_likelihood(series: ReturnSeries, params: ModelParams,
                   lambda0: tuple[float, float] | None = None) -> float:
    """Exact filtered log-likelihood of the series under the given parameters."""
    if series.delta != params.delta:
        raise ValueError(f"series delta {series.delta!r} != params delta {params.delta!r}")
    if series.dt != params.dt:
        raise ValueError(f"series dt {series.dt!r} != params dt {params.dt!r}")
    lp0, lm0 = params.initial_intensities() if lambda0 is None else lambda0
    return float(_loglik_kernel(
        series.observations, params.delta, params.dt,
        params.omega_plus, params.alpha_plus, params.beta_plus, params.gamma_plus,
        params.omega_minus, params.alpha_minus, params.beta_minus, params.gamma_minus,
        lp0, lm0))


@dataclass(frozen=True)
class FitSettings:
    """Optimizer budget and tolerances for the simplex search."""

    max_iter: int = 2000
    tol: float = 1e-6
    xatol: float = 1e-5
    min_observations: int = 50
    estimate: tuple[str, ...] | None = None
    track_progress: bool = False


@dataclass
class FitResult:
    params: ModelParams
    log_likelihood: float
    converged: bool
    iterations: int
    stderr_estimates: dict | None = None
    best_ll_trace: list = field(default_factory=list)


def _free_groups(init: ModelParams, settings: FitSettings) -> tuple[str, ...]:
    if settings.estimate is not None:
        unknown = set(settings.estimate) - set(_GROUPS)
        if unknown:
            raise ValueError(f"unknown parameter groups {sorted(unknown)}")
        if "gamma" in settings.estimate and init.recursion_kind is RecursionKind.GARCH:
            raise ValueError("gamma is fixed at zero under the plain GARCH recursion")
        return tuple(g for g in _GROUPS if g in settings.estimate)
    if init.recursion_kind is RecursionKind.GJR:
        return _GROUPS
    return ("omega", "alpha", "beta")


def _to_internal(value: float, group: str) -> float:
    if group == "beta":
        return math.log(value / (1.0 - value))
    return math.log(value)


def _from_internal(z: float, group: str) -> float:
    if group == "beta":
        return 1.0 / (1.0 + math.exp(-z))
    return math.exp(z)


def _pack(params: ModelParams, groups) -> np.ndarray:
    out = []
    for g in groups:
        for sign in ("plus", "minus"):
            v = getattr(params, f"{g}_{sign}")
            if g != "beta" and v <= 0.0:
                raise ValueError(f"initial {g}_{sign} must be positive when estimated")
            if g == "beta" and not 0.0 < v < 1.0:
                raise ValueError(f"initial beta_{sign} must lie in (0, 1) when estimated")
            out.append(_to_internal(v, g))
    return np.array(out, dtype=np.float64)


def _unpack(x: np.ndarray, base: ModelParams, groups) -> ModelParams:
    updates = {}
    i = 0
    for g in groups:
        for sign in ("plus", "minus"):
            updates[f"{g}_{sign}"] = _from_internal(float(x[i]), g)
            i += 1
    return replace(base, **updates)


def fit_mle(series: ReturnSeries, init: ModelParams,
            settings: FitSettings = FitSettings()) -> FitResult:
    """Maximize the filtered likelihood over the recursion coefficients.

    The jump size and step length stay fixed at the series' values.  On
    budget exhaustion the best parameters found so far are returned with
    ``converged`` false.
    """
    if series.count < settings.min_observations:
        raise ValueError(
            f"need at least {settings.min_observations} observations, got {series.count}")
    if init.delta != series.delta or init.dt != series.dt:
        raise ValueError("init params must share the series' delta and dt")
    groups = _free_groups(init, settings)
    x0 = _pack(init, groups)

    def objective(x):
        candidate = _unpack(x, init, groups)
        ll = log_likelihood(series, candidate)
        if not math.isfinite(ll):
            return 1e300
        return -ll

    trace: list = []
    callback = None
    if settings.track_progress:
        def callback(xk):
            trace.append(-objective(xk))

    res = minimize(objective, x0, method="Nelder-Mead", callback=callback,
                   options={"maxiter": settings.max_iter, "fatol": settings.tol,
                            "xatol": settings.xatol, "adaptive": True})
    fitted = _unpack(res.x, init, groups)
    return FitResult(params=fitted, log_likelihood=float(-res.fun),
                     converged=bool(res.success), iterations=int(res.nit),
                     best_ll_trace=trace)
