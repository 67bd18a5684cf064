"""European option valuation, the Black-Scholes reference, and smile tables.

Monte Carlo prices are discounted sample means of terminal payoffs, with
density-process weights applied automatically when the paths were simulated
under the physical measure with a companion measure attached.  Implied
volatilities come from a vega-based Newton iteration safeguarded by
bisection on the bracket [1e-6, 5].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import EmptySample, NoConvergence, OutOfBand
from .measure import MeasurePolicy
from .model import ModelParams

_SIGMA_LO = 1e-6
_SIGMA_HI = 5.0
_PRICE_TOL = 1e-10
_MAX_ITER = 200


class OptionKind(str, Enum):
    CALL = "call"
    PUT = "put"


@dataclass(frozen=True)
class OptionSpec:
    """European option terms; maturity in the model's time units."""

    kind: OptionKind
    strike: float
    maturity: float
    rate: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.strike) and self.strike >= 0.0):
            raise ValueError(f"strike must be nonnegative, got {self.strike!r}")
        if not (math.isfinite(self.maturity) and self.maturity >= 0.0):
            raise ValueError(f"maturity must be nonnegative, got {self.maturity!r}")
        if not (math.isfinite(self.rate) and self.rate >= 0.0):
            raise ValueError(f"rate must be nonnegative, got {self.rate!r}")


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def price_european(paths, opt: OptionSpec) -> tuple[float, float]:
    """Discounted mean payoff and its standard error over a path collection.

    ``paths`` is a simulation result (or an iterable of path records) from a
    risk-neutral run, or from a physical run carrying density-process weights.
    """
    if hasattr(paths, "terminal_log_price"):
        terminal = np.asarray(paths.terminal_log_price, dtype=np.float64)
        log_z = np.asarray(paths.log_z, dtype=np.float64)
    else:
        records = list(paths)
        terminal = np.array([r.terminal_log_price for r in records], dtype=np.float64)
        log_z = np.array([r.log_z for r in records], dtype=np.float64)
    n = terminal.shape[0]
    if n == 0:
        raise EmptySample("no paths to price on")
    s = np.exp(terminal)
    if opt.kind is OptionKind.CALL:
        payoff = np.maximum(s - opt.strike, 0.0)
    else:
        payoff = np.maximum(opt.strike - s, 0.0)
    weighted = np.exp(log_z) * payoff
    disc = math.exp(-opt.rate * opt.maturity)
    price = disc * float(weighted.mean())
    stderr = 0.0 if n < 2 else disc * float(weighted.std(ddof=1) / math.sqrt(n))
    return price, stderr


def bs_price(s: float, k: float, r: float, sigma: float, t: float,
             kind: OptionKind = OptionKind.CALL) -> float:
    """Black-Scholes-Merton value; zero volatility or maturity gives the
    discounted intrinsic value."""
    disc_k = k * math.exp(-r * t)
    if sigma <= 0.0 or t <= 0.0:
        intrinsic = s - disc_k if kind is OptionKind.CALL else disc_k - s
        return max(intrinsic, 0.0)
    if k == 0.0:
        return s if kind is OptionKind.CALL else 0.0
    srt = sigma * math.sqrt(t)
    d1 = (math.log(s / k) + (r + 0.5 * sigma * sigma) * t) / srt
    d2 = d1 - srt
    if kind is OptionKind.CALL:
        return s * _norm_cdf(d1) - disc_k * _norm_cdf(d2)
    return disc_k * _norm_cdf(-d2) - s * _norm_cdf(-d1)


def bs_vega(s: float, k: float, r: float, sigma: float, t: float) -> float:
    """Price sensitivity to volatility; shared by calls and puts."""
    if sigma <= 0.0 or t <= 0.0 or k == 0.0:
        return 0.0
    srt = sigma * math.sqrt(t)
    d1 = (math.log(s / k) + (r + 0.5 * sigma * sigma) * t) / srt
    return s * _norm_pdf(d1) * math.sqrt(t)


def implied_vol(price: float, s: float, k: float, r: float, t: float,
                kind: OptionKind = OptionKind.CALL) -> float:
    """Volatility reproducing ``price`` under Black-Scholes-Merton.

    Newton iteration on the closed-form vega, safeguarded by bisection on
    [1e-6, 5]; converged when the model price matches within 1e-10.
    Raises OutOfBand outside the no-arbitrage band and NoConvergence when the
    bracket top cannot reach the price.
    """
    if t <= 0.0:
        raise OutOfBand("implied volatility is undefined at zero maturity")
    lower = bs_price(s, k, r, 0.0, t, kind)
    upper = s if kind is OptionKind.CALL else k * math.exp(-r * t)
    if price <= lower + _PRICE_TOL:
        raise OutOfBand(f"price {price!r} at or below the intrinsic bound {lower!r}")
    if price >= upper - _PRICE_TOL:
        raise OutOfBand(f"price {price!r} at or above the upper bound {upper!r}")
    lo, hi = _SIGMA_LO, _SIGMA_HI
    f_lo = bs_price(s, k, r, lo, t, kind) - price
    f_hi = bs_price(s, k, r, hi, t, kind) - price
    if f_lo > 0.0:
        raise OutOfBand(f"price {price!r} below the bracket floor value")
    if f_hi < 0.0:
        raise NoConvergence(f"price {price!r} not reachable below sigma {hi}")
    sigma = 0.5 * (lo + hi)
    for _ in range(_MAX_ITER):
        f = bs_price(s, k, r, sigma, t, kind) - price
        if abs(f) <= _PRICE_TOL:
            return sigma
        if f > 0.0:
            hi = sigma
        else:
            lo = sigma
        vega = bs_vega(s, k, r, sigma, t)
        if vega > 0.0:
            step = sigma - f / vega
        else:
            step = 0.5 * (lo + hi)
        # fall back to bisection whenever Newton leaves the bracket
        sigma = step if lo < step < hi else 0.5 * (lo + hi)
    raise NoConvergence("implied volatility iteration budget exhausted")


@dataclass(frozen=True)
class SmileRow:
    maturity_steps: int
    moneyness: float
    strike: float
    price: float
    stderr: float
    implied_vol: float | None


@dataclass
class SmileTable:
    """Plot-ready smile rows; missing vols serialize as empty fields."""

    rows: list[SmileRow] = field(default_factory=list)

    CSV_HEADER = "maturity_steps,moneyness,strike,price,stderr,implied_vol"

    def write_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for row in self.rows:
                iv = "" if row.implied_vol is None else f"{row.implied_vol:.17g}"
                fh.write(f"{row.maturity_steps},{row.moneyness:.17g},{row.strike:.17g},"
                         f"{row.price:.17g},{row.stderr:.17g},{iv}\n")


def build_smile(params: ModelParams, policy: MeasurePolicy,
                maturities: list[int], moneyness_grid: list[float],
                n_paths: int, seed: int, s0: float = 1.0,
                lambda0: tuple[float, float] | None = None,
                workers: int | None = None) -> SmileTable:
    """Monte Carlo smile table over maturities (in steps) and moneyness K/s0.

    One risk-neutral simulation per maturity is shared across all strikes of
    that maturity, making price monotonicity and convexity in strike exact
    for the sampled payoffs.  Rows whose price violates the no-arbitrage
    bounds carry no implied volatility.
    """
    from . import montecarlo

    if not maturities or not moneyness_grid:
        raise ValueError("maturity and moneyness grids must be nonempty")
    table = SmileTable()
    for m_index, steps in enumerate(maturities):
        spec = montecarlo.SimulationSpec(
            params=params,
            measure=montecarlo.MeasureKind.RISK_NEUTRAL,
            policy=policy,
            horizon_steps=steps,
            n_paths=n_paths,
            seed=seed + m_index,
            s0=s0,
            lambda0=lambda0,
        )
        result = montecarlo.simulate(spec, workers=workers)
        maturity = steps * params.dt
        for mny in moneyness_grid:
            strike = mny * s0
            opt = OptionSpec(kind=OptionKind.CALL, strike=strike, maturity=maturity,
                             rate=policy.risk_free_rate)
            price, stderr = price_european(result, opt)
            try:
                iv = implied_vol(price, s0, strike, policy.risk_free_rate,
                                 maturity, OptionKind.CALL)
            except OutOfBand:
                iv = None
            table.rows.append(SmileRow(maturity_steps=steps, moneyness=mny,
                                       strike=strike, price=price, stderr=stderr,
                                       implied_vol=iv))
    return table
