"""Deterministic, parallelizable path simulation under either measure.

Paths are simulated step by step: Poisson counts are drawn per side with the
simulating measure's intensities, the log-price advances by the realized
jumps, the shock is measured against the conditional mean at the physical
intensities, and the intensity recursion advances on that shock.  Under the
risk-neutral measure the intensities entering the Poisson means are re-solved
from the drift equation every step; the recursion itself always evolves the
physical intensities, so a risk-neutral path is the exact pushforward of the
physical dynamics under the constructed measure change.

Every path owns the counter-based substream ``(seed, path_index)``, so output
is a pure function of the simulation spec: identical runs are byte-identical
regardless of worker count or scheduling.  Work is dispatched in fixed-size
blocks of paths to a thread pool; kernels release the GIL.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from . import rng
from .errors import InfeasibleDrift
from .generalized import (GeneralMeasureSpec, JumpKind, JumpSizeDistribution, Side,
                          check_absolutely_continuous, jump_moments)
from .measure import MeasurePolicy, PolicyKind
from .model import IntensityState, ModelParams, RecursionKind
from .rng import Substream

_BLOCK = 16384
_FULL_RECORD_CAP = 100_000_000

# policy codes shared with the kernels
_POL_NONE = -1
_POL_VARIANCE_PRESERVING = 0
_POL_VOLATILITY_SCALED = 1
_POL_EXPLICIT = 2


class MeasureKind(str, Enum):
    PHYSICAL = "physical"
    RISK_NEUTRAL = "risk_neutral"


class Record(str, Enum):
    TERMINAL_ONLY = "terminal"
    FULL_PATHS = "full"


@dataclass(frozen=True)
class SimulationSpec:
    """Everything a run depends on; simulation output is a pure function of this."""

    params: ModelParams
    measure: MeasureKind
    horizon_steps: int
    n_paths: int
    seed: int
    policy: MeasurePolicy | None = None
    s0: float = 1.0
    record: Record = Record.TERMINAL_ONLY
    lambda0: tuple[float, float] | None = None
    jumps_up: JumpSizeDistribution | None = None
    jumps_down: JumpSizeDistribution | None = None
    general_measure: GeneralMeasureSpec | None = None

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be at least 1, got {self.n_paths}")
        if self.horizon_steps < 0:
            raise ValueError(f"horizon_steps must be nonnegative, got {self.horizon_steps}")
        if not (math.isfinite(self.s0) and self.s0 > 0.0):
            raise ValueError(f"s0 must be positive, got {self.s0!r}")
        if (self.measure is MeasureKind.RISK_NEUTRAL and self.policy is None
                and self.general_measure is None):
            raise ValueError("risk-neutral simulation requires a measure policy")
        if (self.jumps_up is None) != (self.jumps_down is None):
            raise ValueError("jump laws must be given for both sides or neither")
        if self.jumps_up is not None:
            if self.jumps_up.side is not Side.UP:
                raise ValueError("jumps_up must be an up-side law")
            if self.jumps_down.side is not Side.DOWN:
                raise ValueError("jumps_down must be a down-side law")
        if self.general_measure is not None:
            if self.jumps_up is None:
                raise ValueError("a general measure spec requires jump-size laws")
            check_absolutely_continuous(self.jumps_up, self.general_measure.f_tilde_plus)
            check_absolutely_continuous(self.jumps_down, self.general_measure.f_tilde_minus)
        if self.generalized and self.measure is MeasureKind.RISK_NEUTRAL \
                and self.general_measure is None:
            raise ValueError("risk-neutral compound simulation requires a general measure spec")
        if self.lambda0 is not None:
            lp, lm = self.lambda0
            if not (lp > 0.0 and lm > 0.0):
                raise ValueError(f"lambda0 components must be positive, got {self.lambda0!r}")

    @property
    def generalized(self) -> bool:
        return self.jumps_up is not None


@dataclass(frozen=True)
class PathRecord:
    """One simulated trajectory's outputs."""

    terminal_log_price: float
    log_z: float
    total_up: int
    total_down: int
    up_steps: np.ndarray | None = None
    down_steps: np.ndarray | None = None
    log_prices: np.ndarray | None = None


class SimulationResult:
    """Column-oriented collection of path records."""

    def __init__(self, spec, terminal_log_price, log_z, total_up, total_down,
                 up_steps=None, down_steps=None, log_prices=None):
        self.spec = spec
        self.terminal_log_price = terminal_log_price
        self.log_z = log_z
        self.total_up = total_up
        self.total_down = total_down
        self.up_steps = up_steps
        self.down_steps = down_steps
        self.log_prices = log_prices

    def __len__(self) -> int:
        return self.terminal_log_price.shape[0]

    def __getitem__(self, i: int) -> PathRecord:
        return PathRecord(
            terminal_log_price=float(self.terminal_log_price[i]),
            log_z=float(self.log_z[i]),
            total_up=int(self.total_up[i]),
            total_down=int(self.total_down[i]),
            up_steps=None if self.up_steps is None else self.up_steps[i],
            down_steps=None if self.down_steps is None else self.down_steps[i],
            log_prices=None if self.log_prices is None else self.log_prices[i],
        )

    def records(self):
        for i in range(len(self)):
            yield self[i]

    def terminal_prices(self) -> np.ndarray:
        return np.exp(self.terminal_log_price)


def derive_substream(seed: int, path_index: int) -> Substream:
    """Independent reproducible random substream for one path."""
    if path_index < 0:
        raise ValueError(f"path_index must be nonnegative, got {path_index}")
    return Substream(seed=seed, path_index=path_index)


@njit(cache=True, nogil=True)
def _solve_policy(lp, lm, a, b, pol_kind, pol_rate, pol_scale, pol_lm_tilde):
    """Mirror of the drift-equation solve; returns (ok, lt_plus, lt_minus)."""
    if pol_kind == 2:
        tm = pol_lm_tilde
        tp = (pol_rate - b * tm) / a
    else:
        total = lp + lm
        if pol_kind == 1:
            total = pol_scale * total
        tp = (pol_rate - b * total) / (a - b)
        tm = total - tp
    if tp <= 0.0 or tm <= 0.0:
        return False, tp, tm
    return True, tp, tm


@njit(cache=True, nogil=True)
def _sim_base_block(seed, lo, hi, n_steps, dt, delta, log_s0,
                    wp, ap, bp, gp, wm, am, bm, gm, lam0p, lam0m,
                    a_coef, b_coef, sim_q, track_z,
                    pol_kind, pol_rate, pol_scale, pol_lm_tilde,
                    record_full,
                    term_log, logz, tot_up, tot_dn, status, fail_lp, fail_lm,
                    ups, dns, lprices):
    for p in range(lo, hi):
        path = np.uint64(p)
        n = np.uint64(0)
        lp = lam0p
        lm = lam0m
        lz = 0.0
        cup = 0
        cdn = 0
        failed = False
        for s in range(n_steps):
            tp = 0.0
            tm = 0.0
            if sim_q or track_z:
                ok, tp, tm = _solve_policy(lp, lm, a_coef, b_coef,
                                           pol_kind, pol_rate, pol_scale, pol_lm_tilde)
                if not ok:
                    status[p] = s + 1
                    fail_lp[p] = lp
                    fail_lm[p] = lm
                    failed = True
                    break
            if sim_q:
                mean_up = tp * dt
                mean_dn = tm * dt
            else:
                mean_up = lp * dt
                mean_dn = lm * dt
            up, n = rng.rand_poisson(seed, path, n, mean_up)
            dn, n = rng.rand_poisson(seed, path, n, mean_dn)
            cup += up
            cdn += dn
            x = delta * (up - dn)
            eps = x - delta * (lp - lm) * dt
            if track_z:
                d = (lp + lm) - (tp + tm)
                lz += d * dt + up * math.log(tp / lp) + dn * math.log(tm / lm)
            if record_full:
                ups[p, s] = up
                dns[p, s] = dn
                lprices[p, s] = log_s0 + delta * (cup - cdn)
            ind = 1.0 if eps < 0.0 else 0.0
            lp_next = wp + (ap + gp * ind) * eps * eps + bp * lp
            lm_next = wm + (am + gm * ind) * eps * eps + bm * lm
            lp = lp_next
            lm = lm_next
        if not failed:
            term_log[p] = log_s0 + delta * (cup - cdn)
            logz[p] = lz
            tot_up[p] = cup
            tot_dn[p] = cdn


@njit(cache=True, nogil=True)
def _draw_jump_sum(seed, path, n, count, kind, p1, p2):
    """Sum of `count` i.i.d. jump sizes; point masses consume no draws."""
    if kind == 0:
        return count * p1, n
    total = 0.0
    for _ in range(count):
        if kind == 1:
            x, n = rng.rand_exponential(seed, path, n, p1)
        else:
            x, n = rng.rand_gamma(seed, path, n, p1, p2)
        total += x
    return total, n


@njit(cache=True, nogil=True)
def _jump_log_pdf(kind, p1, p2, x):
    if kind == 1:
        return -math.log(p1) - x / p1
    return (p1 - 1.0) * math.log(x) - x / p2 - p1 * math.log(p2) - math.lgamma(p1)


@njit(cache=True, nogil=True)
def _draw_jump_sum_with_ratio(seed, path, n, count, kind, p1, p2,
                              tkind, tp1, tp2, log_lam_ratio):
    """Jump-size sum plus the accumulated density log-ratio terms for Z."""
    total = 0.0
    qsum = 0.0
    for _ in range(count):
        if kind == 0:
            x = p1
        elif kind == 1:
            x, n = rng.rand_exponential(seed, path, n, p1)
        else:
            x, n = rng.rand_gamma(seed, path, n, p1, p2)
        total += x
        if kind == 0:
            qsum += log_lam_ratio
        else:
            qsum += (log_lam_ratio + _jump_log_pdf(kind, p1, p2, x)
                     - _jump_log_pdf(tkind, tp1, tp2, x))
    return total, qsum, n


@njit(cache=True, nogil=True)
def _sim_general_block(seed, lo, hi, n_steps, dt, log_s0,
                       wp, ap, bp, gp, wm, am, bm, gm, lam0p, lam0m,
                       mean_up_size, mean_dn_size,
                       a_coef, b_coef, sim_q, track_z,
                       pol_kind, pol_rate, pol_scale, pol_lm_tilde,
                       fup_kind, fup_p1, fup_p2, fdn_kind, fdn_p1, fdn_p2,
                       tup_kind, tup_p1, tup_p2, tdn_kind, tdn_p1, tdn_p2,
                       record_full,
                       term_log, logz, tot_up, tot_dn, status, fail_lp, fail_lm,
                       ups, dns, lprices):
    for p in range(lo, hi):
        path = np.uint64(p)
        n = np.uint64(0)
        lp = lam0p
        lm = lam0m
        lz = 0.0
        cup = 0
        cdn = 0
        logret = 0.0
        failed = False
        for s in range(n_steps):
            tp = 0.0
            tm = 0.0
            q_up = 0.0
            q_dn = 0.0
            if sim_q or track_z:
                ok, tp, tm = _solve_policy(lp, lm, a_coef, b_coef,
                                           pol_kind, pol_rate, pol_scale, pol_lm_tilde)
                if not ok:
                    status[p] = s + 1
                    fail_lp[p] = lp
                    fail_lm[p] = lm
                    failed = True
                    break
            if sim_q:
                mean_up = tp * dt
                mean_dn = tm * dt
            else:
                mean_up = lp * dt
                mean_dn = lm * dt
            up, n = rng.rand_poisson(seed, path, n, mean_up)
            if sim_q:
                sum_up, n = _draw_jump_sum(seed, path, n, up, tup_kind, tup_p1, tup_p2)
            elif track_z:
                sum_up, q_up, n = _draw_jump_sum_with_ratio(
                    seed, path, n, up, fup_kind, fup_p1, fup_p2,
                    tup_kind, tup_p1, tup_p2, math.log(lp) - math.log(tp))
            else:
                sum_up, n = _draw_jump_sum(seed, path, n, up, fup_kind, fup_p1, fup_p2)
            dn, n = rng.rand_poisson(seed, path, n, mean_dn)
            if sim_q:
                sum_dn, n = _draw_jump_sum(seed, path, n, dn, tdn_kind, tdn_p1, tdn_p2)
            elif track_z:
                sum_dn, q_dn, n = _draw_jump_sum_with_ratio(
                    seed, path, n, dn, fdn_kind, fdn_p1, fdn_p2,
                    tdn_kind, tdn_p1, tdn_p2, math.log(lm) - math.log(tm))
            else:
                sum_dn, n = _draw_jump_sum(seed, path, n, dn, fdn_kind, fdn_p1, fdn_p2)
            cup += up
            cdn += dn
            x = sum_up - sum_dn
            logret += x
            eps = x - (mean_up_size * lp - mean_dn_size * lm) * dt
            if track_z:
                kappa = (tp + tm) - (lp + lm)
                lz += -kappa * dt - (q_up + q_dn)
            if record_full:
                ups[p, s] = up
                dns[p, s] = dn
                lprices[p, s] = log_s0 + logret
            ind = 1.0 if eps < 0.0 else 0.0
            lp_next = wp + (ap + gp * ind) * eps * eps + bp * lp
            lm_next = wm + (am + gm * ind) * eps * eps + bm * lm
            lp = lp_next
            lm = lm_next
        if not failed:
            term_log[p] = log_s0 + logret
            logz[p] = lz
            tot_up[p] = cup
            tot_dn[p] = cdn


@njit(cache=True, nogil=True)
def _one_step_returns(seed, n_draws, lp, lm, dt,
                      fup_kind, fup_p1, fup_p2, fdn_kind, fdn_p1, fdn_p2, out):
    for i in range(n_draws):
        path = np.uint64(i)
        n = np.uint64(0)
        up, n = rng.rand_poisson(seed, path, n, lp * dt)
        sum_up, n = _draw_jump_sum(seed, path, n, up, fup_kind, fup_p1, fup_p2)
        dn, n = rng.rand_poisson(seed, path, n, lm * dt)
        sum_dn, n = _draw_jump_sum(seed, path, n, dn, fdn_kind, fdn_p1, fdn_p2)
        out[i] = sum_up - sum_dn


def _dist_code(d: JumpSizeDistribution) -> tuple[int, float, float]:
    if d.kind is JumpKind.DEGENERATE:
        return 0, d.delta, 0.0
    if d.kind is JumpKind.EXPONENTIAL:
        return 1, d.mean, 0.0
    return 2, d.shape, d.scale


def _policy_code(policy: MeasurePolicy | None) -> tuple[int, float, float, float]:
    if policy is None:
        return _POL_NONE, 0.0, 1.0, 0.0
    kind = {PolicyKind.VARIANCE_PRESERVING: _POL_VARIANCE_PRESERVING,
            PolicyKind.VOLATILITY_SCALED: _POL_VOLATILITY_SCALED,
            PolicyKind.EXPLICIT: _POL_EXPLICIT}[policy.kind]
    lm_tilde = policy.lambda_minus_tilde if policy.lambda_minus_tilde is not None else 0.0
    return kind, policy.risk_free_rate, policy.scale, lm_tilde


def sample_one_step_returns(state: IntensityState,
                            dist_up: JumpSizeDistribution,
                            dist_down: JumpSizeDistribution,
                            dt: float, n_draws: int, seed: int) -> np.ndarray:
    """I.i.d. one-step compound log-returns from the given state."""
    fup = _dist_code(dist_up)
    fdn = _dist_code(dist_down)
    out = np.empty(n_draws, dtype=np.float64)
    _one_step_returns(rng._as_u64(seed), n_draws,
                      state.lambda_plus, state.lambda_minus, dt,
                      fup[0], fup[1], fup[2], fdn[0], fdn[1], fdn[2], out)
    return out


def simulate(spec: SimulationSpec, workers: int | None = None) -> SimulationResult:
    """Run the simulation described by ``spec``.

    Raises InfeasibleDrift (with the step index and intensity state of the
    first failing path) when the drift equation has no positive solution at a
    reached state.  Output is bit-identical for identical specs regardless of
    ``workers``.
    """
    n = spec.n_paths
    n_steps = spec.horizon_steps
    params = spec.params
    record_full = spec.record is Record.FULL_PATHS
    if record_full and n * max(n_steps, 1) > _FULL_RECORD_CAP:
        warnings.warn("full-path recording exceeds the entry cap; "
                      "keeping terminal statistics only", RuntimeWarning)
        record_full = False

    sim_q = spec.measure is MeasureKind.RISK_NEUTRAL
    track_z = spec.measure is MeasureKind.PHYSICAL and (
        spec.policy is not None or spec.general_measure is not None)

    lam0p, lam0m = spec.lambda0 if spec.lambda0 is not None \
        else params.initial_intensities()
    log_s0 = math.log(spec.s0)

    term_log = np.full(n, np.nan, dtype=np.float64)
    logz = np.zeros(n, dtype=np.float64)
    tot_up = np.zeros(n, dtype=np.int64)
    tot_dn = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    fail_lp = np.zeros(n, dtype=np.float64)
    fail_lm = np.zeros(n, dtype=np.float64)
    if record_full:
        ups = np.zeros((n, n_steps), dtype=np.int32)
        dns = np.zeros((n, n_steps), dtype=np.int32)
        lprices = np.zeros((n, n_steps), dtype=np.float64)
    else:
        ups = np.zeros((1, 1), dtype=np.int32)
        dns = np.zeros((1, 1), dtype=np.int32)
        lprices = np.zeros((1, 1), dtype=np.float64)

    seed_u64 = rng._as_u64(spec.seed)

    if not spec.generalized:
        policy = spec.policy
        pol_kind, pol_rate, pol_scale, pol_lm_tilde = _policy_code(policy)
        a_coef = math.expm1(params.delta)
        b_coef = math.expm1(-params.delta)

        def run_block(lo, hi):
            _sim_base_block(
                seed_u64, lo, hi, n_steps, params.dt, params.delta, log_s0,
                params.omega_plus, params.alpha_plus, params.beta_plus, params.gamma_plus,
                params.omega_minus, params.alpha_minus, params.beta_minus, params.gamma_minus,
                lam0p, lam0m, a_coef, b_coef, sim_q, track_z,
                pol_kind, pol_rate, pol_scale, pol_lm_tilde, record_full,
                term_log, logz, tot_up, tot_dn, status, fail_lp, fail_lm,
                ups, dns, lprices)
    else:
        gspec = spec.general_measure
        if (sim_q or track_z) and gspec is None:
            raise ValueError("companion or risk-neutral compound run requires "
                             "a general measure spec")
        mean_up_size = jump_moments(spec.jumps_up)[0]
        mean_dn_size = jump_moments(spec.jumps_down)[0]
        fup = _dist_code(spec.jumps_up)
        fdn = _dist_code(spec.jumps_down)
        if gspec is not None:
            policy = gspec.lambda_policy
            pol_kind, pol_rate, pol_scale, pol_lm_tilde = _policy_code(policy)
            if gspec.rate_times_dt:
                pol_rate = pol_rate * params.dt
            phi_up, phi_dn = gspec.phi_pair()
            if not phi_up > 1.0:
                raise ValueError(f"up-side exponential moment must exceed 1, got {phi_up!r}")
            if not phi_dn < 1.0:
                raise ValueError(f"down-side exponential moment must be below 1, got {phi_dn!r}")
            a_coef = phi_up - 1.0
            b_coef = phi_dn - 1.0
            tup = _dist_code(gspec.f_tilde_plus)
            tdn = _dist_code(gspec.f_tilde_minus)
        else:
            pol_kind, pol_rate, pol_scale, pol_lm_tilde = _policy_code(None)
            a_coef, b_coef = 1.0, -1.0
            tup, tdn = fup, fdn

        def run_block(lo, hi):
            _sim_general_block(
                seed_u64, lo, hi, n_steps, params.dt, log_s0,
                params.omega_plus, params.alpha_plus, params.beta_plus, params.gamma_plus,
                params.omega_minus, params.alpha_minus, params.beta_minus, params.gamma_minus,
                lam0p, lam0m, mean_up_size, mean_dn_size,
                a_coef, b_coef, sim_q, track_z,
                pol_kind, pol_rate, pol_scale, pol_lm_tilde,
                fup[0], fup[1], fup[2], fdn[0], fdn[1], fdn[2],
                tup[0], tup[1], tup[2], tdn[0], tdn[1], tdn[2],
                record_full,
                term_log, logz, tot_up, tot_dn, status, fail_lp, fail_lm,
                ups, dns, lprices)

    blocks = [(lo, min(lo + _BLOCK, n)) for lo in range(0, n, _BLOCK)]
    n_workers = workers if workers is not None else 1
    if n_workers <= 1 or len(blocks) == 1:
        for lo, hi in blocks:
            run_block(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(run_block, lo, hi) for lo, hi in blocks]
            for f in futures:
                f.result()

    failed = np.nonzero(status)[0]
    if failed.size:
        i = int(failed[0])
        step = int(status[i]) - 1
        state = IntensityState(lambda_plus=float(fail_lp[i]),
                               lambda_minus=float(fail_lm[i]))
        raise InfeasibleDrift(
            f"drift equation infeasible at step {step} of path {i} "
            f"(lambda_plus={fail_lp[i]!r}, lambda_minus={fail_lm[i]!r})",
            step=step, state=state)

    return SimulationResult(
        spec=spec, terminal_log_price=term_log, log_z=logz,
        total_up=tot_up, total_down=tot_dn,
        up_steps=ups if record_full else None,
        down_steps=dns if record_full else None,
        log_prices=lprices if record_full else None)


def replay_states(result: SimulationResult, path_index: int):
    """Reconstruct the pre-draw intensity states of one recorded path.

    Returns a list of (state, step_index) pairs.  The lattice model replays
    from the recorded jump counts (bit-exact); the compound model replays
    from the recorded log-price increments.
    """
    if result.up_steps is None:
        raise ValueError("replay requires full-path recording")
    spec = result.spec
    params = spec.params
    lp, lm = spec.lambda0 if spec.lambda0 is not None else params.initial_intensities()
    ups = result.up_steps[path_index]
    dns = result.down_steps[path_index]
    lprices = result.log_prices[path_index]
    if spec.generalized:
        mean_up_size = jump_moments(spec.jumps_up)[0]
        mean_dn_size = jump_moments(spec.jumps_down)[0]
    prev_log = math.log(spec.s0)
    out = []
    for s in range(ups.shape[0]):
        out.append((IntensityState(lambda_plus=lp, lambda_minus=lm), s))
        if spec.generalized:
            x = lprices[s] - prev_log
            prev_log = lprices[s]
            eps = x - (mean_up_size * lp - mean_dn_size * lm) * params.dt
        else:
            x = params.delta * (int(ups[s]) - int(dns[s]))
            eps = x - params.delta * (lp - lm) * params.dt
        ind = 1.0 if eps < 0.0 else 0.0
        lp_next = (params.omega_plus
                   + (params.alpha_plus + params.gamma_plus * ind) * eps * eps
                   + params.beta_plus * lp)
        lm_next = (params.omega_minus
                   + (params.alpha_minus + params.gamma_minus * ind) * eps * eps
                   + params.beta_minus * lm)
        lp = lp_next
        lm = lm_next
    return out


def write_paths_csv(result: SimulationResult, path: str) -> None:
    """Dump full-path records as CSV columns step, up, down, log_price.

    Paths are concatenated in index order; the step column restarts at zero
    on each path boundary.
    """
    if result.up_steps is None:
        raise ValueError("path dump requires full-path recording")
    with open(path, "w") as fh:
        fh.write("step,up,down,log_price\n")
        n_steps = result.up_steps.shape[1]
        for i in range(len(result)):
            for s in range(n_steps):
                fh.write(f"{s},{result.up_steps[i, s]},{result.down_steps[i, s]},"
                         f"{result.log_prices[i, s]:.17g}\n")
