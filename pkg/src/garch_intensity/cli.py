"""Batch command-line surface: simulate, price, smile, calibrate, verify.

All runs are driven by a JSON config file plus dotted-key overrides
(``simulation.n_paths=100000``).  Every run echoes the fully resolved config
(defaults included) next to its outputs, so any result can be reproduced
from the echo alone.  Exit status: 0 success, 1 domain errors, 2 I/O or
config errors.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys

import numpy as np

from . import generalized, measure, model, montecarlo, pricing
from . import calibration as calib
from .errors import DomainError

ENV_OUTDIR = "GARCH_INTENSITY_OUTDIR"


class ConfigError(Exception):
    pass


_DEFAULTS = {
    "model": {
        "delta": 2.0e-3,
        "dt": 1.0,
        "recursion": "gjr",
        "omega_plus": 8.50e-2,
        "beta_plus": 9.39e-1,
        "alpha_plus": 9.79e2,
        "gamma_plus": 1.09e4,
        "omega_minus": 7.28e-2,
        "beta_minus": 9.42e-1,
        "alpha_minus": 8.49e2,
        "gamma_minus": 1.07e4,
        "lambda0_plus": None,
        "lambda0_minus": None,
    },
    "measure": {
        "policy": "variance_preserving",
        "rate": 0.0,
        "scale": 1.0,
        "lambda_minus_tilde": None,
    },
    "simulation": {
        "measure": "risk_neutral",
        "companion": False,
        "horizon_steps": 30,
        "n_paths": 100000,
        "seed": 20240601,
        "s0": 1.0,
        "record": "terminal",
    },
    "jumps": {
        "enabled": False,
        "up": {"kind": "degenerate", "delta": None, "mean": None, "shape": None, "scale": None},
        "down": {"kind": "degenerate", "delta": None, "mean": None, "shape": None, "scale": None},
        "tilde_up": {"kind": "degenerate", "delta": None, "mean": None, "shape": None, "scale": None},
        "tilde_down": {"kind": "degenerate", "delta": None, "mean": None, "shape": None, "scale": None},
        "rate_times_dt": False,
    },
    "option": {
        "kind": "call",
        "strike": 1.0,
        "maturity_steps": 30,
    },
    "smile": {
        "maturities": [30, 60],
        "moneyness": [0.9, 0.925, 0.95, 0.975, 1.0, 1.025, 1.05, 1.075, 1.1],
        "n_paths": None,
    },
    "calibration": {
        "returns_file": None,
        "estimate": None,
        "max_iter": 2000,
        "tol": 1e-6,
        "init": None,
    },
    "verify": {
        "n_paths": 100000,
        "horizon_steps": 30,
        "audit_paths": 1000,
    },
    "output": {
        "dir": None,
    },
}


def _merge(defaults, user, prefix=""):
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        dotted = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown config key: {dotted}")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            out[key] = _merge(defaults[key], value, prefix=dotted + ".")
        else:
            out[key] = value
    return out


def _apply_override(cfg, assignment):
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    dotted, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = dotted.split(".")
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"unknown config key: {dotted}")
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"unknown config key: {dotted}")
    node[parts[-1]] = value


def load_config(path, overrides=()):
    try:
        with open(path) as fh:
            user = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config root must be a JSON object")
    cfg = _merge(_DEFAULTS, user)
    for assignment in overrides:
        _apply_override(cfg, assignment)
    return cfg


def _build_model(cfg):
    m = cfg["model"]
    try:
        return model.ModelParams(
            delta=m["delta"], dt=m["dt"],
            omega_plus=m["omega_plus"], alpha_plus=m["alpha_plus"],
            beta_plus=m["beta_plus"], gamma_plus=m["gamma_plus"],
            omega_minus=m["omega_minus"], alpha_minus=m["alpha_minus"],
            beta_minus=m["beta_minus"], gamma_minus=m["gamma_minus"],
            recursion_kind=model.RecursionKind(m["recursion"]))
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc


def _build_lambda0(cfg):
    m = cfg["model"]
    lp, lm = m["lambda0_plus"], m["lambda0_minus"]
    if (lp is None) != (lm is None):
        raise ConfigError("model: lambda0_plus and lambda0_minus must be set together")
    return None if lp is None else (lp, lm)


def _build_policy(cfg):
    mc = cfg["measure"]
    try:
        return measure.MeasurePolicy(
            kind=measure.PolicyKind(mc["policy"]),
            risk_free_rate=mc["rate"],
            scale=mc["scale"],
            lambda_minus_tilde=mc["lambda_minus_tilde"])
    except ValueError as exc:
        raise ConfigError(f"measure: {exc}") from exc


def _build_jump_law(node, side, key):
    kind = generalized.JumpKind(node["kind"])
    try:
        return generalized.JumpSizeDistribution(
            kind=kind, side=side, delta=node["delta"], mean=node["mean"],
            shape=node["shape"], scale=node["scale"])
    except ValueError as exc:
        raise ConfigError(f"jumps.{key}: {exc}") from exc


def _build_jumps(cfg, policy):
    j = cfg["jumps"]
    if not j["enabled"]:
        return None, None, None
    up = _build_jump_law(j["up"], generalized.Side.UP, "up")
    down = _build_jump_law(j["down"], generalized.Side.DOWN, "down")
    tilde_up = _build_jump_law(j["tilde_up"], generalized.Side.UP, "tilde_up")
    tilde_down = _build_jump_law(j["tilde_down"], generalized.Side.DOWN, "tilde_down")
    try:
        gspec = generalized.GeneralMeasureSpec(
            lambda_policy=policy, f_tilde_plus=tilde_up, f_tilde_minus=tilde_down,
            rate_times_dt=j["rate_times_dt"])
    except ValueError as exc:
        raise ConfigError(f"jumps: {exc}") from exc
    return up, down, gspec


def _build_sim_spec(cfg, horizon=None, n_paths=None, monte_measure=None, record=None,
                    companion=None):
    s = cfg["simulation"]
    params = _build_model(cfg)
    policy = _build_policy(cfg)
    kind = montecarlo.MeasureKind(monte_measure or s["measure"])
    use_companion = s["companion"] if companion is None else companion
    jumps_up, jumps_down, gspec = _build_jumps(cfg, policy)
    attach_policy = policy if (kind is montecarlo.MeasureKind.RISK_NEUTRAL
                               or use_companion) else None
    try:
        return montecarlo.SimulationSpec(
            params=params,
            measure=kind,
            policy=None if jumps_up is not None else attach_policy,
            horizon_steps=horizon if horizon is not None else s["horizon_steps"],
            n_paths=n_paths if n_paths is not None else s["n_paths"],
            seed=s["seed"],
            s0=s["s0"],
            record=montecarlo.Record(record or s["record"]),
            lambda0=_build_lambda0(cfg),
            jumps_up=jumps_up,
            jumps_down=jumps_down,
            general_measure=gspec if (jumps_up is not None and attach_policy is not None)
            else None,
        )
    except ValueError as exc:
        raise ConfigError(f"simulation: {exc}") from exc


def _resolve_outdir(cfg, args):
    outdir = args.out or cfg["output"]["dir"] or os.environ.get(ENV_OUTDIR) or "out"
    os.makedirs(outdir, exist_ok=True)
    return outdir


def _echo_config(cfg, outdir):
    with open(os.path.join(outdir, "resolved_config.json"), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_simulate(cfg, args, outdir):
    spec = _build_sim_spec(cfg)
    result = montecarlo.simulate(spec, workers=args.threads)
    if result.up_steps is not None:
        path = os.path.join(outdir, "paths.csv")
        montecarlo.write_paths_csv(result, path)
    else:
        path = os.path.join(outdir, "terminal.csv")
        with open(path, "w") as fh:
            fh.write("path,terminal_log_price,log_z\n")
            for i in range(len(result)):
                fh.write(f"{i},{result.terminal_log_price[i]:.17g},"
                         f"{result.log_z[i]:.17g}\n")
    print(f"wrote {path}")
    return 0


def _cmd_price(cfg, args, outdir):
    o = cfg["option"]
    spec = _build_sim_spec(cfg, horizon=o["maturity_steps"])
    params = spec.params
    policy = _build_policy(cfg)
    result = montecarlo.simulate(spec, workers=args.threads)
    opt = pricing.OptionSpec(kind=pricing.OptionKind(o["kind"]), strike=o["strike"],
                             maturity=o["maturity_steps"] * params.dt,
                             rate=policy.risk_free_rate)
    price, stderr = pricing.price_european(result, opt)
    path = os.path.join(outdir, "price.csv")
    with open(path, "w") as fh:
        fh.write("kind,strike,maturity_steps,price,stderr\n")
        fh.write(f"{o['kind']},{o['strike']:.17g},{o['maturity_steps']},"
                 f"{price:.17g},{stderr:.17g}\n")
    print(f"wrote {path}")
    return 0


def _cmd_smile(cfg, args, outdir):
    params = _build_model(cfg)
    policy = _build_policy(cfg)
    if cfg["jumps"]["enabled"]:
        raise ConfigError("smile: the smile experiment runs on the lattice model")
    sm = cfg["smile"]
    n_paths = sm["n_paths"] if sm["n_paths"] is not None else cfg["simulation"]["n_paths"]
    table = pricing.build_smile(params, policy, sm["maturities"], sm["moneyness"],
                                n_paths=n_paths, seed=cfg["simulation"]["seed"],
                                s0=cfg["simulation"]["s0"], lambda0=_build_lambda0(cfg),
                                workers=args.threads)
    path = os.path.join(outdir, "smile.csv")
    table.write_csv(path)
    print(f"wrote {path}")
    return 0


def _cmd_calibrate(cfg, args, outdir):
    c = cfg["calibration"]
    if c["returns_file"] is None:
        raise ConfigError("calibration.returns_file is required")
    params = _build_model(cfg)
    raw = calib.read_returns_csv(c["returns_file"])
    series = calib.ingest_returns(raw, delta=params.delta, dt=params.dt)
    init = params
    if c["init"]:
        merged = dict(cfg["model"])
        merged.update(c["init"])
        init = _build_model({"model": merged})
    estimate = None if c["estimate"] is None else tuple(c["estimate"])
    settings = calib.FitSettings(max_iter=c["max_iter"], tol=c["tol"], estimate=estimate)
    fit = calib.fit_mle(series, init, settings)
    p = fit.params
    doc = {
        "params": {
            "delta": p.delta, "dt": p.dt, "recursion": p.recursion_kind.value,
            "omega_plus": p.omega_plus, "alpha_plus": p.alpha_plus,
            "beta_plus": p.beta_plus, "gamma_plus": p.gamma_plus,
            "omega_minus": p.omega_minus, "alpha_minus": p.alpha_minus,
            "beta_minus": p.beta_minus, "gamma_minus": p.gamma_minus,
        },
        "log_likelihood": fit.log_likelihood,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "n_observations": series.count,
        "max_quantization_residual": series.max_residual,
    }
    path = os.path.join(outdir, "fit.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")
    return 0


def _audit_variance_preservation(cfg, args):
    """Per-step policy audit on replayed paths: drift residual and sum preservation."""
    v = cfg["verify"]
    policy = _build_policy(cfg)
    spec = _build_sim_spec(cfg, horizon=v["horizon_steps"], n_paths=v["audit_paths"],
                           monte_measure="risk_neutral", record="full")
    result = montecarlo.simulate(spec, workers=args.threads)
    r = policy.risk_free_rate
    a = math.expm1(spec.params.delta)
    b = math.expm1(-spec.params.delta)
    max_sum_dev = 0.0
    max_residual = 0.0
    for i in range(len(result)):
        for state, _ in montecarlo.replay_states(result, i):
            lt_p, lt_m = measure.solve_risk_neutral_intensities(state, spec.params, policy)
            residual = abs(a * lt_p + b * lt_m - r)
            max_residual = max(max_residual, residual)
            if policy.kind is measure.PolicyKind.VARIANCE_PRESERVING:
                total = state.lambda_plus + state.lambda_minus
                max_sum_dev = max(max_sum_dev, abs((lt_p + lt_m) - total) / total)
    return max_sum_dev, max_residual


def _cmd_verify(cfg, args, outdir):
    v = cfg["verify"]
    lines = []
    ok = True

    spec_p = _build_sim_spec(cfg, horizon=v["horizon_steps"], n_paths=v["n_paths"],
                             monte_measure="physical", companion=True)
    res_p = montecarlo.simulate(spec_p, workers=args.threads)
    z = np.exp(res_p.log_z)
    mean_z = float(z.mean())
    se_z = float(z.std(ddof=1) / math.sqrt(len(res_p)))
    pass_z = abs(mean_z - 1.0) <= 3.0 * se_z if se_z > 0.0 else mean_z == 1.0
    ok &= pass_z
    lines.append(f"{'PASS' if pass_z else 'FAIL'} z_expectation "
                 f"mean={mean_z:.17g} stderr={se_z:.17g}")

    policy = _build_policy(cfg)
    spec_q = _build_sim_spec(cfg, horizon=v["horizon_steps"], n_paths=v["n_paths"],
                             monte_measure="risk_neutral")
    res_q = montecarlo.simulate(spec_q, workers=args.threads)
    maturity = v["horizon_steps"] * spec_q.params.dt
    disc = math.exp(-policy.risk_free_rate * maturity)
    s_t = disc * res_q.terminal_prices()
    mean_s = float(s_t.mean())
    se_s = float(s_t.std(ddof=1) / math.sqrt(len(res_q)))
    pass_s = abs(mean_s - spec_q.s0) <= 3.0 * se_s if se_s > 0.0 else mean_s == spec_q.s0
    ok &= pass_s
    lines.append(f"{'PASS' if pass_s else 'FAIL'} q_martingale "
                 f"discounted_mean={mean_s:.17g} s0={spec_q.s0:.17g} stderr={se_s:.17g}")

    if not cfg["jumps"]["enabled"]:
        max_sum_dev, max_residual = _audit_variance_preservation(cfg, args)
        tol = 1e-10 * max(1.0, policy.risk_free_rate)
        pass_a = max_residual <= tol and max_sum_dev <= 1e-10
        ok &= pass_a
        lines.append(f"{'PASS' if pass_a else 'FAIL'} variance_preservation "
                     f"max_sum_dev={max_sum_dev:.17g} max_drift_residual={max_residual:.17g}")

    path = os.path.join(outdir, "verify_report.txt")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"wrote {path}")
    return 0 if ok else 1


_COMMANDS = {
    "simulate": _cmd_simulate,
    "price": _cmd_price,
    "smile": _cmd_smile,
    "calibrate": _cmd_calibrate,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="garch-intensity",
        description="Simulation, pricing and calibration for the jump-intensity model")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("config", help="path to a JSON config file")
    parser.add_argument("overrides", nargs="*",
                        help="dotted-key overrides, e.g. simulation.n_paths=1000")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap; does not affect results")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.overrides)
        outdir = _resolve_outdir(cfg, args)
        _echo_config(cfg, outdir)
        return _COMMANDS[args.command](cfg, args, outdir)
    except DomainError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
