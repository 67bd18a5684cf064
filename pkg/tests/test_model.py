import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import garch_intensity as gi
from garch_intensity import (IntensityState, ModelParams, RecursionKind,
                             conditional_moments, decompose, initial_state,
                             step_intensity, variance_recursion_check)


def test_params_validation():
    with pytest.raises(ValueError, match="delta"):
        ModelParams(delta=0.0, dt=1.0, omega_plus=1.0, alpha_plus=0.0, beta_plus=0.0,
                    omega_minus=1.0, alpha_minus=0.0, beta_minus=0.0)
    with pytest.raises(ValueError, match="beta_plus"):
        ModelParams(delta=0.01, dt=1.0, omega_plus=1.0, alpha_plus=0.0, beta_plus=1.0,
                    omega_minus=1.0, alpha_minus=0.0, beta_minus=0.0)
    with pytest.raises(ValueError, match="omega_minus"):
        ModelParams(delta=0.01, dt=1.0, omega_plus=1.0, alpha_plus=0.0, beta_plus=0.0,
                    omega_minus=0.0, alpha_minus=0.0, beta_minus=0.0)
    # leverage coefficients require the GJR recursion
    with pytest.raises(ValueError, match="gamma"):
        ModelParams(delta=0.01, dt=1.0, omega_plus=1.0, alpha_plus=0.0, beta_plus=0.0,
                    omega_minus=1.0, alpha_minus=0.0, beta_minus=0.0,
                    gamma_plus=1.0, recursion_kind=RecursionKind.GARCH)


def test_conditional_moments_symmetric_and_worked_values():
    params = ModelParams(delta=0.01, dt=1.0, omega_plus=1.0, alpha_plus=0.0, beta_plus=0.0,
                         omega_minus=1.0, alpha_minus=0.0, beta_minus=0.0)
    state = IntensityState(50.0, 50.0)
    mean, var = conditional_moments(state, params)
    assert mean == 0.0
    assert var == pytest.approx(0.01, rel=1e-14)

    params2 = ModelParams(delta=0.01, dt=0.5, omega_plus=1.0, alpha_plus=0.0, beta_plus=0.0,
                          omega_minus=1.0, alpha_minus=0.0, beta_minus=0.0)
    mean2, _ = conditional_moments(IntensityState(60.0, 40.0), params2)
    assert mean2 == pytest.approx(0.1, rel=1e-14)


def test_conditional_mean_matches_simulation():
    params = ModelParams(delta=0.01, dt=0.5, omega_plus=60.0, alpha_plus=0.0, beta_plus=0.0,
                         omega_minus=40.0, alpha_minus=0.0, beta_minus=0.0)
    state = initial_state(params)
    mean, var = conditional_moments(state, params)
    x = gi.sample_one_step_returns(
        state,
        gi.JumpSizeDistribution.degenerate(params.delta, gi.Side.UP),
        gi.JumpSizeDistribution.degenerate(params.delta, gi.Side.DOWN),
        params.dt, 1_000_000, seed=321)
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - mean) <= 3.0 * se
    assert abs(x.var(ddof=1) - var) <= 4.0 * var / math.sqrt(x.size) * 3.0


def test_decompose_symmetric_case():
    params = ModelParams(delta=0.002, dt=1.0, omega_plus=1.0, alpha_plus=0.0, beta_plus=0.0,
                         omega_minus=1.0, alpha_minus=0.0, beta_minus=0.0)
    state = IntensityState(50.0, 50.0)
    dec = decompose(state, params, realized_log_return=0.004)
    assert dec.eps == pytest.approx(0.004, abs=1e-15)
    lam_dt = 50.0 * params.dt
    assert dec.mu == pytest.approx(lam_dt * (math.exp(0.002) + math.exp(-0.002) - 2.0), rel=1e-12)
    assert dec.mu > 0.0


def test_decompose_identity_mu_minus_gamma():
    params = ModelParams(delta=0.01, dt=1.0, omega_plus=1.0, alpha_plus=0.0, beta_plus=0.0,
                         omega_minus=1.0, alpha_minus=0.0, beta_minus=0.0)
    state = IntensityState(60.0, 40.0)
    dec = decompose(state, params, realized_log_return=0.0)
    mean = params.delta * (60.0 - 40.0) * params.dt
    assert dec.mu - dec.gamma == pytest.approx(mean, abs=1e-12)


def test_exponential_moment_identity_monte_carlo():
    # E[exp(X)] should equal exp(mu) for the one-step compound law
    params = ModelParams(delta=0.002, dt=1.0, omega_plus=30.0, alpha_plus=0.0, beta_plus=0.0,
                         omega_minus=20.0, alpha_minus=0.0, beta_minus=0.0)
    state = initial_state(params)
    dec = decompose(state, params, 0.0)
    x = gi.sample_one_step_returns(
        state,
        gi.JumpSizeDistribution.degenerate(params.delta, gi.Side.UP),
        gi.JumpSizeDistribution.degenerate(params.delta, gi.Side.DOWN),
        params.dt, 1_000_000, seed=17)
    vals = np.exp(x)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - math.exp(dec.mu)) <= 3.0 * se


def test_step_intensity_worked_values(table1):
    state = IntensityState(10.0, 10.0)
    up = step_intensity(state, table1, eps=0.001)
    # direct arithmetic with the bundled coefficients, positive shock branch
    assert up.lambda_plus == pytest.approx(9.475979, rel=1e-12)
    assert up.last_eps == 0.001
    down = step_intensity(state, table1, eps=-0.001)
    # negative shock adds the leverage weight
    assert down.lambda_plus == pytest.approx(9.486879, rel=1e-12)


def test_step_intensity_constant_recursion():
    params = ModelParams(delta=0.01, dt=1.0, omega_plus=2.5, alpha_plus=0.0, beta_plus=0.0,
                         omega_minus=1.5, alpha_minus=0.0, beta_minus=0.0)
    nxt = step_intensity(IntensityState(10.0, 20.0), params, eps=0.42)
    assert nxt.lambda_plus == 2.5
    assert nxt.lambda_minus == 1.5


def test_initial_state_is_recursion_fixed_point(table1):
    state = initial_state(table1)
    stepped = step_intensity(state, table1, eps=0.0)
    assert stepped.lambda_plus == pytest.approx(state.lambda_plus, rel=1e-12)
    assert stepped.lambda_minus == pytest.approx(state.lambda_minus, rel=1e-12)


def test_variance_recursion_check_worked_value():
    params = ModelParams(delta=0.01, dt=1.0, omega_plus=0.1, alpha_plus=100.0, beta_plus=0.9,
                         omega_minus=0.1, alpha_minus=100.0, beta_minus=0.9)
    h_next, consistent = variance_recursion_check(params, IntensityState(50.0, 50.0), eps=0.01)
    assert h_next == pytest.approx(0.009022, rel=1e-12)
    assert consistent


def test_variance_recursion_check_preconditions():
    params = ModelParams(delta=0.01, dt=1.0, omega_plus=0.1, alpha_plus=100.0, beta_plus=0.9,
                         omega_minus=0.1, alpha_minus=100.0, beta_minus=0.8)
    with pytest.raises(ValueError, match="beta"):
        variance_recursion_check(params, IntensityState(50.0, 50.0), eps=0.01)
    gjr = ModelParams(delta=0.01, dt=1.0, omega_plus=0.1, alpha_plus=100.0, beta_plus=0.9,
                      omega_minus=0.1, alpha_minus=100.0, beta_minus=0.9,
                      gamma_plus=10.0, gamma_minus=10.0, recursion_kind=RecursionKind.GJR)
    with pytest.raises(ValueError, match="GARCH"):
        variance_recursion_check(gjr, IntensityState(50.0, 50.0), eps=0.01)


small_pos = st.floats(1e-3, 10.0)


@given(omega=small_pos, alpha=st.floats(0.0, 500.0), beta=st.floats(0.0, 0.999),
       eps_seq=st.lists(st.floats(-0.5, 0.5), min_size=1, max_size=40))
@settings(max_examples=60, deadline=None)
def test_intensity_stays_positive(omega, alpha, beta, eps_seq):
    params = ModelParams(delta=0.01, dt=1.0, omega_plus=omega, alpha_plus=alpha,
                         beta_plus=beta, omega_minus=omega, alpha_minus=alpha,
                         beta_minus=beta)
    state = initial_state(params)
    for eps in eps_seq:
        state = step_intensity(state, params, eps)
        assert state.lambda_plus > 0.0
        assert state.lambda_minus > 0.0


@given(lp=st.floats(0.1, 200.0), lm=st.floats(0.1, 200.0),
       delta=st.floats(1e-4, 0.1), dt=st.floats(1e-3, 2.0),
       ret=st.floats(-0.5, 0.5))
@settings(max_examples=60, deadline=None)
def test_decomposition_identity_property(lp, lm, delta, dt, ret):
    params = ModelParams(delta=delta, dt=dt, omega_plus=1.0, alpha_plus=0.0, beta_plus=0.0,
                         omega_minus=1.0, alpha_minus=0.0, beta_minus=0.0)
    state = IntensityState(lp, lm)
    dec = decompose(state, params, ret)
    mean, _ = conditional_moments(state, params)
    scale = max(1.0, abs(dec.mu), abs(dec.gamma))
    assert dec.mu - dec.gamma == pytest.approx(mean, abs=1e-12 * scale)
    assert dec.mu - dec.gamma + dec.eps == pytest.approx(ret, abs=1e-12 * scale)
