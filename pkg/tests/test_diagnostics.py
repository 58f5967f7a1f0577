import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import const_model, func_model
from gamechain.diagnostics import (UnsupportedLawError, cf_deviation, cf_distance, chain_cf,
                                   coarse_error, exp_moment, rate_regression, rows_to_csv,
                                   strong_error, value_convergence)
from gamechain.model import InnovationLaw, PayoffPair, model_preset, put_payoff

RAD = InnovationLaw.rademacher(1)
GAUSS = InnovationLaw.gaussian(1)


# ---- strong error -----------------------------------------------------------------

def test_strong_error_zero_model_exact():
    r = strong_error(model_preset("zero-1d"), 16, reps=30, seed=1)
    assert r.estimate == 0.0 and r.std_error == 0.0


def test_strong_error_ode_lag():
    r = strong_error(model_preset("ode-1d"), 100, reps=30)
    assert r.estimate == pytest.approx(1e-4, rel=1e-12)
    assert r.bound is None and r.flags


def test_strong_error_rejects_finite_law_and_few_reps():
    with pytest.raises(UnsupportedLawError):
        strong_error(model_preset("tanh-1d"), 16, law=RAD)
    with pytest.raises(ValueError):
        strong_error(model_preset("tanh-1d"), 16, reps=10)


def test_strong_error_jobs_independent():
    a = strong_error(model_preset("tanh-1d"), 32, reps=40, seed=5, jobs=1)
    b = strong_error(model_preset("tanh-1d"), 32, reps=40, seed=5, jobs=4)
    assert (a.estimate, a.std_error) == (b.estimate, b.std_error)


# ---- coarse error -----------------------------------------------------------------

def test_coarse_error_zero_for_constant_coefficients():
    assert coarse_error(const_model(0.8, 0.3), RAD, 256, reps=50).estimate == 0.0


def test_coarse_error_zero_when_q_is_one():
    assert coarse_error(model_preset("sine-1d"), RAD, 15, reps=50).estimate == 0.0


def test_coarse_error_rational_sigma():
    m = func_model(lambda x: 1 / (1 + x * x) + 1, L=2.0)
    r = coarse_error(m, RAD, 1024, reps=500, seed=3)
    assert r.compliant and r.estimate > 0
    assert r.bound == pytest.approx(136 * 2 ** 8 / 32)


def test_coarse_error_sine_model_n4096():
    r = coarse_error(model_preset("sine-1d"), RAD, 4096, reps=1000, seed=0)
    assert r.bound == pytest.approx(544.0)
    assert r.estimate - 2 * r.std_error <= r.bound


# ---- characteristic functions -----------------------------------------------------

def test_cf_at_origin():
    w = np.zeros((1, 1))
    assert chain_cf(np.eye(1), RAD, 16, w)[0] == pytest.approx(1.0)
    assert cf_deviation(np.eye(1), RAD, 16, w)[0] == pytest.approx(0.0, abs=1e-15)


def test_cf_cosine_power_closed_form():
    dev = cf_deviation(np.eye(1), RAD, 16, np.ones((1, 1)))[0]
    assert dev == pytest.approx(abs(math.cos(0.25) ** 16 - math.exp(-0.5)), abs=1e-14)


def test_cf_trinomial_closed_form():
    law = InnovationLaw.trinomial()
    w, n = 0.7, 9
    phi = (2 / 3 + math.cos(math.sqrt(3) * w / 3) / 3) ** n
    assert chain_cf(np.eye(1), law, n, np.array([[w]]))[0].real == pytest.approx(phi, rel=1e-13)


@pytest.mark.parametrize("n", [16, 64, 256])
def test_cf_distance_compliant(n):
    r = cf_distance(np.eye(1), RAD, n)
    assert r.compliant
    assert r.estimate <= 1.5 * n ** (-1 / 6)


def test_cf_distance_deterministic():
    a = cf_distance(np.array([[0.7]]), RAD, 64, seed=2)
    b = cf_distance(np.array([[0.7]]), RAD, 64, seed=2)
    assert a.estimate == b.estimate


def test_cf_distance_2d_runs():
    r = cf_distance(np.array([[0.3, 0.0], [0.1, 0.4]]), InnovationLaw.rademacher(2), 16)
    assert 0 <= r.estimate <= r.bound


# ---- exponential moments ----------------------------------------------------------

def test_exp_moment_zero_model():
    m = const_model(0.0, 0.0, x0=0.4)
    r = exp_moment(m, RAD, 64, M=1.0, reps=20)
    assert r.estimate == pytest.approx(math.exp(0.4), rel=1e-15)
    assert r.std_error == 0.0 and r.compliant


def test_exp_moment_rademacher_compliant():
    r = exp_moment(const_model(1.0, 0.0), RAD, 256, M=1.0, reps=2000, delta=0.1, seed=4)
    assert r.compliant
    assert r.bound == pytest.approx(2 * math.exp(1.5 + math.e / 6) * 256 ** 0.1, rel=1e-12)


# ---- rate regression --------------------------------------------------------------

@settings(max_examples=50)
@given(st.floats(-3.0, 3.0), st.floats(-5.0, 5.0))
def test_rate_recovers_planted_slope(slope, logc):
    Ns = [16, 64, 256, 1024]
    pts = [(N, math.exp(logc) * N ** slope, 0.0) for N in Ns]
    rs = rate_regression(pts)
    assert rs.slope == pytest.approx(slope, abs=1e-10)
    if abs(slope) >= 1e-3:   # R^2 is ill-conditioned on near-flat data
        assert rs.r2 == pytest.approx(1.0, abs=1e-10)


def test_rate_half_power():
    rs = rate_regression([(N, N ** -0.5, 0.0) for N in (16, 64, 256)])
    assert rs.slope == pytest.approx(-0.5, abs=1e-12)
    assert rs.r2 == pytest.approx(1.0)


def test_rate_constant_errors():
    rs = rate_regression([(N, 0.3, 0.0) for N in (16, 64, 256)])
    assert rs.slope == pytest.approx(0.0, abs=1e-12)


def test_rate_drops_noise_points():
    pts = [(16, 1.0, 0.1), (64, 0.5, 0.1), (256, 0.25, 0.1), (1024, 0.1, 0.2)]
    rs = rate_regression(pts)
    assert len(rs.dropped) == 1
    with pytest.raises(ValueError):
        rate_regression(pts[:2])


# ---- value convergence ------------------------------------------------------------

def test_value_convergence_equal_payoffs_zero_differences():
    pair = put_payoff(1.0)
    eq = PayoffPair(pair.lower, pair.lower, 2.0, "eq", pair.sufficient)
    tab = value_convergence(model_preset("gbm-1d"), RAD, eq, [8, 16, 32])
    assert tab.differences == [0.0, 0.0]
    assert all(v == 0.0 for v in tab.values)


def test_value_convergence_deterministic_stabilises():
    def f(t, p):
        return np.full(p.shape[0], 1.0 - abs(t - 0.5))

    pair = PayoffPair(f, f, 1.0, "tent", lambda p: np.zeros((p.shape[0], 0)))
    tab = value_convergence(model_preset("zero-1d"), RAD, pair, [2, 4, 8])
    # F = G so the value is F_0; the kink at 1/2 is on every grid
    assert tab.differences == [0.0, 0.0]


def test_csv_header_versioned():
    text = rows_to_csv("x", [dict(N=1, estimate=0.5, compliant=True)])
    first, header = text.splitlines()[:2]
    assert first == "# gamechain-csv v1 study=x columns=N,estimate,compliant"
    assert header == "N,estimate,compliant"
    assert text.splitlines()[2] == "1,0.5,true"
