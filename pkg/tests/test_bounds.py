import math

import pytest
from scipy.optimize import minimize_scalar

from gamechain.bounds import TheoreticalBounds

TB = TheoreticalBounds(1.0, 1)


def _sup_factor_oracle(d):
    # maximise over u = log q; log((e^u + 1)^4 - 1) written to avoid overflow
    def neg(u):
        inner = 4 * u + 4 * math.log1p(math.exp(-u)) + math.log1p(-math.exp(-4 * u) / (1 + math.exp(-u)) ** 4)
        return -(-u / (480 * d) + 0.5 * math.log(inner))
    r = minimize_scalar(neg, bounds=(1.0, 5000.0 * d), method="bounded",
                        options=dict(xatol=1e-10))
    return math.exp(-r.fun)


def test_cf_constants():
    assert TB.C1 == 1.5
    assert TB.cf_bound(16) == pytest.approx(1.5 * 16 ** (-1 / 6), rel=1e-15)
    assert TB.cf_radius(4096) == pytest.approx(2.0, rel=1e-15)


def test_coarse_constant():
    assert TB.coarse_bound(4096) == pytest.approx(136 / 64, rel=1e-15)
    assert TheoreticalBounds(2.0, 1).coarse_bound(4096) == pytest.approx(544.0, rel=1e-15)


def test_exp_moment_constants():
    assert TB.DX(1.0) == pytest.approx(2 * math.exp(0.5 + 1 + math.e / 6), rel=1e-12)
    assert TB.DXi(1.0) == pytest.approx(2 * math.exp(1.5), rel=1e-12)
    b = TB.exp_moment_bound(1.0, 0.0, 256, 0.1)
    assert b == pytest.approx(2 * math.exp(0.5 + 1 + math.e / 6) * 256 ** 0.1, rel=1e-12)


def test_DX_delta():
    def log_dx(M):
        return math.log(2) + 0.5 + 1 + M ** 3 * math.exp(M) / 6

    half = 0.5 * (log_dx(20.0) + log_dx(2.0))
    want = half + math.log1p(math.exp(-half))
    assert float(TB.log_DX_delta(1.0, 0.1)) == pytest.approx(want, rel=1e-12)


def test_overflowing_constants_stay_in_log_space():
    big = TheoreticalBounds(3.0, 2)
    assert big.DX(1.0) == math.inf
    assert math.isfinite(float(big.log_DX(1.0)))


def test_N0_exact_and_size():
    assert TB.N0 == (10 ** 192 + 1) ** 4
    assert TB.log10_N0 == pytest.approx(768.0, abs=1e-12)


def test_strong_constants():
    f = _sup_factor_oracle(1)
    assert TB.C2_sup_factor == pytest.approx(f, rel=1e-12)
    assert f == pytest.approx(math.sqrt(960) * math.exp(-0.5), rel=1e-6)
    c2 = f * (1 + 4 * 2 + 2) * (1 + math.sqrt(2 * math.sqrt(1.5)) + 2)
    assert TB.C2 == pytest.approx(c2, rel=1e-12)
    assert TB.C3 == pytest.approx(408 + 6 * c2 + 96, rel=1e-12)
    assert TB.C4 == 20.0
    assert TB.C0 == pytest.approx((408 + 6 * c2 + 96) * math.exp(20) + 4 + 40, rel=1e-12)


def test_exponents():
    assert str(TB.strong_exponent) == "1/50"
    assert TB.value_exponent(0.1) == pytest.approx(0.09)


def test_summary_keys():
    s = TB.summary()
    assert s["log10_N0"] == pytest.approx(768.0)
    assert s["C4"] == 20.0
