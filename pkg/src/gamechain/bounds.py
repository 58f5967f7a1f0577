"""Closed-form constants of the error bounds, in exact or log-space arithmetic.

Most constants are doubly exponential in (M, d, L), so everything that can
overflow is carried as a natural log through mpmath and only converted to a
float when finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp

mp.mp.dps = 50

STOP_EXPONENT = Fraction(1, 6)   # the exponent in the characteristic-function bound


def _to_float(x) -> float:
    try:
        v = float(x)
    except OverflowError:
        return math.inf
    return v


def _exp_or_inf(log_value) -> float:
    if log_value > 700:
        return math.inf
    return _to_float(mp.e ** log_value)


@dataclass(frozen=True)
class TheoreticalBounds:
    lip_bound: float
    dim: int

    # ---- characteristic functions -------------------------------------------------
    @property
    def cf_exponent(self) -> Fraction:
        return STOP_EXPONENT

    @property
    def C1(self) -> float:
        return 1.5 * self.lip_bound ** 6

    def cf_bound(self, n: int) -> float:
        """C1 n^{-1/6}, valid for |w| <= n^{1/12}."""
        return self.C1 * n ** (-float(STOP_EXPONENT))

    def cf_radius(self, n: int) -> float:
        return n ** (float(STOP_EXPONENT) / 2)

    # ---- block-frozen process ------------------------------------------------------
    @property
    def coarse_const(self) -> float:
        return 136.0 * self.lip_bound ** 8

    def coarse_bound(self, N: int) -> float:
        """136 L^8 N^{-1/2} for E sup |X_N - coarse X_N|^2."""
        return self.coarse_const / math.sqrt(N)

    # ---- exponential moments -------------------------------------------------------
    def log_DX(self, M: float):
        """log of 2d exp(d^4 L^4 / 2 + L + M^3 d^6 L^6 e^{M d^2 L^2} / 6)."""
        d, L, M = mp.mpf(self.dim), mp.mpf(self.lip_bound), mp.mpf(M)
        return (mp.log(2 * d) + d ** 4 * L ** 4 / 2 + L
                + M ** 3 * d ** 6 * L ** 6 * mp.e ** (M * d ** 2 * L ** 2) / 6)

    def DX(self, M: float) -> float:
        return _exp_or_inf(self.log_DX(M))

    def log_DX_delta(self, M: float, delta: float):
        """log of 1 + (D^X_{2M/delta} D^X_{2M})^{1/2}."""
        half = (self.log_DX(2 * mp.mpf(M) / mp.mpf(delta)) + self.log_DX(2 * mp.mpf(M))) / 2
        return half + mp.log1p(mp.e ** (-half))

    def DXi(self, M: float) -> float:
        """2 exp(L + M L^2 d^2 / 2)."""
        L, d = self.lip_bound, self.dim
        return 2.0 * math.exp(L + 0.5 * M * L * L * d * d)

    def log_exp_moment_bound(self, M: float, x0_norm: float, N: int, delta: float):
        """log of D^X_M e^{M|x0|} N^delta."""
        return self.log_DX(M) + mp.mpf(M) * x0_norm + mp.mpf(delta) * mp.log(N)

    def exp_moment_bound(self, M: float, x0_norm: float, N: int, delta: float) -> float:
        return _exp_or_inf(self.log_exp_moment_bound(M, x0_norm, N, delta))

    def log_coarse_value_budget(self, K: float, x0_norm: float, N: int, delta: float):
        """log of D^X_{K,delta} K e^{K|x|} N^{delta - 1/4} (1 + L + L^2)."""
        L = mp.mpf(self.lip_bound)
        return (self.log_DX_delta(K, delta) + mp.log(K) + K * mp.mpf(x0_norm)
                + (mp.mpf(delta) - mp.mpf(1) / 4) * mp.log(N) + mp.log(1 + L + L * L))

    # ---- strong approximation constants ---------------------------------------------
    @property
    def N0(self) -> int:
        """((10^8 d)^{24 d} + 1)^4, exact."""
        return ((10 ** 8 * self.dim) ** (24 * self.dim) + 1) ** 4

    @property
    def log10_N0(self) -> float:
        return _to_float(mp.log10(mp.mpf(self.N0)))

    @property
    def strong_exponent(self) -> Fraction:
        """Decay exponent 1/(50d) of [N^{1/4}] in the L2 bound."""
        return Fraction(1, 50 * self.dim)

    def value_exponent(self, delta: float) -> float:
        """Exponent delta - 1/(100d) of [N^{1/4}] in the game-value bound."""
        return delta - 1.0 / (100 * self.dim)

    @property
    def C2_sup_factor(self) -> float:
        """sup over N of [N^{1/4}]^{-1/(480d)} sqrt(log N).

        Maximised over q = [N^{1/4}] with N = (q+1)^4 - 1 the largest
        admissible N; the optimum sits at log q ~ 240 d so it is found on the
        continuous log q axis.
        """
        a = mp.mpf(1) / (480 * self.dim)

        def f(u):  # u = log q
            return -a * u + mp.log(mp.log((mp.e ** u + 1) ** 4 - 1)) / 2

        lo, hi = mp.mpf(0), mp.mpf(20) / a
        g = (mp.sqrt(5) - 1) / 2
        for _ in range(300):
            x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
            if f(x1) < f(x2):
                lo = x1
            else:
                hi = x2
        best = max(mp.e ** f((lo + hi) / 2), mp.sqrt(mp.log(15)))
        return _to_float(best)

    @property
    def C2(self) -> float:
        L, d = self.lip_bound, self.dim
        return (self.C2_sup_factor * (1 + 4 * L * L * (L * L + d) + 2 * L * L * d)
                * (1 + math.sqrt(2 * math.sqrt(self.C1)) + 2 * math.sqrt(L * math.sqrt(d))))

    @property
    def C3(self) -> float:
        return 408 * self.lip_bound ** 8 + 6 * self.C2 + 96

    @property
    def C4(self) -> float:
        return self.lip_bound ** 2 * (16 * self.dim + 4)

    @property
    def C0(self) -> float:
        L = self.lip_bound
        return self.C3 * math.exp(self.C4) + 2 * L * L * (L * L + 1) + 40 * L * L

    def coupling_error_rate(self, N: int) -> float:
        """Per-block coupling error bound for the quantile construction."""
        q = math.isqrt(math.isqrt(N))
        d, L = self.dim, self.lip_bound
        return (2 / (3 * d) * q ** (-1 / (24 * d)) * math.log(q)
                + 2 * math.sqrt(self.C1) * q ** (-1 / 24)
                + 4 * L * math.sqrt(d) * q ** (-1 / (24 * d)))

    def summary(self) -> dict:
        return dict(
            L=self.lip_bound, d=self.dim, cf_exponent=str(self.cf_exponent), C1=self.C1,
            coarse_const=self.coarse_const, C2=self.C2, C3=self.C3, C4=self.C4, C0=self.C0,
            log10_N0=self.log10_N0, strong_exponent=str(self.strong_exponent),
            DX_1=self.DX(1.0), DXi_1=self.DXi(1.0),
        )
