"""Monte Carlo and exact measurements of the quantities the error bounds control.

Every compliance check compares ``estimate - 2 * std_error`` with an exact
bound; the slack sits on the Monte Carlo side only.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import mpmath as mp
import numpy as np
from scipy.stats import qmc

from .bounds import TheoreticalBounds
from .dynkin import backward_value, build_tree
from .model import DiffusionModel, InnovationLaw, PayoffPair
from .scheme import (_gather, _split, block_partition, coarse_states, coupled_sup_errors,
                     simulate_batch)

CSV_VERSION = 1


class UnsupportedLawError(ValueError):
    pass


@dataclass
class DiagnosticResult:
    study: str
    inputs: dict
    estimate: float
    std_error: float
    bound: Optional[float] = None
    log_bound: Optional[float] = None
    compliant: Optional[bool] = None
    flags: list = field(default_factory=list)

    def row(self) -> dict:
        out = dict(self.inputs)
        out.update(estimate=self.estimate, std_error=self.std_error, bound=self.bound,
                   log_bound=self.log_bound, compliant=self.compliant, status="ok")
        return out


def _mean_se(samples: np.ndarray):
    R = len(samples)
    mean = math.fsum(samples.tolist()) / R
    if R < 2:
        return mean, math.inf
    se = math.sqrt(math.fsum(((samples - mean) ** 2).tolist()) / (R - 1) / R)
    return mean, se


def _effective_L(model: DiffusionModel, law: Optional[InnovationLaw]):
    """max(model L, |xi| bound); gaussian innovations contribute nothing finite."""
    L = float(model.lip_bound)
    if law is not None and law.is_finite:
        L = max(L, float(law.norm_bound))
    return L


def _comply(estimate, se, log_bound):
    lower = estimate - 2 * se
    if lower <= 0:
        return True
    return math.log(lower) <= log_bound


# --------------------------------------------------------------------------- #
# Strong error against a coupled reference
# --------------------------------------------------------------------------- #

def strong_error(model: DiffusionModel, N: int, refine: Optional[int] = None, reps: int = 200,
                 seed: int = 0, law: Optional[InnovationLaw] = None,
                 jobs: int = 1) -> DiagnosticResult:
    """Estimate E sup_t |X_N(t) - Xi(t)|^2 with Gaussian-coupled pairs.

    Xi is a fine Euler reference on M = refine points (default 64 N); the
    sup is taken over the fine grid, using the chain's left limits as well,
    which equals the sup against the reference interpolated linearly.
    """
    if law is not None and law.is_finite:
        raise UnsupportedLawError("strong_error needs gaussian innovations: no exact coupling "
                                  f"is available for {law.name}")
    if reps < 30:
        raise ValueError("reps must be >= 30")
    M = 64 * N if refine is None else int(refine)
    errs = coupled_sup_errors(model, N, M, reps, seed, jobs)
    mean, se = _mean_se(errs)
    return DiagnosticResult(
        "strong-error", dict(N=N, refine=M, reps=reps, seed=seed), mean, se,
        flags=["gaussian innovations (diagnostic-only law)",
               "sup approximated on the fine grid",
               "no finite-N bound: the L2 estimate holds only for N >= N0"])


# --------------------------------------------------------------------------- #
# Coarse-process error
# --------------------------------------------------------------------------- #

def coarse_error(model: DiffusionModel, law: InnovationLaw, N: int, reps: int = 1000,
                 seed: int = 0, jobs: int = 1) -> DiagnosticResult:
    """Estimate E sup_t |X_N(t) - coarse X_N(t)|^2 against 136 L^8 N^{-1/2}."""
    part = block_partition(N)

    def work(b):
        states, xi, _ = simulate_batch(model, law, N, b[1] - b[0], seed, start=b[0])
        hat = coarse_states(model, states, xi, part)
        return np.max(np.sum((states - hat) ** 2, axis=-1), axis=-1)

    errs = _gather(work, _split(reps, jobs), jobs)
    mean, se = _mean_se(errs)
    L = _effective_L(model, law)
    tb = TheoreticalBounds(L, model.dim)
    bound = tb.coarse_bound(N)
    flags = [] if law.is_finite else ["gaussian innovations: |xi| <= L fails"]
    return DiagnosticResult("coarse-error", dict(N=N, q=part.q, reps=reps, seed=seed, L=L),
                            mean, se, bound, math.log(bound), mean - 2 * se <= bound, flags)


# --------------------------------------------------------------------------- #
# Characteristic functions
# --------------------------------------------------------------------------- #

def chain_cf(sigma_at_x, law: InnovationLaw, n: int, w) -> np.ndarray:
    """E exp(i <w, n^{-1/2} sigma sum_{l<=n} xi(l)>) for w shaped (k, d).

    Finite laws: the atom characteristic function at u = n^{-1/2} sigma^T w,
    convolved n times by repeated multiplication.  Gaussian: exact.
    """
    s = np.atleast_2d(np.asarray(sigma_at_x, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    u = (w @ s) / math.sqrt(n)                    # rows are sigma^T w / sqrt(n)
    if not law.is_finite:
        return np.exp(-0.5 * n * np.sum(u * u, axis=1)).astype(complex)
    phi = np.exp(1j * (u @ law.atoms.T)) @ law.probs
    f = np.ones(len(w), dtype=complex)
    for _ in range(n):
        f = f * phi
    return f


def gaussian_cf(sigma_at_x, w) -> np.ndarray:
    """exp(-<A w, w>/2) with A = sigma sigma^T."""
    s = np.atleast_2d(np.asarray(sigma_at_x, dtype=float))
    v = np.atleast_2d(np.asarray(w, dtype=float)) @ s
    return np.exp(-0.5 * np.sum(v * v, axis=1))


def cf_deviation(sigma_at_x, law: InnovationLaw, n: int, w) -> np.ndarray:
    return np.abs(chain_cf(sigma_at_x, law, n, w) - gaussian_cf(sigma_at_x, w))


def _ball_points(d, radius, count, seed):
    sob = qmc.Sobol(d, scramble=True, seed=np.random.default_rng(seed))
    m = max(1, int(math.ceil(math.log2(max(2, count)))))
    pts = radius * (2 * sob.random_base2(m) - 1)
    if d > 1:
        pts = pts[np.linalg.norm(pts, axis=1) <= radius]
    eye = np.eye(d) * radius
    return np.concatenate([np.zeros((1, d)), eye, -eye, pts])


def cf_distance(sigma_at_x, law: InnovationLaw, n: int, w_samples: int = 256, seed: int = 0,
                lip_bound: Optional[float] = None) -> DiagnosticResult:
    """Worst sampled |f_n(x, w) - exp(-<A(x)w, w>/2)| over |w| <= n^{1/12}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    s = np.atleast_2d(np.asarray(sigma_at_x, dtype=float))
    d = s.shape[0]
    if lip_bound is None:
        lip_bound = max(1.0, float(np.linalg.norm(s)),
                        float(law.norm_bound) if law.is_finite else 1.0)
    tb = TheoreticalBounds(lip_bound, d)
    r = tb.cf_radius(n)
    w = _ball_points(d, r, w_samples, seed)
    dev = cf_deviation(s, law, n, w)
    i = int(np.argmax(dev))
    bound = tb.cf_bound(n)
    res = DiagnosticResult("cf", dict(n=n, radius=r, points=len(w), L=lip_bound),
                           float(dev[i]), 0.0, bound, math.log(bound), float(dev[i]) <= bound)
    res.inputs["argmax_w"] = float(np.linalg.norm(w[i]))
    return res


# --------------------------------------------------------------------------- #
# Exponential moments
# --------------------------------------------------------------------------- #

def exp_moment(model: DiffusionModel, law: InnovationLaw, N: int, M: float = 1.0,
               reps: int = 10000, delta: float = 0.1, seed: int = 0,
               jobs: int = 1) -> DiagnosticResult:
    """Estimate E exp(M max_n |X_N(n/N)|) against D^X_M e^{M|x0|} N^delta."""
    if M <= 0 or delta <= 0:
        raise ValueError("M and delta must be positive")

    def work(b):
        states, _, _ = simulate_batch(model, law, N, b[1] - b[0], seed, start=b[0])
        return np.exp(M * np.linalg.norm(states, axis=-1).max(axis=-1))

    vals = _gather(work, _split(reps, jobs), jobs)
    mean, se = _mean_se(vals)
    L = _effective_L(model, law)
    tb = TheoreticalBounds(L, model.dim)
    x0n = float(np.linalg.norm(model.x0))
    logb = tb.log_exp_moment_bound(M, x0n, N, delta)
    bound = tb.exp_moment_bound(M, x0n, N, delta)
    flags = [] if math.isfinite(bound) else ["bound overflows: compare log_bound"]
    return DiagnosticResult("exp-moment", dict(N=N, M=M, delta=delta, reps=reps, seed=seed, L=L),
                            mean, se, bound, float(logb), _comply(mean, se, float(logb)), flags)


# --------------------------------------------------------------------------- #
# Rates and convergence tables
# --------------------------------------------------------------------------- #

@dataclass
class RateStudy:
    Ns: list
    errors: list
    std_errors: list
    slope: float
    intercept: float
    r2: float
    dropped: list = field(default_factory=list)

    def row(self) -> dict:
        return dict(points=len(self.Ns), slope=self.slope, intercept=self.intercept, r2=self.r2,
                    dropped=len(self.dropped))


def rate_regression(points) -> RateStudy:
    """OLS of log(error) on log(N).

    Points whose error is within two standard errors of zero carry no rate
    information and are dropped; at least three must remain.
    """
    kept, dropped = [], []
    for N, err, se in points:
        if err <= 0 or err <= 2 * se:
            dropped.append((N, err, se))
        else:
            kept.append((N, err, se))
    if len(kept) < 3:
        raise ValueError(f"need >= 3 usable points, have {len(kept)} (dropped {len(dropped)})")
    x = np.log([p[0] for p in kept])
    y = np.log([p[1] for p in kept])
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, intercept])
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    tiny = 1e-24 * float(y @ y) + 1e-300
    if ss_tot <= tiny:   # flat data: R^2 is 1 iff the fit is exact up to rounding
        r2 = 1.0 if ss_res <= tiny else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return RateStudy([p[0] for p in kept], [p[1] for p in kept], [p[2] for p in kept],
                     float(slope), float(intercept), r2, dropped)


@dataclass
class ConvergenceTable:
    Ns: list
    values: list
    differences: list    # |V_{N_{i+1}} - V_{N_i}|

    @property
    def nonincreasing(self) -> bool:
        return all(b <= a for a, b in zip(self.differences, self.differences[1:]))

    def rows(self) -> list:
        out = []
        for i, (N, v) in enumerate(zip(self.Ns, self.values)):
            out.append(dict(N=N, value=v,
                            difference=self.differences[i - 1] if i else None, status="ok"))
        return out


def value_convergence(model: DiffusionModel, law: InnovationLaw, payoffs: PayoffPair, N_list,
                      node_cap: int = 10 ** 6) -> ConvergenceTable:
    """V_N along N_list and successive differences.

    Trees are recombined whenever the payoff declares a sufficient statistic.
    """
    Ns = list(N_list)
    values = []
    for N in Ns:
        tree = build_tree(model, law, N, node_cap, recombine=payoffs.sufficient is not None,
                          payoffs=payoffs)
        values.append(backward_value(tree, payoffs).value)
    diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    return ConvergenceTable(Ns, values, diffs)


# --------------------------------------------------------------------------- #
# Output
# --------------------------------------------------------------------------- #

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, mp.mpf):
        return mp.nstr(v, 17)
    return str(v)


def rows_to_csv(study: str, rows: list, columns: Optional[list] = None) -> str:
    """CSV text with a versioned header comment naming the columns."""
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    buf = io.StringIO()
    buf.write(f"# gamechain-csv v{CSV_VERSION} study={study} columns={','.join(columns)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()
