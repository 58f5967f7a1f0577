"""Diffusion coefficients, innovation laws, payoff functionals and their checks.

Coefficient functions are vectorised: ``sigma`` maps states shaped (..., d)
to matrices (..., d, d) and ``drift`` maps (..., d) to (..., d).

Payoff functionals take ``(t, paths)`` where ``paths`` has shape
(k, n+1, d) and holds the grid states X(0), X(1/N), ..., X(n/N) with
n/N = t.  Because the chain is piecewise constant between grid times these
grid states determine the whole path prefix on [0, t].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from . import rng as _rng

Matrixfn = Callable[[np.ndarray], np.ndarray]
Functional = Callable[[float, np.ndarray], np.ndarray]

EXACT_TOL = 1e-12


class ShapeError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------- #
# Diffusion model
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class DiffusionModel:
    """dX = sigma(X) dW + drift(X) dt with a joint bound/Lipschitz constant."""

    dim: int
    sigma: Matrixfn
    drift: Matrixfn
    lip_bound: float
    x0: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        x0 = _frozen(np.atleast_1d(self.x0))
        if x0.shape != (self.dim,):
            raise ShapeError(f"x0 has shape {x0.shape}, expected ({self.dim},)")
        object.__setattr__(self, "x0", x0)

    def sigma_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ShapeError(f"state shape {x.shape} does not end in {self.dim}")
        s = np.asarray(self.sigma(x), dtype=float)
        if s.shape != x.shape[:-1] + (self.dim, self.dim):
            raise ShapeError(f"sigma returned shape {s.shape}, expected "
                             f"{x.shape[:-1] + (self.dim, self.dim)}")
        return s

    def drift_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ShapeError(f"state shape {x.shape} does not end in {self.dim}")
        b = np.asarray(self.drift(x), dtype=float)
        if b.shape != x.shape:
            raise ShapeError(f"drift returned shape {b.shape}, expected {x.shape}")
        return b

    def diffusion_matrix(self, x) -> np.ndarray:
        """A(x) = sigma(x) sigma(x)^T."""
        s = self.sigma_at(x)
        return s @ np.swapaxes(s, -1, -2)


def constant_sigma(matrix) -> Matrixfn:
    m = _frozen(np.atleast_2d(matrix))

    def sigma(x):
        x = np.asarray(x)
        return np.broadcast_to(m, x.shape[:-1] + m.shape).copy()

    return sigma


def constant_drift(vector) -> Matrixfn:
    v = _frozen(np.atleast_1d(vector))

    def drift(x):
        x = np.asarray(x)
        return np.broadcast_to(v, x.shape).copy()

    return drift


def martingale_drift(sigma: Matrixfn, dim: int) -> Matrixfn:
    """Drift making exp(X^(i)) local martingales: b_i = -1/2 sum_j sigma_ij^2."""

    def drift(x):
        x = np.asarray(x, dtype=float)
        s = np.asarray(sigma(x), dtype=float)
        if s.shape != x.shape[:-1] + (dim, dim):
            raise ShapeError(f"sigma returned shape {s.shape}")
        return -0.5 * np.sum(s * s, axis=-1)

    return drift


def martingale_drift_bound(lip_bound: float, dim: int) -> float:
    """Constant for which martingale_drift satisfies the bound/Lipschitz pair.

    |b| <= L^2/2 and the Lipschitz constant of b is at most L^2.
    """
    L = float(lip_bound)
    return max(L, L * L, 0.5 * dim * L * L)


# --------------------------------------------------------------------------- #
# Innovation laws
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class InnovationLaw:
    dim: int
    kind: str  # "finite" or "gaussian"
    atoms: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None
    norm_bound: float = math.inf
    name: str = "custom"

    def __post_init__(self):
        if self.kind not in ("finite", "gaussian"):
            raise ValueError(f"unknown innovation kind {self.kind!r}")
        if self.kind == "finite":
            atoms = np.array(self.atoms, dtype=float)
            if atoms.ndim == 1:
                atoms = atoms[:, None]
            probs = np.array(self.probs, dtype=float)
            if atoms.ndim != 2 or atoms.shape[1] != self.dim:
                raise ShapeError(f"atoms have shape {atoms.shape}, expected (m, {self.dim})")
            if probs.shape != (atoms.shape[0],):
                raise ShapeError("one probability per atom is required")
            if np.any(probs < 0):
                raise ValueError("negative atom probability")
            if np.any(probs == 0):
                raise ValueError("atom probabilities must be strictly positive")
            atoms.setflags(write=False)
            probs.setflags(write=False)
            object.__setattr__(self, "atoms", atoms)
            object.__setattr__(self, "probs", probs)
            if not math.isfinite(self.norm_bound):
                nb = float(np.max(np.linalg.norm(atoms, axis=1)))
                object.__setattr__(self, "norm_bound", nb)

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def n_atoms(self) -> int:
        if not self.is_finite:
            raise ValueError("gaussian law has no atoms")
        return self.atoms.shape[0]

    def draw(self, gen: np.random.Generator, n: int):
        """Draw n innovations; returns (xi (n, d), atom indices or None)."""
        if self.is_finite:
            idx = gen.choice(self.n_atoms, size=n, p=self.probs)
            return self.atoms[idx], idx
        return gen.standard_normal((n, self.dim)), None

    @classmethod
    def rademacher(cls, dim: int = 1) -> "InnovationLaw":
        """Product Rademacher: each coordinate independently +-1."""
        grid = np.array(np.meshgrid(*([[1.0, -1.0]] * dim), indexing="ij"))
        atoms = grid.reshape(dim, -1).T
        probs = np.full(atoms.shape[0], 0.5 ** dim)
        return cls(dim, "finite", atoms, probs, math.sqrt(dim), f"rademacher-{dim}d")

    @classmethod
    def trinomial(cls) -> "InnovationLaw":
        r = math.sqrt(3.0)
        return cls(1, "finite", [[r], [0.0], [-r]], [1 / 6, 2 / 3, 1 / 6], r, "trinomial-1d")

    @classmethod
    def gaussian(cls, dim: int = 1) -> "InnovationLaw":
        return cls(dim, "gaussian", name=f"gaussian-{dim}d")


# --------------------------------------------------------------------------- #
# Payoffs
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class PayoffPair:
    """Lower (exercise) functional F and upper (cancellation) functional G.

    ``sufficient`` maps paths (k, n+1, d) to a (k, s) statistic which,
    together with the current state, determines both functionals at every
    later time; trees may merge nodes whose (state, statistic) agree.  None
    means the payoff is fully path dependent.
    """

    lower: Functional
    upper: Functional
    reg_const: float
    name: str = "custom"
    sufficient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    params: dict = field(default_factory=dict)

    def evaluate(self, t: float, paths: np.ndarray):
        paths = np.asarray(paths, dtype=float)
        f = np.asarray(self.lower(t, paths), dtype=float).reshape(paths.shape[0])
        g = np.asarray(self.upper(t, paths), dtype=float).reshape(paths.shape[0])
        return f, g


def _penalty_fn(penalty: float, shape: str):
    if shape == "constant":
        return lambda t: penalty if t < 1.0 else 0.0
    if shape == "linear":
        return lambda t: penalty * (1.0 - t) if t < 1.0 else 0.0
    raise ValueError(f"unknown penalty shape {shape!r}")


def _state_stat(paths):
    return np.zeros((paths.shape[0], 0))


def _with_penalty(lower, penalty, shape):
    pen = _penalty_fn(float(penalty), shape)

    def upper(t, paths):
        return lower(t, paths) + pen(t)

    return upper


def put_payoff(strike: float = 1.0, penalty: float = 0.0, penalty_shape: str = "constant",
               asset: int = 0) -> PayoffPair:
    """Israeli put on exp(X^(asset)): F = (strike - e^x)^+, G = F + penalty."""

    def lower(t, paths):
        return np.maximum(strike - np.exp(paths[:, -1, asset]), 0.0)

    return PayoffPair(lower, _with_penalty(lower, penalty, penalty_shape),
                      max(2.0, float(penalty)), "put", _state_stat,
                      dict(strike=strike, penalty=penalty, penalty_shape=penalty_shape,
                           asset=asset))


def call_payoff(strike: float = 1.0, penalty: float = 0.0, penalty_shape: str = "constant",
                asset: int = 0) -> PayoffPair:
    def lower(t, paths):
        return np.maximum(np.exp(paths[:, -1, asset]) - strike, 0.0)

    return PayoffPair(lower, _with_penalty(lower, penalty, penalty_shape),
                      max(2.0, float(penalty)), "call", _state_stat,
                      dict(strike=strike, penalty=penalty, penalty_shape=penalty_shape,
                           asset=asset))


def lookback_payoff(strike: float = 1.0, penalty: float = 0.0,
                    penalty_shape: str = "constant", asset: int = 0) -> PayoffPair:
    """Call on the running maximum of exp(X^(asset))."""

    def lower(t, paths):
        return np.maximum(np.exp(paths[:, :, asset].max(axis=1)) - strike, 0.0)

    def stat(paths):
        return paths[:, :, asset].max(axis=1)[:, None]

    return PayoffPair(lower, _with_penalty(lower, penalty, penalty_shape),
                      max(2.0, float(penalty)), "lookback", stat,
                      dict(strike=strike, penalty=penalty, penalty_shape=penalty_shape,
                           asset=asset))


def average_payoff(strike: float = 1.0, penalty: float = 0.0,
                   penalty_shape: str = "constant", asset: int = 0) -> PayoffPair:
    """Put on the forward-completed average of exp(X^(asset)).

    A_t = int_0^t e^{x_u} du + (1 - t) e^{x_t}, so A_1 is the time average
    over [0, 1] and A_t moves continuously with t.
    """

    def lower(t, paths):
        s = np.exp(paths[:, :, asset])
        n = paths.shape[1] - 1
        integral = s[:, :-1].sum(axis=1) * (t / n) if n > 0 else np.zeros(len(s))
        avg = integral + (1.0 - t) * s[:, -1]
        return np.maximum(strike - avg, 0.0)

    return PayoffPair(lower, _with_penalty(lower, penalty, penalty_shape),
                      max(2.0, float(penalty)), "average", None,
                      dict(strike=strike, penalty=penalty, penalty_shape=penalty_shape,
                           asset=asset))


def constant_payoff(value: float) -> PayoffPair:
    def f(t, paths):
        return np.full(paths.shape[0], float(value))

    return PayoffPair(f, f, 1.0, "constant", lambda p: np.zeros((p.shape[0], 1)),
                      dict(value=value))


PAYOFF_CATALOG = {
    "put": put_payoff,
    "call": call_payoff,
    "lookback": lookback_payoff,
    "average": average_payoff,
    "constant": constant_payoff,
}


# --------------------------------------------------------------------------- #
# Presets
# --------------------------------------------------------------------------- #

def _gbm_1d():
    sig = constant_sigma([[0.2]])
    return DiffusionModel(1, sig, martingale_drift(sig, 1), 1.0, [0.0], "gbm-1d")


def _gbm_2d():
    sig = constant_sigma([[0.2, 0.0], [0.1, 0.3]])
    return DiffusionModel(2, sig, martingale_drift(sig, 2), 1.0, [0.0, 0.0], "gbm-2d")


def _tanh_1d():
    def sig(x):
        return (0.4 + 0.2 * np.tanh(x))[..., None]

    return DiffusionModel(1, sig, constant_drift([0.0]), 1.0, [0.0], "tanh-1d")


def _sine_1d():
    def sig(x):
        return (1.0 + 0.5 * np.sin(x))[..., None]

    def drift(x):
        return 0.25 * np.cos(x)

    return DiffusionModel(1, sig, drift, 2.0, [0.0], "sine-1d")


def _zero_1d():
    return DiffusionModel(1, constant_sigma([[0.0]]), constant_drift([0.0]), 1.0, [0.0], "zero-1d")


def _ode_1d():
    return DiffusionModel(1, constant_sigma([[0.0]]), constant_drift([1.0]), 1.0, [0.0], "ode-1d")


MODEL_PRESETS = {
    "gbm-1d": _gbm_1d,
    "gbm-2d": _gbm_2d,
    "tanh-1d": _tanh_1d,
    "sine-1d": _sine_1d,
    "zero-1d": _zero_1d,
    "ode-1d": _ode_1d,
}

LAW_PRESETS = {
    "rademacher-1d": lambda: InnovationLaw.rademacher(1),
    "rademacher-2d": lambda: InnovationLaw.rademacher(2),
    "trinomial-1d": InnovationLaw.trinomial,
    "gaussian-1d": lambda: InnovationLaw.gaussian(1),
    "gaussian-2d": lambda: InnovationLaw.gaussian(2),
}


def model_preset(name: str) -> DiffusionModel:
    try:
        return MODEL_PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown model preset {name!r}; known: {sorted(MODEL_PRESETS)}") from None


def law_preset(name: str) -> InnovationLaw:
    try:
        return LAW_PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown law preset {name!r}; known: {sorted(LAW_PRESETS)}") from None


# --------------------------------------------------------------------------- #
# Validation
# --------------------------------------------------------------------------- #

def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


@dataclass
class Check:
    name: str
    passed: bool
    margin: Optional[float] = None
    witness: Optional[dict] = None
    note: str = ""


@dataclass
class ValidationReport:
    subject: str
    checks: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def first_failure(self) -> Optional[Check]:
        return next((c for c in self.checks if not c.passed), None)

    def to_dict(self) -> dict:
        return _jsonable({
            "subject": self.subject,
            "passed": self.passed,
            "checks": [c.__dict__ for c in self.checks],
            "flags": self.flags,
            "info": self.info,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _probe_points(dim, count, radius, gen):
    pts = gen.uniform(-radius, radius, size=(count, dim))
    if dim <= 4:
        corners = np.array(np.meshgrid(*([[radius, -radius]] * dim), indexing="ij"))
        extra = corners.reshape(dim, -1).T
    else:
        eye = np.eye(dim) * radius
        extra = np.concatenate([eye, -eye])
    return np.concatenate([np.zeros((1, dim)), extra, pts])


def validate_model(model: DiffusionModel, probe_count: int = 1000, probe_radius: float = 10.0,
                   seed: int = 0) -> ValidationReport:
    """Probe the bound and Lipschitz inequalities of the coefficients.

    Margins are ``observed - allowed``; a check passes iff its worst margin
    is <= 0.  Lipschitz pairs mix far pairs (random partners) with near pairs
    (perturbations of size 1e-3 * radius) so local slopes are seen.
    """
    if probe_count < 1 or probe_radius <= 0:
        raise ValueError("probe_count >= 1 and probe_radius > 0 are required")
    gen = _rng.generator(seed, _rng.PROBE)
    d, L = model.dim, float(model.lip_bound)
    xs = _probe_points(d, probe_count, probe_radius, gen)
    partner = gen.permutation(len(xs))
    dirs = gen.standard_normal(xs.shape)
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
    near = xs + 1e-3 * probe_radius * dirs
    ys = np.concatenate([xs[partner], near])
    xx = np.concatenate([xs, xs])

    sig = model.sigma_at(xs)
    drf = model.drift_at(xs)
    sig_norm = np.linalg.norm(sig.reshape(len(xs), -1), axis=1)
    drf_norm = np.linalg.norm(drf, axis=1)
    dist = np.linalg.norm(xx - ys, axis=1)
    dsig = np.linalg.norm((model.sigma_at(xx) - model.sigma_at(ys)).reshape(len(xx), -1), axis=1)
    ddrf = np.linalg.norm(model.drift_at(xx) - model.drift_at(ys), axis=1)

    rep = ValidationReport(model.name, info=dict(
        probe_count=probe_count, probe_radius=probe_radius, seed=seed,
        n_points=len(xs), n_pairs=len(xx), lip_bound=L, norm="frobenius"))

    def bound_check(name, values):
        i = int(np.argmax(values))
        margin = float(values[i] - L)
        rep.checks.append(Check(name, margin <= 0, margin, {"x": xs[i]}))

    def lip_check(name, diffs):
        excess = diffs - L * dist
        i = int(np.argmax(excess))
        margin = float(excess[i])
        rep.checks.append(Check(name, margin <= 0, margin, {"x": xx[i], "y": ys[i]}))

    bound_check("sigma_bound", sig_norm)
    bound_check("drift_bound", drf_norm)
    lip_check("sigma_lipschitz", dsig)
    lip_check("drift_lipschitz", ddrf)
    rep.checks.append(Check("lip_bound_at_least_one", L >= 1.0, 1.0 - L))
    return rep


def _moments_exact(atoms, probs):
    fa = [[Fraction(float(v)) for v in row] for row in atoms]
    fp = [Fraction(float(p)) for p in probs]
    d = len(fa[0])
    total = sum(fp)
    mean = [sum(p * a[i] for p, a in zip(fp, fa)) for i in range(d)]
    cov = [[sum(p * a[i] * a[j] for p, a in zip(fp, fa)) for j in range(d)] for i in range(d)]
    return total, mean, cov


def validate_innovations(law: InnovationLaw) -> ValidationReport:
    """Check mean 0, identity covariance, unit mass and the norm bound.

    Finite-support moments are summed in exact rational arithmetic over the
    float atoms and compared with tolerance 1e-12.
    """
    rep = ValidationReport(law.name, info=dict(kind=law.kind, dim=law.dim))
    if not law.is_finite:
        rep.checks.append(Check("mean_zero", True, 0.0, note="by construction"))
        rep.checks.append(Check("covariance_identity", True, 0.0, note="by construction"))
        rep.checks.append(Check("norm_bound", False, math.inf,
                                note="gaussian innovations are unbounded"))
        rep.flags.append("diagnostic-only law: |xi| <= L fails")
        return rep

    total, mean, cov = _moments_exact(law.atoms, law.probs)
    d = law.dim
    sum_err = float(abs(total - 1))
    rep.checks.append(Check("probability_sum", sum_err <= EXACT_TOL, sum_err - EXACT_TOL,
                            {"sum": float(total)}))
    mean_err = max(float(abs(m)) for m in mean)
    rep.checks.append(Check("mean_zero", mean_err <= EXACT_TOL, mean_err - EXACT_TOL,
                            {"mean": [float(m) for m in mean]}))
    cov_err = max(float(abs(cov[i][j] - (1 if i == j else 0))) for i in range(d) for j in range(d))
    rep.checks.append(Check("covariance_identity", cov_err <= EXACT_TOL, cov_err - EXACT_TOL,
                            {"cov": [[float(c) for c in r] for r in cov]}))
    norms = np.linalg.norm(law.atoms, axis=1)
    i = int(np.argmax(norms))
    nb_margin = float(norms[i] - law.norm_bound)
    rep.checks.append(Check("norm_bound", nb_margin <= EXACT_TOL, nb_margin,
                            {"atom": law.atoms[i], "bound": law.norm_bound}))
    rep.info.update(max_atom_norm=float(norms[i]), norm_bound=float(law.norm_bound),
                    mean=[float(m) for m in mean], cov=[[float(c) for c in r] for r in cov])
    return rep


def _stack_paths(path_samples):
    groups = {}
    for k, p in enumerate(path_samples):
        groups.setdefault(p.n_steps, []).append((k, np.asarray(p.states, dtype=float)))
    return groups


def validate_payoffs(pair: PayoffPair, path_samples, max_time_pairs: int = 4096) -> ValidationReport:
    """Check ordering, terminal equality and both regularity inequalities.

    Spatial regularity is probed on consecutive sample paths sharing a grid;
    temporal regularity on (s, t) grid pairs of each path (strided when the
    grid is long).  Witnesses name the first violating (t, path index).
    """
    if len(path_samples) < 1:
        raise ValueError("at least one sample path is required")
    K = float(pair.reg_const)
    rep = ValidationReport(pair.name, info=dict(reg_const=K, n_paths=len(path_samples)))
    order_w = term_w = None
    order_margin = term_margin = -math.inf
    space_margin = time_margin = -math.inf
    space_w = time_w = None

    for N, items in sorted(_stack_paths(path_samples).items()):
        ids = [k for k, _ in items]
        P = np.stack([s for _, s in items])           # (k, N+1, d)
        F = np.empty((len(ids), N + 1))
        G = np.empty_like(F)
        for n in range(N + 1):
            F[:, n], G[:, n] = pair.evaluate(n / N if N else 1.0, P[:, :n + 1])
        viol = F - G
        m = float(viol.max())
        if m > order_margin:
            order_margin = m
            if m > 0:
                k, n = np.argwhere(viol > 0)[0]
                order_w = {"t": n / N if N else 1.0, "path": ids[k]}
        tm = float(np.abs(F[:, N] - G[:, N]).max())
        if tm > term_margin:
            term_margin = tm
            if tm > EXACT_TOL:
                k = int(np.argmax(np.abs(F[:, N] - G[:, N])))
                term_w = {"t": 1.0, "path": ids[k]}

        norms = np.linalg.norm(P, axis=2)                   # (k, N+1)
        run_sup = np.maximum.accumulate(norms, axis=1)
        # spatial: pairs of consecutive paths on the same grid
        for a in range(len(ids) - 1):
            diff = np.linalg.norm(P[a] - P[a + 1], axis=1)
            d0t = np.maximum.accumulate(diff)
            lhs = np.abs(F[a] - F[a + 1]) + np.abs(G[a] - G[a + 1])
            rhs = K * (d0t + (d0t > 1)) * np.exp(K * (run_sup[a] + run_sup[a + 1]))
            ex = lhs - rhs
            n = int(np.argmax(ex))
            if ex[n] > space_margin:
                space_margin = float(ex[n])
                space_w = {"t": n / N if N else 1.0, "paths": [ids[a], ids[a + 1]]}
        # temporal: (s, t) pairs
        stride = max(1, int(math.ceil((N + 1) ** 2 / (2 * max_time_pairs))))
        for k in range(len(ids)):
            for s in range(0, N + 1, stride):
                osc = np.maximum.accumulate(np.linalg.norm(P[k, s:] - P[k, s], axis=1))
                dt = (np.arange(s, N + 1) - s) / N if N else np.zeros(1)
                lhs = np.abs(F[k, s:] - F[k, s]) + np.abs(G[k, s:] - G[k, s])
                rhs = K * (dt + osc) * np.exp(K * run_sup[k, s:])
                ex = lhs - rhs
                j = int(np.argmax(ex))
                if ex[j] > time_margin:
                    time_margin = float(ex[j])
                    time_w = {"s": s / N if N else 1.0, "t": (s + j) / N if N else 1.0,
                              "path": ids[k]}

    rep.checks.append(Check("upper_dominates_lower", order_margin <= 0, order_margin, order_w))
    rep.checks.append(Check("terminal_equality", term_margin <= EXACT_TOL, term_margin, term_w))
    if len(path_samples) > 1 and space_w is not None:
        rep.checks.append(Check("spatial_regularity", space_margin <= 0, space_margin, space_w))
    else:
        rep.flags.append("spatial regularity not probed: needs two paths on one grid")
    rep.checks.append(Check("temporal_regularity", time_margin <= 0, time_margin, time_w))
    return rep
