"""Dynkin-game values of the chain on scenario trees.

The tree is the filtration: every node is a history of innovation atoms and
the conditional expectation in the backward recursion is the exact
probability-weighted average over a node's children.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng as _rng
from .model import DiffusionModel, InnovationLaw, PayoffPair, ShapeError, _jsonable
from .scheme import BlockPartition, _advance, simulate_batch

REPORT_FORMAT = "gamechain-game-value"
REPORT_VERSION = 1
RECOMBINE_QUANTUM = 1e-9
_EVAL_CHUNK = 1 << 15


class InfeasibleError(RuntimeError):
    """The requested tree or enumeration exceeds its configured budget."""


class PayoffEvaluationError(RuntimeError):
    pass


# --------------------------------------------------------------------------- #
# Trees
# --------------------------------------------------------------------------- #

@dataclass
class ScenarioTree:
    N: int
    probs: np.ndarray
    atoms: np.ndarray
    states: list            # per level n: (k_n, d)
    parent: list            # per level n: (k_n,) index into level n-1 (-1 at root)
    atom: list              # per level n: (k_n,) atom taken into the node (-1 at root)
    children: list          # per level n < N: (k_n, m) index into level n+1
    recombined: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.probs)

    @property
    def dim(self) -> int:
        return self.states[0].shape[1]

    @property
    def level_sizes(self) -> list:
        return [len(s) for s in self.states]

    @property
    def node_count(self) -> int:
        return sum(self.level_sizes)

    def time(self, n: int) -> float:
        return n / self.N if self.N else 1.0

    def paths(self, n: int, idx=None) -> np.ndarray:
        """Grid-state path prefixes (k, n+1, d) of nodes ``idx`` at level n.

        For recombined trees this is the representative (first-built) history.
        """
        idx = np.arange(len(self.states[n])) if idx is None else np.asarray(idx)
        out = np.empty((len(idx), n + 1, self.dim))
        cur = idx
        for k in range(n, -1, -1):
            out[:, k] = self.states[k][cur]
            if k:
                cur = self.parent[k][cur]
        return out

    def address(self, n: int, i: int) -> str:
        """Innovation-index string of node i at level n ('' for the root)."""
        digits = []
        for k in range(n, 0, -1):
            digits.append(str(int(self.atom[k][i])))
            i = int(self.parent[k][i])
        sep = "" if self.m <= 10 else "."
        return sep.join(reversed(digits))

    def node_probabilities(self) -> list:
        """Probability of reaching each node (summed over merged histories)."""
        out = [np.ones(1)]
        for n in range(self.N):
            nxt = np.zeros(len(self.states[n + 1]))
            np.add.at(nxt, self.children[n].ravel(),
                      (out[n][:, None] * self.probs[None, :]).ravel())
            out.append(nxt)
        return out


def _full_tree_size(m: int, N: int) -> int:
    return N + 1 if m == 1 else (m ** (N + 1) - 1) // (m - 1)


def build_tree(model: DiffusionModel, law: InnovationLaw, N: int, node_cap: int = 10 ** 6,
               recombine: bool = False, payoffs: Optional[PayoffPair] = None) -> ScenarioTree:
    """Scenario tree of the chain for a finite-support law.

    With ``recombine`` nodes at one level merge when the current state and the
    payoff's declared sufficient statistic agree (after quantisation to
    RECOMBINE_QUANTUM).  The tree is never truncated: exceeding ``node_cap``
    raises InfeasibleError.
    """
    if not law.is_finite:
        raise ValueError("scenario trees need a finite-support innovation law")
    if law.dim != model.dim:
        raise ShapeError(f"law dim {law.dim} != model dim {model.dim}")
    if N < 0:
        raise ValueError("N must be >= 0")
    m = law.n_atoms
    if recombine and (payoffs is None or payoffs.sufficient is None):
        raise ValueError("recombination needs a payoff declaring a sufficient statistic")
    if not recombine and _full_tree_size(m, N) > node_cap:
        raise InfeasibleError(f"full tree has {_full_tree_size(m, N)} nodes > cap {node_cap}; "
                              f"required cap {_full_tree_size(m, N)}")

    states = [model.x0[None, :].copy()]
    parent = [np.array([-1])]
    atom = [np.array([-1])]
    children = []
    rep_paths = states[0][:, None, :] if recombine else None
    total = 1
    scale, inv_n = (1.0 / math.sqrt(N), 1.0 / N) if N else (0.0, 0.0)
    for n in range(N):
        x = states[n]
        k = len(x)
        sig, b = model.sigma_at(x), model.drift_at(x)
        xs = np.repeat(x, m, axis=0)
        xi = np.tile(law.atoms, (k, 1))
        nxt = _advance(xs, np.repeat(sig, m, axis=0), xi * scale, np.repeat(b, m, axis=0), inv_n)
        par = np.repeat(np.arange(k), m)
        at = np.tile(np.arange(m), k)
        if not recombine:
            states.append(nxt)
            parent.append(par)
            atom.append(at)
            children.append(np.arange(k * m).reshape(k, m))
            total += k * m
            continue
        cand_paths = np.concatenate([rep_paths[par], nxt[:, None, :]], axis=1)
        stat = np.asarray(payoffs.sufficient(cand_paths), dtype=float).reshape(len(nxt), -1)
        keys = np.round(np.concatenate([nxt, stat], axis=1) / RECOMBINE_QUANTUM)
        _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        # renumber in first-seen order so node numbering follows atom order
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        inverse = rank[np.asarray(inverse).ravel()]
        reps = first[order]
        total += len(reps)
        if total > node_cap:
            raise InfeasibleError(f"recombined tree exceeds node cap {node_cap} at level {n + 1}")
        states.append(nxt[reps])
        parent.append(par[reps])
        atom.append(at[reps])
        children.append(inverse.reshape(k, m))
        rep_paths = cand_paths[reps]
    meta = dict(model=model.name, law=law.name, N=N, recombined=recombine,
                payoff=payoffs.name if payoffs is not None else None)
    return ScenarioTree(N, np.array(law.probs), np.array(law.atoms), states, parent, atom,
                        children, recombine, meta)


def _level_payoffs(tree: ScenarioTree, payoffs: PayoffPair, n: int):
    k = len(tree.states[n])
    F = np.empty(k)
    G = np.empty(k)
    t = tree.time(n)
    for a in range(0, k, _EVAL_CHUNK):
        idx = np.arange(a, min(k, a + _EVAL_CHUNK))
        try:
            F[idx], G[idx] = payoffs.evaluate(t, tree.paths(n, idx))
        except Exception as exc:
            for i in idx:
                try:
                    payoffs.evaluate(t, tree.paths(n, [i]))
                except Exception:
                    raise PayoffEvaluationError(
                        f"payoff failed at level {n} node {tree.address(n, int(i))!r}: {exc}"
                    ) from exc
            raise PayoffEvaluationError(f"payoff failed at level {n}: {exc}") from exc
    return F, G


def payoff_levels(tree: ScenarioTree, payoffs: PayoffPair):
    """(F, G) arrays per level."""
    lv = [_level_payoffs(tree, payoffs, n) for n in range(tree.N + 1)]
    return [f for f, _ in lv], [g for _, g in lv]


def _expect(tree, n, v_next):
    return v_next[tree.children[n]] @ tree.probs


# --------------------------------------------------------------------------- #
# Backward recursion
# --------------------------------------------------------------------------- #

@dataclass
class GameValueReport:
    value: float
    values: list            # V_{Nn} per level
    lower: list             # F per level
    upper: list             # G per level
    continuation: list      # E[V_{N,n+1} | node] per level n < N
    metadata: dict = field(default_factory=dict)
    oracle: Optional[dict] = None

    @property
    def N(self) -> int:
        return len(self.values) - 1

    def min_stop_flags(self) -> list:
        """Nodes where the minimiser (canceller) may stop: V = G."""
        flags = [v == g for v, g in zip(self.values, self.upper)]
        flags[-1] = np.ones_like(flags[-1], dtype=bool)
        return flags

    def max_stop_flags(self) -> list:
        """Nodes where the maximiser (exerciser) may stop: V = F."""
        flags = [v == f for v, f in zip(self.values, self.lower)]
        flags[-1] = np.ones_like(flags[-1], dtype=bool)
        return flags

    def sandwich_audit(self) -> dict:
        below = max(float(np.max(f - v)) for f, v in zip(self.lower, self.values))
        above = max(float(np.max(v - g)) for v, g in zip(self.values, self.upper))
        count = sum(int(np.sum((f > v) | (v > g)))
                    for f, v, g in zip(self.lower, self.values, self.upper))
        term = float(np.max(np.abs(self.values[-1] - self.lower[-1])))
        term_fg = float(np.max(np.abs(self.upper[-1] - self.lower[-1])))
        return dict(violations=count, max_lower_excess=below, max_upper_excess=above,
                    terminal_value_gap=term, terminal_payoff_gap=term_fg,
                    passed=count == 0 and term == 0.0 and term_fg == 0.0)

    def level_summaries(self, tree: Optional[ScenarioTree] = None) -> list:
        out = []
        mins, maxs = self.min_stop_flags(), self.max_stop_flags()
        for n, v in enumerate(self.values):
            row = dict(n=n, nodes=int(len(v)), value_min=float(v.min()), value_max=float(v.max()),
                       min_player_stops=int(mins[n].sum()), max_player_stops=int(maxs[n].sum()))
            if tree is not None:
                for label, fl in (("min_player", mins[n]), ("max_player", maxs[n])):
                    if fl.any():
                        s = tree.states[n][fl]
                        row[f"{label}_stop_box"] = [s.min(axis=0).tolist(), s.max(axis=0).tolist()]
                    else:
                        row[f"{label}_stop_box"] = None
            out.append(row)
        return out

    def to_document(self, tree: Optional[ScenarioTree] = None, node_dump: bool = False) -> dict:
        meta = {k: v for k, v in self.metadata.items() if k != "wall_time"}
        doc = dict(format=REPORT_FORMAT, version=REPORT_VERSION, value=float(self.value),
                   metadata=meta, sandwich_audit=self.sandwich_audit(),
                   levels=self.level_summaries(tree))
        if self.oracle is not None:
            doc["oracle"] = self.oracle
        if node_dump:
            nodes = []
            mins, maxs = self.min_stop_flags(), self.max_stop_flags()
            for n, v in enumerate(self.values):
                for i in range(len(v)):
                    row = dict(n=n, index=i, value=float(v[i]), lower=float(self.lower[n][i]),
                               upper=float(self.upper[n][i]), min_stop=bool(mins[n][i]),
                               max_stop=bool(maxs[n][i]))
                    if tree is not None:
                        row["address"] = tree.address(n, i)
                        row["state"] = tree.states[n][i].tolist()
                    nodes.append(row)
            doc["nodes"] = nodes
        return _jsonable(doc)

    def to_json(self, tree: Optional[ScenarioTree] = None, node_dump: bool = False) -> str:
        return json.dumps(self.to_document(tree, node_dump), indent=2, sort_keys=True)


def backward_value(tree: ScenarioTree, payoffs: PayoffPair) -> GameValueReport:
    """V_N = F_1 at the leaves; V_n = min(G, max(F, E[V_{n+1} | node])) above."""
    t0 = time.perf_counter()
    F, G = payoff_levels(tree, payoffs)
    values = [None] * (tree.N + 1)
    cont = [None] * tree.N
    values[tree.N] = F[tree.N].copy()
    for n in range(tree.N - 1, -1, -1):
        cont[n] = _expect(tree, n, values[n + 1])
        values[n] = np.minimum(G[n], np.maximum(F[n], cont[n]))
    meta = dict(tree.meta)
    meta.update(payoff=payoffs.name, node_count=tree.node_count,
                wall_time=time.perf_counter() - t0)
    return GameValueReport(float(values[0][0]), values, F, G, cont, meta)


def american_value(tree: ScenarioTree, payoffs: PayoffPair) -> float:
    """Single-player optimal stopping of F: W_n = max(F, E[W_{n+1} | node])."""
    F, _ = payoff_levels(tree, payoffs)
    w = F[tree.N]
    for n in range(tree.N - 1, -1, -1):
        w = np.maximum(F[n], _expect(tree, n, w))
    return float(w[0])


def european_value(tree: ScenarioTree, payoffs: PayoffPair) -> float:
    """E[F_1] with no early decisions."""
    F, _ = payoff_levels(tree, payoffs)
    prob = tree.node_probabilities()[tree.N]
    return float(prob @ F[tree.N])


def coarse_value(tree: ScenarioTree, payoffs: PayoffPair, partition: BlockPartition) -> float:
    """Game value when both players may only stop at block times n_k (and at N)."""
    if partition.N != tree.N:
        raise ValueError(f"partition N={partition.N} does not match tree depth {tree.N}")
    decide = set(partition.decision_times)
    F, G = payoff_levels(tree, payoffs)
    v = F[tree.N]
    for n in range(tree.N - 1, -1, -1):
        c = _expect(tree, n, v)
        v = np.minimum(G[n], np.maximum(F[n], c)) if n in decide else c
    return float(v[0])


# --------------------------------------------------------------------------- #
# Strategies
# --------------------------------------------------------------------------- #

@dataclass
class TreeStrategy:
    """Stop at the first visited node whose flag is set (terminal always set)."""

    tree: ScenarioTree
    flags: list
    role: str

    def stop_times(self, states=None, atom_index=None) -> np.ndarray:
        """First stopping index along simulated atom sequences (R, N)."""
        atom_index = np.asarray(atom_index)
        R = atom_index.shape[0]
        node = np.zeros(R, dtype=np.int64)
        out = np.full(R, self.tree.N, dtype=np.int64)
        open_ = np.ones(R, dtype=bool)
        for n in range(self.tree.N + 1):
            hit = open_ & self.flags[n][node]
            out[hit] = n
            open_ &= ~hit
            if n < self.tree.N:
                node = self.tree.children[n][node, atom_index[:, n]]
        return out

    def leaf_times(self) -> np.ndarray:
        """Stopping index for every leaf of a full tree, in leaf order."""
        return self.stop_times(atom_index=_leaf_atoms(self.tree))

    def first_stop_level(self) -> int:
        """Earliest level containing a stop node."""
        return next(n for n, f in enumerate(self.flags) if f.any())


@dataclass
class RuleStrategy:
    """Adapted rule: ``rule(n, states_prefix)`` -> stop now?"""

    rule: Callable[[int, np.ndarray], bool]
    role: str = "custom"

    def stop_times(self, states, atom_index=None) -> np.ndarray:
        R, Np1 = states.shape[0], states.shape[1]
        out = np.full(R, Np1 - 1, dtype=np.int64)
        for r in range(R):
            for n in range(Np1):
                if self.rule(n, states[r, :n + 1]):
                    out[r] = n
                    break
        return out


@dataclass
class StrategyPair:
    minimizer: object   # stopping rule of the canceller (pays G when first)
    maximizer: object   # stopping rule of the exerciser (receives F)


def extract_strategies(tree: ScenarioTree, report: GameValueReport) -> StrategyPair:
    """Earliest-saddle strategies: first node with V = G, first node with V = F."""
    if len(report.values) != tree.N + 1:
        raise ValueError("report does not belong to this tree")
    return StrategyPair(TreeStrategy(tree, report.min_stop_flags(), "minimizer"),
                        TreeStrategy(tree, report.max_stop_flags(), "maximizer"))


# --------------------------------------------------------------------------- #
# Exhaustive oracle
# --------------------------------------------------------------------------- #

def _leaf_atoms(tree: ScenarioTree) -> np.ndarray:
    if tree.recombined:
        raise ValueError("leaf enumeration needs a full (non-recombined) tree")
    L = len(tree.states[tree.N])
    out = np.zeros((L, tree.N), dtype=np.int64)
    cur = np.arange(L)
    for k in range(tree.N, 0, -1):
        out[:, k - 1] = tree.atom[k][cur]
        cur = tree.parent[k][cur]
    return out


def leaf_tables(tree: ScenarioTree, payoffs: PayoffPair):
    """Per-leaf payoff tables F[l, n], G[l, n] and leaf probabilities p[l].

    Evaluated directly on each leaf's path prefixes, independent of the
    level-wise recursion.
    """
    atoms = _leaf_atoms(tree)
    L, N = len(atoms), tree.N
    paths = tree.paths(N)
    F = np.empty((L, N + 1))
    G = np.empty((L, N + 1))
    for n in range(N + 1):
        f, g = payoffs.evaluate(tree.time(n), paths[:, :n + 1])
        F[:, n], G[:, n] = f, g
    p = np.ones(L)
    for n in range(N):
        p = p * tree.probs[atoms[:, n]]
    return F, G, p


def count_stopping_times(m: int, N: int) -> int:
    c = 1
    for _ in range(N):
        c = 1 + c ** m
    return c


def enumerate_stopping_times(tree: ScenarioTree, budget: int = 20000) -> np.ndarray:
    """All tree-adapted stopping times as leaf-wise stop indices (S, L).

    A stopping time either stops at a node or continues and picks a stopping
    time independently in each child subtree; leaves always stop.
    """
    m, N = tree.m, tree.N
    total = count_stopping_times(m, N)
    if total > budget:
        raise InfeasibleError(f"{total} stopping times exceed enumeration budget {budget}")
    opts = np.full((1, 1), N, dtype=np.int64)     # depth N: forced stop
    for n in range(N - 1, -1, -1):
        width = m ** (N - n)
        rows = [np.full(width, n, dtype=np.int64)]
        for combo in itertools.product(range(len(opts)), repeat=m):
            rows.append(np.concatenate([opts[c] for c in combo]))
        opts = np.stack(rows)
    return opts


def expected_payoffs(F, G, p, zetas, etas, chunk: int = 256) -> np.ndarray:
    """Matrix of E R(zeta/N, eta/N) = E[G_zeta 1{zeta<eta} + F_eta 1{eta<=zeta}]."""
    L = len(p)
    rows = np.arange(L)
    gz = G[rows, zetas]        # (S1, L)
    fe = F[rows, etas]         # (S2, L)
    out = np.empty((len(zetas), len(etas)))
    for a in range(0, len(zetas), chunk):
        z = zetas[a:a + chunk, None, :]
        first = z < etas[None, :, :]
        vals = np.where(first, gz[a:a + chunk, None, :], fe[None, :, :])
        out[a:a + chunk] = vals @ p
    return out


@dataclass
class BruteForceResult:
    inf_sup: float
    sup_inf: float
    n_stopping_times: int

    @property
    def value(self) -> float:
        return self.inf_sup


def brute_force_value(tree: ScenarioTree, payoffs: PayoffPair,
                      budget: int = 20000) -> BruteForceResult:
    """Exact inf-sup and sup-inf over all pairs of adapted stopping times."""
    F, G, p = leaf_tables(tree, payoffs)
    taus = enumerate_stopping_times(tree, budget)
    P = expected_payoffs(F, G, p, taus, taus)
    return BruteForceResult(float(P.max(axis=1).min()), float(P.min(axis=0).max()), len(taus))


# --------------------------------------------------------------------------- #
# Monte Carlo evaluation of strategies
# --------------------------------------------------------------------------- #

def realised_payoffs(payoffs: PayoffPair, states: np.ndarray, sigma_t: np.ndarray,
                     tau_t: np.ndarray) -> np.ndarray:
    """R_N(sigma/N, tau/N) per path: G at sigma if sigma < tau, else F at tau."""
    N = states.shape[1] - 1
    out = np.empty(len(states))
    cancel = sigma_t < tau_t
    when = np.where(cancel, sigma_t, tau_t)
    for n in np.unique(when):
        sel = when == n
        f, g = payoffs.evaluate(n / N if N else 1.0, states[sel, :n + 1])
        out[sel] = np.where(cancel[sel], g, f)
    return out


def mc_payoff(model: DiffusionModel, law: InnovationLaw, strategies: StrategyPair,
              payoffs: PayoffPair, N: int, reps: int, seed: int, stream: int = _rng.MC):
    """Monte Carlo estimate of E R_N(sigma/N, tau/N) and its CLT standard error."""
    if reps < 2:
        raise ValueError("reps must be >= 2")
    states, _, idx = simulate_batch(model, law, N, reps, seed, stream)
    s = strategies.minimizer.stop_times(states, idx)
    t = strategies.maximizer.stop_times(states, idx)
    r = realised_payoffs(payoffs, states, s, t)
    mean = math.fsum(r) / reps
    var = math.fsum(((r - mean) ** 2).tolist()) / (reps - 1)
    return float(mean), math.sqrt(var / reps)
