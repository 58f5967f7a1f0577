"""The discrete chain, its block-frozen coarse version and coupled references.

The chain is X((n+1)/N) = X(n/N) + N^{-1/2} sigma(X(n/N)) xi(n+1)
+ N^{-1} b(X(n/N)) on [0, 1], extended piecewise constantly between grid
times.  All batch routines draw replication r from its own random substream
(seed, stream, r), so a path never depends on the batch it was produced in.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import rng as _rng
from .model import DiffusionModel, InnovationLaw, ShapeError

# elements per chunk of bridge draws in coupled simulations
_CHUNK_ELEMS = 1 << 21


# --------------------------------------------------------------------------- #
# Paths
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class DiscretePath:
    n_steps: int
    states: np.ndarray                      # (N+1, d)
    innovations: Optional[np.ndarray] = None  # (N, d): xi(1..N)
    atom_index: Optional[np.ndarray] = None   # (N,) for finite-support laws

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) / self.n_steps

    def value_at(self, t: float) -> np.ndarray:
        """Piecewise-constant extension: states[floor(N t)], states[N] at t = 1."""
        if not 0.0 <= t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        n = min(int(math.floor(self.n_steps * t)), self.n_steps)
        return self.states[n]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.dim
        has_xi = self.innovations is not None
        header = ["step", "time"] + [f"x{i}" for i in range(d)]
        if has_xi:
            header += [f"xi{i}" for i in range(d)]
        buf.write(f"# gamechain-path v1 N={self.n_steps} d={d}\n")
        w.writerow(header)
        for n in range(self.n_steps + 1):
            row = [n, repr(n / self.n_steps)] + [repr(float(v)) for v in self.states[n]]
            if has_xi:
                row += ([""] * d if n == 0 else
                        [repr(float(v)) for v in self.innovations[n - 1]])
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscretePath":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        rows = list(csv.reader(lines))
        header, body = rows[0], rows[1:]
        d = sum(1 for h in header if h.startswith("x") and not h.startswith("xi"))
        states = np.array([[float(v) for v in r[2:2 + d]] for r in body])
        xi = None
        if any(h.startswith("xi") for h in header):
            xi = np.array([[float(v) for v in r[2 + d:2 + 2 * d]] for r in body[1:]])
            if xi.size == 0:
                xi = xi.reshape(0, d)
        return cls(len(body) - 1, states, xi)


_BATCH_MAGIC = b"GCPB"
_BATCH_VERSION = 1
_BATCH_HEADER = struct.Struct("<4sHIIIB")


def write_batch(paths, fh) -> None:
    """Write paths sharing (N, d) as a little-endian float64 batch."""
    paths = list(paths)
    if not paths:
        raise ValueError("empty batch")
    N, d = paths[0].n_steps, paths[0].dim
    if any(p.n_steps != N or p.dim != d for p in paths):
        raise ShapeError("batch paths must share N and d")
    has_xi = all(p.innovations is not None for p in paths)
    fh.write(_BATCH_HEADER.pack(_BATCH_MAGIC, _BATCH_VERSION, len(paths), N, d, int(has_xi)))
    for p in paths:
        fh.write(np.ascontiguousarray(p.states, dtype="<f8").tobytes())
        if has_xi:
            fh.write(np.ascontiguousarray(p.innovations, dtype="<f8").tobytes())


def read_batch(fh) -> list:
    magic, version, count, N, d, has_xi = _BATCH_HEADER.unpack(fh.read(_BATCH_HEADER.size))
    if magic != _BATCH_MAGIC:
        raise ValueError("not a gamechain path batch")
    if version != _BATCH_VERSION:
        raise ValueError(f"unsupported batch version {version}")
    out = []
    for _ in range(count):
        states = np.frombuffer(fh.read(8 * (N + 1) * d), dtype="<f8").reshape(N + 1, d).copy()
        xi = None
        if has_xi:
            xi = np.frombuffer(fh.read(8 * N * d), dtype="<f8").reshape(N, d).copy()
        out.append(DiscretePath(N, states, xi))
    return out


# --------------------------------------------------------------------------- #
# The chain
# --------------------------------------------------------------------------- #

def _advance(x, sig, scaled_xi, b, inv_n):
    return x + np.matmul(sig, scaled_xi[..., None])[..., 0] + b * inv_n


def step(x, xi, model: DiffusionModel, N: int) -> np.ndarray:
    """One transition of the chain: x + N^{-1/2} sigma(x) xi + N^{-1} b(x)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if x.shape[-1:] != (model.dim,) or xi.shape != x.shape:
        raise ShapeError(f"state {x.shape} and innovation {xi.shape} do not match dim {model.dim}")
    return _advance(x, model.sigma_at(x), xi * (1.0 / math.sqrt(N)), model.drift_at(x), 1.0 / N)


def run_chain(model: DiffusionModel, xi: np.ndarray, N: int, x0=None) -> np.ndarray:
    """Replay the chain from recorded innovations xi shaped (..., N, d)."""
    xi = np.asarray(xi, dtype=float)
    start = model.x0 if x0 is None else np.asarray(x0, dtype=float)
    states = np.empty(xi.shape[:-2] + (N + 1, model.dim))
    states[..., 0, :] = start
    scale, inv_n = 1.0 / math.sqrt(N), 1.0 / N
    x = states[..., 0, :]
    for n in range(N):
        x = _advance(x, model.sigma_at(x), xi[..., n, :] * scale, model.drift_at(x), inv_n)
        states[..., n + 1, :] = x
    return states


def draw_innovations(law: InnovationLaw, N: int, reps: int, seed: int,
                     stream: int = _rng.CHAIN, start: int = 0):
    """Innovations for replications start..start+reps-1: (xi (R, N, d), idx or None)."""
    xi = np.empty((reps, N, law.dim))
    idx = np.empty((reps, N), dtype=np.int64) if law.is_finite else None
    for r in range(reps):
        x, i = law.draw(_rng.generator(seed, stream, start + r), N)
        xi[r] = x
        if idx is not None:
            idx[r] = i
    return xi, idx


def simulate_batch(model: DiffusionModel, law: InnovationLaw, N: int, reps: int, seed: int,
                   stream: int = _rng.CHAIN, start: int = 0):
    """Vectorised chain for replications start..start+reps-1.

    Returns (states (R, N+1, d), xi (R, N, d), atom indices (R, N) or None).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if law.dim != model.dim:
        raise ShapeError(f"law dim {law.dim} != model dim {model.dim}")
    xi, idx = draw_innovations(law, N, reps, seed, stream, start)
    return run_chain(model, xi, N), xi, idx


def simulate_path(model: DiffusionModel, law: InnovationLaw, N: int, seed: int,
                  index: int = 0) -> DiscretePath:
    """Replication ``index`` of the chain; identical to row ``index`` of a batch."""
    states, xi, idx = simulate_batch(model, law, N, 1, seed, start=index)
    return DiscretePath(N, states[0], xi[0], None if idx is None else idx[0])


# --------------------------------------------------------------------------- #
# Block partition and the coarse process
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class BlockPartition:
    N: int
    q: int                 # floor(N^{1/4})
    k_N: int               # floor(N / q)
    block_ends: tuple      # n_k = k q for k = 0..k_N
    k_max: int
    decision_times: tuple  # block_ends, plus N when the last block is short

    @property
    def has_tail(self) -> bool:
        return self.block_ends[-1] < self.N

    @property
    def delta(self) -> Fraction:
        return Fraction(self.q, self.N)

    def block_start(self, n: int) -> int:
        """Start n_k of the block containing transition n -> n+1."""
        return (n // self.q) * self.q


def block_partition(N: int) -> BlockPartition:
    if N < 1:
        raise ValueError("N must be >= 1")
    q = math.isqrt(math.isqrt(N))
    k_N = N // q
    ends = tuple(k * q for k in range(k_N + 1))
    tail = ends[-1] < N
    times = ends + ((N,) if tail else ())
    return BlockPartition(N, q, k_N, ends, k_N + 1 if tail else k_N, times)


def coarse_states(model: DiffusionModel, states: np.ndarray, xi: np.ndarray,
                  partition: BlockPartition) -> np.ndarray:
    """Coarse process with coefficients frozen at the chain's block-start states.

    Accumulated one innovation at a time in the chain's own operation order,
    so constant coefficients (or q = 1) reproduce the chain bitwise.
    """
    N = partition.N
    if states.shape[-2] != N + 1 or xi.shape[-2] != N:
        raise ShapeError("path length does not match the partition")
    out = np.empty_like(states)
    out[..., 0, :] = states[..., 0, :]
    scale, inv_n = 1.0 / math.sqrt(N), 1.0 / N
    y = out[..., 0, :]
    sig = b = None
    for n in range(N):
        if n % partition.q == 0:
            anchor = states[..., n, :]
            sig, b = model.sigma_at(anchor), model.drift_at(anchor)
        y = _advance(y, sig, xi[..., n, :] * scale, b, inv_n)
        out[..., n + 1, :] = y
    return out


def coarse_path(path: DiscretePath, model: DiffusionModel,
                partition: Optional[BlockPartition] = None) -> DiscretePath:
    if path.innovations is None:
        raise ValueError("coarse_path needs a path with recorded innovations")
    partition = partition or block_partition(path.n_steps)
    if partition.N != path.n_steps:
        raise ValueError("partition N does not match the path")
    return DiscretePath(path.n_steps,
                        coarse_states(model, path.states, path.innovations, partition),
                        path.innovations, path.atom_index)


# --------------------------------------------------------------------------- #
# Coupled chain / diffusion reference
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class CoupledPair:
    """Gaussian chain and a fine Euler reference driven by the same Brownian path.

    Over [n/N, (n+1)/N] the reference's Brownian increments sum to
    N^{-1/2} xi(n+1); the interior is filled in by Brownian-bridge sampling.
    """

    chain: DiscretePath
    reference: np.ndarray       # (M+1, d) on the grid j/M
    increments: np.ndarray      # (M, d) Brownian increments
    refine: int
    seed: int
    index: int = 0

    def grid_discrepancy(self) -> float:
        K = self.refine // self.chain.n_steps
        return float(np.max(np.linalg.norm(self.chain.states - self.reference[::K], axis=1)))

    def sup_error_sq(self) -> float:
        return float(_sup_sq(self.chain.states[None], self.reference[None],
                             self.refine // self.chain.n_steps)[0])


def _bridge_increments(xi_chunk, z_chunk, N, M):
    """Fine increments on each coarse interval conditioned on their sum.

    xi_chunk (R, C, d), z_chunk (R, C, K, d) -> (R, C, K, d).  Given the sum
    s = N^{-1/2} xi, K i.i.d. N(0, 1/M) increments have the law
    s/K + (z_k - mean(z)) / sqrt(M).
    """
    K = z_chunk.shape[2]
    s = xi_chunk * (1.0 / math.sqrt(N))
    centred = z_chunk - z_chunk.mean(axis=2, keepdims=True)
    return (s * (1.0 / K))[:, :, None, :] + centred * (1.0 / math.sqrt(M))


def _sup_sq(chain, ref, K):
    """sup_t |X_N(t) - Xi(t)|^2 with the reference linear between fine points.

    On each fine interval the difference is affine in t, so the sup is
    attained at fine grid points, using both the chain's value there and its
    left limit.
    """
    N = chain.shape[-2] - 1
    j = np.arange(N * K + 1)
    cur = chain[:, j // K]
    left = chain[:, np.maximum(j - 1, 0) // K]
    e1 = np.sum((cur - ref) ** 2, axis=-1)
    e2 = np.sum((left - ref) ** 2, axis=-1)
    return np.maximum(e1, e2).max(axis=-1)


def _coupled_batch(model, N, M, seed, start, reps, keep=False):
    K = M // N
    d = model.dim
    law = InnovationLaw.gaussian(d)
    xi, _ = draw_innovations(law, N, reps, seed, _rng.CHAIN, start)
    chain = run_chain(model, xi, N)
    gens = [_rng.generator(seed, _rng.BRIDGE, start + r) for r in range(reps)]
    C = max(1, min(N, _CHUNK_ELEMS // max(1, reps * K * d)))
    y = np.broadcast_to(model.x0, (reps, d)).copy()
    inv_m = 1.0 / M
    sup = np.zeros(reps)
    ref_all = np.empty((reps, M + 1, d)) if keep else None
    dw_all = np.empty((reps, M, d)) if keep else None
    for n0 in range(0, N, C):
        n1 = min(N, n0 + C)
        z = np.stack([g.standard_normal((n1 - n0, K, d)) for g in gens])
        dw = _bridge_increments(xi[:, n0:n1], z, N, M).reshape(reps, (n1 - n0) * K, d)
        ys = np.empty((reps, (n1 - n0) * K + 1, d))
        ys[:, 0] = y
        for j in range(dw.shape[1]):
            y = _advance(y, model.sigma_at(y), dw[:, j], model.drift_at(y), inv_m)
            ys[:, j + 1] = y
        # chain values at fine points n0*K .. n1*K
        jj = np.arange(n0 * K, n1 * K + 1)
        cur = chain[:, jj // K]
        left = chain[:, np.maximum(jj - 1, 0) // K]
        err = np.maximum(np.sum((cur - ys) ** 2, axis=-1), np.sum((left - ys) ** 2, axis=-1))
        sup = np.maximum(sup, err.max(axis=1))
        if keep:
            ref_all[:, n0 * K:n1 * K + 1] = ys
            dw_all[:, n0 * K:n1 * K] = dw
    return chain, xi, sup, ref_all, dw_all


def coupled_pair(model: DiffusionModel, N: int, refine: int, seed: int,
                 index: int = 0) -> CoupledPair:
    """Replication ``index`` of the Gaussian chain and its fine reference."""
    if N < 1 or refine < N or refine % N:
        raise ValueError(f"refine M={refine} must be a positive multiple of N={N}")
    chain, xi, _, ref, dw = _coupled_batch(model, N, refine, seed, index, 1, keep=True)
    return CoupledPair(DiscretePath(N, chain[0], xi[0]), ref[0], dw[0], refine, seed, index)


def coupled_sup_errors(model: DiffusionModel, N: int, refine: int, reps: int, seed: int,
                       jobs: int = 1) -> np.ndarray:
    """Squared sup discrepancies of ``reps`` coupled pairs, in replication order."""
    if N < 1 or refine < N or refine % N:
        raise ValueError(f"refine M={refine} must be a positive multiple of N={N}")
    bounds = _split(reps, jobs)

    def work(b):
        return _coupled_batch(model, N, refine, seed, b[0], b[1] - b[0])[2]

    return _gather(work, bounds, jobs)


def _split(reps, jobs):
    jobs = max(1, min(int(jobs), reps))
    edges = [round(i * reps / jobs) for i in range(jobs + 1)]
    return [(edges[i], edges[i + 1]) for i in range(jobs) if edges[i + 1] > edges[i]]


def _gather(work, bounds, jobs):
    if jobs <= 1 or len(bounds) == 1:
        parts = [work(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(work, bounds))
    return np.concatenate(parts)
