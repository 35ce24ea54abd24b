"""Random interaction graphs: Erdos-Renyi, two-community block model.

Adjacency is a directed 0/1 matrix stored bit-packed row-major.  The
diagonal is sampled like any other entry (the drift sum in the particle
system runs over all j including j = i); ``zero_diagonal=True`` removes
it for comparison runs.  Regeneration from (n, parameters, seed, flags)
is bit-identical.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rng import GRAPH, stream

_MAGIC = b"GFG1"
_FORMAT_VERSION = 1


class PowerIterationError(RuntimeError):
    """Power iteration failed to reach the requested tolerance."""

    def __init__(self, msg: str, last_estimate: float, iterations: int):
        super().__init__(msg)
        self.last_estimate = last_estimate
        self.iterations = iterations


@dataclass
class Graph:
    """Directed Bernoulli graph with bit-packed adjacency rows."""

    n: int
    p: float                  # edge probability (intra-cluster one for SBM)
    q: float                  # inter-cluster probability (== p unless SBM)
    seed: int
    symmetric: bool = False
    sbm: bool = False
    zero_diagonal: bool = False
    packed: np.ndarray = field(repr=False, default=None)  # (n, ceil(n/8)) uint8

    _dense_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def expected_degree(self) -> float:
        """Renormalising constant of the drift: n*p, or n*(p+q)/2 for SBM."""
        r = (self.p + self.q) / 2.0 if self.sbm else self.p
        return self.n * r

    @property
    def mean_edge_probability(self) -> float:
        return (self.p + self.q) / 2.0 if self.sbm else self.p

    def dense(self, dtype=np.float64) -> np.ndarray:
        """Unpacked adjacency as a dense matrix (cached per dtype)."""
        key = np.dtype(dtype).str
        if key not in self._dense_cache:
            bits = np.unpackbits(self.packed, axis=1, count=self.n)
            self._dense_cache[key] = bits.astype(dtype)
        return self._dense_cache[key]

    def row(self, i: int) -> np.ndarray:
        """Row i of the adjacency as uint8 (length n)."""
        return np.unpackbits(self.packed[i], count=self.n)

    def column(self, j: int) -> np.ndarray:
        if self.symmetric:
            return self.row(j)
        return self.dense(np.uint8)[:, j]

    def neighbor_lists(self) -> list[np.ndarray]:
        """Out-neighbour index list per vertex (sparse drift loop)."""
        return [np.nonzero(self.row(i))[0] for i in range(self.n)]

    def degrees(self) -> np.ndarray:
        """DegreeVector: d_i = sum_j xi_ij as int64."""
        bits = np.unpackbits(self.packed, axis=1, count=self.n)
        return bits.sum(axis=1).astype(np.int64)

    def edge_count(self) -> int:
        return int(self.degrees().sum())

    def pair_probabilities(self) -> np.ndarray:
        """Matrix of per-pair edge probabilities p_ij."""
        if not self.sbm:
            return np.full((self.n, self.n), self.p)
        half = self.n // 2
        P = np.full((self.n, self.n), self.q)
        P[:half, :half] = self.p
        P[half:, half:] = self.p
        return P

    def centered(self) -> "CenteredAdjacency":
        return CenteredAdjacency(self)

    # -- serialization ----------------------------------------------------
    def save(self, path: str) -> None:
        """Binary header + row-major packed bits, plus a JSON sidecar."""
        flags = (
            (1 if self.symmetric else 0)
            | (2 if self.sbm else 0)
            | (4 if self.zero_diagonal else 0)
        )
        header = _MAGIC + struct.pack(
            "<IQBQdd", _FORMAT_VERSION, self.n, flags, self.seed, self.p, self.q
        )
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.packed.tobytes())
        meta = {
            "format": _FORMAT_VERSION,
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "seed": self.seed,
            "symmetric": self.symmetric,
            "sbm": self.sbm,
            "zero_diagonal": self.zero_diagonal,
            "edges": self.edge_count(),
        }
        with open(path + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "Graph":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _MAGIC:
                raise ValueError(f"not a graph file: bad magic {magic!r}")
            version, n, flags, seed, p, q = struct.unpack("<IQBQdd", fh.read(37))
            if version != _FORMAT_VERSION:
                raise ValueError(f"unsupported graph format version {version}")
            row_bytes = (n + 7) // 8
            packed = np.frombuffer(fh.read(n * row_bytes), dtype=np.uint8)
        packed = packed.reshape(n, row_bytes).copy()
        return cls(
            n=int(n),
            p=float(p),
            q=float(q),
            seed=int(seed),
            symmetric=bool(flags & 1),
            sbm=bool(flags & 2),
            zero_diagonal=bool(flags & 4),
            packed=packed,
        )


class CenteredAdjacency:
    """View over a graph with entries xi_ij / p_ij - 1."""

    def __init__(self, graph: Graph):
        self.graph = graph
        self.n = graph.n
        self._dense = None

    def dense(self, dtype=np.float64) -> np.ndarray:
        if self._dense is None or self._dense.dtype != np.dtype(dtype):
            A = self.graph.dense(dtype)
            if self.graph.sbm:
                self._dense = A / self.graph.pair_probabilities().astype(dtype) - 1.0
            else:
                self._dense = A / dtype(self.graph.p) - dtype(1.0)
            self._dense = self._dense.astype(dtype)
        return self._dense

    def row(self, i: int, dtype=np.float64) -> np.ndarray:
        bits = self.graph.row(i).astype(dtype)
        if self.graph.sbm:
            return bits / self.graph.pair_probabilities()[i].astype(dtype) - 1.0
        return bits / dtype(self.graph.p) - dtype(1.0)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.dense(v.dtype if v.dtype.kind == "f" else np.float64) @ v

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        return self.dense(v.dtype if v.dtype.kind == "f" else np.float64).T @ v


def _bernoulli_matrix(n: int, pmat_row, rng: np.random.Generator,
                      symmetric: bool, zero_diagonal: bool) -> np.ndarray:
    """Threshold uniform draws row-blockwise against per-pair probabilities.

    Draw order is row-major over the full n*n matrix regardless of block
    size, so the bits depend only on the stream.  The symmetric variant
    uses the upper triangle (diagonal included) and mirrors it, which
    keeps p_intra == q_inter statistically identical to the asymmetric
    sampler pairwise above the diagonal.
    """
    block = max(1, (1 << 22) // max(n, 1))
    rows = []
    for start in range(0, n, block):
        stop = min(start + block, n)
        U = rng.random((stop - start, n))
        P = pmat_row(start, stop)
        rows.append(U < P)
    xi = np.vstack(rows)
    if symmetric:
        upper = np.triu(xi)  # includes the diagonal
        xi = upper | upper.T
    if zero_diagonal:
        np.fill_diagonal(xi, False)
    return xi


def graph_from_adjacency(matrix, p: float, q: Optional[float] = None,
                         symmetric: bool = False, sbm: bool = False,
                         seed: int = 0) -> Graph:
    """Wrap an explicit 0/1 matrix (hand graphs, forced adjacencies)."""
    xi = np.asarray(matrix)
    if xi.ndim != 2 or xi.shape[0] != xi.shape[1]:
        raise ValueError(f"adjacency must be square, got {xi.shape}")
    if not np.isin(xi, (0, 1)).all():
        raise ValueError("adjacency entries must be 0/1")
    if symmetric and not np.array_equal(xi, xi.T):
        raise ValueError("symmetric flag set but matrix is not symmetric")
    return Graph(n=xi.shape[0], p=float(p), q=float(p if q is None else q),
                 seed=int(seed), symmetric=symmetric, sbm=sbm,
                 packed=np.packbits(xi.astype(bool), axis=1))


def gen_erdos_renyi(n: int, p: float, seed: int, symmetric: bool = False,
                    zero_diagonal: bool = False) -> Graph:
    """Directed G(n, p): each ordered pair present independently w.p. p."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not (0.0 < p <= 1.0):
        raise ValueError(f"edge probability must be in (0, 1], got {p}")
    rng = stream(seed, GRAPH)
    xi = _bernoulli_matrix(n, lambda a, b: p, rng, symmetric, zero_diagonal)
    return Graph(n=n, p=float(p), q=float(p), seed=int(seed), symmetric=symmetric,
                 zero_diagonal=zero_diagonal, packed=np.packbits(xi, axis=1))


def gen_sbm(n: int, p_intra: float, q_inter: float, seed: int,
            symmetric: bool = False, zero_diagonal: bool = False) -> Graph:
    """Two equal communities {0..n/2-1}, {n/2..n-1} with edge probs (p, q)."""
    if n % 2 != 0:
        raise ValueError(f"SBM needs an even vertex count, got {n}")
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not (0.0 < p_intra <= 1.0):
        raise ValueError(f"p_intra must be in (0, 1], got {p_intra}")
    # q_inter = 0 (disconnected communities) is a meaningful degenerate case
    if not (0.0 <= q_inter <= 1.0):
        raise ValueError(f"q_inter must be in [0, 1], got {q_inter}")
    half = n // 2
    row_template = None

    def pmat(a, b):
        nonlocal row_template
        if row_template is None:
            row_template = np.full(n, q_inter)
        P = np.empty((b - a, n))
        for k, i in enumerate(range(a, b)):
            P[k] = row_template
            if i < half:
                P[k, :half] = p_intra
                P[k, half:] = q_inter
            else:
                P[k, :half] = q_inter
                P[k, half:] = p_intra
        return P

    rng = stream(seed, GRAPH)
    xi = _bernoulli_matrix(n, pmat, rng, symmetric, zero_diagonal)
    return Graph(n=n, p=float(p_intra), q=float(q_inter), seed=int(seed),
                 symmetric=symmetric, sbm=True, zero_diagonal=zero_diagonal,
                 packed=np.packbits(xi, axis=1))


def spectral_norm(matrix, tol: float = 1e-10, max_iter: int = 5000) -> float:
    """Operator 2-norm by power iteration on A^T A, deterministic start.

    ``matrix`` is a square ndarray or anything exposing ``dense()``.
    Raises PowerIterationError (carrying the last iterate) if the
    relative change has not dropped below ``tol`` within ``max_iter``.
    """
    A = matrix.dense() if hasattr(matrix, "dense") else np.asarray(matrix, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    est = 0.0
    for it in range(1, max_iter + 1):
        w = A.T @ (A @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        new_est = np.sqrt(norm)
        v = w / norm
        if abs(new_est - est) <= tol * max(new_est, 1e-300):
            return float(new_est)
        est = new_est
    raise PowerIterationError(
        f"power iteration did not converge to rtol={tol} in {max_iter} iterations",
        last_estimate=float(est), iterations=max_iter,
    )
