"""Euler-Maruyama integration of the interacting phase system on a graph.

drift_i = F(theta_i) + (1/D_i) * sum_j xi_ij Gamma(theta_i, theta_j)

with D_i the expected degree (n*p, the default) or the actual degree
d_i ("actual" renormalisation; isolated vertices get zero drift and are
counted, never fatal).  Phases are wrapped into [0, 2*pi) at every step.

Kernels with Fourier data use a matrix-vector drift path (the adjacency
hits trigonometric vectors, one GEMM per distinct second mode index),
which also powers the batched ensemble runner used by the Monte Carlo
experiments.  Kernels without Fourier data fall back to a pairwise or
sparse neighbour-list loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .graph import Graph
from .kernels import KernelSpec
from .measures import ACTUAL_DEGREE, EXPECTED_DEGREE, TWO_PI, AtomicMeasure, wrap_angles
from .rng import NOISE, stream


@dataclass
class ParticleState:
    phases: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.phases = wrap_angles(np.asarray(self.phases, dtype=np.float64))

    @property
    def n(self) -> int:
        return len(self.phases)


@dataclass
class SimConfig:
    dt: float = 1e-3
    t_final: float = 1.0
    snapshot_times: Optional[Sequence[float]] = None
    renorm: str = EXPECTED_DEGREE
    seed: int = 0
    replica_id: int = 0
    drift_mode: str = "auto"      # auto | fourier | pairwise | sparse
    dtype: str = "float64"        # float32 speeds up the large GEMM runs
    noise_chunk: int = 8          # steps of noise drawn per stream call
    debug_bounds: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.snapshot_times is not None:
            ts = list(self.snapshot_times)
            if any(t < 0 or t > self.t_final + 1e-12 for t in ts):
                raise ValueError("snapshot times must lie in [0, t_final]")
            if sorted(ts) != ts:
                raise ValueError("snapshot times must be sorted")

    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def snapshot_steps(self) -> list[int]:
        times = self.snapshot_times if self.snapshot_times is not None else [self.t_final]
        return [int(round(t / self.dt)) for t in times]


@dataclass
class Trajectory:
    samples: list          # [(time, phases ndarray)]
    provenance: dict
    zero_degree_events: int = 0

    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])

    def final_state(self) -> ParticleState:
        t, ph = self.samples[-1]
        return ParticleState(ph.copy(), t=t)


# ---------------------------------------------------------------------------
# drift evaluation
# ---------------------------------------------------------------------------

def _degree_normalizer(graph: Graph, renorm: str):
    """(inverse degree vector or scalar, number of zero-degree vertices)."""
    if renorm == EXPECTED_DEGREE:
        return 1.0 / graph.expected_degree, 0
    if renorm == ACTUAL_DEGREE:
        d = graph.degrees().astype(np.float64)
        zero = int(np.sum(d == 0))
        inv = np.zeros_like(d)
        np.divide(1.0, d, out=inv, where=d > 0)
        return inv, zero
    raise ValueError(f"unknown renormalisation {renorm!r}")


def _canonical_modes(modes) -> list[tuple[int, int, complex, float]]:
    """Collapse Hermitian mode pairs (real kernels) to halve the work:
    (a, b, c) + (-a, -b, conj(c)) contribute 2 Re(c e^{ia.} (A e^{ib.}))."""
    table: dict[tuple[int, int], complex] = {}
    for a, b, c in modes:
        table[(a, b)] = table.get((a, b), 0.0) + complex(c)
    out = []
    done = set()
    for (a, b), c in table.items():
        if (a, b) in done:
            continue
        mirror = (-a, -b)
        if mirror != (a, b) and mirror in table and \
                abs(np.conj(table[mirror]) - c) <= 1e-14 * max(1.0, abs(c)):
            out.append((a, b, c, 2.0))
            done.update(((a, b), mirror))
        else:
            out.append((a, b, c, 1.0))
            done.add((a, b))
    return out


def _interaction_fourier(theta: np.ndarray, AT, plan) -> np.ndarray:
    """sum_j xi_ij Gamma(theta_i, theta_j) for batched theta (..., n).

    Real arithmetic throughout: trig arrays cached per distinct |mode|,
    one GEMM against the transposed adjacency over the stacked trig rows
    (row-major output keeps every slice contiguous).  ``AT=None`` marks
    the complete graph (with self-loops): the adjacency product then
    collapses to a global sum per replica.
    """
    th2 = np.atleast_2d(theta)
    m = th2.shape[0]
    n = th2.shape[1]
    trig: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def get_trig(k: int):
        if k not in trig:
            arg = th2 if k == 1 else k * th2
            trig[k] = (np.cos(arg), np.sin(arg))
        return trig[k]

    b_need = sorted({abs(b) for _, b, _, _ in plan if b != 0})
    conv: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    if b_need and AT is None:
        for k in b_need:
            cb, sb = get_trig(k)
            conv[k] = (cb.sum(axis=-1, keepdims=True), sb.sum(axis=-1, keepdims=True))
    elif b_need:
        gemm_in = np.empty((2 * len(b_need) * m, n), dtype=th2.dtype)
        for i, k in enumerate(b_need):
            cb, sb = get_trig(k)
            gemm_in[2 * i * m:(2 * i + 1) * m] = cb
            gemm_in[(2 * i + 1) * m:(2 * i + 2) * m] = sb
        prod = gemm_in @ AT          # row r = A @ gemm_in[r]
        for i, k in enumerate(b_need):
            conv[k] = (prod[2 * i * m:(2 * i + 1) * m],
                       prod[(2 * i + 1) * m:(2 * i + 2) * m])
    if any(b == 0 for _, b, _, _ in plan):
        rowsum = np.full(n, float(n), dtype=th2.dtype) if AT is None \
            else AT.sum(axis=0).astype(th2.dtype)
        conv[0] = (np.broadcast_to(rowsum, th2.shape), None)

    out = np.zeros_like(th2)
    for a, b, c, wt in plan:
        cr, ci = wt * c.real, wt * c.imag
        Pc, Ps = conv[abs(b)]
        sb = float(np.sign(b))
        if a == 0:
            if cr != 0.0:
                out += cr * Pc
            if ci != 0.0 and sb != 0.0:
                out -= (ci * sb) * Ps
            continue
        Ca, Sa = get_trig(abs(a))
        sa = float(np.sign(a))
        # Re((cr + i ci)(Ca + i sa Sa)(Pc + i sb Ps)) = U Pc - sb V Ps
        if cr == 0.0:
            U = (-ci * sa) * Sa
            V = ci * Ca
        elif ci == 0.0:
            U = cr * Ca
            V = (cr * sa) * Sa
        else:
            U = cr * Ca - (ci * sa) * Sa
            V = (cr * sa) * Sa + ci * Ca
        U *= Pc
        out += U
        if sb != 0.0:
            V *= Ps
            if sb > 0:
                out -= V
            else:
                out += V
    return out.reshape(theta.shape)


def _interaction_pairwise(theta: np.ndarray, A: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    G = np.asarray(kernel.gamma(theta[:, None], theta[None, :]), dtype=np.float64)
    return (A * G).sum(axis=1)


def _interaction_sparse(theta: np.ndarray, neighbors: list[np.ndarray],
                        kernel: KernelSpec) -> np.ndarray:
    out = np.zeros_like(theta)
    for i, idx in enumerate(neighbors):
        if len(idx):
            out[i] = np.sum(kernel.gamma(theta[i], theta[idx]))
    return out


class DriftEvaluator:
    """Holds per-graph caches (dense adjacency, neighbour lists)."""

    def __init__(self, graph: Graph, kernel: KernelSpec, cfg: SimConfig):
        self.graph = graph
        self.kernel = kernel
        self.cfg = cfg
        dtype = np.float32 if cfg.dtype == "float32" else np.float64
        mode = cfg.drift_mode
        if mode == "auto":
            if kernel.fourier_modes is not None:
                mode = "fourier"
            elif graph.mean_edge_probability <= 0.1:
                mode = "sparse"
            else:
                mode = "pairwise"
        self.mode = mode
        self.complete = bool(
            mode == "fourier"
            and not graph.sbm
            and graph.p == 1.0
            and np.unpackbits(graph.packed, axis=1, count=graph.n).all())
        self.A = graph.dense(dtype) if mode == "pairwise" or \
            (mode == "fourier" and not self.complete) else None
        self.AT = np.ascontiguousarray(self.A.T) \
            if (mode == "fourier" and not self.complete) else None
        self.neighbors = graph.neighbor_lists() if mode == "sparse" else None
        self.inv_degree, self.zero_degree_count = _degree_normalizer(graph, cfg.renorm)
        self.plan = _canonical_modes(kernel.fourier_modes) \
            if (mode == "fourier" and kernel.fourier_modes) else []
        self._gamma_sup = None

    def interaction(self, theta: np.ndarray) -> np.ndarray:
        if self.mode == "fourier":
            if not self.plan:
                return np.zeros_like(theta)
            return _interaction_fourier(theta, self.AT, self.plan)
        if self.mode == "pairwise":
            if theta.ndim > 1:
                return np.stack([_interaction_pairwise(row, self.A, self.kernel)
                                 for row in theta])
            return _interaction_pairwise(theta, self.A, self.kernel)
        if theta.ndim > 1:
            return np.stack([_interaction_sparse(row, self.neighbors, self.kernel)
                             for row in theta])
        return _interaction_sparse(theta, self.neighbors, self.kernel)

    def drift(self, theta: np.ndarray) -> np.ndarray:
        out = self.interaction(theta)
        if np.ndim(self.inv_degree) or self.inv_degree != 1.0:
            np.multiply(out, np.asarray(self.inv_degree, dtype=out.dtype), out=out)
        if self.kernel.intrinsic is not None:
            out += self.kernel.intrinsic(theta)
        if self.cfg.debug_bounds:
            self._check_bound(out)
        return out

    def _check_bound(self, drift: np.ndarray) -> None:
        if self._gamma_sup is None:
            self._gamma_sup = self.kernel.sup_norm()
            self._f_sup = self.kernel.intrinsic_sup_norm()
            d = self.graph.degrees().astype(np.float64)
            ratio = d * self.inv_degree if np.ndim(self.inv_degree) else d * self.inv_degree
            self._ratio_max = float(np.max(ratio))
        bound = self._f_sup + self._gamma_sup * self._ratio_max + 1e-9
        worst = float(np.abs(drift).max())
        if worst > bound:
            raise AssertionError(f"drift bound violated: |drift|={worst:.6g} > {bound:.6g}")


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def step(state: ParticleState, graph: Graph, kernel: KernelSpec, cfg: SimConfig,
         noise: np.ndarray, _evaluator: Optional[DriftEvaluator] = None) -> ParticleState:
    """One Euler-Maruyama step; ``noise`` holds n increments N(0, dt)."""
    if state.n != graph.n:
        raise ValueError(f"state has {state.n} particles but graph has {graph.n} vertices")
    ev = _evaluator or DriftEvaluator(graph, kernel, cfg)
    theta = state.phases + ev.drift(state.phases) * cfg.dt + noise
    return ParticleState(wrap_angles(theta), t=state.t + cfg.dt)


def simulate(graph: Graph, init: ParticleState, kernel: KernelSpec,
             cfg: SimConfig) -> Trajectory:
    """Integrate to t_final, recording the requested snapshots.

    Deterministic given (graph, init, cfg.seed, cfg.replica_id); Brownian
    increments come from the per-replica NOISE sub-stream.
    """
    ev = DriftEvaluator(graph, kernel, cfg)
    rng = stream(cfg.seed, NOISE, cfg.replica_id)
    n_steps = cfg.n_steps()
    snap_steps = cfg.snapshot_steps()
    samples = []
    state = ParticleState(init.phases.copy(), t=init.t)
    if 0 in snap_steps:
        samples.append((0.0, state.phases.copy()))
    sqrt_dt = np.sqrt(cfg.dt)
    chunk = max(1, cfg.noise_chunk)
    buffered = None
    used = 0
    zero_events = 0
    for k in range(1, n_steps + 1):
        if buffered is None or used == buffered.shape[0]:
            buffered = rng.standard_normal((chunk, graph.n)) * sqrt_dt
            used = 0
        state = step(state, graph, kernel, cfg, buffered[used], _evaluator=ev)
        used += 1
        zero_events += ev.zero_degree_count
        if k in snap_steps:
            samples.append((k * cfg.dt, state.phases.copy()))
    provenance = {
        "graph_seed": graph.seed,
        "noise_seed": cfg.seed,
        "replica_id": cfg.replica_id,
        "dt": cfg.dt,
        "t_final": cfg.t_final,
        "renorm": cfg.renorm,
        "kernel": kernel.label,
    }
    return Trajectory(samples=samples, provenance=provenance, zero_degree_events=zero_events)


def simulate_ensemble(graph: Graph, inits: np.ndarray, kernel: KernelSpec, cfg: SimConfig,
                      replica_start: int = 0,
                      reduce_fn: Optional[Callable[[float, np.ndarray], None]] = None,
                      ) -> np.ndarray:
    """Batched integration of M replicas sharing one frozen graph.

    ``inits`` has shape (M, n).  Replica r uses the NOISE sub-stream of
    ``replica_start + r``, so a run split across chunks or workers
    produces the same numbers as a serial one.  ``reduce_fn(t, phases)``
    is called after every step with the full batch (for streaming
    statistics); the final (M, n) phases are returned.
    """
    M, n = inits.shape
    if n != graph.n:
        raise ValueError("init width and graph size disagree")
    ev = DriftEvaluator(graph, kernel, cfg)
    dtype = np.float32 if cfg.dtype == "float32" else np.float64
    theta = wrap_angles(np.asarray(inits, dtype=np.float64)).astype(dtype)
    gens = [stream(cfg.seed, NOISE, replica_start + r) for r in range(M)]
    n_steps = cfg.n_steps()
    sqrt_dt = dtype(np.sqrt(cfg.dt))
    dt = dtype(cfg.dt)
    chunk = max(1, cfg.noise_chunk)
    noise_buf = np.empty((chunk, M, n), dtype=dtype)
    used = chunk
    for k in range(1, n_steps + 1):
        if used == chunk:
            for r in range(M):
                noise_buf[:, r, :] = gens[r].standard_normal((chunk, n), dtype=dtype)
            noise_buf *= sqrt_dt
            used = 0
        drift = ev.drift(theta)
        np.multiply(drift, dt, out=drift)
        theta += drift
        theta += noise_buf[used]
        _wrap_inplace(theta)
        used += 1
        if reduce_fn is not None:
            reduce_fn(k * cfg.dt, theta)
    return theta.astype(np.float64)


def _wrap_inplace(theta: np.ndarray) -> None:
    """theta <- theta - floor(theta / 2pi) * 2pi, elementwise in place."""
    tmp = theta * (1.0 / TWO_PI)
    np.floor(tmp, out=tmp)
    tmp *= TWO_PI
    theta -= tmp


def simulate_ensemble_multigraph(graphs: Sequence[Graph], inits: np.ndarray,
                                 kernel: KernelSpec, cfg: SimConfig,
                                 replica_start: int = 0) -> np.ndarray:
    """Batched integration with one independent graph per replica.

    Used by the annealed experiments (graph resampled every replica).
    Only kernels with Fourier data are supported; the drift is evaluated
    through a stacked batched matmul over the replica adjacencies.
    """
    if kernel.fourier_modes is None:
        raise ValueError("multigraph ensemble needs a kernel with Fourier modes")
    M, n = inits.shape
    if len(graphs) != M:
        raise ValueError("need one graph per replica")
    dtype = np.float32 if cfg.dtype == "float32" else np.float64
    A = np.stack([g.dense(dtype) for g in graphs])  # (M, n, n)
    invdeg = []
    for g in graphs:
        inv, _ = _degree_normalizer(g, cfg.renorm)
        invdeg.append(np.broadcast_to(inv, (n,)))
    invdeg = np.stack(invdeg).astype(dtype)
    theta = wrap_angles(np.asarray(inits, dtype=np.float64)).astype(dtype)
    gens = [stream(cfg.seed, NOISE, replica_start + r) for r in range(M)]
    sqrt_dt = dtype(np.sqrt(cfg.dt))
    dt = dtype(cfg.dt)
    n_steps = cfg.n_steps()
    chunk = max(1, cfg.noise_chunk)
    noise_buf = np.empty((chunk, M, n), dtype=dtype)
    used = chunk
    plan = _canonical_modes(kernel.fourier_modes)
    for k in range(1, n_steps + 1):
        if used == chunk:
            for r in range(M):
                noise_buf[:, r, :] = gens[r].standard_normal((chunk, n), dtype=dtype)
            noise_buf *= sqrt_dt
            used = 0
        inter = np.zeros_like(theta)
        trig: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        conv: dict[int, tuple[np.ndarray, np.ndarray]] = {}

        def get_trig(j: int):
            if j not in trig:
                arg = theta if j == 1 else j * theta
                trig[j] = (np.cos(arg), np.sin(arg))
            return trig[j]

        for a, b, c, wt in plan:
            ab = abs(b)
            if ab not in conv:
                if ab == 0:
                    rowsum = A.sum(axis=2)
                    conv[ab] = (rowsum, np.zeros_like(theta))
                else:
                    cb, sb = get_trig(ab)
                    tr = np.stack([cb, sb], axis=-1)
                    prod = np.matmul(A, tr)      # (M, n, 2)
                    conv[ab] = (prod[..., 0], prod[..., 1])
            Pc, Ps = conv[ab]
            cr, ci = dtype(wt * c.real), dtype(wt * c.imag)
            sb_sign = dtype(np.sign(b))
            if a == 0:
                inter += cr * Pc
                if ci != 0.0 and sb_sign != 0.0:
                    inter -= (ci * sb_sign) * Ps
                continue
            Ca, Sa = get_trig(abs(a))
            sa = dtype(np.sign(a))
            U = cr * Ca - (ci * sa) * Sa
            V = (cr * sa) * Sa + ci * Ca
            inter += U * Pc
            if sb_sign != 0.0:
                inter -= sb_sign * (V * Ps)
        inter *= invdeg
        if kernel.intrinsic is not None:
            inter += kernel.intrinsic(theta).astype(dtype)
        inter *= dt
        theta += inter
        theta += noise_buf[used]
        _wrap_inplace(theta)
        used += 1
    return theta.astype(np.float64)


# ---------------------------------------------------------------------------
# order parameter
# ---------------------------------------------------------------------------

def order_parameter(measure: AtomicMeasure) -> tuple[float, float]:
    """(r, psi): polar form of the first moment of the normalized measure."""
    m = measure.mass()
    if m == 0.0:
        raise ValueError("order parameter of a zero-mass measure is undefined")
    z = measure.pair_exp(1) / m
    r = abs(z)
    psi = float(np.mod(np.angle(z), TWO_PI))
    return float(r), psi


def order_parameter_of_phases(phases: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (r, psi) over the last axis of a phase array."""
    z = np.exp(1j * np.asarray(phases)).mean(axis=-1)
    return np.abs(z), np.mod(np.angle(z), TWO_PI)
