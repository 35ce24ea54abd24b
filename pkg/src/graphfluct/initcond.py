"""Initial-condition samplers and the fluctuation fields they seed.

Three families: i.i.d. draws from a base law (independent of the graph
by construction), a geometrically ergodic Markov chain on a 16-point
torus grid (a summable-mixing example), and the graph-adapted recursion
that produces non-universal fluctuations.  The recursion walks vertices
in order: the next phase is 0 or pi/2 according to which of the two
centered neighbour counts among already-placed vertices is smaller,
with a uniform tie-break from a dedicated sub-stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dynamics import ParticleState
from .graph import Graph
from .measures import (
    TWO_PI,
    AtomicMeasure,
    FluctuationField,
    PairField,
    SpectralField,
    empirical_global,
    fluctuation,
)
from .rng import INIT, stream

TWO_POINT_ATOMS = AtomicMeasure(1, [0.0, np.pi / 2], [0.5, 0.5], label="half_0_half_pi2")


@dataclass
class InitSpec:
    kind: str                       # iid_uniform | iid_two_point | iid_custom | mixing | graph_adapted
    sampler: Optional[Callable] = None   # rng, n -> phases  (iid_custom)
    mixing_start: int = 0
    allow_any_p: bool = False       # graph_adapted outside symmetric p=1/2
    tie_break: str = "uniform"      # "uniform" (the stated recursion) | "zero"
    label: str = ""

    def mu0(self) -> AtomicMeasure | None:
        """Reference law when it is one of the named ones."""
        if self.kind == "iid_two_point":
            return TWO_POINT_ATOMS
        return None


def _mixing_chain(rng: np.random.Generator, n: int, start: int, states: int = 16,
                  hold: float = 0.9) -> np.ndarray:
    """Cyclic chain: advance one grid step w.p. ``hold``, else jump to a
    uniform state.  Doubly stochastic, uniform stationary law,
    geometrically ergodic (uniform restart), so alpha-mixing is summable."""
    path = np.empty(n, dtype=np.int64)
    jumps = rng.random(n)
    uniforms = rng.integers(0, states, size=n)
    x = start % states
    for i in range(n):
        if jumps[i] < hold:
            x = (x + 1) % states
        else:
            x = int(uniforms[i])
        path[i] = x
    return TWO_PI * path / states


def _graph_adapted(rng_init: np.random.Generator, rng_ties: np.random.Generator,
                   graph: Graph, tie_break: str = "uniform") -> np.ndarray:
    """Recursion over vertices using the centered column sums restricted
    to the two phase groups; phases live in {0, pi/2} exactly.

    With the uniform tie-break the construction is exchangeable under
    relabeling the two phases, which makes the limiting second-order
    field swap-symmetric (and the order-parameter fluctuation exactly
    centered).  ``tie_break="zero"`` breaks that symmetry on purpose and
    produces a visible dephasing of the phase fluctuation.
    """
    n = graph.n
    p = graph.mean_edge_probability
    phases = np.empty(n)
    half_pi = np.pi / 2
    is_zero = np.zeros(n, dtype=bool)
    phases[0] = 0.0 if rng_init.random() < 0.5 else half_pi
    is_zero[0] = phases[0] == 0.0
    ties = rng_ties.random(n)
    for k in range(1, n):
        col = graph.column(k)[:k].astype(np.float64) / p - 1.0
        mask = is_zero[:k]
        r0 = float(col[mask].sum())
        rq = float(col.sum() - r0)
        if rq > r0:
            phases[k] = 0.0
        elif rq < r0:
            phases[k] = half_pi
        elif tie_break == "zero":
            phases[k] = 0.0
        else:
            phases[k] = 0.0 if ties[k] < 0.5 else half_pi
        is_zero[k] = phases[k] == 0.0
    return phases


def sample(spec: InitSpec, graph: Optional[Graph], n: int, seed: int,
           replica_id: int = 0) -> ParticleState:
    """Draw the time-0 phases; i.i.d. variants never touch the graph."""
    rng = stream(seed, INIT, replica_id)
    if spec.kind == "iid_uniform":
        return ParticleState(rng.uniform(0.0, TWO_PI, size=n))
    if spec.kind == "iid_two_point":
        return ParticleState(np.where(rng.random(n) < 0.5, 0.0, np.pi / 2))
    if spec.kind == "iid_custom":
        if spec.sampler is None:
            raise ValueError("iid_custom needs a sampler callable")
        return ParticleState(spec.sampler(rng, n))
    if spec.kind == "mixing":
        return ParticleState(_mixing_chain(rng, n, spec.mixing_start))
    if spec.kind == "graph_adapted":
        if graph is None:
            raise ValueError("graph_adapted initial condition needs the graph")
        if graph.n != n:
            raise ValueError("graph size and requested n disagree")
        if not graph.symmetric or abs(graph.mean_edge_probability - 0.5) > 1e-12:
            if not spec.allow_any_p:
                raise ValueError(
                    "graph_adapted is defined for symmetric graphs with p=1/2; "
                    "pass allow_any_p=True to extend")
        ties = stream(seed, INIT, replica_id, 1)
        return ParticleState(_graph_adapted(rng, ties, graph, spec.tie_break))
    raise ValueError(f"unknown init kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# initial fluctuation fields
# ---------------------------------------------------------------------------

def eta0(state, mu0_reference) -> FluctuationField:
    """sqrt(n) (mu_0^n - mu_0) as a pairing object."""
    emp = empirical_global(state)
    n = len(emp.weights)
    return fluctuation(emp, mu0_reference, np.sqrt(n), label="eta0_n")


def hat_eta0(state, graph: Graph) -> PairField:
    """<hat_eta_0^n, g> = n^(-3/2) sum_ij xi_hat_ij g(theta_i, theta_j)."""
    phases = np.asarray(getattr(state, "phases", state), dtype=np.float64)
    n = graph.n

    def weights():
        return graph.centered().dense() * (n ** -1.5)

    return PairField(phases, weights, label="hat_eta0_n")


def varpi0(state, graph: Graph, l: int = 0) -> PairField:
    """<varpi_0^{n,l}, g> = sqrt(n p)/n^2 sum_ij xi_hat_li xi_hat_ij g(...)."""
    phases = np.asarray(getattr(state, "phases", state), dtype=np.float64)
    n = graph.n
    p = graph.mean_edge_probability

    def weights():
        C = graph.centered()
        return (C.dense() * C.row(l)[:, None]) * (np.sqrt(n * p) / n**2)

    return PairField(phases, weights, label=f"varpi0_n[{l}]")


def gamma_conv_hat_eta0(state, graph: Graph, kernel, a_max: int = 16) -> SpectralField:
    """The 1-d field f -> <hat_eta_0^n, f(t1) Gamma(t1, t2)>; its mass at
    pi/2 is the non-universality witness."""
    return hat_eta0(state, graph).convolved_with_kernel(kernel, a_max)
