import numpy as np
import pytest

import graphfluct as gf
from graphfluct.dynamics import (
    DriftEvaluator,
    ParticleState,
    SimConfig,
    order_parameter_of_phases,
    simulate,
    simulate_ensemble,
    simulate_ensemble_multigraph,
    step,
)
from graphfluct.kernels import KernelSpec, kuramoto, zero_kernel
from graphfluct.measures import AtomicMeasure
from graphfluct.rng import NOISE, stream
from oracles import two_particle_em

TWO_PI = 2.0 * np.pi


def test_zero_drift_is_brownian():
    g = gf.gen_erdos_renyi(6, 0.5, seed=1)
    cfg = SimConfig(dt=0.01, t_final=0.05, seed=4)
    init = ParticleState(np.linspace(0, 5, 6))
    traj = simulate(g, init, zero_kernel(), cfg)
    rng = stream(4, NOISE, 0)
    increments = rng.standard_normal((8, 6))[:5] * np.sqrt(0.01)
    want = np.mod(init.phases + increments.sum(axis=0), TWO_PI)
    assert np.allclose(traj.samples[-1][1], want, atol=1e-12)


def test_two_particle_oracle():
    g = gf.gen_erdos_renyi(2, 1.0, seed=0)
    K, dt, steps = 2.0, 1e-3, 100
    cfg = SimConfig(dt=dt, t_final=steps * dt, seed=11, noise_chunk=8)
    init = np.array([0.3, 1.9])
    traj = simulate(g, ParticleState(init), kuramoto(K), cfg)
    rng = stream(11, NOISE, 0)
    noise = np.vstack([rng.standard_normal((8, 2)) for _ in range(13)])[:steps] * np.sqrt(dt)
    want = two_particle_em(init, K, dt, steps, noise)
    assert np.abs(traj.samples[-1][1] - want).max() < 1e-14


def test_p1_expected_vs_actual_degree_identical():
    g = gf.gen_erdos_renyi(20, 1.0, seed=0)
    init = ParticleState(np.linspace(0, 6, 20))
    out = {}
    for renorm in ("expected", "actual"):
        cfg = SimConfig(dt=1e-2, t_final=0.1, seed=3, renorm=renorm)
        out[renorm] = simulate(g, init, kuramoto(2.0), cfg).samples[-1][1]
    assert np.array_equal(out["expected"], out["actual"])


def test_snapshot_zero_only():
    g = gf.gen_erdos_renyi(5, 1.0, seed=0)
    cfg = SimConfig(dt=1e-2, t_final=0.0, snapshot_times=[0.0], seed=1)
    init = ParticleState(np.zeros(5))
    traj = simulate(g, init, kuramoto(1.0), cfg)
    assert len(traj.samples) == 1
    assert traj.samples[0][0] == 0.0
    assert np.array_equal(traj.samples[0][1], init.phases)


def test_strong_order_under_dt_refinement():
    """Richardson with a shared Brownian path at dt, dt/2, dt/4: halving
    dt halves the endpoint RMS change (strong order 1, additive noise)."""
    n = 16
    g = gf.gen_erdos_renyi(n, 1.0, seed=2)
    kernel = kuramoto(2.0)
    T = 0.5
    fine_steps = 800

    def endpoint(dW, init, levels):
        dt = T / (fine_steps // levels)
        cfg = SimConfig(dt=dt, t_final=T, seed=0)
        ev = DriftEvaluator(g, kernel, cfg)
        state = ParticleState(init.copy())
        agg = dW.reshape(-1, levels, n).sum(axis=1)
        for k in range(fine_steps // levels):
            state = step(state, g, kernel, cfg, agg[k], _evaluator=ev)
        return state.phases

    rng = np.random.default_rng(8)
    d1s, d2s = [], []
    for _ in range(12):
        dW = rng.standard_normal((fine_steps, n)) * np.sqrt(T / fine_steps)
        init = rng.uniform(0, TWO_PI, n)
        x8 = endpoint(dW, init, 8)
        x4 = endpoint(dW, init, 4)
        x2 = endpoint(dW, init, 2)
        circ = lambda a, b: np.angle(np.exp(1j * (a - b)))  # noqa: E731
        d1s.append(np.mean(circ(x8, x4) ** 2))
        d2s.append(np.mean(circ(x4, x2) ** 2))
    d1 = np.sqrt(np.mean(d1s))
    d2 = np.sqrt(np.mean(d2s))
    assert d2 < d1
    assert 1.5 < d1 / d2 < 2.8


def test_subcritical_order_parameter_stays_small():
    # K = 0.5 below the synchronization threshold K_c = 1
    n = 2000
    g = gf.gen_erdos_renyi(n, 1.0, seed=5)
    cfg = SimConfig(dt=0.01, t_final=1.0, seed=6, dtype="float32")
    rng = stream(6, NOISE, 999)
    inits = rng.uniform(0, TWO_PI, (4, n))
    acc = []
    simulate_ensemble(g, inits, kuramoto(0.5), cfg,
                      reduce_fn=lambda t, th: acc.append(
                          order_parameter_of_phases(th)[0].mean()))
    assert np.mean(acc) < 0.1


def test_rotation_equivariance():
    n = 60
    g = gf.gen_erdos_renyi(n, 0.5, seed=3)
    cfg = SimConfig(dt=1e-3, t_final=0.2, seed=7)
    init = np.linspace(0, 5, n)
    c = 1.234
    t1 = simulate(g, ParticleState(init), kuramoto(2.0), cfg).samples[-1][1]
    t2 = simulate(g, ParticleState(init + c), kuramoto(2.0), cfg).samples[-1][1]
    assert np.abs(np.angle(np.exp(1j * (t2 - t1 - c)))).max() < 1e-12
    r1, psi1 = order_parameter_of_phases(t1)
    r2, psi2 = order_parameter_of_phases(t2)
    assert r1 == pytest.approx(r2, abs=1e-12)
    assert np.angle(np.exp(1j * (psi2 - psi1 - c))) == pytest.approx(0.0, abs=1e-12)


def test_determinism_and_replica_independence():
    g = gf.gen_erdos_renyi(10, 0.6, seed=0)
    cfg = SimConfig(dt=1e-2, t_final=0.1, seed=5, replica_id=3)
    init = ParticleState(np.linspace(0, 6, 10))
    a = simulate(g, init, kuramoto(1.0), cfg)
    b = simulate(g, init, kuramoto(1.0), cfg)
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a.samples, b.samples))
    cfg2 = SimConfig(dt=1e-2, t_final=0.1, seed=5, replica_id=4)
    c = simulate(g, init, kuramoto(1.0), cfg2)
    assert not np.array_equal(a.samples[-1][1], c.samples[-1][1])


def test_mean_field_drift_matches_measure_convolution():
    """p=1: the simulator's interaction equals n <mu^n, Gamma(theta_i, .)>."""
    n = 40
    g = gf.gen_erdos_renyi(n, 1.0, seed=0)
    rng = np.random.default_rng(2)
    phases = rng.uniform(0, TWO_PI, n)
    kernel = kuramoto(1.7)
    ev = DriftEvaluator(g, kernel, SimConfig())
    drift = ev.drift(phases)
    mu = gf.empirical_global(phases)
    for i in range(0, n, 7):
        want = mu.pair(lambda t: kernel.gamma(phases[i], t))
        assert drift[i] == pytest.approx(want, abs=1e-12)


def test_drift_bound_debug_mode():
    g = gf.gen_erdos_renyi(30, 0.5, seed=1)
    cfg = SimConfig(dt=1e-2, t_final=0.05, seed=2, debug_bounds=True)
    simulate(g, ParticleState(np.zeros(30)), kuramoto(2.0), cfg)  # must not raise


def test_zero_degree_vertex_under_actual_renorm():
    xi = np.zeros((4, 4), dtype=int)
    xi[1:, 1:] = 1  # vertex 0 isolated
    g = gf.graph_from_adjacency(xi, p=0.5)
    cfg = SimConfig(dt=1e-2, t_final=0.05, seed=0, renorm="actual", drift_mode="pairwise")
    traj = simulate(g, ParticleState(np.linspace(0, 3, 4)), kuramoto(2.0), cfg)
    assert traj.zero_degree_events == 5  # one isolated vertex, five steps


def test_intrinsic_drift():
    n = 8
    g = gf.gen_erdos_renyi(n, 1.0, seed=0)
    F = lambda th: 0.5 * np.cos(th)  # noqa: E731
    kernel = KernelSpec(gamma=lambda a, b: np.zeros(np.broadcast(a, b).shape),
                        intrinsic=F, fourier_modes=[], label="drift-only")
    ev = DriftEvaluator(g, kernel, SimConfig())
    phases = np.linspace(0, 6, n)
    assert np.allclose(ev.drift(phases), F(phases))


def test_state_size_mismatch_rejected():
    g = gf.gen_erdos_renyi(5, 1.0, seed=0)
    with pytest.raises(ValueError):
        step(ParticleState(np.zeros(4)), g, kuramoto(1.0), SimConfig(), np.zeros(4))


def test_order_parameter_examples():
    assert gf.order_parameter(AtomicMeasure(1, [np.pi / 2], [1.0])) == \
        pytest.approx((1.0, np.pi / 2))
    r, psi = gf.order_parameter(AtomicMeasure(1, [0.0, np.pi / 2], [0.5, 0.5]))
    assert (r, psi) == pytest.approx((1 / np.sqrt(2), np.pi / 4))
    grid = AtomicMeasure(1, TWO_PI * np.arange(10**6) / 10**6, np.full(10**6, 1e-6))
    r, _ = gf.order_parameter(grid)
    assert r < 1e-5
    with pytest.raises(ValueError):
        gf.order_parameter(AtomicMeasure(1, [0.0], [0.0]))


def test_multigraph_matches_single_graph_ensemble():
    n = 30
    graphs = [gf.gen_erdos_renyi(n, 0.5, seed=s, symmetric=True) for s in (1, 2)]
    rng = np.random.default_rng(0)
    inits = rng.uniform(0, TWO_PI, (2, n))
    cfg = SimConfig(dt=1e-2, t_final=0.1, seed=9)
    multi = simulate_ensemble_multigraph(graphs, inits, kuramoto(2.0), cfg)
    for r, g in enumerate(graphs):
        single = simulate_ensemble(g, inits[r:r + 1], kuramoto(2.0), cfg,
                                   replica_start=r)
        assert np.allclose(multi[r], single[0], atol=1e-12)


def test_trajectory_provenance():
    g = gf.gen_erdos_renyi(4, 1.0, seed=17)
    cfg = SimConfig(dt=1e-2, t_final=0.02, seed=23, replica_id=2)
    traj = simulate(g, ParticleState(np.zeros(4)), kuramoto(1.0), cfg)
    assert traj.provenance["graph_seed"] == 17
    assert traj.provenance["noise_seed"] == 23
    assert traj.provenance["replica_id"] == 2
    assert [t for t, _ in traj.samples] == [0.02]
