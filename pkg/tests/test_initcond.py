import numpy as np
import pytest

import graphfluct as gf
from graphfluct.initcond import (
    TWO_POINT_ATOMS,
    InitSpec,
    eta0,
    gamma_conv_hat_eta0,
    hat_eta0,
    sample,
    varpi0,
)
from graphfluct.kernels import kuramoto
from graphfluct.measures import AtomicMeasure, uniform_field

TWO_PI = 2.0 * np.pi


def test_iid_two_point_fraction():
    state = sample(InitSpec("iid_two_point"), None, 10**6, seed=0)
    frac = np.mean(state.phases == 0.0)
    sigma = 0.5 / np.sqrt(10**6)
    assert abs(frac - 0.5) < 3 * sigma
    assert set(np.unique(state.phases)) == {0.0, np.pi / 2}


def test_iid_uniform_and_determinism():
    a = sample(InitSpec("iid_uniform"), None, 1000, seed=3, replica_id=2)
    b = sample(InitSpec("iid_uniform"), None, 1000, seed=3, replica_id=2)
    c = sample(InitSpec("iid_uniform"), None, 1000, seed=3, replica_id=5)
    assert np.array_equal(a.phases, b.phases)
    assert not np.array_equal(a.phases, c.phases)


def test_mixing_chain_uniform_marginal():
    state = sample(InitSpec("mixing"), None, 200000, seed=1)
    vals = np.unique(state.phases)
    assert len(vals) == 16
    counts = np.histogram(state.phases, bins=16, range=(0, TWO_PI))[0]
    # kicked cyclic chain mixes to uniform; crude 5-sigma band per cell
    expect = 200000 / 16
    assert np.abs(counts - expect).max() < 5 * np.sqrt(expect) + 40


def test_graph_adapted_requires_symmetric_half():
    g = gf.gen_erdos_renyi(20, 0.4, seed=0)  # asymmetric, p != 1/2
    with pytest.raises(ValueError):
        sample(InitSpec("graph_adapted"), g, 20, seed=0)
    state = sample(InitSpec("graph_adapted", allow_any_p=True), g, 20, seed=0)
    assert set(np.unique(state.phases)).issubset({0.0, np.pi / 2})


def test_graph_adapted_values_and_determinism():
    g = gf.gen_erdos_renyi(50, 0.5, seed=4, symmetric=True)
    a = sample(InitSpec("graph_adapted"), g, 50, seed=9)
    b = sample(InitSpec("graph_adapted"), g, 50, seed=9)
    assert np.array_equal(a.phases, b.phases)
    assert set(np.unique(a.phases)).issubset({0.0, np.pi / 2})


def test_graph_adapted_forced_all_ones():
    """All-ones symmetric adjacency declared at p=1/2: every centered
    entry is +1, so the recursion alternates deterministically between
    the groups after the initial draw (ties broken by the tie stream)."""
    n = 4
    xi = np.ones((n, n), dtype=int)
    g = gf.graph_from_adjacency(xi, p=0.5, symmetric=True)
    state = sample(InitSpec("graph_adapted"), g, n, seed=123)
    th = state.phases
    half_pi = np.pi / 2
    # hand recursion: R^k_phase counts already-placed vertices of that
    # phase (centered entries are all exactly 1)
    counts = {0.0: 0, half_pi: 0}
    counts[th[0]] += 1
    for k in range(1, n):
        r0, rq = counts[0.0], counts[half_pi]
        if rq > r0:
            assert th[k] == 0.0
        elif rq < r0:
            assert th[k] == half_pi
        counts[th[k]] += 1


def test_graph_adapted_marginal_uniform_over_resamples():
    m = 400
    n = 24
    hits = np.zeros(n)
    for s in range(m):
        g = gf.gen_erdos_renyi(n, 0.5, seed=1000 + s, symmetric=True)
        st = sample(InitSpec("graph_adapted"), g, n, seed=2000 + s)
        hits += (st.phases == 0.0)
    frac = hits / m
    sigma = 0.5 / np.sqrt(m)
    assert np.abs(frac - 0.5).max() < 4.5 * sigma


def test_sign_walk_increments():
    """S_n = 2 X_n - n is a +-1 walk: increment mean 0, variance 1,
    consecutive increments uncorrelated over graph resamples."""
    m = 300
    n = 30
    incs = np.empty((m, n - 1))
    for s in range(m):
        g = gf.gen_erdos_renyi(n, 0.5, seed=500 + s, symmetric=True)
        st = sample(InitSpec("graph_adapted"), g, n, seed=700 + s)
        steps = np.where(st.phases == 0.0, 1.0, -1.0)
        incs[s] = steps[1:]
    flat = incs.ravel()
    assert abs(flat.mean()) < 4 / np.sqrt(flat.size)
    assert abs(flat.var() - 1.0) < 0.01
    corr = np.mean(incs[:, :-1] * incs[:, 1:])
    assert abs(corr) < 4 / np.sqrt(incs[:, :-1].size)


def test_iid_independent_of_graph_bits():
    m = 200
    n = 100
    corrs = []
    for s in range(m):
        g = gf.gen_erdos_renyi(n, 0.5, seed=s)
        st = sample(InitSpec("iid_uniform"), None, n, seed=s)
        d = g.degrees().astype(float)
        c = np.corrcoef(st.phases, d)[0, 1]
        corrs.append(c)
    assert abs(np.mean(corrs)) < 4 / np.sqrt(m * n)


def test_eta0_zero_when_state_matches_reference():
    ref = AtomicMeasure(1, [0.0, np.pi], [0.5, 0.5])
    state = np.array([0.0, np.pi, 0.0, np.pi])
    fl = eta0(state, ref)
    for f in (np.cos, np.sin, lambda t: np.cos(2 * t)):
        assert fl.pair(f) == pytest.approx(0.0, abs=1e-12)


def test_eta0_iid_variance_matches_clt_covariance():
    n = 400
    m = 10000
    rng = np.random.default_rng(5)
    f = np.cos
    vals = np.empty(m)
    for k in range(m):
        phases = rng.uniform(0, TWO_PI, n)
        vals[k] = np.sqrt(n) * f(phases).mean()  # reference integral is 0
    var = vals.var(ddof=1)
    se = var * np.sqrt(2.0 / m)
    assert abs(var - 0.5) < 3 * se  # Var_unif(cos) = 1/2


def test_eta0_graph_adapted_two_point_limit():
    """eta_0^n(f) -> Z_1 f(0) + Z_2 f(pi/2) with Var(Z_i) = 1/4 and
    perfect anticorrelation."""
    m = 500
    n = 64
    f1 = np.cos
    vals = np.empty(m)
    for s in range(m):
        g = gf.gen_erdos_renyi(n, 0.5, seed=3000 + s, symmetric=True)
        st = sample(InitSpec("graph_adapted"), g, n, seed=4000 + s)
        fl = eta0(st, TWO_POINT_ATOMS)
        vals[s] = fl.pair(f1)
    # Var = (f(0) - f(pi/2))^2 / 4 = 1/4 for cos
    var = vals.var(ddof=1)
    se = var * np.sqrt(2.0 / m)
    assert abs(var - 0.25) < 3 * se


def test_hat_eta0_zero_at_p1():
    g = gf.gen_erdos_renyi(30, 1.0, seed=0)
    st = sample(InitSpec("iid_uniform"), None, 30, seed=1)
    fld = hat_eta0(st, g)
    assert fld.pair(lambda a, b: np.cos(a) * np.cos(b)) == 0.0
    assert fld.sobolev_norm(2.0, 8) == 0.0


def test_hat_eta0_formula(hand_graph_4):
    g = hand_graph_4
    phases = np.array([0.3, 1.0, 2.0, 5.0])
    fld = hat_eta0(phases, g)
    A = g.centered().dense()
    want = 0.0
    gfun = lambda a, b: np.cos(a) * np.sin(b)  # noqa: E731
    for i in range(4):
        for j in range(4):
            want += A[i, j] * gfun(phases[i], phases[j])
    want /= 4 ** 1.5
    assert fld.pair(gfun) == pytest.approx(want, rel=1e-12)


def test_hat_eta0_norm_decreases_with_n():
    draws = 40
    means = []
    for n in (100, 200, 400):
        vals = []
        for s in range(draws):
            g = gf.gen_erdos_renyi(n, 0.5, seed=s)
            st = sample(InitSpec("iid_uniform"), None, n, seed=10_000 + s)
            vals.append(hat_eta0(st, g).sobolev_norm(2.0, 8) ** 2)
        means.append(np.mean(vals))
    assert means[2] < means[1] < means[0]


def test_varpi0_p1_and_hand_graph(hand_graph_5):
    g1 = gf.gen_erdos_renyi(10, 1.0, seed=0)
    st = sample(InitSpec("iid_uniform"), None, 10, seed=1)
    assert varpi0(st, g1, 0).pair(lambda a, b: np.cos(a + b)) == 0.0

    g = hand_graph_5
    phases = np.linspace(0.2, 5.8, 5)
    fld = varpi0(phases, g, 1)
    A = g.centered().dense()
    gfun = lambda a, b: np.sin(a) * np.cos(b)  # noqa: E731
    want = 0.0
    for i in range(5):
        for j in range(5):
            want += A[1, i] * A[i, j] * gfun(phases[i], phases[j])
    want *= np.sqrt(5 * 0.5) / 25
    assert fld.pair(gfun) == pytest.approx(want, rel=1e-12)


def test_varpi0_norm_trend():
    draws = 30
    means = []
    for n in (100, 300):
        vals = []
        for s in range(draws):
            g = gf.gen_erdos_renyi(n, 0.5, seed=50 + s)
            st = sample(InitSpec("iid_uniform"), None, n, seed=20_000 + s)
            vals.append(varpi0(st, g, 0).sobolev_norm(5.5, 8) ** 2)
        means.append(np.mean(vals))
    assert means[1] < means[0]


def test_gamma_conv_hat_eta0_graph_adapted_sign():
    """Non-universality witness: the convolved second-order field puts
    negative mass at pi/2 (pairing with sin is negative on average)."""
    m = 60
    n = 256
    vals = []
    for s in range(m):
        g = gf.gen_erdos_renyi(n, 0.5, seed=7000 + s, symmetric=True)
        st = sample(InitSpec("graph_adapted"), g, n, seed=8000 + s)
        fld = gamma_conv_hat_eta0(st, g, kuramoto(1.0), a_max=4)
        vals.append(fld.pair(np.sin, grid=256))
    mean = np.mean(vals)
    se = np.std(vals, ddof=1) / np.sqrt(m)
    assert mean < -3 * se


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        sample(InitSpec("nope"), None, 5, seed=0)
