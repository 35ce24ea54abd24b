import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import graphfluct as gf
from graphfluct.kernels import kuramoto
from graphfluct.measures import (
    AtomicMeasure,
    SpectralField,
    BandLimited2D,
    bl_dual_lower,
    cn_integrand,
    cn_remainder,
    fourier_coeffs,
    sobolev_norm,
    uniform_field,
    w1_circle,
)
from oracles import naive_fourier_1d

TWO_PI = 2.0 * np.pi


# --- empirical measures -----------------------------------------------------

def test_empirical_global_basics():
    m = gf.empirical_global(np.array([0.0]))
    assert m.mass() == 1.0 and m.locations[0] == 0.0
    m2 = gf.empirical_global(np.linspace(0, 5, 17))
    assert m2.mass() == pytest.approx(1.0, abs=1e-15)
    r, psi = gf.order_parameter(m2)
    z = m2.first_moment()
    assert r == pytest.approx(abs(z)) and psi == pytest.approx(np.angle(z) % TWO_PI)


def test_empirical_local_p1_equals_global():
    g = gf.gen_erdos_renyi(10, 1.0, seed=0)
    phases = np.linspace(0, 6, 10)
    loc = gf.empirical_local(phases, g, 3)
    glob = gf.empirical_global(phases)
    assert np.allclose(loc.weights, glob.weights)


def test_empirical_local_mass_identity():
    g = gf.gen_erdos_renyi(40, 0.4, seed=5)
    phases = np.zeros(40)
    for l in (0, 7):
        m = gf.empirical_local(phases, g, l)
        assert m.mass() == pytest.approx(g.degrees()[l] / g.expected_degree, abs=1e-14)


def test_empirical_local_hand_graph(hand_graph_4):
    phases = np.array([0.1, 0.2, 0.3, 0.4])
    m = gf.empirical_local(phases, hand_graph_4, 0)
    # row 0 of the hand graph is (1, 1, 0, 1), n p = 4 * 0.5 = 2
    assert np.allclose(m.weights, np.array([1, 1, 0, 1]) / 2.0)
    actual = gf.empirical_local(phases, hand_graph_4, 0, renorm="actual")
    assert np.allclose(actual.weights, np.array([1, 1, 0, 1]) / 3.0)


def test_empirical_pair():
    g = gf.gen_erdos_renyi(12, 1.0, seed=0)
    m = gf.empirical_pair(np.zeros(12), g)
    assert m.mass() == pytest.approx(1.0)
    xi = np.zeros((4, 4), dtype=int)
    xi[0, 1] = 1
    xi[1, 2] = 1  # rows 0 and 1 have disjoint supports
    g2 = gf.graph_from_adjacency(xi, p=0.5)
    assert gf.empirical_pair(np.zeros(4), g2).mass() == 0.0


def test_empirical_pair_mass_trend():
    means = []
    for n in (100, 400):
        devs = [abs(gf.empirical_pair(np.zeros(n), gf.gen_erdos_renyi(n, 0.5, seed=s)).mass() - 1.0)
                for s in range(30)]
        means.append(np.mean(devs))
    assert means[1] < means[0]


# --- pair field on T^2 -------------------------------------------------------

def test_pair_graph_measure_p1_vanishes():
    g = gf.gen_erdos_renyi(15, 1.0, seed=0)
    f = gf.pair_graph_measure(np.linspace(0, 6, 15), g)
    assert f.pair(lambda a, b: np.cos(a) * np.sin(b)) == 0.0
    assert f.mass() == 0.0


def test_pair_graph_measure_constant_pairing():
    g = gf.gen_erdos_renyi(25, 0.5, seed=3)
    f = gf.pair_graph_measure(np.linspace(0, 6, 25), g)
    want = g.centered().dense().sum() / 25**2
    assert f.pair(lambda a, b: np.ones(np.broadcast(a, b).shape)) == pytest.approx(want)


def test_pair_graph_measure_matches_drift_graph_term():
    """Pairing with Gamma(t1,t2) d1f(t1) equals the centered graph term of
    the drift decomposition, computed by an independent double loop."""
    n = 30
    g = gf.gen_erdos_renyi(n, 0.5, seed=11)
    rng = np.random.default_rng(0)
    phases = rng.uniform(0, TWO_PI, n)
    kernel = kuramoto(1.5)
    fld = gf.pair_graph_measure(phases, g)
    got = fld.pair(lambda t1, t2: kernel.gamma(t1, t2) * (-np.sin(t1)))  # f=cos, df=-sin
    A = g.centered().dense()
    want = 0.0
    for i in range(n):
        for j in range(n):
            want += A[i, j] * kernel.gamma(phases[i], phases[j]) * (-np.sin(phases[i]))
    want /= n**2
    assert got == pytest.approx(want, rel=1e-12)


def test_pair_field_fourier_vs_direct():
    n = 12
    g = gf.gen_erdos_renyi(n, 0.5, seed=2)
    rng = np.random.default_rng(1)
    phases = rng.uniform(0, TWO_PI, n)
    fld = gf.pair_graph_measure(phases, g)
    F = fld.fourier(3)
    A = g.centered().dense() / n**2
    for a in (-2, 0, 1):
        for b in (-1, 2):
            want = 0.0 + 0.0j
            for i in range(n):
                for j in range(n):
                    want += A[i, j] * np.exp(-1j * (a * phases[i] + b * phases[j]))
            want /= TWO_PI
            assert F.coeff(a, b) == pytest.approx(want, abs=1e-12)


# --- fluctuation fields -------------------------------------------------------

def test_fluctuation_zero_and_linearity():
    atoms = AtomicMeasure(1, [0.1, 2.0], [0.5, 0.5])
    fl = gf.fluctuation(atoms, atoms, 3.0)
    assert fl.pair(np.cos) == 0.0
    ref = uniform_field(8)
    fl2 = gf.fluctuation(atoms, ref, np.sqrt(2))
    f = np.cos
    g2 = np.sin
    lhs = fl2.pair(lambda t: 2.0 * f(t) + 0.5 * g2(t))
    rhs = 2.0 * fl2.pair(f) + 0.5 * fl2.pair(g2)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_eta_pairing_with_mode():
    phases = np.array([0.3, 1.0, 4.0])
    emp = gf.empirical_global(phases)
    ref = uniform_field(4)
    fl = gf.fluctuation(emp, ref, np.sqrt(3.0))
    want = np.sqrt(3.0) * (np.exp(1j * phases).mean() - 0.0)
    assert fl.pair_exp(1) == pytest.approx(want)


def test_zetatilde_zeta_identity(hand_graph_4):
    """Degree renormalisation identity: sqrt(np/d_l) (tilde-zeta - D mu)
    equals the actual-degree fluctuation, exactly, pairing by pairing."""
    g = hand_graph_4
    n, p, l = 4, 0.5, 0
    phases = np.array([0.2, 1.1, 3.0, 5.5])
    mu = AtomicMeasure(1, [0.5, 2.5], [0.4, 0.6])  # arbitrary reference
    d_l = g.degrees()[l]
    zeta_tilde = gf.fluctuation(gf.empirical_local(phases, g, l), mu, np.sqrt(n * p))
    zeta_d = gf.fluctuation(gf.empirical_local(phases, g, l, renorm="actual"), mu,
                            np.sqrt(d_l))
    D_nl = np.sqrt(n * p) * (g.centered().row(l).mean())
    for f in (np.cos, np.sin, lambda t: np.cos(3 * t)):
        lhs = zeta_d.pair(f)
        rhs = np.sqrt(n * p / d_l) * (zeta_tilde.pair(f) - D_nl * mu.pair(f))
        assert lhs == pytest.approx(rhs, abs=1e-12)


# --- Fourier / Sobolev --------------------------------------------------------

def test_fourier_dirac_and_uniform_grid():
    d = AtomicMeasure(1, [0.0], [1.0])
    F = d.fourier(5)
    assert np.allclose(F.coeffs, 1.0 / np.sqrt(TWO_PI))
    grid = AtomicMeasure(1, TWO_PI * np.arange(10) / 10, np.full(10, 0.1))
    G = grid.fourier(5)
    for a in range(-5, 6):
        want = 0.1 * 10 / np.sqrt(TWO_PI) if a % 10 == 0 else 0.0
        assert abs(G.coeff(a) - want) < 1e-12


def test_fourier_vs_naive_oracle(rng):
    locs = rng.uniform(0, TWO_PI, 5)
    w = rng.normal(size=5)
    F = fourier_coeffs(AtomicMeasure(1, locs, w), 6)
    want = naive_fourier_1d(locs, w, 6)
    assert np.abs(F.coeffs - want).max() < 1e-14


def test_sobolev_norm_zero_and_dirac():
    assert sobolev_norm(SpectralField(1, np.zeros(9)), 1.0) == 0.0
    # || delta ||_{-1}^2 -> coth(pi)/2 (series sum_a (1+a^2)^{-1} = pi coth(pi)),
    # independent of the atom location; A_max=4096 leaves a 2/(2 pi A) tail
    for theta in (0.0, 2.2):
        F = AtomicMeasure(1, [theta], [1.0]).fourier(4096)
        val = sobolev_norm(F, 1.0) ** 2
        want = np.cosh(np.pi) / np.sinh(np.pi) / 2.0
        assert abs(val - want) < 1e-3


def test_sobolev_tail_bound():
    F1 = AtomicMeasure(1, [1.0], [1.0]).fourier(64)
    F2 = AtomicMeasure(1, [1.0], [1.0]).fourier(128)
    r = 2.0
    tail = sum((1 + a * a) ** (-r) for a in range(65, 129)) * 2 / TWO_PI
    diff = sobolev_norm(F2, r) ** 2 - sobolev_norm(F1, r) ** 2
    assert 0 <= diff <= tail * 1.001


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.0, 6.28), min_size=1, max_size=6),
       st.floats(0.5, 2.0), st.floats(0.1, 2.0))
def test_sobolev_monotone_in_r(locs, r, dr):
    F = AtomicMeasure(1, locs, np.ones(len(locs))).fourier(32)
    assert sobolev_norm(F, r + dr) <= sobolev_norm(F, r) + 1e-12


def test_hermitian_symmetry_of_real_measures(rng):
    locs = rng.uniform(0, TWO_PI, 7)
    F = AtomicMeasure(1, locs, rng.normal(size=7)).fourier(10)
    assert F.is_hermitian()


# --- distances -----------------------------------------------------------------

def test_w1_exact_cases():
    d0 = AtomicMeasure(1, [0.0], [1.0])
    assert w1_circle(d0, d0) == 0.0
    for eps in (0.1, 1.0, 3.0):
        de = AtomicMeasure(1, [eps], [1.0])
        assert w1_circle(d0, de) == pytest.approx(min(eps, TWO_PI - eps), abs=1e-12)


def test_w1_rejects_non_probability():
    bad = AtomicMeasure(1, [0.0], [0.7])
    good = AtomicMeasure(1, [0.0], [1.0])
    with pytest.raises(ValueError):
        w1_circle(bad, good)


def test_w1_empirical_uniform_decay():
    rng = np.random.default_rng(3)
    u = uniform_field(16)
    means = []
    for n in (64, 256, 1024):
        vals = []
        for _ in range(12):
            emp = gf.empirical_global(rng.uniform(0, TWO_PI, n))
            vals.append(w1_circle(emp, u))
        means.append(np.mean(vals))
    # ~ n^{-1/2}: each 4x n step should cut the mean roughly in half
    assert means[1] < 0.75 * means[0]
    assert means[2] < 0.75 * means[1]


def test_bl_dual_lower_bounds_w1(rng):
    for _ in range(5):
        a = AtomicMeasure(1, rng.uniform(0, TWO_PI, 6), np.full(6, 1 / 6))
        b = AtomicMeasure(1, rng.uniform(0, TWO_PI, 4), np.full(4, 0.25))
        lo = bl_dual_lower(a, b, a_max=12)
        hi = w1_circle(a, b)
        assert -1e-12 <= lo <= hi + 1e-9


def test_bl_dual_quality_on_dirac_pair():
    # two nearby atoms: d_BL = W1 = 0.5, reachable by a Lipschitz tent;
    # 16 modes of smoothing should retain most of it
    a = AtomicMeasure(1, [0.0], [1.0])
    b = AtomicMeasure(1, [0.5], [1.0])
    lo = bl_dual_lower(a, b, a_max=16)
    assert 0.3 <= lo <= 0.5 + 1e-9


def test_bl_distance_dispatch():
    a = AtomicMeasure(1, [0.0], [1.0])
    b = AtomicMeasure(1, [0.5], [1.0])
    lo, hi = gf.bl_distance(a, b, method="both")
    assert lo <= hi == pytest.approx(0.5, abs=1e-12)
    assert gf.bl_distance(a, a, method="dual") == 0.0


# --- remainder -------------------------------------------------------------------

def test_cn_zero_for_complete_graph():
    g = gf.gen_erdos_renyi(8, 1.0, seed=0)
    gtest = BandLimited2D({(1, 0): 0.3 + 0.1j, (1, -2): 0.2})
    phases = np.linspace(0, 6, 8)
    assert cn_integrand(phases, g, gtest, kuramoto(2.0)) == 0.0


def test_cn_integrand_vs_triple_loop(hand_graph_5):
    g = hand_graph_5
    rng = np.random.default_rng(5)
    phases = rng.uniform(0, TWO_PI, 5)
    gtest = BandLimited2D({(1, 0): 0.3 + 0.1j, (2, -1): 0.1j})
    kernel = kuramoto(1.3)
    A = g.centered().dense()
    want = 0.0
    for i in range(5):
        for j in range(5):
            for k in range(5):
                want += A[i, j] * A[i, k] * gtest.d1(phases[i], phases[j]) * \
                    kernel.gamma(phases[i], phases[k])
                want += A[i, j] * A[j, k] * gtest.d2(phases[i], phases[j]) * \
                    kernel.gamma(phases[j], phases[k])
    want /= 5**3
    got = cn_integrand(phases, g, gtest, kernel)
    assert got == pytest.approx(want, rel=1e-12)


def test_cn_remainder_trapezoid(hand_graph_5):
    g = hand_graph_5
    rng = np.random.default_rng(6)
    snaps = [(0.0, rng.uniform(0, TWO_PI, 5)), (0.5, rng.uniform(0, TWO_PI, 5)),
             (1.0, rng.uniform(0, TWO_PI, 5))]
    gtest = BandLimited2D({(1, 1): 0.2})
    kernel = kuramoto(1.0)
    vals = [cn_integrand(ph, g, gtest, kernel) for _, ph in snaps]
    want = 0.5 * (vals[0] + vals[1]) * 0.5 + 0.5 * (vals[1] + vals[2]) * 0.5
    assert cn_remainder(snaps, g, gtest, kernel, 1.0) == pytest.approx(want, rel=1e-12)
    assert cn_remainder(snaps[:1], g, gtest, kernel, 1.0) == 0.0


def test_testfunction2d_real_and_norm():
    gtest = BandLimited2D({(1, 2): 0.5 + 0.25j})
    t1, t2 = np.meshgrid(np.linspace(0, 6, 9), np.linspace(0, 6, 9))
    vals = gtest(t1, t2)
    assert np.isrealobj(vals)
    # Hermitian completion doubled the mode set
    want = np.sqrt(2 * (1 + 1 + 4) ** 3 * abs(TWO_PI * (0.5 + 0.25j)) ** 2)
    assert gtest.h_norm(3.0) == pytest.approx(want)


def test_mass_identities_p1():
    """p=1: nu_hat, varpi vanish; zeta^{n,l} == eta^n."""
    g = gf.gen_erdos_renyi(20, 1.0, seed=0)
    phases = np.linspace(0.0, 6.0, 20)
    assert gf.pair_graph_measure(phases, g).mass() == 0.0
    ref = uniform_field(8)
    eta = gf.fluctuation(gf.empirical_global(phases), ref, np.sqrt(20))
    zeta = gf.fluctuation(gf.empirical_local(phases, g, 2), ref, np.sqrt(20 * 1.0))
    for f in (np.cos, np.sin):
        assert zeta.pair(f) == pytest.approx(eta.pair(f), abs=1e-12)
