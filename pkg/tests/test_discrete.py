import math

import numpy as np
import pytest

from _instances import finite_difference_gradient, random_graph
from tsnelimits.data import BandwidthField, DensitySpec, sample
from tsnelimits.discrete import (
    descend, discrete_map, initialize, kl_divergence, kl_terms, postprocess, rescaled_attraction, rescaled_energy,
    rescaled_repulsion, rescaled_sne_energy, sne_gradient, tsne_gradient,
)
from tsnelimits.graph import RepulsionKernelSpec, build_affinities, build_q
from tsnelimits.kernels import KernelSpec

GAUSS_PSI = RepulsionKernelSpec("gaussian")


def test_kl_zero_and_hand_value():
    P = np.array([[0, 0.2, 0.1], [0.2, 0, 0.2], [0.1, 0.2, 0]])
    assert kl_divergence(P, P) == pytest.approx(0.0, abs=1e-15)
    Q = np.array([[0, 0.1, 0.15], [0.1, 0, 0.25], [0.15, 0.25, 0]])
    hand = 2 * (0.2 * math.log(2) + 0.1 * math.log(0.1 / 0.15) + 0.2 * math.log(0.2 / 0.25))
    assert kl_divergence(P, Q) == pytest.approx(hand, abs=1e-14)


def test_kl_nonnegative_and_infinite():
    G, rng = random_graph(20, 0)
    for _ in range(5):
        assert kl_divergence(G, build_q(rng.normal(size=(20, 2)))) >= 0
    P = np.array([[0, 0.5], [0.5, 0]])
    assert kl_divergence(P, np.zeros((2, 2))) == math.inf


@pytest.mark.parametrize("n", [3, 10, 100])
def test_kl_decomposition(n):
    G, rng = random_graph(n, n)
    Y = rng.normal(size=(n, 2))
    constant, att, rep, kl = kl_terms(G, Y)
    assert abs(kl - (constant + att + rep)) < 1e-10


def test_rescaled_energy_degenerate_and_pair():
    G, _ = random_graph(6, 1)
    rep = rescaled_energy(G, np.ones((6, 1)), 0.1)
    assert rep.A_n == 0.0 and rep.R_n == pytest.approx(0.0, abs=1e-15)
    # two points at distance a: A_n = (w / d) log(1 + a^2/h^2), R_n = -log(1 + a^2/h^2)
    G2 = build_affinities(np.array([[0.0], [0.1]]), KernelSpec("epanechnikov", 1), BandwidthField(), 1.0)
    a, h = 0.3, 0.2
    w = 0.75 * (1 - 0.01)
    frac = w / (w + 0.75)
    report = rescaled_energy(G2, np.array([0.0, a]), h)
    assert report.A_n == pytest.approx(frac * math.log(1 + a * a / h / h), abs=1e-14)
    assert report.R_n == pytest.approx(-math.log(1 + a * a / h / h), abs=1e-14)


def test_rescaled_energy_translation_invariant():
    G, rng = random_graph(15, 2)
    Y = rng.normal(size=(15, 1))
    r1, r2 = rescaled_energy(G, Y, 0.3), rescaled_energy(G, Y + 7.0, 0.3)
    for f in ("kl", "A_n", "R_n", "attraction", "repulsion"):
        assert getattr(r1, f) == pytest.approx(getattr(r2, f), abs=1e-11)


def test_rescaled_repulsion_brute_force():
    Y = np.random.default_rng(3).normal(size=(40, 2))
    h = 0.7
    D = np.sum((Y[:, None] - Y[None]) ** 2, -1) / h**2
    K = 1 / (1 + D)
    np.fill_diagonal(K, 0)
    assert rescaled_repulsion(Y, h) == pytest.approx(math.log(K.sum() / (40 * 39)), abs=1e-13)


def test_offset_depends_only_on_graph_without_self_degree():
    cloud = sample(DensitySpec(), 30, seed=5)
    G = build_affinities(cloud, KernelSpec("gaussian", 1), BandwidthField(), 0.3, include_self_in_degree=False)
    rng = np.random.default_rng(0)
    offsets = [rescaled_energy(G, rng.normal(size=(30, 1)), 0.3).offset for _ in range(3)]
    assert np.ptp(offsets) < 1e-10


def test_sne_energy_scaling():
    G, rng = random_graph(10, 4)
    Y = rng.normal(size=(10, 1))
    K = np.exp(-np.sum((Y[:, None] - Y[None]) ** 2, -1) / 0.25)
    np.fill_diagonal(K, 0)
    cond = G.conditional.toarray()
    att = np.sum(cond * (Y - Y.T) ** 2) / (10 * 0.25)
    assert rescaled_sne_energy(G, Y, 0.5) == pytest.approx(att + math.log(K.sum()), abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_gradients_match_finite_differences(seed):
    n = 5 + 3 * seed
    G, rng = random_graph(n, 100 + seed)
    Y = rng.normal(size=(n, 2))
    fd_t = finite_difference_gradient(lambda Z: kl_divergence(G, build_q(Z)), Y)
    fd_s = finite_difference_gradient(lambda Z: kl_divergence(G, build_q(Z, GAUSS_PSI)), Y)
    gt, gs = tsne_gradient(G, Y), sne_gradient(G, Y)
    assert np.linalg.norm(gt - fd_t) <= 1e-5 * np.linalg.norm(fd_t)
    assert np.linalg.norm(gs - fd_s) <= 1e-5 * np.linalg.norm(fd_s)
    assert np.allclose(gt.sum(0), 0, atol=1e-12) and np.allclose(gs.sum(0), 0, atol=1e-12)


def test_gradient_vanishes_when_p_equals_q():
    Y = np.random.default_rng(0).normal(size=(6, 2))
    for psi, grad in [(None, tsne_gradient), (GAUSS_PSI, sne_gradient)]:
        Q = build_q(Y, psi)
        assert np.allclose(grad(Q.q, Y), 0, atol=1e-14)


def test_descend_zero_steps_and_divergence_guard():
    G, rng = random_graph(8, 0)
    Y0 = rng.normal(size=(8, 1))
    st = descend(G, Y0, 0, 1.0)
    assert np.array_equal(st.Y, Y0) and st.step == 0
    with pytest.raises(ValueError):
        descend(G, Y0, 1, 0.0)
    blown = descend(G, Y0, 50, 1e14)
    assert blown.diverged and np.all(np.isfinite(blown.Y))


def test_descend_mixture_decreases_loss():
    density = DensitySpec.mixture(c=0.5)
    cloud = sample(density, 50, seed=0)
    h = 5 / 50
    sigma = BandwidthField("knn-proxy", density=density)
    G = build_affinities(cloud, KernelSpec("epanechnikov", 1), sigma, h)
    st = descend(G, initialize(cloud.points, "identity", h), 10_000, 50 / 5, record_every=500)
    tr = st.trace_array()
    assert tr[-1, 1] < tr[0, 1]
    tail = tr[2:, 4]
    assert np.all(np.diff(tail) <= 1e-12)


def test_initialize_and_postprocess():
    x = np.array([0.2, 0.4, 0.6])
    assert np.allclose(initialize(x, "identity", 0.5)[:, 0], x / 0.5)
    assert np.allclose(initialize(x, "continuum", 0.5, T_star=lambda t: 2 * t)[:, 0], 4 * x)
    assert initialize(x, "random", 0.5, seed=1, m=2).shape == (3, 2)
    with pytest.raises(ValueError):
        initialize(x, "continuum", 0.5)
    with pytest.raises(ValueError):
        initialize(x, "spectral", 0.5)
    assert np.allclose(postprocess(np.array([0.0, 1.0, 2.0]), 0.5), [0, 0.5, 1.0])
    assert np.allclose(postprocess(np.array([1.0, 2.0, 4.0]), 2.0), [0, 2, 6])


def test_discrete_map_monotone():
    x = np.array([0.5, 0.1, 0.3])
    T = discrete_map(x, np.array([3.0, 1.0, 2.0]))
    assert np.all(np.diff(T.values) > 0)
    assert T(np.array([0.2]))[0] == pytest.approx(1.5)
