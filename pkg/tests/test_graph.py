import math

import numpy as np
import pytest

from tsnelimits.data import BandwidthField, DensitySpec, PointCloud, sample
from tsnelimits.graph import IsolatedVertexError, RepulsionKernelSpec, build_affinities, build_q, export_edges
from tsnelimits.kernels import KernelSpec

EPA = KernelSpec("epanechnikov", 1)


def test_two_points():
    G = build_affinities(np.array([[0.0], [0.1]]), EPA, BandwidthField(), 1.0)
    P = G.dense()
    assert G.conditional.toarray()[0, 1] == pytest.approx(1.0)
    assert P[0, 1] == pytest.approx(0.5) and P.sum() == pytest.approx(1.0)


def test_three_points_hand_table():
    x = np.array([[0.0], [0.5], [1.0]])
    G = build_affinities(x, EPA, BandwidthField(), 0.8)
    eta = lambda t: 0.75 * max(1 - t * t, 0) / 0.8
    k1, k2 = eta(0.5 / 0.8), eta(1.0 / 0.8)
    assert k2 == 0.0
    cond = G.conditional.toarray()
    assert cond[1, 0] == pytest.approx(0.5) and cond[1, 2] == pytest.approx(0.5)
    assert cond[0, 1] == pytest.approx(1.0) and cond[0, 2] == 0.0
    assert G.weights.toarray()[0, 1] == pytest.approx(k1)
    assert G.degrees[1] == pytest.approx(2 * k1 + eta(0.0))


def test_random_cloud_invariants():
    density = DensitySpec.mixture(c=0.5)
    cloud = sample(density, 100, seed=3)
    sigma = BandwidthField("knn-proxy", density=density)
    G = build_affinities(cloud, EPA, sigma, 0.1)
    cond = G.conditional.toarray()
    assert np.allclose(cond.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.diag(cond) == 0)
    P = G.dense()
    assert np.allclose(P, P.T) and P.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(G.bandwidths, 0.1 * sigma(cloud.points[:, 0]))


def test_isolated_vertex():
    with pytest.raises(IsolatedVertexError):
        build_affinities(np.array([[0.0], [0.05], [5.0]]), EPA, BandwidthField(), 0.1)


def test_gaussian_kernel_2d_dense_match():
    cloud = sample(DensitySpec(d=2), 30, seed=1)
    spec = KernelSpec("gaussian", 2)
    G = build_affinities(cloud, spec, BandwidthField(), 0.3)
    x = cloud.points
    d2 = np.sum((x[:, None] - x[None]) ** 2, -1)
    W = np.exp(-d2 / (2 * 0.09))
    np.fill_diagonal(W, 0)
    assert np.allclose(G.conditional.toarray(), W / W.sum(1, keepdims=True), atol=1e-12)


def test_build_q():
    assert np.allclose(build_q(np.array([[0.0], [3.0]])).q, [[0, 0.5], [0.5, 0]])
    tri = np.array([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]])
    Q = build_q(tri)
    off = Q.q[~np.eye(3, dtype=bool)]
    assert np.allclose(off, 1 / 6)
    Y = np.random.default_rng(0).normal(size=(50, 2))
    for psi in [RepulsionKernelSpec(), RepulsionKernelSpec("gaussian")]:
        assert build_q(Y, psi).q.sum() == pytest.approx(1.0)


def test_export_edges(tmp_path):
    cloud = sample(DensitySpec(), 20, seed=0)
    G = build_affinities(cloud, EPA, BandwidthField(), 0.3)
    path = tmp_path / "edges.csv"
    export_edges(G, path, header="config x")
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    assert len(lines) - 1 == G.symmetrized.nnz
