import math
import warnings

import numpy as np
import pytest
from scipy import integrate, stats

from tsnelimits.data import (
    BandwidthField, DensitySpec, load_points, pushforward_density_1d, pushforward_density_md, sample, save_points,
)
from tsnelimits.maps import PiecewiseLinearMap

MIX = DensitySpec.mixture(c=0.5)


def mixture_oracle(x, c=0.5, p=0.4, var=0.005):
    # unnormalized two-bump density, normalized on [-1, 1] by quadrature
    sd = math.sqrt(var)
    f = lambda t: p * (stats.norm.pdf(t - c, scale=sd) + stats.norm.pdf(t + c, scale=sd)) + 0.5 * (1 - 2 * p)
    total = integrate.quad(f, -1, 1, points=[-c, c], epsabs=1e-13)[0]
    return f(x) / total


def test_mixture_pdf_matches_formula_and_integrates():
    x = np.linspace(-1, 1, 41)
    assert np.allclose(MIX.pdf(x), mixture_oracle(x), rtol=1e-10)
    mass = integrate.quad(lambda t: float(MIX.pdf(t)), -1, 1, points=[-0.5, 0.5], epsabs=1e-13)[0]
    assert mass == pytest.approx(1.0, abs=1e-8)


def test_density_bounds_hold_on_grid():
    for spec in [MIX, DensitySpec.mixture(c=0.0), DensitySpec()]:
        vals = spec.pdf(spec.grid(2001))
        assert vals.min() >= spec.rho_min - 1e-12
        assert vals.max() <= spec.rho_max + 1e-12


def test_cdf_matches_quadrature():
    x = 0.3
    oracle = integrate.quad(lambda t: float(MIX.pdf(t)), -1, x, points=[-0.5], epsabs=1e-13)[0]
    assert MIX.cdf(x) == pytest.approx(oracle, abs=1e-9)


def test_uniform_sample_mean_clt():
    n = 100_000
    pts = sample(DensitySpec(), n, seed=11).points[:, 0]
    assert abs(pts.mean() - 0.5) < 3 / math.sqrt(12) / math.sqrt(n)


def test_mixture_sample_histogram():
    spec = DensitySpec.mixture(c=0.0)
    pts = sample(spec, 200_000, seed=1).points[:, 0]
    counts, edges = np.histogram(pts, bins=20, range=(-1, 1))
    emp = counts / (pts.size * np.diff(edges))
    exact = np.array([integrate.quad(lambda t: float(spec.pdf(t)), a, b)[0] / (b - a)
                      for a, b in zip(edges[:-1], edges[1:])])
    assert np.max(np.abs(emp - exact)) < 0.05


def test_single_point_and_reproducibility():
    one = sample(DensitySpec(), 1, seed=0).points
    assert one.shape == (1, 1) and 0 <= one[0, 0] <= 1
    a = sample(MIX, 50, seed=4).points
    b = sample(MIX, 50, seed=4).points
    assert np.array_equal(a, b)


def test_save_load_round_trip(tmp_path):
    cloud = sample(DensitySpec(d=2), 20, seed=2)
    path = tmp_path / "pts.csv"
    save_points(cloud, path, header="config abc")
    assert path.read_text().startswith("# config abc")
    assert np.array_equal(load_points(path).points, cloud.points)


def test_bandwidth_fields():
    assert np.all(BandwidthField()(np.linspace(0, 1, 5)) == 1.0)
    knn = BandwidthField("knn-proxy", density=MIX)
    x = np.array([-0.9, 0.0, 0.5])
    assert np.allclose(knn(x), MIX.rho_max / MIX.pdf(x))
    lo, hi = knn.bounds()
    assert lo == pytest.approx(1.0) and hi == pytest.approx(MIX.rho_max / MIX.rho_min)
    with pytest.raises(ValueError):
        BandwidthField("knn-proxy")


def test_pushforward_identity_and_dilation():
    x = np.linspace(0, 1, 11)
    pf = pushforward_density_1d(PiecewiseLinearMap(x, x), DensitySpec())
    assert np.allclose(pf.values, 1.0) and pf.mass() == pytest.approx(1.0)
    pf2 = pushforward_density_1d(PiecewiseLinearMap(x, 2 * x), DensitySpec())
    assert np.allclose(pf2.values, 0.5) and pf2.edges[0][-1] == pytest.approx(2.0)
    assert pf2.l2_squared() == pytest.approx(0.5)


def test_pushforward_square_map():
    # rho_Y = 1 / (2 sqrt y); int_eps^1 rho_Y^2 = log(1/eps) / 4
    x = np.linspace(0, 1, 20001)
    pf = pushforward_density_1d(PiecewiseLinearMap(x, x * x), DensitySpec())
    eps = 0.01
    e = pf.edges[0]
    keep = e[:-1] >= eps
    approx = np.sum(pf.values[keep] ** 2 * np.diff(e)[keep])
    assert approx == pytest.approx(math.log(1 / eps) / 4, rel=1e-3)


def test_pushforward_nonmonotone_superposes_branches():
    x = np.linspace(0, 1, 101)
    T = PiecewiseLinearMap(x, np.abs(x - 0.5))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pf = pushforward_density_1d(T, DensitySpec())
    assert not pf.monotone
    assert np.allclose(pf.values, 2.0) and pf.mass() == pytest.approx(1.0)


def test_pushforward_md_histograms():
    g = (np.arange(40) + 0.5) / 40
    pts = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
    pf = pushforward_density_md(pts, bins=10, range_=[(0, 1), (0, 1)])
    assert np.allclose(pf.values, 1.0)
    rng = np.random.default_rng(0)
    two = np.concatenate([rng.normal(-3, 0.1, (300, 1)), rng.normal(3, 0.1, (100, 1))])
    pf = pushforward_density_md(two, bins=2, range_=[(-5, 5)])
    assert np.allclose(pf.values * pf.bin_volumes(), [0.75, 0.25])
    pair = pushforward_density_md(np.array([[0.0], [1.0]]), bins=2)
    assert np.allclose(pair.values * pair.bin_volumes(), [0.5, 0.5])
    with pytest.raises(ValueError):
        pushforward_density_md(np.zeros((5, 2)))
