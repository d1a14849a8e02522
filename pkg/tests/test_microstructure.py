import math

import numpy as np
import pytest
from scipy import integrate

from tsnelimits.microstructure import (
    CuttingMap, build_cutting_map, cutting_energy_scan, cutting_marginal, embedded_histogram, fit_slope, mu_schedule,
    staircase_cdf,
)


def test_single_strip_is_projection():
    cm = build_cutting_map(3, 2, 1)
    x = np.random.default_rng(0).random((100, 3))
    assert np.array_equal(cm(x), x[:, :2])


def test_offset_after_first_cut():
    cm = build_cutting_map(2, 1, 2, mu=0.1)
    assert cm(np.array([[0.3, 0.7]]))[0, 0] == pytest.approx(1.3)
    assert cm(np.array([[0.3, 0.2]]))[0, 0] == pytest.approx(0.3)
    # halfway up the ramp [0.45, 0.5]
    assert cm(np.array([[0.0, 0.475]]))[0, 0] == pytest.approx(0.5)


def test_lipschitz_and_ramp_jacobian():
    cm = build_cutting_map(2, 1, 4, mu=0.05)
    assert cm.lipschitz == pytest.approx(4 / 0.05)
    J = cm.jacobian(np.array([[0.5, 0.24], [0.5, 0.1]]))
    assert J[0, 0, 1] == pytest.approx(80.0) and J[1, 0, 1] == 0.0
    t = np.linspace(0, 1, 200001)
    g = cm.staircase(t)
    assert np.max(np.abs(np.diff(g) / np.diff(t))) == pytest.approx(80.0, rel=1e-6)
    assert cm.in_ramp(t).mean() == pytest.approx(cm.ramp_fraction, abs=1e-4)


def test_schedule_and_validation():
    assert mu_schedule(4, 0.5) == pytest.approx(0.25)
    assert build_cutting_map(2, 1, 9, alpha=0.5).mu == pytest.approx(1 / 9)
    assert build_cutting_map(3, 2, 16, rescaled=True).rescale == pytest.approx(0.5)
    with pytest.raises(ValueError):
        CuttingMap(2, 2, 3, 0.1)
    with pytest.raises(ValueError):
        build_cutting_map(2, 1, 3, alpha=1.0)


def test_marginal_is_a_density_and_matches_samples():
    cm = build_cutting_map(2, 1, 4, mu=0.1)
    mass = sum(integrate.quad(lambda y: float(cutting_marginal(cm, y)), a, a + 1, limit=200)[0] for a in range(4))
    assert mass == pytest.approx(1.0, abs=1e-8)
    x = np.random.default_rng(1).random((400_000, 2))
    y = cm(x)[:, 0]
    counts, edges = np.histogram(y, bins=64, range=(0, 4))
    emp = counts / (y.size * np.diff(edges))
    cdf = lambda v: integrate.quad(lambda t: float(cutting_marginal(cm, t)), 0, v, limit=200)[0]
    exact = np.array([(cdf(b) - cdf(a)) / (b - a) for a, b in zip(edges[:-1], edges[1:])])
    assert np.max(np.abs(emp - exact)) < 0.02
    assert staircase_cdf(cm, -1.0) == 0.0 and staircase_cdf(cm, 3.0) == 1.0


def test_histogram_mass():
    cm = build_cutting_map(2, 1, 3)
    y = cm(np.random.default_rng(2).random((1000, 2)))
    pf = embedded_histogram(cm, y)
    assert pf.mass() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        embedded_histogram(cm, y, bins_per_unit=1)


def test_fit_slope():
    ks = [2, 4, 8, 16]
    assert fit_slope(ks, [3 - 2 * math.log(k) for k in ks]) == pytest.approx(-2.0)


def test_small_scan_shapes():
    scan = cutting_energy_scan([2, 4, 8], n_samples=50_000)
    assert len(scan.rows) == 3
    assert all(abs(r.mass - 1) < 1e-12 for r in scan.rows)
    assert scan.repulsion_slope < -0.8
    with pytest.raises(ValueError):
        cutting_energy_scan([2], potential="quadratic")
