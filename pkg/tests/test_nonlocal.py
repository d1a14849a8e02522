import math

import numpy as np
import pytest
from scipy import integrate

from tsnelimits.data import DensitySpec
from tsnelimits.kernels import KernelSpec, phi_s
from tsnelimits.microstructure import build_cutting_map
from tsnelimits.nonlocal_energy import (
    GridMap, ResolutionError, cut_sensitivity, nonlocal_attraction, nonlocal_repulsion, rescaled_repulsion_limit,
)

EPA1 = KernelSpec("epanechnikov", 1)
EPA2 = KernelSpec("epanechnikov", 2)
UNI = DensitySpec()


def identity_1d(n=2049):
    return GridMap.from_function(lambda x: x, d=1, n=n)


def attraction_oracle_identity(h):
    # int_0^1 int eta(z) log(1 + z^2) over z in [-x/h, (1-x)/h] dx, eta = 3/4 (1 - z^2)
    def inner(x):
        lo, hi = max(-1.0, -x / h), min(1.0, (1 - x) / h)
        return integrate.quad(lambda z: 0.75 * (1 - z * z) * math.log1p(z * z), lo, hi)[0]
    return integrate.quad(inner, 0, 1, points=[h, 1 - h], limit=200)[0]


def test_constant_map():
    T = GridMap.from_function(lambda x: 0 * x + 0.3, d=1, n=513)
    assert nonlocal_attraction(T, EPA1, None, UNI, 0.05) == 0.0
    assert nonlocal_repulsion(T, UNI, 0.05) == pytest.approx(0.0, abs=1e-14)


def test_attraction_identity_against_quadrature():
    for h in (0.1, 0.03):
        got = nonlocal_attraction(identity_1d(), EPA1, None, UNI, h)
        assert got == pytest.approx(attraction_oracle_identity(h), abs=1e-6)


def test_attraction_rate_is_linear_in_h():
    limit = phi_s(EPA1, 1.0, [[1.0]])
    hs = np.array([0.1, 0.05, 0.02, 0.01])
    err = np.array([nonlocal_attraction(identity_1d(4097), EPA1, None, UNI, h) - limit for h in hs])
    assert np.allclose(err / hs, (err / hs)[0], rtol=0.02)


def test_attraction_linear_in_density():
    T = GridMap.from_function(lambda x: x + 0.1 * np.sin(6 * x), d=1, n=1025)
    one = nonlocal_attraction(T, EPA1, None, UNI, 0.05)
    two = nonlocal_attraction(T, EPA1, None, DensitySpec(mass=2.0), 0.05)
    assert two == pytest.approx(2 * one, rel=1e-12)


def test_resolution_guard():
    with pytest.raises(ResolutionError):
        nonlocal_attraction(identity_1d(33), EPA1, None, UNI, 0.01)


def test_repulsion_1d_closed_form():
    for h in (0.1, 0.01, 0.003):
        R = nonlocal_repulsion(identity_1d(), UNI, h)
        exact = 2 * math.atan(1 / h) - h * math.log1p(1 / h**2)
        assert rescaled_repulsion_limit(R, h, 1) == pytest.approx(exact, rel=1e-10)


def test_repulsion_direct_matches_pushforward():
    T = GridMap.from_function(lambda x: x ** 2, d=1, n=2049)
    a = nonlocal_repulsion(T, UNI, 0.1)
    b = nonlocal_repulsion(T, UNI, 0.1, method="direct")
    assert a == pytest.approx(b, abs=1e-5)


def test_repulsion_2d_identity_against_quadrature():
    h = 0.05
    f = lambda b, a: (1 - a) * (1 - b) / (1 + (a * a + b * b) / h**2)
    exact = 4 * integrate.dblquad(f, 0, 1, 0, 1, epsabs=1e-12)[0]
    T = GridMap.from_function(lambda p: p, d=2, n=257)
    assert math.exp(nonlocal_repulsion(T, DensitySpec(d=2), h)) == pytest.approx(exact, rel=1e-4)


def test_rescaled_limit_forms():
    assert rescaled_repulsion_limit(math.log(0.2), 0.1, 1) == pytest.approx(2.0)
    assert rescaled_repulsion_limit(0.0, 0.1, 2) == pytest.approx(100 / math.log(10))
    with pytest.raises(ValueError):
        rescaled_repulsion_limit(0.0, 0.1, 3)


def test_grid_map_basics():
    T = GridMap.from_function(lambda p: 2 * p, d=2, n=9)
    assert T.m == 2 and T.spacing == pytest.approx(1 / 8)
    J = T.jacobian()
    assert np.allclose(J, 2 * np.eye(2))
    assert np.allclose(T.scaled(0.5).values, T.values / 2)
    with pytest.raises(ValueError):
        GridMap(4, np.zeros(5))


def test_cut_sensitivity_no_cut_matches_projection():
    h = 0.1
    proj = GridMap.from_function(lambda p: p[:, 0], d=2, n=65)
    plain = nonlocal_attraction(proj, EPA2, None, DensitySpec(d=2), h)
    cm = build_cutting_map(2, 1, 1)
    assert cut_sensitivity(cm, EPA2, h) == pytest.approx(plain, rel=1e-3)


def test_cut_sensitivity_linear_in_k():
    h = 0.05
    ks = [2, 4, 8, 16]
    vals = [cut_sensitivity(build_cutting_map(2, 1, k, mu=0.005 * k * h), EPA2, h) for k in ks]
    slope = np.polyfit(ks, vals, 1)[0]
    assert slope > 0
    incr = np.diff(vals) / np.diff(ks)
    assert np.ptp(incr) <= 0.2 * np.mean(incr)


def test_cut_cost_scales_like_h_log():
    ratios = []
    for h in (0.1, 0.05, 0.025):
        a2, a4 = (cut_sensitivity(build_cutting_map(2, 1, k, mu=0.005 * k * h), EPA2, h) for k in (2, 4))
        ratios.append((a4 - a2) / 2 / (h * math.log1p(h**-2)))
    assert max(ratios) <= 1.25 * min(ratios)


def test_cut_sensitivity_precondition():
    with pytest.raises(ValueError):
        cut_sensitivity(build_cutting_map(2, 1, 4, mu=0.25), EPA2, 0.05)
