import math

import numpy as np
import pytest
from scipy import integrate

from tsnelimits._pairs import pair_integral, tent_table
from tsnelimits.maps import PiecewiseLinearMap


def test_linear_map_jacobians_and_cells():
    g = np.linspace(0, 1, 5)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    T = PiecewiseLinearMap((g, g), np.stack([2 * gx + gy, gx - gy, gy], -1))
    assert T.d == 2 and T.m == 3
    assert np.allclose(T.jacobians(), [[2, 1], [1, -1], [0, 1]])
    assert T.cell_volumes().sum() == pytest.approx(1.0)
    assert np.allclose(T.scaled(3).values, 3 * T.values)


def test_one_dimensional_map_call():
    x = np.array([0.0, 0.5, 1.0])
    T = PiecewiseLinearMap(x, np.array([0.0, 2.0, 1.0]))
    assert np.allclose(T(np.array([0.25, 0.75])), [1.0, 1.5])
    assert np.allclose(T.jacobians()[:, 0, 0], [4.0, -2.0])
    with pytest.raises(ValueError):
        PiecewiseLinearMap(np.array([0.0, 0.0, 1.0]), np.zeros(3))


def test_from_function():
    T = PiecewiseLinearMap.from_function(lambda x: x * x, np.linspace(0, 1, 3))
    assert np.allclose(T.values[:, 0], [0, 0.25, 1])


def test_pair_integral_constant_kernel():
    vals = np.random.default_rng(0).random((4, 5))
    delta = (0.3, 0.2)
    got = pair_integral(vals, delta, lambda r2: np.ones_like(r2))
    assert got == pytest.approx((vals.sum() * 0.06) ** 2, rel=1e-12)


def test_pair_integral_one_dimensional_closed_form():
    # two unit cells of width 1 with values 1 and 2 under K = 1 / (1 + r^2)
    h = 1.0
    g2 = lambda t: t * math.atan(t) - 0.5 * math.log1p(t * t)
    pair = lambda a, b, c, d: g2(b - c) - g2(b - d) - g2(a - c) + g2(a - d)
    exact = pair(0, 1, 0, 1) * 1 + 2 * pair(0, 1, 1, 2) * 2 + pair(1, 2, 1, 2) * 4
    got = pair_integral(np.array([1.0, 2.0]), (1.0,), lambda r2: 1 / (1 + r2 / h))
    assert got == pytest.approx(exact, rel=1e-6)


def test_tent_table_singular_entry():
    # zero offset entry for 1 / r^2 in three dimensions, by symmetry eight times the positive octant
    table = tent_table(lambda r2: 1 / r2, (1.0, 1.0, 1.0), (2, 2, 2), singular=True)
    f = lambda w, v, u: (1 - u) * (1 - v) * (1 - w) / (u * u + v * v + w * w)
    oracle = 8 * integrate.tplquad(f, 0, 1, 0, 1, 0, 1, epsabs=1e-10)[0]
    assert table[1, 1, 1] == pytest.approx(oracle, rel=1e-6)
