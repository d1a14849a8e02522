import math

import numpy as np
import pytest
from scipy import integrate, optimize

from tsnelimits.data import BandwidthField, DensitySpec
from tsnelimits.kernels import KernelSpec, LogPotential, theta
from tsnelimits.solver1d import (
    b_functional, el_residual, existence_integral, first_variation_F, fixed_point_solve, functional_F, make_profile,
    v_b,
)

EPA = KernelSpec("epanechnikov", 1)
MIX = DensitySpec.mixture(c=0.5)


def theta_quad(v):
    f = lambda z: 0.75 * (1 - z * z) * 2 * v**3 * z * z / (1 + v * v * z * z)
    return integrate.quad(f, -1, 1, epsabs=1e-14, epsrel=1e-13)[0]


@pytest.fixture(scope="module")
def uniform_solution():
    return fixed_point_solve(EPA, None, DensitySpec(), n_grid=513)


@pytest.fixture(scope="module")
def mixture_solution():
    return fixed_point_solve(EPA, BandwidthField("knn-proxy", density=MIX), MIX)


def test_v_b_values():
    assert v_b(EPA, 0.0, 1.0) == 0.0
    assert v_b(EPA, float(theta(EPA, 1.0)), 1.0) == pytest.approx(1.0, abs=1e-10)
    assert v_b(EPA, 1e6, 1.0) / 1e6 == pytest.approx(0.5, abs=1e-3)
    sr = np.array([0.5, 1.0, 2.0])
    assert np.allclose(theta(EPA, v_b(EPA, 2.0, sr)), 2.0 * sr, atol=1e-10)
    with pytest.raises(ValueError):
        v_b(EPA, -1.0, 1.0)


def test_b_functional_closed_forms():
    prof = make_profile(DensitySpec(), n_grid=20001)
    assert b_functional(prof.with_u(np.full(prof.x.size, 3.0))) == pytest.approx(3.0)
    assert b_functional(prof.with_u(prof.x + 1.0)) == pytest.approx(1 / math.log(2), rel=1e-8)
    assert b_functional(prof.with_u(prof.x)) == 0.0


def test_uniform_solution_matches_bisection_oracle(uniform_solution):
    root = optimize.brentq(lambda v: theta_quad(v) - v, 1e-3, 10.0, xtol=1e-14)
    assert np.max(np.abs(uniform_solution.u_star.u - root)) < 1e-8
    assert uniform_solution.b_star == pytest.approx(root, abs=1e-8)
    assert uniform_solution.residual < 1e-8


def test_existence_integral(uniform_solution, mixture_solution):
    assert existence_integral(uniform_solution, EPA) == pytest.approx(1.0, abs=1e-6)
    assert existence_integral(mixture_solution, EPA) == pytest.approx(1.0, abs=1e-6)


def test_mixture_solution_minimizes(mixture_solution):
    star = mixture_solution.u_star
    F0 = functional_F(star, EPA)
    assert F0 == pytest.approx(mixture_solution.F)
    assert el_residual(star, EPA) < 1e-8
    rng = np.random.default_rng(0)
    x = star.x
    for _ in range(100):
        coef = rng.uniform(-1, 1, 4)
        bump = sum(c * np.sin((k + 1) * math.pi * (x + 1) / 2 + rng.uniform(0, 6)) for k, c in enumerate(coef))
        u = star.u * (1.0 + 0.3 * bump / np.max(np.abs(bump)))
        assert functional_F(star.with_u(u), EPA) >= F0
    assert functional_F(star.with_u(1.1 * star.u), EPA) > F0


def test_map_is_increasing_from_zero(mixture_solution):
    T = mixture_solution.T_star
    assert T.values[0] == 0.0 and np.all(np.diff(T.values) > 0)


def test_first_variation(mixture_solution):
    star = mixture_solution.u_star
    x = star.x
    w = np.cos(3 * x) + 0.5
    assert abs(first_variation_F(star, w, EPA)) < 1e-7
    prof = star.with_u(1.0 + 0.5 * x * x)
    t = 1e-6
    fd = (functional_F(prof.with_u(prof.u + t * w), EPA) - functional_F(prof.with_u(prof.u - t * w), EPA)) / (2 * t)
    assert first_variation_F(prof, w, EPA) == pytest.approx(fd, rel=1e-4)


def test_first_variation_constant_closed_form():
    # u = c, w = 1, sigma = rho = 1 on [0, 1]: phi_1'(c) - 1/c
    prof = make_profile(DensitySpec(), n_grid=101, u=np.full(101, 2.0))
    phi_prime = 2 * integrate.quad(lambda z: 0.75 * (1 - z * z) * 2 * 2.0 * z * z / (1 + 4 * z * z), 0, 1)[0]
    assert first_variation_F(prof, np.ones(101), EPA) == pytest.approx(phi_prime - 0.5, abs=1e-10)


def test_functional_constant_one():
    prof = make_profile(DensitySpec(), n_grid=101, u=np.ones(101))
    phi1 = integrate.quad(lambda z: 0.75 * (1 - z * z) * math.log(1 + z * z), -1, 1)[0]
    assert functional_F(prof, EPA) == pytest.approx(phi1, abs=1e-12)


def test_log_potential_solver():
    res = fixed_point_solve(LogPotential(), None, DensitySpec(), n_grid=257)
    assert res.residual < 1e-8
    # theta(v) = v for the log potential: 2 v^2 / (1 + v^2) = 1
    assert np.allclose(res.u_star.u, 1.0, atol=1e-8)


def test_small_mass_rejected():
    with pytest.raises(ValueError):
        fixed_point_solve(EPA, None, DensitySpec(mass=0.4))
    with pytest.raises(ValueError):
        fixed_point_solve(KernelSpec("epanechnikov", 2), None, DensitySpec())
