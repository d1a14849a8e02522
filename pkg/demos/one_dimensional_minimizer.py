"""The continuum minimizer for a two-bump density on the line.

The one dimensional limit energy is minimized by a monotone map whose slope
solves a scalar fixed-point problem.  This script solves it for a mixture of
uniform and bump densities and compares the energy of the optimal map with
that of the identity and of an affine stretch.
"""
import numpy as np

from tsnelimits import BandwidthField, DensitySpec, KernelSpec, PiecewiseLinearMap, continuum_energy, fixed_point_solve
from tsnelimits.solver1d import el_residual, existence_integral

kernel = KernelSpec("epanechnikov", 1)
for c in (0.0, 0.1, 0.5):
    rho = DensitySpec.mixture(c=c)
    sigma = BandwidthField("knn-proxy", density=rho)
    sol = fixed_point_solve(kernel, sigma, rho)
    x = sol.u_star.x
    slope = sol.u_star.u
    print(f"c={c}: b*={sol.b_star:.6f}  F={sol.F:.6f}  slope range [{slope.min():.4f}, {slope.max():.4f}]")
    print(f"       EL residual {el_residual(sol.u_star, kernel):.1e}, "
          f"consistency integral {existence_integral(sol, kernel):.10f}")

    grid = np.linspace(rho.lower, rho.upper, 2001)
    T_star = PiecewiseLinearMap(grid, sol.T_star(grid))
    for name, T in [("optimal", T_star), ("identity", PiecewiseLinearMap(grid, grid)),
                    ("stretch x2", PiecewiseLinearMap(grid, 2 * grid))]:
        e = continuum_energy(T, kernel, sigma, rho, 1.0)
        print(f"       {name:<10} energy {e.total:.6f}")
