"""Rescaling and cutting: why the limit energy behaves differently across dimensions.

Stretching a map by a factor changes the limit energy in a way that depends
only on the target dimension: one dimensional embeddings gain the log of the
factor, two dimensional ones are exactly invariant.  When the data dimension
exceeds the embedding dimension, cutting the domain into k strips and laying
them side by side drives the repulsion down like -log k while the attraction
stays bounded.
"""
import math

import numpy as np

from tsnelimits import DensitySpec, KernelSpec, PiecewiseLinearMap, continuum_energy, cutting_energy_scan

x = np.linspace(0.0, 1.0, 513)
line = PiecewiseLinearMap(x, x + 0.3 * np.sin(3.0 * x))
ax = np.linspace(0.0, 1.0, 33)
sheet = PiecewiseLinearMap.from_function(
    lambda p: np.stack([p[:, 0] + 0.2 * p[:, 1] ** 2, p[:, 1] + 0.1 * np.sin(p[:, 0])], -1), ax, ax)

k1, k2 = KernelSpec("epanechnikov", 1), KernelSpec("epanechnikov", 2)
u1, u2 = DensitySpec(), DensitySpec(d=2)
base1 = continuum_energy(line, k1, None, u1, math.inf).total
base2 = continuum_energy(sheet, k2, None, u2, math.inf).total
print(f"{'lambda':>7} {'line shift':>11} {'log lambda':>11} {'sheet shift':>12}")
for lam in (0.1, 0.5, 2.0, 10.0):
    d1 = continuum_energy(line.scaled(lam), k1, None, u1, math.inf).total - base1
    d2 = continuum_energy(sheet.scaled(lam), k2, None, u2, math.inf).total - base2
    print(f"{lam:7.1f} {d1:11.6f} {math.log(lam):11.6f} {d2:12.2e}")

print("\ncutting the unit square into k strips, embedded on a line")
scan = cutting_energy_scan([2, 4, 8, 16, 32], d=2, m=1, n_samples=200_000)
for row in scan.rows:
    print(f"  k={row.k:>2}  attraction {row.attraction:.4f}  repulsion {row.repulsion:8.4f}  "
          f"k * max density {row.k_max_density:.3f}")
print(f"repulsion slope against log k: {scan.repulsion_slope:.3f}")
