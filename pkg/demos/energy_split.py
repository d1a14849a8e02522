"""How the t-SNE objective splits into attraction and repulsion.

A small uniform sample is embedded by gradient descent from a random start.
Along the way the KL divergence is printed next to its two moving parts, and
at the end the energies are rescaled by the bandwidth to show the quantities
that have a large-sample limit.
"""
import numpy as np

from tsnelimits import BandwidthField, DensitySpec, KernelSpec, build_affinities, descend, kl_terms, sample
from tsnelimits.discrete import initialize, rescaled_energy

n, h = 300, 0.05
cloud = sample(DensitySpec(), n, seed=1)
P = build_affinities(cloud, KernelSpec("epanechnikov", 1), BandwidthField(), h)

Y = initialize(cloud.points, "random", h, seed=1)
print(f"{'step':>6} {'KL':>10} {'attraction':>11} {'repulsion':>10}")
for step in range(0, 3001, 1000):
    state = descend(P, Y, 1000 if step else 0, dt=n / 5, record_every=1000)
    Y = state.Y
    constant, att, rep, kl = kl_terms(P, Y)
    print(f"{step:>6} {kl:10.4f} {att:11.4f} {rep:10.4f}")

# the constant sum p log p does not depend on the embedding
print(f"\nentropy term of P: {constant:.4f}")

report = rescaled_energy(P, Y, h)
print(f"rescaled attraction {report.A_n:.4f}, rescaled repulsion {report.R_n:.4f}")
order = np.argsort(cloud.points[:, 0])
y = Y[order, 0]
flips = int(np.sum(np.diff(np.sign(np.diff(y))) != 0))
print(f"direction changes of the sorted embedding: {flips}")
