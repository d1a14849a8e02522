"""Random problem instances shared by several test files."""
import numpy as np

from tsnelimits.data import BandwidthField, PointCloud
from tsnelimits.graph import build_affinities
from tsnelimits.kernels import KernelSpec


def random_graph(n: int, seed: int, d: int = 1, h: float = 0.5):
    """Gaussian affinities on a random cloud; every pair is connected."""
    rng = np.random.default_rng(seed)
    cloud = PointCloud(rng.random((n, d)))
    return build_affinities(cloud, KernelSpec("gaussian", d), BandwidthField(), h), rng


def finite_difference_gradient(f, Y, step=1e-6):
    grad = np.zeros_like(Y)
    for idx in np.ndindex(Y.shape):
        Yp, Ym = Y.copy(), Y.copy()
        Yp[idx] += step
        Ym[idx] -= step
        grad[idx] = (f(Yp) - f(Ym)) / (2 * step)
    return grad
