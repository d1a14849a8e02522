"""Double integrals of radial kernels against piecewise constant densities.

For a density that is constant on the cells of a uniform grid with spacing
``delta``, ``int int rho(y) rho(y') K(y - y') dy dy'`` reduces to a discrete
autocorrelation of the cell values against the table

    I[k] = int_{[-1,1]^m} K(delta * (k + u)) prod_i (1 - |u_i|) du,

scaled by ``prod_i delta_i^2``.  The tent weight is the overlap volume of two
cells.  Entries near the origin use a high order rule, and a Duffy
transformation when ``K`` has an integrable singularity at zero.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy import signal


def _gauss01(n):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def _tent_rule(n):
    """Nodes and weights on [-1, 1] for the weight 1 - |u| (weights sum to 1)."""
    t, w = _gauss01(n)
    u = np.concatenate([-t[::-1], t])
    wt = np.concatenate([(w * (1.0 - t))[::-1], w * (1.0 - t)])
    return u, wt


def _box_integral(f, delta, k, box_lo, box_hi, n):
    t, w = _gauss01(n)
    grids, weights = [], []
    for lo, hi in zip(box_lo, box_hi):
        grids.append(lo + (hi - lo) * t)
        weights.append((hi - lo) * w)
    mesh = np.meshgrid(*grids, indexing="ij")
    wmesh = np.prod(np.meshgrid(*weights, indexing="ij"), axis=0)
    r2 = sum((d * (kk + g)) ** 2 for d, kk, g in zip(delta, k, mesh))
    tent = np.prod([1.0 - np.abs(g) for g in mesh], axis=0)
    return float(np.sum(wmesh * tent * f(r2)))


def _duffy_integral(f, delta, corner, direction, n):
    """Integral over the unit box with the singular point at ``corner``."""
    m = len(delta)
    t, w = _gauss01(n)
    total = 0.0
    for k in range(m):
        axes = [t] * m
        mesh = np.meshgrid(*axes, indexing="ij")
        wmesh = np.prod(np.meshgrid(*([w] * m), indexing="ij"), axis=0)
        tt = mesh[k]
        v = [tt * mesh[j] if j != k else tt for j in range(m)]
        r2 = sum((delta[j] * v[j]) ** 2 for j in range(m))
        u = [corner[j] + direction[j] * v[j] for j in range(m)]
        tent = np.prod([1.0 - np.abs(uj) for uj in u], axis=0)
        jac = tt ** (m - 1)
        total += float(np.sum(wmesh * jac * tent * f(r2)))
    return total


def _near_entry(f, delta, k, singular, n):
    m = len(delta)
    total = 0.0
    for orth in itertools.product((-1.0, 1.0), repeat=m):
        lo = [min(0.0, o) for o in orth]
        hi = [max(0.0, o) for o in orth]
        corner = [-kk for kk in k]
        at_corner = all(c in (0.0, o) for c, o in zip(corner, orth))
        if singular and at_corner:
            direction = [o if c == 0.0 else -o for c, o in zip(corner, orth)]
            total += _duffy_integral(f, delta, corner, direction, n)
        else:
            total += _box_integral(f, delta, k, lo, hi, n)
    return total


def tent_table(f, delta, shape, singular: bool = False, near: int = 3,
               n_near: int = 12, n_far: int = 2) -> np.ndarray:
    """Table ``I[k]`` for offsets ``|k_i| < shape_i``.

    Parameters
    ----------
    f : callable
        Kernel as a function of the squared distance.
    delta : sequence of float
        Cell widths per axis.
    shape : sequence of int
        Number of cells per axis; the table has ``2 shape - 1`` entries per axis.
    singular : bool
        Whether ``f`` blows up at zero distance.
    """
    delta = [float(d) for d in delta]
    m = len(delta)
    size = [2 * s - 1 for s in shape]
    offsets = [np.arange(s) - (s // 2) for s in size]
    table = np.zeros(size)
    u, wt = _tent_rule(n_far)
    for combo in itertools.product(range(u.size), repeat=m):
        r2 = 0.0
        weight = 1.0
        for axis, q in enumerate(combo):
            shp = [1] * m
            shp[axis] = -1
            r2 = r2 + (delta[axis] * (offsets[axis] + u[q])).reshape(shp) ** 2
            weight *= wt[q]
        with np.errstate(divide="ignore"):
            table += weight * f(r2)
    ranges = [range(-min(near, s - 1), min(near, s - 1) + 1) for s in shape]
    for k in itertools.product(*ranges):
        idx = tuple(kk + s // 2 for kk, s in zip(k, size))
        table[idx] = _near_entry(f, delta, [float(kk) for kk in k], singular, n_near)
    return table


def pair_integral(values: np.ndarray, delta, f, singular: bool = False, **kw) -> float:
    """``sum_{p,q} c_p c_q int_{cell p} int_{cell q} K(y - y')`` for cell values ``c``."""
    values = np.asarray(values, dtype=float)
    table = tent_table(f, delta, values.shape, singular=singular, **kw)
    conv = signal.fftconvolve(table, values, mode="valid")
    return float(np.sum(values * conv) * np.prod(np.square(delta)))
