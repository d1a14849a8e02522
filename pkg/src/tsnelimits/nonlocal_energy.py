"""Nonlocal attraction and repulsion at a finite bandwidth ``h``.

    A^h[T] = int int eta_{h sigma(x)}(|x - x'|) log(1 + |T(x) - T(x')|^2 / h^2) rho(x) dx dx'
    R^h[T] = log int int (1 + |T(x) - T(x')|^2 / h^2)^-1 rho(x) rho(x') dx dx'

The attraction is an outer rule over grid nodes with an inner Gauss-Legendre
rule over the kernel window clipped to the domain.  The repulsion is
evaluated in its pushforward form, as a double integral of the embedded
density against ``(1 + |y - y'|^2 / h^2)^-1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ._pairs import _gauss01, pair_integral
from .continuum import rasterize_pushforward
from .data import BandwidthField, DensitySpec, PushforwardDensity
from .kernels import KernelSpec
from .maps import PiecewiseLinearMap

GAUSSIAN_WINDOW = 6.0


class ResolutionError(ValueError):
    """The bandwidth is too small for the grid."""


@dataclass
class GridMap:
    """Map sampled on a uniform grid over ``[lower, upper]^d`` (d = 1 or 2).

    ``func`` optionally evaluates the map exactly at arbitrary points (an
    ``(k, d)`` array to ``(k, m)``); otherwise values are interpolated
    (piecewise linear in 1D, bilinear in 2D).  ``stencil`` is the accuracy
    order of the finite difference Jacobian.
    """

    n: int
    values: np.ndarray
    d: int = 1
    lower: float = 0.0
    upper: float = 1.0
    func: Callable | None = None
    stencil: int = 2
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("grid maps live on one or two dimensional domains")
        if self.n < 2 or not self.upper > self.lower:
            raise ValueError("grid spacing must be positive")
        if self.stencil not in (1, 2):
            raise ValueError("stencil order must be 1 or 2")
        v = np.asarray(self.values, dtype=float)
        shape = (self.n,) * self.d
        if v.shape == shape:
            v = v[..., None]
        if v.shape[:-1] != shape:
            raise ValueError(f"values of shape {v.shape} do not match a {shape} grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("map values must be finite")
        self.values = v

    @classmethod
    def from_function(cls, func, d: int = 1, n: int | None = None, lower: float = 0.0,
                      upper: float = 1.0, keep_func: bool = True, **kw) -> "GridMap":
        """Sample ``func`` (``(k, d)`` points to ``(k, m)`` or ``(k,)`` values)."""
        n = n or (2048 if d == 1 else 256)
        axis = np.linspace(lower, upper, n)
        pts = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
        wrapped = _vector_func(func)
        vals = wrapped(pts).reshape((n,) * d + (-1,))
        return cls(n, vals, d, lower, upper, wrapped if keep_func else None, **kw)

    @property
    def m(self) -> int:
        return self.values.shape[-1]

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.n)

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.n - 1)

    def nodes(self) -> np.ndarray:
        return np.stack(np.meshgrid(*([self.axis] * self.d), indexing="ij"), axis=-1).reshape(-1, self.d)

    def evaluate(self, points) -> np.ndarray:
        """Map values at ``points`` of shape ``(k, d)``; returns ``(k, m)``."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.d)
        if self.func is not None:
            return self.func(pts)
        if self.d == 1:
            return np.stack([np.interp(pts[:, 0], self.axis, self.values[:, j]) for j in range(self.m)], -1)
        interp = RegularGridInterpolator((self.axis, self.axis), self.values)
        return interp(np.clip(pts, self.lower, self.upper))

    def jacobian(self) -> np.ndarray:
        """Finite difference Jacobian at the nodes, shape ``(*grid, m, d)``."""
        grads = np.gradient(self.values, *([self.spacing] * self.d),
                            axis=tuple(range(self.d)), edge_order=self.stencil)
        if self.d == 1:
            grads = [grads]
        return np.stack(grads, axis=-1)

    def scaled(self, lam: float) -> "GridMap":
        func = None if self.func is None else (lambda p, f=self.func: lam * f(p))
        return GridMap(self.n, lam * self.values, self.d, self.lower, self.upper, func, self.stencil, dict(self.meta))

    def translated(self, shift) -> "GridMap":
        shift = np.asarray(shift, dtype=float)
        func = None if self.func is None else (lambda p, f=self.func: f(p) + shift)
        return GridMap(self.n, self.values + shift, self.d, self.lower, self.upper, func, self.stencil, dict(self.meta))

    def to_piecewise_linear(self) -> PiecewiseLinearMap:
        return PiecewiseLinearMap((self.axis,) * self.d, self.values)


def _vector_func(func):
    def wrapped(pts):
        pts = np.asarray(pts, dtype=float)
        out = np.asarray(func(pts[:, 0] if pts.shape[1] == 1 else pts), dtype=float)
        return out.reshape(pts.shape[0], -1)
    return wrapped


def _window(kernel: KernelSpec) -> float:
    return GAUSSIAN_WINDOW if kernel.family == "gaussian" else kernel.support


def _check_density(T: GridMap, rho: DensitySpec):
    if rho.d != T.d or rho.lower != T.lower or rho.upper != T.upper:
        raise ValueError("density and grid map must share the domain")


def _trapezoid_weights(n: int, step: float) -> np.ndarray:
    w = np.full(n, step)
    w[0] = w[-1] = 0.5 * step
    return w


# ---------------------------------------------------------------------------
# attraction


def _inner_1d(T: GridMap, kernel: KernelSpec, x: np.ndarray, bw: np.ndarray, h: float, n_inner: int):
    """``int eta_bw(|x - x'|) log(1 + |T(x) - T(x')|^2 / h^2) dx'`` on the clipped window."""
    t, w = _gauss01(n_inner)
    reach = _window(kernel) * bw
    lo = np.maximum(x - reach, T.lower)
    hi = np.minimum(x + reach, T.upper)
    Tx = T.evaluate(x[:, None])
    total = np.zeros(x.size)
    for a, b in ((lo, x), (x, hi)):
        xp = a[:, None] + (b - a)[:, None] * t[None, :]
        Tp = T.evaluate(xp.reshape(-1, 1)).reshape(xp.shape + (-1,))
        d2 = np.sum((Tp - Tx[:, None, :]) ** 2, axis=-1)
        eta = kernel.scaled(np.abs(xp - x[:, None]), bw[:, None])
        total += np.sum(eta * np.log1p(d2 / (h * h)) * w[None, :], axis=1) * (b - a)
    return total


def _inner_2d(evaluate, kernel: KernelSpec, pts: np.ndarray, bw: np.ndarray, h: float, n_inner: int,
              lower: float, upper: float, breaks=None):
    """Chord rule over the clipped disk: Gauss-Legendre in ``x2'`` and along each chord.

    ``breaks`` lists ``x2`` values where the map has kinks; the ``x2'`` range
    is split there so every panel sees a smooth integrand.
    """
    t, w = _gauss01(n_inner)
    reach = _window(kernel) * bw
    out = np.zeros(pts.shape[0])
    Tx = evaluate(pts)
    for i in range(pts.shape[0]):
        x1, x2, R = pts[i, 0], pts[i, 1], reach[i]
        cuts = [max(x2 - R, lower), x2, min(x2 + R, upper)]
        if breaks is not None:
            cuts += [b for b in breaks if cuts[0] < b < cuts[-1]]
        cuts = np.unique(cuts)
        a, b = cuts[:-1], cuts[1:]
        x2p = (a[:, None] + (b - a)[:, None] * t[None, :]).ravel()
        w2 = ((b - a)[:, None] * w[None, :]).ravel()
        half = np.sqrt(np.clip(R * R - (x2p - x2) ** 2, 0.0, None))
        c_lo = np.maximum(x1 - half, lower)
        c_hi = np.minimum(x1 + half, upper)
        total = 0.0
        for s_lo, s_hi in ((c_lo, np.clip(x1, c_lo, c_hi)), (np.clip(x1, c_lo, c_hi), c_hi)):
            x1p = s_lo[:, None] + (s_hi - s_lo)[:, None] * t[None, :]
            q = np.stack([x1p.ravel(), np.repeat(x2p, n_inner)], axis=-1)
            Tq = evaluate(q)
            d2 = np.sum((Tq - Tx[i]) ** 2, axis=-1)
            r = np.hypot(q[:, 0] - x1, q[:, 1] - x2)
            eta = kernel.scaled(r, bw[i])
            wq = (w2 * (s_hi - s_lo))[:, None] * w[None, :]
            total += float(np.sum(wq.ravel() * eta * np.log1p(d2 / (h * h))))
        out[i] = total
    return out


def nonlocal_attraction(T: GridMap, kernel: KernelSpec, sigma: BandwidthField | None, rho: DensitySpec,
                        h: float, n_inner: int = 24) -> float:
    """``A^h[T]`` with trapezoid outer weights ``rho(x) dx`` over the grid nodes.

    Raises
    ------
    ResolutionError
        If ``h * sigma_min`` is below twice the grid spacing.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    if kernel.d != T.d:
        raise ValueError("kernel and map dimensions differ")
    _check_density(T, rho)
    sigma = sigma or BandwidthField()
    nodes = T.nodes()
    bw = h * np.asarray(sigma(nodes if T.d > 1 else nodes[:, 0]), dtype=float) * np.ones(nodes.shape[0])
    if bw.min() < 2.0 * T.spacing:
        raise ResolutionError(f"bandwidth {bw.min():.3g} is below twice the grid spacing {T.spacing:.3g}")
    w1 = _trapezoid_weights(T.n, T.spacing)
    weights = w1 if T.d == 1 else np.outer(w1, w1).ravel()
    weights = weights * rho.pdf(nodes if T.d > 1 else nodes[:, 0])
    if T.d == 1:
        inner = _inner_1d(T, kernel, nodes[:, 0], bw, h, n_inner)
    else:
        inner = _inner_2d(T.evaluate, kernel, nodes, bw, h, n_inner, T.lower, T.upper, T.meta.get("breaks"))
    return float(np.sum(weights * inner))


# ---------------------------------------------------------------------------
# repulsion


def _g2(t):
    """Second antiderivative of ``1 / (1 + t^2)``."""
    return t * np.arctan(t) - 0.5 * np.log1p(t * t)


def _interval_pairs(lo, hi, c, h) -> float:
    """``sum_jk c_j c_k int_{I_j} int_{I_k} (1 + (y - y')^2 / h^2)^-1``.

    Interval ``I_j = [lo_j, hi_j]`` carries the constant density ``c_j``;
    zero length intervals are point masses with ``c_j`` holding the mass.
    """
    lo, hi, c = (np.asarray(v, dtype=float) for v in (lo, hi, c))
    width = hi - lo
    point = width <= 0
    mass = np.where(point, c, c * width)
    total = 0.0
    for s in range(0, lo.size, 512):
        a, b, wa, ma, pa = lo[s:s + 512, None], hi[s:s + 512, None], width[s:s + 512, None], \
            mass[s:s + 512, None], point[s:s + 512, None]
        cc, dd, wc, mc, pc = lo[None, :], hi[None, :], width[None, :], mass[None, :], point[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            both = h * h * (_g2((b - cc) / h) - _g2((b - dd) / h) - _g2((a - cc) / h) + _g2((a - dd) / h)) / (wa * wc)
            # one point mass: average of the kernel over the other interval
            left_pt = h * (np.arctan((a - cc) / h) - np.arctan((a - dd) / h)) / wc
            right_pt = h * (np.arctan((cc - a) / h) - np.arctan((cc - b) / h)) / wa
            pts = 1.0 / (1.0 + ((a - cc) / h) ** 2)
        val = np.where(pa & pc, pts, np.where(pa, left_pt, np.where(pc, right_pt, both)))
        total += float(np.sum(ma * mc * val))
    return total


def repulsion_integral_pushforward(pf: PushforwardDensity, h: float, **quad) -> float:
    """``int int rho_Y(y) rho_Y(y') (1 + |y - y'|^2 / h^2)^-1`` for a binned density."""
    if not h > 0:
        raise ValueError("h must be positive")
    if len(pf.edges) == 1:
        e = pf.edges[0]
        return _interval_pairs(e[:-1], e[1:], pf.values, h)
    if len(pf.edges) != 2:
        raise ValueError("pushforward repulsion is implemented for m = 1, 2")
    delta = [float(np.diff(e)[0]) for e in pf.edges]
    if min(delta) > 0.5 * h:
        raise ResolutionError(f"pixel size {min(delta):.3g} exceeds half the bandwidth {h:.3g}")
    return pair_integral(pf.values, delta, lambda r2: 1.0 / (1.0 + r2 / (h * h)), **quad)


def nonlocal_repulsion(T: GridMap, rho: DensitySpec, h: float, method: str = "pushforward",
                       per_axis: int = 2, **quad) -> float:
    """``R^h[T]``.

    ``method="pushforward"`` (default) integrates the embedded density.  In
    1D each grid cell pushes its exact mass uniformly onto its image
    interval, and every pair of intervals is integrated in closed form.  For
    ``d = m = 2`` the image is rasterized on pixels of the grid size.
    ``method="direct"`` is the trapezoid double sum over grid nodes in 1D.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    _check_density(T, rho)
    if T.d == 1 and T.m == 1:
        if method == "direct":
            x = T.axis
            w = _trapezoid_weights(T.n, T.spacing) * rho.pdf(x)
            y = T.values[:, 0]
            total = 0.0
            for s in range(0, T.n, 512):
                k = 1.0 / (1.0 + ((y[s:s + 512, None] - y[None, :]) / h) ** 2)
                total += float(w[s:s + 512] @ k @ w)
            return math.log(total)
        if method != "pushforward":
            raise ValueError(f"unknown method {method!r}")
        pl = T.to_piecewise_linear()
        masses = rho.cell_masses(pl)
        y = T.values[:, 0]
        lo, hi = np.minimum(y[:-1], y[1:]), np.maximum(y[:-1], y[1:])
        width = hi - lo
        c = np.where(width > 0, masses / np.where(width > 0, width, 1.0), masses)
        return math.log(_interval_pairs(lo, hi, c, h))
    if T.d == 2 and T.m == 2:
        if method != "pushforward":
            raise ValueError("d = m = 2 supports the pushforward form only")
        pl = T.to_piecewise_linear()
        vals = T.values.reshape(-1, 2)
        rng = list(zip(vals.min(axis=0), vals.max(axis=0)))
        cells = T.n - 1
        bins = [max(cells, math.ceil((hi - lo) / T.spacing)) for lo, hi in rng]
        pf = rasterize_pushforward(pl, rho, bins=bins, per_axis=per_axis, range_=rng)
        return math.log(repulsion_integral_pushforward(pf, h, **quad))
    raise NotImplementedError("nonlocal repulsion covers d = m = 1 and d = m = 2")


def rescaled_repulsion_limit(R: float, h: float, m: int) -> float:
    """``exp(R) / h`` for m = 1 and ``exp(R) / (h^2 log(1/h))`` for m = 2.

    These tend to ``pi |rho_Y|^2`` and ``2 pi |rho_Y|^2`` as ``h -> 0``.
    """
    if m == 1:
        return math.exp(R) / h
    if m == 2:
        return math.exp(R) / (h * h * math.log(1.0 / h))
    raise ValueError("rescaled limits are defined for m = 1, 2")


# ---------------------------------------------------------------------------
# cutting maps


def cut_sensitivity(cutting_map, kernel: KernelSpec, h: float, n_inner: int = 12,
                    panel: float | None = None) -> float:
    """``A^h`` of a two dimensional cutting map under uniform data on the unit square.

    The map depends on ``x1`` only through a shift, so for ``x1`` at least
    one window away from the sides the inner integral is a function of ``x2``
    alone.  The outer rule integrates that function over ``x2`` on panels
    split at the ramp ends, and treats the two side strips in full.

    Raises
    ------
    ValueError
        If the ramp width ``mu`` exceeds ``0.01 k h`` or the map is not
        ``d = 2, m = 1``.
    """
    cm = cutting_map
    if cm.d != 2 or cm.m != 1:
        raise ValueError("cut sensitivity is implemented for d = 2, m = 1")
    if cm.k > 1 and cm.mu > 0.01 * cm.k * h:
        raise ValueError(f"precondition mu <= 0.01 k h violated (mu={cm.mu:.3g}, k h={cm.k * h:.3g})")
    R = _window(kernel) * h
    panel = panel or 0.5 * h
    breaks = list(cm.breakpoints())
    knots = set([0.0, 1.0] + breaks)
    for b in breaks + [0.0, 1.0]:
        knots.update([b - R, b + R])
    knots = np.array(sorted(k for k in knots if 0.0 <= k <= 1.0))
    edges = [knots[0]]
    for a, b in zip(knots[:-1], knots[1:]):
        pieces = max(1, math.ceil((b - a) / panel))
        edges.extend(np.linspace(a, b, pieces + 1)[1:])
    edges = np.asarray(edges)
    t, w = _gauss01(8)
    x2 = (edges[:-1, None] + np.diff(edges)[:, None] * t[None, :]).ravel()
    w2 = (np.diff(edges)[:, None] * w[None, :]).ravel()
    if R >= 0.5:
        raise ValueError("bandwidth too large for the side-strip split")
    bw = np.full(x2.size, h)

    def column(x1):
        pts = np.stack([np.full(x2.size, x1), x2], axis=-1)
        return float(np.sum(w2 * _inner_2d(cm.evaluate, kernel, pts, bw, h, n_inner, 0.0, 1.0, breaks)))

    total = (1.0 - 2.0 * R) * column(0.5)
    strip_t = np.concatenate([0.5 * t, 0.5 + 0.5 * t]) * R
    strip_w = np.concatenate([0.5 * w, 0.5 * w]) * R
    for x1, wx in zip(strip_t, strip_w):
        total += wx * (column(x1) + column(1.0 - x1))
    return total


__all__ = [
    "GridMap", "ResolutionError", "cut_sensitivity", "nonlocal_attraction", "nonlocal_repulsion",
    "repulsion_integral_pushforward", "rescaled_repulsion_limit",
]
