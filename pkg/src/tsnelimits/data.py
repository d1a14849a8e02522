"""Data densities, samples, bandwidth fields and pushforward densities."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from .maps import PiecewiseLinearMap

FAMILIES = ("uniform", "mixture")
BANDWIDTH_MODES = ("constant", "knn-proxy", "inverse-density-power")
_GRID_POINTS = 10_000


def _norm_cdf(z):
    return special.ndtr(z)


@dataclass(frozen=True)
class DensitySpec:
    """Data density on an interval (d=1) or a box ``[lower, upper]^d``.

    ``family="mixture"`` is the two-bump density
    ``p (G(x - c) + G(x + c)) + (1 - 2p) / 2`` with Gaussian bumps of variance
    ``var``, restricted to the interval and renormalized.

    ``mass`` scales the density away from one; it exists for sanity checks
    that exercise linearity in the density and is 1 otherwise.
    """

    family: str = "uniform"
    lower: float = 0.0
    upper: float = 1.0
    d: int = 1
    p: float = 0.4
    c: float = 0.0
    var: float = 0.005
    mass: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown density family {self.family!r}")
        if not self.upper > self.lower:
            raise ValueError("empty domain")
        if self.family == "mixture":
            if self.d != 1:
                raise ValueError("the mixture family is one dimensional")
            if not 0 <= self.p <= 0.5 or self.var <= 0:
                raise ValueError("mixture needs 0 <= p <= 1/2 and var > 0")

    @classmethod
    def mixture(cls, c: float = 0.0, p: float = 0.4, var: float = 0.005):
        return cls("mixture", -1.0, 1.0, 1, p, c, var)

    @property
    def volume(self) -> float:
        return (self.upper - self.lower) ** self.d

    @property
    def _sd(self) -> float:
        return math.sqrt(self.var)

    def _bump_mass(self, a, b, center):
        sd = self._sd
        return _norm_cdf((b - center) / sd) - _norm_cdf((a - center) / sd)

    @property
    def _mixture_total(self) -> float:
        a, b, c, p = self.lower, self.upper, self.c, self.p
        bumps = self._bump_mass(a, b, c) + self._bump_mass(a, b, -c)
        return p * bumps + 0.5 * (1 - 2 * p) * (b - a)

    def pdf(self, x):
        """Density at ``x`` (shape (n,) for d=1, (n, d) otherwise); 0 outside."""
        x = np.asarray(x, dtype=float)
        if self.d == 1:
            if x.ndim == 2 and x.shape[1] == 1:
                x = x[:, 0]
            inside = (x >= self.lower) & (x <= self.upper)
        else:
            inside = np.all((x >= self.lower) & (x <= self.upper), axis=-1)
        if self.family == "uniform":
            out = np.where(inside, self.mass / self.volume, 0.0)
        else:
            g = stats.norm(scale=self._sd)
            raw = self.p * (g.pdf(x - self.c) + g.pdf(x + self.c)) + 0.5 * (1 - 2 * self.p)
            out = np.where(inside, self.mass * raw / self._mixture_total, 0.0)
        return float(out) if out.ndim == 0 else out

    __call__ = pdf

    def cdf(self, x):
        """Cumulative mass from the left end (d=1 only)."""
        if self.d != 1:
            raise ValueError("cdf is defined for d=1")
        x = np.clip(np.asarray(x, dtype=float), self.lower, self.upper)
        a = self.lower
        if self.family == "uniform":
            out = self.mass * (x - a) / (self.upper - a)
        else:
            bumps = self._bump_mass(a, x, self.c) + self._bump_mass(a, x, -self.c)
            raw = self.p * bumps + 0.5 * (1 - 2 * self.p) * (x - a)
            out = self.mass * raw / self._mixture_total
        return float(out) if np.ndim(out) == 0 else out

    def grid(self, n: int = _GRID_POINTS) -> np.ndarray:
        return np.linspace(self.lower, self.upper, n)

    @property
    def rho_min(self) -> float:
        return _grid_extremes(self)[0]

    @property
    def rho_max(self) -> float:
        return _grid_extremes(self)[1]

    def cell_masses(self, pl_map: PiecewiseLinearMap) -> np.ndarray:
        """Exact mass of each grid cell of ``pl_map``."""
        if pl_map.d == 1:
            return np.diff(self.cdf(pl_map.x))
        if self.family != "uniform":
            raise NotImplementedError("cell masses for d >= 2 need a uniform density")
        return self.mass * pl_map.cell_volumes() / self.volume


_EXTREMES: dict = {}


def _grid_extremes(spec: DensitySpec):
    if spec not in _EXTREMES:
        if spec.d == 1:
            x = spec.grid()
            vals = spec.pdf(x)
            step = x[1] - x[0]
            # polish the grid extremes with a bounded scalar search
            for idx, sign in ((np.argmin(vals), 1.0), (np.argmax(vals), -1.0)):
                lo, hi = max(x[idx] - step, spec.lower), min(x[idx] + step, spec.upper)
                res = optimize.minimize_scalar(lambda t: sign * spec.pdf(t), bounds=(lo, hi), method="bounded",
                                               options={"xatol": 1e-12})
                vals = np.append(vals, spec.pdf(res.x))
        else:
            vals = np.array([spec.mass / spec.volume]) if spec.family == "uniform" else None
        _EXTREMES[spec] = (float(vals.min()), float(vals.max()))
    return _EXTREMES[spec]


@dataclass
class PointCloud:
    """Samples ``x_1..x_n`` stored as an ``(n, d)`` array."""

    points: np.ndarray
    seed: int | None = None
    density: DensitySpec | None = None

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def sample(density: DensitySpec, n: int, seed: int) -> PointCloud:
    """Draw ``n`` i.i.d. points; identical arguments give identical output."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    if density.family == "uniform":
        pts = rng.uniform(density.lower, density.upper, size=(n, density.d))
        return PointCloud(pts, seed, density)
    # pick a component, draw from it, reject draws outside the interval
    p = density.p
    out = np.empty(0)
    while out.size < n:
        m = 2 * (n - out.size) + 16
        comp = rng.choice(3, size=m, p=[p, p, 1 - 2 * p])
        gauss = rng.normal(0.0, density._sd, size=m)
        unif = rng.uniform(density.lower, density.upper, size=m)
        draw = np.where(comp == 0, density.c + gauss, np.where(comp == 1, -density.c + gauss, unif))
        keep = (draw >= density.lower) & (draw <= density.upper)
        out = np.concatenate([out, draw[keep]])
    return PointCloud(out[:n, None], seed, density)


def save_points(cloud: PointCloud, path, header: str | None = None) -> None:
    """Write one row per point; an optional header line is written as a comment."""
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        writer = csv.writer(fh)
        writer.writerow([f"x{k}" for k in range(cloud.d)])
        writer.writerows(cloud.points.tolist())


def load_points(path) -> PointCloud:
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            rows.append(line)
    data = np.loadtxt(rows[1:], delimiter=",", ndmin=2)
    return PointCloud(data)


@dataclass(frozen=True)
class BandwidthField:
    """Local bandwidth multiplier ``sigma(x)``.

    Modes: ``constant`` (``sigma = value``), ``knn-proxy``
    (``sigma = rho_max / rho``) and ``inverse-density-power``
    (``sigma = rho^(-1/d)``).
    """

    mode: str = "constant"
    value: float = 1.0
    density: DensitySpec | None = None

    def __post_init__(self):
        if self.mode not in BANDWIDTH_MODES:
            raise ValueError(f"unknown bandwidth mode {self.mode!r}")
        if self.mode != "constant" and self.density is None:
            raise ValueError(f"mode {self.mode!r} needs a density")
        if self.mode == "constant" and not self.value > 0:
            raise ValueError("constant bandwidth must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        d = None if self.density is None else self.density.d
        if x.ndim == 2 and x.shape[1] == 1 and d in (None, 1):
            x = x[:, 0]
        if self.mode == "constant":
            shape = x.shape[:-1] if x.ndim == 2 else x.shape
            return np.full(shape, self.value)
        rho = self.density.pdf(x)
        if self.mode == "knn-proxy":
            return self.density.rho_max / rho
        return rho ** (-1.0 / self.density.d)

    def bounds(self):
        """``(sigma_min, sigma_max)`` on the density's evaluation grid."""
        if self.mode == "constant":
            return self.value, self.value
        lo, hi = self.density.rho_min, self.density.rho_max
        if self.mode == "knn-proxy":
            return 1.0, hi / lo
        dd = self.density.d
        return hi ** (-1.0 / dd), lo ** (-1.0 / dd)


@dataclass
class PushforwardDensity:
    """Density of the embedded points.

    ``edges`` holds one array of bin edges per axis and ``values`` the density
    on each bin, so ``sum(values * bin_volumes)`` is the mass.  For KDE the
    values are point evaluations at bin centers.
    """

    representation: str
    edges: list
    values: np.ndarray
    monotone: bool = True
    meta: dict = field(default_factory=dict)

    def bin_volumes(self) -> np.ndarray:
        vol = np.ones(())
        for e in self.edges:
            vol = np.multiply.outer(vol, np.diff(e))
        return vol

    def mass(self) -> float:
        return float(np.sum(self.values * self.bin_volumes()))

    def l2_squared(self) -> float:
        """``int rho_Y^2``; infinite when mass sits on a null set."""
        if self.meta.get("singular"):
            return math.inf
        return float(np.sum(self.values**2 * self.bin_volumes()))


def pushforward_density_1d(T: PiecewiseLinearMap, density: DensitySpec) -> PushforwardDensity:
    """Exact density of ``T_# rho`` for a piecewise linear 1D map.

    Each cell ``[x_j, x_j+1]`` carries its exact mass uniformly onto the image
    interval.  For an increasing map the image intervals tile the range; for
    other maps the branches are superposed, which is the coarea sum over
    preimages, and the result is flagged ``monotone=False``.
    """
    if T.d != 1 or T.m != 1:
        raise ValueError("pushforward_density_1d needs d = m = 1")
    masses = density.cell_masses(T)
    t = T.values[:, 0]
    lo, hi = np.minimum(t[:-1], t[1:]), np.maximum(t[:-1], t[1:])
    length = hi - lo
    singular = bool(np.any((length <= 0) & (masses > 0)))
    if np.all(np.diff(t) > 0):
        return PushforwardDensity("exact-monotone-1d", [t.copy()], masses / length, True,
                                  {"singular": singular})
    warnings.warn("map is not increasing; superposing branches of the inverse", stacklevel=2)
    flat = length > 0
    dens = np.zeros_like(masses)
    dens[flat] = masses[flat] / length[flat]
    breaks = np.unique(np.concatenate([lo, hi]))
    jumps = np.zeros(breaks.size)
    np.add.at(jumps, np.searchsorted(breaks, lo[flat]), dens[flat])
    np.add.at(jumps, np.searchsorted(breaks, hi[flat]), -dens[flat])
    values = np.clip(np.cumsum(jumps)[:-1], 0.0, None)
    return PushforwardDensity("coarea-1d", [breaks], values, False, {"singular": singular})


def pushforward_density_md(points, bins=None, method: str = "histogram",
                           bandwidth=None, range_=None) -> PushforwardDensity:
    """Histogram (default) or Gaussian KDE estimate of the density of ``points``.

    Parameters
    ----------
    points : array_like, shape (n, m)
    bins : int or sequence, optional
        Bins per axis; defaults to ``ceil(n^(1/(m+2)))``.
    method : {"histogram", "kde"}
    range_ : sequence of (lo, hi), optional
        Histogram extent per axis; defaults to the data range.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n, m = pts.shape
    if n < 2:
        raise ValueError("need at least two points")
    if m not in (1, 2, 3):
        raise ValueError("embedding dimension must be 1, 2 or 3")
    if np.all(pts == pts[0]):
        raise ValueError("degenerate support: all points coincide")
    if bins is None:
        bins = math.ceil(n ** (1.0 / (m + 2)))
    if range_ is None:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pad = np.where(hi > lo, 0.0, 0.5)
        range_ = list(zip(lo - pad, hi + pad))
    if method == "histogram":
        counts, edges = np.histogramdd(pts, bins=bins, range=range_)
        out = PushforwardDensity("histogram", list(edges), counts)
        out.values = counts / (n * out.bin_volumes())
        return out
    if method != "kde":
        raise ValueError(f"unknown method {method!r}")
    kde = stats.gaussian_kde(pts.T, bw_method=bandwidth)
    spread = 4.0 * np.sqrt(np.diag(kde.covariance))
    nb = bins if np.ndim(bins) else [bins] * m
    nb = [max(int(b), 64) for b in nb]
    edges = [np.linspace(range_[k][0] - spread[k], range_[k][1] + spread[k], nb[k] + 1) for k in range(m)]
    mids = np.meshgrid(*[0.5 * (e[1:] + e[:-1]) for e in edges], indexing="ij")
    vals = kde(np.stack([g.ravel() for g in mids])).reshape(mids[0].shape)
    return PushforwardDensity("kde", edges, vals)
