"""Cutting maps: Lipschitz maps from ``[0,1]^d`` to ``R^m`` (d > m) with energy going to -inf.

The map keeps the first ``m`` coordinates and shifts the first output by a
staircase ``g`` of the coordinate ``t = x_{m+1}``:

    T_k(x) = (x_1 + g(t), x_2, ..., x_m),   g(t) = (k / mu) |[0, t] ∩ I_k|,

where ``I_k`` is the union of the ramps ``[(n - mu)/k, n/k]``, n = 1..k-1.
The strips between ramps land on disjoint unit intervals along the first
axis, so the embedded density is about ``1/k`` while the attraction only
pays on the ramps, whose total length is about ``mu``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .continuum import riesz_energy
from .data import PushforwardDensity
from .kernels import KernelSpec

POTENTIALS = ("sublinear", "phi1", "phi_inf")


@dataclass(frozen=True)
class CuttingMap:
    """The map ``T_k`` scaled by ``rescale``."""

    d: int
    m: int
    k: int
    mu: float
    alpha: float | None = None
    rescale: float = 1.0

    def __post_init__(self):
        if not self.d > self.m >= 1:
            raise ValueError(f"cutting maps need d > m >= 1, got d={self.d}, m={self.m}")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.k > 1 and not 0.0 < self.mu <= 0.5:
            raise ValueError("ramp width mu must lie in (0, 1/2]")
        if not self.rescale > 0:
            raise ValueError("rescale must be positive")

    def breakpoints(self) -> np.ndarray:
        """Ends of the ramps, sorted."""
        n = np.arange(1, self.k)
        return np.sort(np.concatenate([(n - self.mu) / self.k, n / self.k]))

    def staircase(self, t) -> np.ndarray:
        """``g(t)``: the number of ramps passed plus the fraction of the current one."""
        t = np.asarray(t, dtype=float)
        if self.k == 1:
            return np.zeros_like(t)
        q = self.k * np.clip(t, 0.0, 1.0)
        full = np.minimum(np.floor(q), self.k - 1)
        nxt = full + 1.0
        partial = np.where(nxt <= self.k - 1, np.clip((q - (nxt - self.mu)) / self.mu, 0.0, 1.0), 0.0)
        return full + partial

    def in_ramp(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.k == 1:
            return np.zeros(t.shape, dtype=bool)
        q = self.k * t
        nxt = np.floor(q) + 1.0
        return (nxt <= self.k - 1) & (q > nxt - self.mu)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        y = x[:, : self.m].copy()
        y[:, 0] += self.staircase(x[:, self.m])
        return self.rescale * y

    __call__ = evaluate

    def plain_jacobian(self) -> np.ndarray:
        J = np.zeros((self.m, self.d))
        J[:, : self.m] = np.eye(self.m)
        return self.rescale * J

    def ramp_jacobian(self) -> np.ndarray:
        J = self.plain_jacobian()
        J[0, self.m] = self.rescale * self.k / self.mu
        return J

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        ramp = self.in_ramp(x[:, self.m])
        return np.where(ramp[:, None, None], self.ramp_jacobian(), self.plain_jacobian())

    @property
    def lipschitz(self) -> float:
        return self.rescale * max(1.0, self.k / self.mu) if self.k > 1 else self.rescale

    @property
    def ramp_fraction(self) -> float:
        """Exact measure of ``I_k``."""
        return (self.k - 1) * self.mu / self.k


def mu_schedule(k: int, alpha: float) -> float:
    """``mu = k^(-alpha / (1 - alpha))``."""
    return float(k) ** (-alpha / (1.0 - alpha))


def build_cutting_map(d: int, m: int, k: int, alpha: float = 0.5, mu: float | None = None,
                      rescaled: bool = False) -> CuttingMap:
    """Cutting map with ramp width from the schedule unless ``mu`` is given.

    ``rescaled`` multiplies the map by ``k^(-1/(2m))``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if mu is None:
        mu = mu_schedule(k, alpha) if k > 1 else 0.5
    scale = float(k) ** (-1.0 / (2 * m)) if rescaled else 1.0
    return CuttingMap(d, m, k, float(mu), alpha, scale)


# ---------------------------------------------------------------------------
# exact marginal for d = 2, m = 1


def staircase_cdf(cm: CuttingMap, v) -> np.ndarray:
    """``P(g(t) <= v)`` for uniform ``t`` (unscaled map)."""
    v = np.asarray(v, dtype=float)
    n = np.floor(v)
    frac = v - n
    inner = (n + 1.0 - cm.mu + frac * cm.mu) / cm.k
    out = np.where(v < 0, 0.0, np.where(v >= cm.k - 1, 1.0, inner))
    return out


def cutting_marginal(cm: CuttingMap, y) -> np.ndarray:
    """Exact embedded density of the unscaled ``d = 2, m = 1`` map under uniform data."""
    if cm.d != 2 or cm.m != 1:
        raise ValueError("the closed form covers d = 2, m = 1")
    y = np.asarray(y, dtype=float)
    return staircase_cdf(cm, y) - staircase_cdf(cm, y - 1.0)


# ---------------------------------------------------------------------------
# energy scan


def _potential(name: str, J: np.ndarray, alpha: float, kernel: KernelSpec | None, constant: float = 1.0):
    if name == "sublinear":
        return constant * (1.0 + np.linalg.norm(J) ** alpha)
    if kernel is None:
        raise ValueError(f"potential {name!r} needs a kernel")
    s = 1.0 if name == "phi1" else math.inf
    return float(kernels.phi_s(kernel, s, J))


@dataclass
class ScanRow:
    k: int
    mu: float
    attraction: float
    repulsion: float
    max_density: float
    k_max_density: float
    mass: float
    ramp_fraction: float


@dataclass
class ScanResult:
    rows: list
    repulsion_slope: float
    attraction_slope: float
    attraction_spread: float
    density_ratio: float

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def fit_slope(ks, values, top_half: bool = True) -> float:
    """Least-squares slope of ``values`` against ``log k``, on the top half of the list."""
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    if top_half:
        start = len(ks) // 2
        ks, values = ks[start:], values[start:]
    return float(np.polyfit(np.log(ks), values, 1)[0])


def embedded_histogram(cm: CuttingMap, y: np.ndarray, bins_per_unit: int = 8) -> PushforwardDensity:
    """Histogram on strip-aligned bins: ``bins_per_unit`` per unit length of the unscaled image."""
    if bins_per_unit < 2:
        raise ValueError("histogram resolution below the strip width")
    edges = [np.linspace(0.0, cm.k, cm.k * bins_per_unit + 1) * cm.rescale]
    edges += [np.linspace(0.0, 1.0, bins_per_unit + 1) * cm.rescale for _ in range(cm.m - 1)]
    counts, _ = np.histogramdd(y, bins=edges)
    pf = PushforwardDensity("histogram", edges, counts, True, {"counts": counts, "n": y.shape[0]})
    pf.values = counts / (y.shape[0] * pf.bin_volumes())
    return pf


def _l2_unbiased(pf: PushforwardDensity) -> float:
    """``sum c (c - 1) / (n (n - 1) vol)``, unbiased for the binned ``int rho^2``."""
    c = pf.meta["counts"]
    n = pf.meta["n"]
    return float(np.sum(c * (c - 1.0) / pf.bin_volumes()) / (n * (n - 1.0)))


def cutting_energy_scan(ks, d: int = 2, m: int = 1, alpha: float = 0.5, potential: str = "sublinear",
                        kernel: KernelSpec | None = None, rescaled: bool = False, n_samples: int = 1_000_000,
                        bins_per_unit: int = 8, mu=None) -> ScanResult:
    """Monte-Carlo energies of cutting maps over a list of ``k``.

    Each ``k`` draws ``n_samples`` uniform points with seed ``k``.  The
    attraction averages the potential over the samples, which only sees two
    Jacobians (on and off the ramps).  The repulsion uses a strip-aligned
    histogram of the images: ``log int rho^2`` for ``m <= 2`` and the log
    Riesz energy for ``m >= 3``.
    """
    if potential not in POTENTIALS:
        raise ValueError(f"unknown potential {potential!r}")
    if potential != "sublinear" and kernel is None:
        kernel = KernelSpec("epanechnikov", d)
    rows = []
    for k in ks:
        cm = build_cutting_map(d, m, int(k), alpha, mu=mu, rescaled=rescaled)
        rng = np.random.default_rng(int(k))
        x = rng.random((n_samples, d))
        y = cm.evaluate(x)
        ramp = cm.in_ramp(x[:, m])
        frac = float(ramp.mean())
        plain = _potential(potential, cm.plain_jacobian(), alpha, kernel)
        steep = _potential(potential, cm.ramp_jacobian(), alpha, kernel) if cm.k > 1 else plain
        attraction = (1.0 - frac) * plain + frac * steep
        pf = embedded_histogram(cm, y, bins_per_unit)
        if m <= 2:
            repulsion = math.log(_l2_unbiased(pf))
        else:
            repulsion = math.log(riesz_energy(pf))
        top = float(pf.values.max())
        unscaled_top = top * cm.rescale**m
        rows.append(ScanRow(int(k), cm.mu, attraction, repulsion, top, int(k) * unscaled_top, pf.mass(), frac))
    att = np.array([r.attraction for r in rows])
    dens = np.array([r.k_max_density for r in rows])
    return ScanResult(
        rows,
        fit_slope(ks, [r.repulsion for r in rows]),
        fit_slope(ks, att),
        float((att.max() - att.min()) / att.mean()),
        float(dens.max() / dens.min()),
    )


__all__ = [
    "CuttingMap", "ScanResult", "ScanRow", "build_cutting_map", "cutting_energy_scan", "cutting_marginal",
    "embedded_histogram", "fit_slope", "mu_schedule", "staircase_cdf",
]
