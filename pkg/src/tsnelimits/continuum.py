"""Continuum energies of embedding maps.

The energy of a map ``T`` is ``E[T; phi_s] = A[T; phi_s] + R[T]`` with the
local attraction ``A = int phi_s(sigma DT) rho`` and a repulsion that depends
only on the embedded density ``rho_Y``: ``log int rho_Y^2`` when ``m <= 2``
and the log of the Riesz energy ``int int rho_Y rho_Y' / |y - y'|^2`` when
``m >= 3``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._pairs import _gauss01, pair_integral
from .data import BandwidthField, DensitySpec, PushforwardDensity, pushforward_density_1d
from .kernels import KernelSpec
from .maps import PiecewiseLinearMap

MASS_TOLERANCE = 1e-3
_EDGE_OFFSETS = ((math.sqrt(5.0) - 1.0) / 8.0, (math.sqrt(2.0) - 1.0) / 4.0)


class DivergenceError(ValueError):
    """The attraction at ``s = inf`` diverges on cells with a singular Jacobian."""

    def __init__(self, cells):
        self.cells = [tuple(int(i) for i in c) for c in cells]
        shown = ", ".join(map(str, self.cells[:10]))
        more = "" if len(self.cells) <= 10 else f" and {len(self.cells) - 10} more"
        super().__init__(f"zero Jacobian on cells {shown}{more}")


class DegenerateSupportError(ValueError):
    """The embedded density is singular, so ``R[T] = +inf``."""


@dataclass
class ContinuumEnergyReport:
    attraction: float
    repulsion: float
    total: float
    s: float
    regime: str
    details: dict = field(default_factory=dict)


def _sigma(sigma) -> BandwidthField:
    return sigma if sigma is not None else BandwidthField()


# ---------------------------------------------------------------------------
# attraction


def _attraction_terms(T: PiecewiseLinearMap, sigma: BandwidthField, rho: DensitySpec):
    """Per-node weights ``rho dx``, bandwidths and Jacobians for the outer rule."""
    J = T.jacobians()
    if T.d == 1:
        if sigma.mode == "constant":
            masses = rho.cell_masses(T)
            return masses, np.full(masses.shape, sigma.value), J
        t, w = _gauss01(3)
        x0, width = T.x[:-1], np.diff(T.x)
        pts = x0[:, None] + width[:, None] * t[None, :]
        weights = width[:, None] * w[None, :] * rho.pdf(pts.ravel()).reshape(pts.shape)
        sig = np.asarray(sigma(pts.ravel())).reshape(pts.shape)
        return weights, sig, np.broadcast_to(J[:, None], pts.shape + J.shape[1:])
    masses = rho.cell_masses(T)
    centers = T.cell_centers()
    sig = np.asarray(sigma(centers.reshape(-1, T.d))).reshape(masses.shape)
    return masses, sig, J


def continuum_attraction(T: PiecewiseLinearMap, kernel: KernelSpec, sigma: BandwidthField | None,
                         rho: DensitySpec, s: float = 1.0, method: str = "exact") -> float:
    """``int phi_s(sigma(x) DT(x)) rho(x) dx`` with the Jacobian constant per cell.

    Raises
    ------
    DivergenceError
        For ``s = inf`` when some cell carrying mass has a zero Jacobian.
    """
    if T.d != kernel.d:
        raise ValueError(f"kernel dimension {kernel.d} does not match the map's domain dimension {T.d}")
    weights, sig, J = _attraction_terms(T, _sigma(sigma), rho)
    if math.isinf(s):
        cell_J = T.jacobians()
        flat = cell_J.reshape(cell_J.shape[: T.d] + (-1,))
        dead = np.argwhere(np.all(flat == 0.0, axis=-1))
        if dead.size:
            raise DivergenceError(dead)
    A = sig[..., None, None] * J
    if kernel.d == 1:
        vals = kernels.phi_one_1d(kernel, A[..., 0, 0] if T.m == 1 else np.linalg.norm(A[..., 0], axis=-1), s)
    else:
        vals = kernels.phi_s(kernel, s, A, method=method)
    return float(np.sum(weights * vals))


def attraction_decomposition(T: PiecewiseLinearMap, kernel: KernelSpec, sigma: BandwidthField | None,
                             rho: DensitySpec) -> dict:
    """Split ``A[T; phi_inf]`` into the sphere term and the constant ``C2``.

    The sphere term ``int avg_w log|DT w|^2 rho`` does not see the bandwidth
    field; ``C2 = int (log sigma^2 + C1) rho`` with ``C1`` the radial log moment.
    """
    weights, sig, J = _attraction_terms(T, _sigma(sigma), rho)
    eigs = kernels._gram_eigs(kernel, J)
    sphere = float(np.sum(weights * kernels.sphere_log_average(eigs, kernel.d)))
    c1 = kernels.log_moment(kernel)
    c2 = float(np.sum(weights * (np.log(sig * sig) + c1)))
    return {"sphere": sphere, "C1": c1, "C2": c2, "total": sphere + c2}


# ---------------------------------------------------------------------------
# repulsion


def _check_mass(pf: PushforwardDensity, expected: float = 1.0):
    mass = pf.mass()
    if abs(mass - expected) > MASS_TOLERANCE:
        raise ValueError(f"embedded density has mass {mass:.6g}, expected {expected}")


def _uniform_widths(edges) -> list:
    out = []
    for e in edges:
        w = np.diff(e)
        if not np.allclose(w, w[0], rtol=1e-9, atol=0.0):
            raise ValueError("Riesz repulsion needs uniform bins")
        out.append(float(w[0]))
    return out


def riesz_energy(pf: PushforwardDensity, **quad) -> float:
    """``int int rho(y) rho(y') / |y - y'|^2`` for a binned density in three dimensions."""
    if len(pf.edges) != 3:
        raise ValueError("the Riesz repulsion is implemented for m = 3")
    delta = _uniform_widths(pf.edges)
    return pair_integral(pf.values, delta, lambda r2: 1.0 / r2, singular=True, **quad)


def _cube_inverse_distance() -> float:
    """``int_{[-1,1]^3} dx / |x|`` via the pyramid split of the unit cube."""
    t, w = _gauss01(40)
    a, b = np.meshgrid(t, t, indexing="ij")
    ww = np.outer(w, w)
    return 8.0 * 3.0 * 0.5 * float(np.sum(ww / np.sqrt(1.0 + a * a + b * b)))


def riesz_energy_fourier(pf: PushforwardDensity, pad: int = 4) -> float:
    """Fourier form ``pi int |rho_hat(xi)|^2 / |xi| d xi`` of the Riesz energy.

    ``rho_hat`` uses the ``exp(-2 pi i xi y)`` convention and is approximated
    by a zero-padded FFT of the bin values, treated as point samples of a
    smooth density.  The zero frequency cell is integrated exactly.
    """
    if len(pf.edges) != 3:
        raise ValueError("the Fourier form is implemented for m = 3")
    delta = np.array(_uniform_widths(pf.edges))
    shape = [pad * s for s in pf.values.shape]
    spec = np.fft.fftn(pf.values, s=shape, axes=(0, 1, 2)) * np.prod(delta)
    power = np.abs(spec) ** 2
    freqs = np.meshgrid(*[np.fft.fftfreq(n, d) for n, d in zip(shape, delta)], indexing="ij")
    norm = np.sqrt(sum(f * f for f in freqs))
    dxi = 1.0 / (np.array(shape) * delta)
    cell = float(np.prod(dxi))
    with np.errstate(divide="ignore"):
        weight = np.where(norm > 0, cell / norm, 0.0)
    total = float(np.sum(power * weight))
    if np.allclose(dxi, dxi[0]):
        half = 0.5 * dxi[0]
        total += power.flat[0] * half * half * _cube_inverse_distance()
    else:
        total += power.flat[0] * cell / (0.5 * float(np.min(dxi)))
    return math.pi * total


def _map_samples(T: PiecewiseLinearMap, rho: DensitySpec, per_axis: int = 2):
    """Images of stratified points in each cell with their masses."""
    masses = rho.cell_masses(T)
    offsets = (np.arange(per_axis) + 0.5) / per_axis
    pts, wts = [], []
    v = T.values
    for combo in np.ndindex(*([per_axis] * T.d)):
        frac = [offsets[c] for c in combo]
        val = 0.0
        for corner in np.ndindex(*([2] * T.d)):
            coef = np.prod([f if c else 1.0 - f for f, c in zip(frac, corner)])
            sl = tuple(slice(c, c + n - 1) for c, n in zip(corner, v.shape[:-1]))
            val = val + coef * v[sl]
        pts.append(val.reshape(-1, T.m))
        wts.append(masses.ravel() / per_axis**T.d)
    return np.concatenate(pts), np.concatenate(wts)


def rasterize_pushforward(T: PiecewiseLinearMap, rho: DensitySpec, bins=32, per_axis: int = 2,
                          range_=None) -> PushforwardDensity:
    """Binned embedded density from stratified samples of every cell."""
    pts, wts = _map_samples(T, rho, per_axis)
    if range_ is None:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        if np.any(hi <= lo):
            raise DegenerateSupportError("embedded points span a lower dimensional set")
        # unequal irrational fractions of a bin keep structured samples off the edges
        nb = np.broadcast_to(np.asarray(bins), lo.shape)
        width = (hi - lo) / nb
        range_ = list(zip(lo - _EDGE_OFFSETS[0] * width, hi + _EDGE_OFFSETS[1] * width))
    counts, edges = np.histogramdd(pts, bins=bins, range=range_, weights=wts)
    out = PushforwardDensity("histogram", list(edges), counts, True, {"source": "rasterized"})
    out.values = counts / out.bin_volumes()
    return out


def _injective_l2(T: PiecewiseLinearMap, rho: DensitySpec):
    """``int rho_X^2 / |det DT|`` per cell; None when the map folds."""
    J = T.jacobians()
    det = np.linalg.det(J)
    if not (np.all(det > 0) or np.all(det < 0)):
        return None
    masses = rho.cell_masses(T)
    return float(np.sum(masses**2 / (T.cell_volumes() * np.abs(det))))


def continuum_repulsion(source, m: int | None = None, density: DensitySpec | None = None,
                        bins=32, **quad) -> float:
    """``R[T]`` from a map or an embedded density.

    Parameters
    ----------
    source : PiecewiseLinearMap or PushforwardDensity
    density : DensitySpec
        Data density; required when ``source`` is a map.
    bins : int
        Bins per axis when a map into three dimensions is rasterized.

    For ``m <= 2`` this is ``log int rho_Y^2``.  A 1D map uses the exact
    pushforward; an orientation preserving map with ``d = m = 2`` uses
    ``int rho_X^2 / |det DT|``.  For ``m = 3`` it is the log Riesz energy.

    Raises
    ------
    ValueError
        If the embedded density does not have unit mass (within 1e-3).
    DegenerateSupportError
        If the embedded density is singular.
    """
    if isinstance(source, PushforwardDensity):
        pf = source
        m = len(pf.edges) if m is None else m
        if pf.meta.get("singular"):
            raise DegenerateSupportError("embedded density is singular")
        _check_mass(pf)
        if m <= 2:
            l2 = pf.l2_squared()
            if not math.isfinite(l2):
                raise DegenerateSupportError("embedded density is singular")
            return math.log(l2)
        return math.log(riesz_energy(pf, **quad))
    T = source
    if density is None:
        raise ValueError("a map needs the data density")
    m = T.m if m is None else m
    if T.d == 1 and T.m == 1:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return continuum_repulsion(pushforward_density_1d(T, density), 1)
    if m <= 2 and T.d == m:
        l2 = _injective_l2(T, density)
        if l2 is not None:
            if abs(float(np.sum(density.cell_masses(T))) - 1.0) > MASS_TOLERANCE:
                raise ValueError("data density does not have unit mass")
            return math.log(l2)
        warnings.warn("map folds; falling back to a histogram of sampled images", stacklevel=2)
    return continuum_repulsion(rasterize_pushforward(T, density, bins), m, **quad)


def continuum_energy(T: PiecewiseLinearMap, kernel: KernelSpec, sigma: BandwidthField | None,
                     rho: DensitySpec, s: float = 1.0, **rep) -> ContinuumEnergyReport:
    a = continuum_attraction(T, kernel, sigma, rho, s)
    r = continuum_repulsion(T, density=rho, **rep)
    return ContinuumEnergyReport(a, r, a + r, s, "L2" if T.m <= 2 else "riesz")


def scaling_identity_check(T: PiecewiseLinearMap, kernel: KernelSpec, rho: DensitySpec, s: float,
                           lam: float, sigma: BandwidthField | None = None, **rep):
    """Both sides of ``E[lam T; phi_s] = E[T; phi_{s lam}] + (2 - m)_+ log lam``."""
    lhs = continuum_energy(T.scaled(lam), kernel, sigma, rho, s, **rep).total
    rhs = continuum_energy(T, kernel, sigma, rho, s * lam, **rep).total
    return lhs, rhs + max(2 - T.m, 0) * math.log(lam)


# ---------------------------------------------------------------------------
# one dimensional tools


def rearrange_1d(T: PiecewiseLinearMap) -> PiecewiseLinearMap:
    """Monotone rearrangement ``T*(x) = int_a^x |T'|`` with ``T*(a) = 0``."""
    if T.d != 1 or T.m != 1:
        raise ValueError("rearrangement needs d = m = 1")
    steps = np.abs(np.diff(T.values[:, 0]))
    return PiecewiseLinearMap(T.x, np.concatenate([[0.0], np.cumsum(steps)]))


def sne_continuum_energy(T: PiecewiseLinearMap, sigma: BandwidthField | None, rho: DensitySpec,
                         kernel: KernelSpec | None = None) -> ContinuumEnergyReport:
    """``c_eta int |DT|^2 sigma^2 rho + log int rho_Y^2``."""
    kernel = kernel or KernelSpec("gaussian", T.d)
    weights, sig, J = _attraction_terms(T, _sigma(sigma), rho)
    frob = np.sum(J * J, axis=(-2, -1))
    a = kernels.c_eta(kernel) * float(np.sum(weights * sig * sig * frob))
    if np.all(T.values == T.values.reshape(-1, T.m)[0]):
        raise DegenerateSupportError("constant map: embedded density is a point mass")
    r = continuum_repulsion(T, density=rho)
    return ContinuumEnergyReport(a, r, a + r, 0.0, "L2" if T.m <= 2 else "riesz", {"sne": True})


def perona_malik_energy(field_, rho: DensitySpec | None = None, lam: float = 1.0) -> float:
    """``int log(1 + u^2) rho + lam log int rho^2 / u`` for the slope modulus ``u``.

    ``field_`` is a Profile1D (nodal ``u`` and ``rho``, trapezoid rule) or a
    one dimensional PiecewiseLinearMap (``u = |T'|`` per cell with exact cell
    masses).  Values of ``lam`` outside (0, 2) are rejected: there the
    energy of ``u = C`` tends to ``-inf`` as ``C`` grows.
    """
    if not 0.0 < lam < 2.0:
        raise ValueError("lam must lie in (0, 2); otherwise the energy is unbounded below")
    if isinstance(field_, PiecewiseLinearMap):
        if rho is None:
            raise ValueError("a map needs the data density")
        u = np.abs(np.diff(field_.values[:, 0])) / np.diff(field_.x)
        masses = rho.cell_masses(field_)
        rho_mid = rho.pdf(0.5 * (field_.x[1:] + field_.x[:-1]))
        if np.any(u == 0):
            return math.inf
        return float(np.sum(np.log1p(u * u) * masses) + lam * math.log(np.sum(rho_mid * masses / u)))
    x, u, r = field_.x, field_.u, field_.rho
    if np.any(u < 0):
        raise ValueError("u must be nonnegative")
    if np.any(u == 0):
        return math.inf
    return float(np.trapezoid(np.log1p(u * u) * r, x) + lam * math.log(np.trapezoid(r * r / u, x)))


def heaviside_ramp_map(n: int, theta: float = 1.0, x0: float = 0.5, n_grid: int = 4097,
                       lower: float = 0.0, upper: float = 1.0) -> PiecewiseLinearMap:
    """``x + theta * min(1, n (x - x0)_+)``, a Lipschitz approximation of a jump."""
    if n < 1:
        raise ValueError("n must be positive")
    x1 = x0 + 1.0 / n
    if not lower < x0 < x1 < upper:
        raise ValueError("the ramp must fit inside the interval")
    x = np.union1d(np.linspace(lower, upper, n_grid), [x0, x1])
    return PiecewiseLinearMap(x, x + theta * np.clip(n * (x - x0), 0.0, 1.0))


def jump_map_energy(kernel: KernelSpec, rho: DensitySpec, theta: float = 1.0, x0: float = 0.5,
                    sigma: BandwidthField | None = None, s: float = 1.0, n_grid: int = 4097) -> float:
    """Energy of ``x + theta H(x - x0)``: the jump adds nothing to the attraction.

    Each continuous piece is pushed forward separately; the images are
    disjoint for ``theta > 0``, so their densities add without overlap.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    left_x = np.linspace(rho.lower, x0, n_grid)
    left = PiecewiseLinearMap(left_x, left_x)
    right_x = np.linspace(x0, rho.upper, n_grid)
    right = PiecewiseLinearMap(right_x, right_x + theta)
    a = sum(continuum_attraction(piece, kernel, sigma, rho, s) for piece in (left, right))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        l2 = sum(pushforward_density_1d(piece, rho).l2_squared() for piece in (left, right))
    return a + math.log(l2)


def scale_profile(T: PiecewiseLinearMap, kernel: KernelSpec, rho: DensitySpec, s: float,
                  lams, sigma: BandwidthField | None = None) -> np.ndarray:
    """``E[lam T; phi_s]`` over a list of dilations."""
    return np.array([continuum_energy(T.scaled(l), kernel, sigma, rho, s).total for l in lams])


__all__ = [
    "ContinuumEnergyReport", "DegenerateSupportError", "DivergenceError", "attraction_decomposition",
    "continuum_attraction", "continuum_energy", "continuum_repulsion", "heaviside_ramp_map",
    "jump_map_energy", "perona_malik_energy", "rasterize_pushforward", "rearrange_1d",
    "riesz_energy", "riesz_energy_fourier", "scale_profile", "scaling_identity_check",
    "sne_continuum_energy",
]
