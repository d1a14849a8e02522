"""Attraction kernels and the log potentials derived from them.

A :class:`KernelSpec` describes a radial profile ``eta`` on ``R^d`` with unit
mass.  Everything else in this module is a functional of that profile:

* radial moments and the tail mass outside a ball,
* the shifted log potential ``phi_s(A) = int eta(|z|) log(s^-2 + |A z|^2) dz``,
* the one dimensional nonlinearity ``theta(v) = v^2 phi_1'(v)`` and its
  derivative.

Integrals in ``|z|`` use one shared composite Gauss-Legendre rule whose panels
shrink geometrically towards the origin.  Integrands such as
``log(1 + v^2 r^2)`` vary on the scale ``r ~ 1/v``, so graded panels keep the
rule accurate from ``v ~ 1e-8`` up to ``v ~ 1e8``.  Weights are normalized to
sum to one, which makes scaling identities hold to rounding error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

FAMILIES = ("gaussian", "epanechnikov", "truncated-gaussian")
TRUNCATION_RADIUS = 3.0
# eta(12) ~ 1e-32 for the Gaussian, far below double precision of the mass
GAUSSIAN_CUTOFF = 12.0

_PANEL_LEVELS = 48
_PANEL_NODES = 16
_TAYLOR_SWITCH = 1e-2
_TAYLOR_TERMS = 5


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in ``R^d`` (2 for d=1)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass(frozen=True)
class KernelSpec:
    """Radial attraction kernel ``eta(|z|)`` on ``R^d`` with unit mass.

    Parameters
    ----------
    family : {"gaussian", "epanechnikov", "truncated-gaussian"}
        Profile shape.  The truncated Gaussian is cut at ``|z| = 3`` and
        renormalized.
    d : int
        Ambient dimension of the data.
    """

    family: str = "epanechnikov"
    d: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")

    @property
    def support(self) -> float:
        """Radius of the support (``inf`` for the Gaussian)."""
        return {"gaussian": math.inf, "epanechnikov": 1.0,
                "truncated-gaussian": TRUNCATION_RADIUS}[self.family]

    @property
    def quadrature_radius(self) -> float:
        return GAUSSIAN_CUTOFF if self.family == "gaussian" else self.support

    @property
    def normalization(self) -> float:
        """Constant ``c`` such that ``eta(r) = c * shape(r)`` has unit mass."""
        return _normalization(self.family, self.d)

    def profile(self, r):
        """Evaluate ``eta`` at radius ``r`` (array-like, r >= 0)."""
        r = np.asarray(r, dtype=float)
        c = self.normalization
        if self.family == "epanechnikov":
            return c * np.clip(1.0 - r * r, 0.0, None)
        out = c * np.exp(-0.5 * r * r)
        if self.family == "truncated-gaussian":
            out = np.where(r <= TRUNCATION_RADIUS, out, 0.0)
        return out

    __call__ = profile

    def scaled(self, r, h):
        """Rescaled kernel ``h^-d eta(r / h)``; ``h`` may be an array."""
        h = np.asarray(h, dtype=float)
        return self.profile(np.asarray(r, dtype=float) / h) / h ** self.d


@lru_cache(maxsize=None)
def _normalization(family: str, d: int) -> float:
    area = sphere_area(d)
    if family == "epanechnikov":
        # area * int_0^1 (1 - r^2) r^(d-1) dr = area * 2 / (d (d + 2))
        return d * (d + 2) / (2.0 * area)
    if family == "gaussian":
        return (2.0 * math.pi) ** (-d / 2)
    radial = 2.0 ** (d / 2 - 1) * special.gamma(d / 2) * special.gammainc(d / 2, TRUNCATION_RADIUS**2 / 2)
    return 1.0 / (area * radial)


@lru_cache(maxsize=None)
def _radial_rule_cached(family: str, d: int):
    spec = KernelSpec(family, d)
    R = spec.quadrature_radius
    edges = R * 2.0 ** -np.arange(_PANEL_LEVELS, -1, -1, dtype=float)
    edges = np.concatenate([[0.0], edges])
    t, gw = np.polynomial.legendre.leggauss(_PANEL_NODES)
    a, b = edges[:-1, None], edges[1:, None]
    r = (0.5 * (b - a) * t + 0.5 * (a + b)).ravel()
    w = (0.5 * (b - a) * gw).ravel()
    w = w * sphere_area(d) * r ** (d - 1) * spec.profile(r)
    w = w / w.sum()
    r.setflags(write=False)
    w.setflags(write=False)
    return r, w


def radial_rule(spec: KernelSpec):
    """Nodes ``r`` and weights ``w`` with ``sum(w) == 1``.

    ``sum(w * f(r))`` approximates ``int eta(|z|) f(|z|) dz`` for radial ``f``.
    """
    return _radial_rule_cached(spec.family, spec.d)


def kernel_moment(spec: KernelSpec, k: int) -> float:
    """Radial moment ``int eta(|z|) |z|^k dz`` for ``k`` in 0..4."""
    if int(k) != k or not 0 <= k <= 4:
        raise ValueError(f"moment order must be an integer in 0..4, got {k}")
    return _radial_moment(spec, float(k))


def _radial_moment(spec: KernelSpec, k: float) -> float:
    d = spec.d
    area, c = sphere_area(d), spec.normalization
    p = (k + d) / 2
    if spec.family == "epanechnikov":
        return area * c * (1.0 / (k + d) - 1.0 / (k + d + 2))
    if spec.family == "gaussian":
        return area * c * 2.0 ** (p - 1) * special.gamma(p)
    return area * c * 2.0 ** (p - 1) * special.gamma(p) * special.gammainc(p, TRUNCATION_RADIUS**2 / 2)


def coordinate_moment(spec: KernelSpec, k: int) -> float:
    """One dimensional moment ``int eta(|z|) z_1^k dz`` (zero for odd k)."""
    if k % 2:
        return 0.0
    if spec.d == 1:
        return _radial_moment(spec, float(k))
    # E[w_1^k] over the unit sphere = Gamma(d/2) Gamma((k+1)/2) / (sqrt(pi) Gamma((k+d)/2))
    sphere = math.gamma(spec.d / 2) * math.gamma((k + 1) / 2) / (math.sqrt(math.pi) * math.gamma((k + spec.d) / 2))
    return _radial_moment(spec, float(k)) * sphere


def c_eta(spec: KernelSpec) -> float:
    """Second directional moment ``int eta(|z|) z_1^2 dz``."""
    return kernel_moment(spec, 2) / spec.d


def tail_mass(spec: KernelSpec, r) -> np.ndarray | float:
    """Mass of ``eta`` outside the ball of radius ``r``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    d = spec.d
    if spec.family == "gaussian":
        out = special.gammaincc(d / 2, r * r / 2)
    elif spec.family == "truncated-gaussian":
        top = special.gammainc(d / 2, TRUNCATION_RADIUS**2 / 2)
        inner = special.gammainc(d / 2, np.minimum(r, TRUNCATION_RADIUS) ** 2 / 2)
        out = (top - inner) / top
    else:
        rc = np.minimum(r, 1.0)
        inside = sphere_area(d) * spec.normalization * (rc**d / d - rc ** (d + 2) / (d + 2))
        out = 1.0 - inside
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def log_moment(spec: KernelSpec) -> float:
    """Radial log moment ``int eta(|z|) log|z|^2 dz`` on the shared rule."""
    r, w = radial_rule(spec)
    return float(np.dot(w, np.log(r * r)))


# ---------------------------------------------------------------------------
# spherical averages of log |A w|^2


def _gaussian_log_expectation(eigs: np.ndarray, shift: float = 0.0) -> np.ndarray:
    """``E log(shift + g^T M g)`` for a standard normal ``g`` from eigenvalues of ``M``.

    This is the Frullani integral
    ``int_0^inf (e^-t - e^(-shift t) prod_i (1 + 2 t l_i)^-1/2) dt / t``,
    evaluated by the trapezoid rule in ``u = log t``; the integrand is
    analytic in a strip of half width pi, so the rule converges geometrically.
    """
    eigs = np.clip(np.asarray(eigs, dtype=float), 0.0, None)
    flat = eigs.reshape(-1, eigs.shape[-1])
    out = np.empty(flat.shape[0])
    for start in range(0, flat.shape[0], 256):
        chunk = flat[start:start + 256]
        positive = np.where(chunk > 0, chunk, np.inf)
        lo_scale = np.log(np.maximum(chunk.sum(axis=1) + shift, 1.0))
        hi_scale = -np.log(2.0 * positive.min(axis=1))
        rank = (chunk > 0).sum(axis=1)
        u_lo = (-lo_scale - 40.0).min()
        u_hi = (np.maximum(hi_scale, 5.0) + 80.0 / np.maximum(rank, 1)).max()
        if shift > 0:
            u_hi = min(u_hi, max(math.log(60.0 / shift), 5.0))
        u = np.arange(u_lo, u_hi + 0.1, 0.1)
        t = np.exp(u)
        prod = np.prod((1.0 + 2.0 * t[None, :, None] * chunk[:, None, :]) ** -0.5, axis=2)
        integrand = np.exp(-t)[None, :] - np.exp(-shift * t)[None, :] * prod
        out[start:start + 256] = np.trapezoid(integrand, u, axis=1)
    return out.reshape(eigs.shape[:-1])


def _frullani_sphere_average(eigs: np.ndarray, d: int) -> np.ndarray:
    """Sphere average of ``log(w^T M w)``: the Gaussian expectation minus ``E log|g|^2``."""
    return _gaussian_log_expectation(eigs) - (special.digamma(d / 2) + math.log(2.0))


def sphere_log_average(eigs, d: int | None = None, method: str = "exact",
                       n_directions: int = 4096, seed: int = 0) -> np.ndarray:
    """Average of ``log(w^T M w)`` over unit vectors ``w``.

    Parameters
    ----------
    eigs : array_like, shape (..., d)
        Eigenvalues of the symmetric positive semidefinite matrix ``M``.
    method : {"exact", "mc"}
        ``"exact"`` uses the two point average for d=1, the closed form
        ``2 log((sqrt(l1) + sqrt(l2)) / 2)`` for d=2 and a Frullani integral
        for d >= 3.  ``"mc"`` averages over seeded antithetic random
        directions and is kept for cross-checks.
    """
    eigs = np.asarray(eigs, dtype=float)
    d = eigs.shape[-1] if d is None else d
    if method == "mc":
        rng = np.random.default_rng(seed)
        w = rng.standard_normal((n_directions // 2, d))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        w = np.concatenate([w, -w])
        vals = np.log(np.einsum("nd,...d->...n", w * w, eigs))
        return vals.mean(axis=-1)
    if method != "exact":
        raise ValueError(f"unknown method {method!r}")
    if d == 1:
        with np.errstate(divide="ignore"):
            return np.log(eigs[..., 0])
    if d == 2:
        root = np.sqrt(np.clip(eigs, 0.0, None))
        with np.errstate(divide="ignore"):
            return 2.0 * np.log(0.5 * (root[..., 0] + root[..., 1]))
    return _frullani_sphere_average(eigs, d)


def _gram_eigs(spec: KernelSpec, A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    elif A.ndim == 1:
        A = A.reshape(-1, 1) if spec.d == 1 else A.reshape(1, -1)
    if A.shape[-1] != spec.d:
        raise ValueError(f"matrix has {A.shape[-1]} columns but the kernel lives in d={spec.d}")
    if spec.d == 1:
        return np.sum(A * A, axis=-2)
    M = np.swapaxes(A, -1, -2) @ A
    return np.clip(np.linalg.eigvalsh(M), 0.0, None)


def phi_s(spec: KernelSpec, s: float, A, method: str = "exact") -> np.ndarray | float:
    """Shifted log potential ``int eta(|z|) log(s^-2 + |A z|^2) dz``.

    ``A`` is an ``m x d`` matrix or a stack of them with shape (..., m, d).
    ``s = inf`` drops the shift and uses the decomposition into a sphere
    average of ``log|A w|^2`` plus the radial log moment.

    Raises
    ------
    ValueError
        If ``s`` is infinite and some ``A`` is the zero matrix (the integral
        diverges to ``-inf``).
    """
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    eigs = _gram_eigs(spec, A)
    if math.isinf(s):
        if np.any(eigs.max(axis=-1) <= 0.0):
            raise ValueError("phi_s diverges at s=inf for a zero Jacobian")
        out = sphere_log_average(eigs, spec.d, method=method) + log_moment(spec)
    else:
        out = _phi_finite(spec, s ** -2.0, eigs, method)
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def _phi_finite(spec: KernelSpec, shift: float, eigs: np.ndarray, method: str) -> np.ndarray:
    if spec.family == "gaussian" and spec.d >= 3 and method == "exact":
        return _gaussian_log_expectation(eigs, shift)
    r, w = radial_rule(spec)
    r2 = r * r
    if spec.d == 1:
        lam = eigs[..., 0]
        return np.log(shift + lam[..., None] * r2) @ w
    # log(shift + r^2 w^T M w) = log r^2 + log(w^T (M + shift / r^2) w)
    shifted = eigs[..., None, :] + (shift / r2)[:, None]
    avg = sphere_log_average(shifted, spec.d, method=method)
    return (avg + np.log(r2)) @ w


def phi_one_1d(spec: KernelSpec, v, s: float = 1.0) -> np.ndarray:
    """Vectorized ``phi_s`` for scalar slopes ``v`` in d=1."""
    if spec.d != 1:
        raise ValueError("phi_one_1d requires a one dimensional kernel")
    v = np.asarray(v, dtype=float)
    r, w = radial_rule(spec)
    if math.isinf(s):
        with np.errstate(divide="ignore"):
            return np.log(v * v) + log_moment(spec)
    flat = v.ravel()
    out = np.empty_like(flat)
    for start in range(0, flat.size, 2048):
        chunk = flat[start:start + 2048]
        out[start:start + 2048] = np.log(s**-2.0 + (chunk * chunk)[:, None] * (r * r)[None, :]) @ w
    return out.reshape(v.shape)


def phi_scaling_check(spec: KernelSpec, s: float, A, lam: float | None = None):
    """Both sides of the dilation identity for ``phi_s``.

    Without ``lam`` returns ``(phi_1(s A), phi_s(A) + 2 log s)``.  With ``lam``
    returns ``(phi_s(lam A), phi_{s lam}(A) + 2 log lam)``.
    """
    A = np.asarray(A, dtype=float)
    if lam is None:
        return phi_s(spec, 1.0, s * A), phi_s(spec, s, A) + 2.0 * math.log(s)
    return phi_s(spec, s, lam * A), phi_s(spec, s * lam, A) + 2.0 * math.log(lam)


# ---------------------------------------------------------------------------
# theta = v^2 phi_1'(v) in one dimension


def _require_1d(spec: KernelSpec):
    if spec.d != 1:
        raise ValueError("theta is defined for one dimensional kernels only")


def _theta_series(spec: KernelSpec, v: np.ndarray) -> np.ndarray:
    # 2 v^3 z^2 / (1 + v^2 z^2) = sum_k (-1)^k 2 v^(2k+3) z^(2k+2)
    out = np.zeros_like(v)
    for k in range(_TAYLOR_TERMS):
        out += (-1) ** k * 2.0 * _radial_moment(spec, 2.0 * k + 2) * v ** (2 * k + 3)
    return out


def _theta_epanechnikov(v: np.ndarray) -> np.ndarray:
    return 3.0 * (v + 1.0 / v) * (1.0 - np.arctan(v) / v) - v


def _theta_quadrature(spec: KernelSpec, v: np.ndarray) -> np.ndarray:
    r, w = radial_rule(spec)
    flat = v.ravel()
    out = np.empty_like(flat)
    for start in range(0, flat.size, 2048):
        x = flat[start:start + 2048, None] * r[None, :]
        out[start:start + 2048] = (2.0 * flat[start:start + 2048, None] * x * x / (1.0 + x * x)) @ w
    return out.reshape(v.shape)


def theta(spec: KernelSpec, v, method: str | None = None):
    """``theta(v) = int eta(z) 2 v^3 z^2 / (1 + v^2 z^2) dz`` for ``v >= 0``.

    Parameters
    ----------
    method : {None, "closed", "quadrature"}
        ``None`` picks the closed form for the Epanechnikov kernel and the
        quadrature otherwise.  Small ``v`` always uses a Taylor series to
        avoid cancellation.
    """
    _require_1d(spec)
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or np.any(np.isnan(v)):
        raise ValueError("theta requires v >= 0")
    if method is None:
        method = "closed" if spec.family == "epanechnikov" else "quadrature"
    if method == "closed" and spec.family != "epanechnikov":
        raise ValueError("closed form only available for the epanechnikov kernel")
    if method == "quadrature":
        out = _theta_quadrature(spec, v)
    elif method == "closed":
        small = v < _TAYLOR_SWITCH
        safe = np.where(small, 1.0, v)
        out = np.where(small, _theta_series(spec, v), _theta_epanechnikov(safe))
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out) if out.ndim == 0 else out


def theta_prime(spec: KernelSpec, v):
    """Derivative ``int eta(z) (2 v^4 z^4 + 6 v^2 z^2) / (1 + v^2 z^2)^2 dz``."""
    _require_1d(spec)
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("theta_prime requires v >= 0")
    r, w = radial_rule(spec)
    x2 = (v[..., None] * r) ** 2
    out = ((2.0 * x2 * x2 + 6.0 * x2) / (1.0 + x2) ** 2) @ w
    return float(out) if np.ndim(out) == 0 else out


class LogPotential:
    """The potential ``log(1 + v^2)`` with ``theta(v) = 2 v^3 / (1 + v^2)``.

    Drop-in replacement for a kernel in :mod:`tsnelimits.solver1d`; it turns
    the one dimensional solver into a minimizer of the gradient-modulus form
    of the Perona-Malik energy.
    """

    d = 1
    family = "log"

    def phi(self, v, s: float = 1.0):
        v = np.asarray(v, dtype=float)
        return np.log(s**-2.0 + v * v)

    def theta(self, v):
        v = np.asarray(v, dtype=float)
        return 2.0 * v**3 / (1.0 + v * v)

    def theta_prime(self, v):
        v = np.asarray(v, dtype=float)
        return (6.0 * v**2 + 2.0 * v**4) / (1.0 + v * v) ** 2
