"""Exact one dimensional minimizer of the continuum energy.

For d = m = 1 the energy of an increasing map depends only on its slope
``u = T'`` through

    F[u] = int phi(sigma u) rho + log int rho^2 / u.

Its critical points satisfy ``theta(sigma u) = B[u] sigma rho`` with
``B[u] = 1 / int rho^2 / u``.  Since ``theta`` is increasing, for each ``b``
the equation ``theta(sigma u) = b sigma rho`` has a unique solution
``u_b``, and the iteration ``u <- u_{B[u]}`` started below the minimizer
increases monotonically to it.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import kernels
from .data import BandwidthField, DensitySpec
from .kernels import KernelSpec, LogPotential
from .maps import PiecewiseLinearMap

logger = logging.getLogger(__name__)

BISECTION_TOL = 1e-12


class MonotonicityError(RuntimeError):
    """The fixed-point iterates stopped increasing."""


class NonConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass
class Profile1D:
    """Slope field ``u`` on a grid with samples of ``sigma`` and ``rho``."""

    x: np.ndarray
    u: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray

    def with_u(self, u) -> "Profile1D":
        return Profile1D(self.x, np.asarray(u, dtype=float), self.sigma, self.rho)


@dataclass
class SolverResult:
    u_star: Profile1D
    b_star: float
    T_star: PiecewiseLinearMap
    residual: float
    iterations: int
    F: float
    delta0: float
    b_history: list = field(default_factory=list)


def make_profile(density: DensitySpec, sigma: BandwidthField | None = None,
                 n_grid: int = 4096, u=None) -> Profile1D:
    x = np.linspace(density.lower, density.upper, n_grid)
    sigma = sigma or BandwidthField()
    s = np.asarray(sigma(x), dtype=float) * np.ones_like(x)
    rho = np.asarray(density.pdf(x), dtype=float)
    u = np.ones_like(x) if u is None else np.broadcast_to(np.asarray(u, dtype=float), x.shape).copy()
    return Profile1D(x, u, s, rho)


# --- potentials -------------------------------------------------------------

def _theta(kernel, v, s: float = 1.0):
    """``theta_s(v) = theta_1(s v) / s``, the nonlinearity for ``phi_s``."""
    if isinstance(kernel, LogPotential):
        return kernel.theta(s * v) / s
    return kernels.theta(kernel, s * np.asarray(v, dtype=float)) / s


def _phi(kernel, v, s: float = 1.0):
    if isinstance(kernel, LogPotential):
        return kernel.phi(v, s)
    return kernels.phi_one_1d(kernel, v, s)


def _phi_prime(kernel, v, s: float = 1.0):
    v = np.asarray(v, dtype=float)
    return _theta(kernel, v, s) / (v * v)


def theta_fn(kernel, s: float = 1.0):
    return lambda v: _theta(kernel, v, s)


# --- building blocks --------------------------------------------------------

def v_b(kernel, b: float, sr, s: float = 1.0, tol: float = BISECTION_TOL) -> np.ndarray:
    """Solve ``theta(v) = b * sr`` pointwise by bisection.

    ``sr`` holds samples of ``sigma * rho``.  The upper end of the bracket
    starts at ``target / 2 + 10`` and doubles until it covers the root.
    """
    target = b * np.asarray(sr, dtype=float)
    if np.any(target < 0) or not np.all(np.isfinite(target)):
        raise ValueError("v_b needs a nonnegative finite target")
    scalar = target.ndim == 0
    target = np.atleast_1d(target)
    lo = np.zeros_like(target)
    hi = target / 2.0 + 10.0
    short = _theta(kernel, hi, s) < target
    while np.any(short):
        hi[short] *= 2.0
        short = _theta(kernel, hi, s) < target
    # absolute tolerance, loosened to a few ulps where the root is large
    width = np.maximum(tol, 4.0 * np.spacing(hi))
    while np.any(hi - lo > width):
        mid = 0.5 * (lo + hi)
        below = _theta(kernel, mid, s) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = np.where(target == 0, 0.0, 0.5 * (lo + hi))
    return float(out[0]) if scalar else out


def b_functional(profile: Profile1D) -> float:
    """``B[u] = (int rho^2 / u)^-1``; 0 when u vanishes somewhere (F = inf)."""
    u = profile.u
    if np.any(u <= 0):
        return 0.0
    return 1.0 / integrate.trapezoid(profile.rho**2 / u, profile.x)


def u_of_b(profile: Profile1D, kernel, b: float, s: float = 1.0) -> np.ndarray:
    """The slope field ``u_b = v_b / sigma``."""
    return v_b(kernel, b, profile.sigma * profile.rho, s) / profile.sigma


def functional_F(profile: Profile1D, kernel, s: float = 1.0) -> float:
    """``int phi_s(sigma u) rho + log int rho^2 / u`` by the trapezoid rule."""
    u = profile.u
    if np.any(u < 0):
        raise ValueError("u must be nonnegative")
    if np.any(u == 0):
        return math.inf
    attraction = integrate.trapezoid(_phi(kernel, profile.sigma * u, s) * profile.rho, profile.x)
    return float(attraction + math.log(integrate.trapezoid(profile.rho**2 / u, profile.x)))


def first_variation_F(profile: Profile1D, w, kernel, s: float = 1.0) -> float:
    """``int (phi_s'(sigma u) sigma rho - B[u] rho^2 / u^2) w``."""
    u = profile.u
    if np.any(u <= 0):
        raise ValueError("u must be positive")
    B = b_functional(profile)
    g = _phi_prime(kernel, profile.sigma * u, s) * profile.sigma * profile.rho - B * profile.rho**2 / u**2
    return float(integrate.trapezoid(g * np.asarray(w, dtype=float), profile.x))


def el_residual(profile: Profile1D, kernel, s: float = 1.0, b: float | None = None) -> float:
    """``sup |theta_s(sigma u) - B[u] sigma rho|``."""
    b = b_functional(profile) if b is None else b
    return float(np.max(np.abs(_theta(kernel, profile.sigma * profile.u, s) - b * profile.sigma * profile.rho)))


def reconstruct_map(profile: Profile1D) -> PiecewiseLinearMap:
    """``T(x) = int_a^x u`` with the trapezoid rule, so ``T(a) = 0``."""
    T = integrate.cumulative_trapezoid(profile.u, profile.x, initial=0.0)
    return PiecewiseLinearMap(profile.x, T)


def fixed_point_solve(kernel, sigma: BandwidthField | None, rho: DensitySpec, delta0: float = 1e-3,
                      tol: float = 1e-10, max_iter: int = 20_000, n_grid: int = 4096,
                      s: float = 1.0, profile: Profile1D | None = None) -> SolverResult:
    """Monotone iteration ``u_{k+1} = u_{B[u_k]}`` from a small constant.

    Parameters
    ----------
    kernel : KernelSpec or LogPotential
    sigma : BandwidthField, optional
        Defaults to the constant 1.
    rho : DensitySpec
        Its mass must exceed 1/2, otherwise the energy is unbounded below.
    delta0 : float
        Starting constant, halved until ``u_0 <= u_{B[u_0]}`` holds.
    profile : Profile1D, optional
        Supplies the grid and the samples of sigma and rho directly.

    Raises
    ------
    MonotonicityError
        If an iterate decreases anywhere by more than the bisection noise.
    NonConvergenceError
        If ``max_iter`` iterations do not reach ``tol``.
    """
    if isinstance(kernel, KernelSpec) and kernel.d != 1:
        raise ValueError("the solver needs a one dimensional kernel")
    prof = profile if profile is not None else make_profile(rho, sigma, n_grid)
    mass = integrate.trapezoid(prof.rho, prof.x)
    if mass <= 0.5:
        raise ValueError(f"density mass {mass:.4g} must exceed 1/2 for a minimizer to exist")
    delta = float(delta0)
    for _ in range(200):
        u0 = np.full_like(prof.x, delta)
        if np.all(u0 <= u_of_b(prof, kernel, b_functional(prof.with_u(u0)), s)):
            break
        delta /= 2.0
    else:
        raise RuntimeError("could not find a starting constant below its update")
    u = u0
    slack = 10.0 * BISECTION_TOL / prof.sigma
    history = []
    diff = math.inf
    it = 0
    while it < max_iter:
        it += 1
        b = b_functional(prof.with_u(u))
        history.append(b)
        u_new = u_of_b(prof, kernel, b, s)
        if np.any(u_new < u - slack * np.maximum(1.0, u)):
            raise MonotonicityError(f"iterate {it} decreased by {np.max(u - u_new):.3e}")
        diff = float(np.max(np.abs(u_new - u)))
        u = u_new
        if diff < tol:
            break
    else:
        res = el_residual(prof.with_u(u), kernel, s)
        raise NonConvergenceError(f"no convergence after {max_iter} iterations (step {diff:.3e})", res)
    star = prof.with_u(u)
    b_star = b_functional(star)
    residual = el_residual(star, kernel, s, b_star)
    logger.info("fixed point after %d iterations, residual %.3e", it, residual)
    return SolverResult(star, b_star, reconstruct_map(star), residual, it,
                        functional_F(star, kernel, s), delta, history)


def existence_integral(result: SolverResult, kernel, s: float = 1.0) -> float:
    """``int (b / v_b) sigma rho^2`` at ``b = b*``; equals 1 at the minimizer."""
    prof = result.u_star
    vb = v_b(kernel, result.b_star, prof.sigma * prof.rho, s)
    return float(integrate.trapezoid(result.b_star / vb * prof.sigma * prof.rho**2, prof.x))
