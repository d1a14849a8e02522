"""Discrete KL energies, their gradients and plain gradient descent."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .graph import AffinityGraph, RepulsionKernelSpec, build_q, pairwise_sq_dists
from .maps import PiecewiseLinearMap

logger = logging.getLogger(__name__)

STUDENT_T = RepulsionKernelSpec("student-t")
GAUSSIAN = RepulsionKernelSpec("gaussian")
DIVERGENCE_BOUND = 1e12


@dataclass
class EnergyReport:
    """Terms of the KL energy of ``Y / h`` and the rescaled energies of ``Y``.

    ``kl == constant + attraction + repulsion``.  ``offset`` is
    ``kl - (A_n + R_n)``; it depends only on P, n and h when degrees exclude
    the self term.
    """

    kl: float
    attraction: float
    repulsion: float
    constant: float
    A_n: float
    R_n: float
    h: float
    offset: float


@dataclass
class EmbeddingState:
    Y: np.ndarray
    step: int = 0
    dt: float = 1.0
    seed: int | None = None
    trace: list = field(default_factory=list)
    diverged: bool = False
    mode: str = "tsne"

    def trace_array(self) -> np.ndarray:
        """Rows of ``(step, KL, A_n, R_n, energy)``."""
        return np.array(self.trace, dtype=float).reshape(-1, 5)


def _as_2d(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    return Y[:, None] if Y.ndim == 1 else Y


def _dense(P) -> np.ndarray:
    if isinstance(P, AffinityGraph):
        P = P.symmetrized
    if sparse.issparse(P):
        return P.toarray()
    return np.asarray(P, dtype=float)


def kl_divergence(P, Q) -> float:
    """``sum p_ij log(p_ij / q_ij)`` over the support of P.

    Returns ``inf`` when some ``q_ij`` vanishes where ``p_ij > 0``.
    """
    if isinstance(P, AffinityGraph):
        P = P.symmetrized
    q = Q.q if hasattr(Q, "q") else np.asarray(Q, dtype=float)
    if sparse.issparse(P):
        coo = P.tocoo()
        i, j, p = coo.row, coo.col, coo.data
    else:
        P = np.asarray(P, dtype=float)
        i, j = np.nonzero(P)
        p = P[i, j]
    mask = p > 0
    i, j, p = i[mask], j[mask], p[mask]
    qq = q[i, j]
    if np.any(qq <= 0):
        return math.inf
    return float(np.sum(p * (np.log(p) - np.log(qq))))


def kl_terms(P: AffinityGraph, Y, psi: RepulsionKernelSpec = STUDENT_T):
    """Split KL(P || Q(Y)) into constant, attraction and repulsion.

    attraction = (1/n) sum_ij p_{j|i} log(1 / psi_ij) and
    repulsion = log sum_{i != j} psi_ij.
    """
    Y = _as_2d(Y)
    n = P.n
    Q = build_q(Y, psi)
    sym = P.symmetrized.tocoo()
    constant = float(np.sum(sym.data * np.log(sym.data)))
    cond = P.conditional.tocoo()
    t2 = np.sum((Y[cond.row] - Y[cond.col]) ** 2, axis=1)
    log_inv = np.log1p(t2) if psi.family == "student-t" else t2
    attraction = float(np.sum(cond.data * log_inv)) / n
    repulsion = math.log(Q.Z)
    return constant, attraction, repulsion, kl_divergence(P, Q)


def rescaled_attraction(P: AffinityGraph, Y, h: float) -> float:
    """``A_n = (1/n) sum_i (1/d_i) sum_j w_ij log(1 + |Y_i - Y_j|^2 / h^2)``."""
    Y = _as_2d(Y)
    W = P.weights.tocoo()
    t2 = np.sum((Y[W.row] - Y[W.col]) ** 2, axis=1) / h**2
    per_row = np.bincount(W.row, W.data * np.log1p(t2), minlength=P.n)
    return float(np.mean(per_row / P.degrees))


def rescaled_repulsion(Y, h: float) -> float:
    """``R_n = log((1/(n(n-1))) sum_{i != j} (1 + |Y_i - Y_j|^2 / h^2)^-1)``."""
    Y = _as_2d(Y)
    n = Y.shape[0]
    total = 0.0
    for s in range(0, n, 1024):
        D = np.sum((Y[s:s + 1024, None, :] - Y[None, :, :]) ** 2, axis=-1) / h**2
        total += float(np.sum(1.0 / (1.0 + D)))
    total -= n  # diagonal terms
    return math.log(total / (n * (n - 1)))


def rescaled_energy(P: AffinityGraph, Y, h: float) -> EnergyReport:
    """Rescaled attraction ``A_n`` and repulsion ``R_n`` of map values ``Y``.

    ``Y`` holds ``T(x_i)``; the KL terms refer to the embedding ``Y / h``.
    """
    Y = _as_2d(Y)
    constant, attraction, repulsion, kl = kl_terms(P, Y / h)
    A_n = rescaled_attraction(P, Y, h)
    R_n = rescaled_repulsion(Y, h)
    return EnergyReport(kl, attraction, repulsion, constant, A_n, R_n, h, kl - A_n - R_n)


def rescaled_sne_energy(P: AffinityGraph, Y, h: float) -> float:
    """``(1/(n h^2)) sum p_{j|i} |Y_i - Y_j|^2 + log sum_{i != j} exp(-|Y_i - Y_j|^2 / h^2)``."""
    Y = _as_2d(Y)
    cond = P.conditional.tocoo()
    t2 = np.sum((Y[cond.row] - Y[cond.col]) ** 2, axis=1)
    attraction = float(np.sum(cond.data * t2)) / (P.n * h * h)
    k = np.exp(-pairwise_sq_dists(Y) / h**2)
    np.fill_diagonal(k, 0.0)
    return attraction + math.log(k.sum())


def _gradient(Pd: np.ndarray, Y: np.ndarray, mode: str) -> tuple[np.ndarray, np.ndarray]:
    if Y.shape[1] == 1:
        diff = Y[:, 0][:, None] - Y[:, 0][None, :]
        d2 = diff * diff
    else:
        d2 = pairwise_sq_dists(Y)
    psi = 1.0 / (1.0 + d2) if mode == "tsne" else np.exp(-d2)
    np.fill_diagonal(psi, 0.0)
    q = psi / psi.sum()
    M = Pd - q
    if mode == "tsne":
        M = M * psi
    grad = 4.0 * (M.sum(axis=1)[:, None] * Y - M @ Y)
    return grad, q


def tsne_gradient(P, Y) -> np.ndarray:
    """``4 Z sum_j q_ij (p_ij - q_ij)(y_i - y_j)`` with Student-t ``psi``."""
    Y = _as_2d(Y)
    return _gradient(_dense(P), Y, "tsne")[0]


def sne_gradient(P, Y) -> np.ndarray:
    """``4 sum_j (p_ij - q_ij)(y_i - y_j)`` with Gaussian ``psi``."""
    Y = _as_2d(Y)
    return _gradient(_dense(P), Y, "sne")[0]


def descend(P, Y0, steps: int, dt: float, mode: str = "tsne", record_every: int = 100,
            seed: int | None = None) -> EmbeddingState:
    """Plain gradient descent ``Y <- Y - dt * grad``.

    The loss trace holds ``(step, KL, A_n, R_n, energy)`` every
    ``record_every`` steps and at the last step.  ``energy`` is the t-SNE loss
    ``KL - sum p log p`` (attraction plus repulsion); ``A_n`` and ``R_n`` are
    reported for the map ``h * Y`` when P carries a base scale ``h``.  A step that produces a
    non-finite value or ``|Y| > 1e12`` stops the run and keeps the last
    finite iterate with ``diverged=True``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if mode not in ("tsne", "sne"):
        raise ValueError(f"unknown mode {mode!r}")
    Pd = _dense(P)
    psi = STUDENT_T if mode == "tsne" else GAUSSIAN
    Y = _as_2d(Y0).copy()
    state = EmbeddingState(Y, 0, dt, seed, [], False, mode)

    support = Pd > 0
    constant = float(np.sum(Pd[support] * np.log(Pd[support])))

    def record(step, Ycur):
        kl = kl_divergence(Pd, build_q(Ycur, psi))
        if isinstance(P, AffinityGraph):
            rep = rescaled_energy(P, P.h * Ycur, P.h)
            state.trace.append((step, kl, rep.A_n, rep.R_n, kl - constant))
        else:
            state.trace.append((step, kl, math.nan, math.nan, kl - constant))

    if record_every:
        record(0, Y)
    for step in range(1, steps + 1):
        grad, _ = _gradient(Pd, Y, mode)
        Y_new = Y - dt * grad
        if not np.all(np.isfinite(Y_new)) or np.abs(Y_new).max() > DIVERGENCE_BOUND:
            logger.warning("descent diverged at step %d", step)
            state.diverged = True
            break
        Y = Y_new
        state.step = step
        if record_every and (step % record_every == 0 or step == steps):
            record(step, Y)
    state.Y = Y
    return state


def initialize(x, mode: str, h: float, seed: int = 0, m: int = 1, T_star=None) -> np.ndarray:
    """Starting embedding: ``random``, ``identity`` (x / h) or ``continuum`` (T*(x) / h)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2 and x.shape[1] == 1:
        x = x[:, 0]
    if mode == "random":
        rng = np.random.default_rng(seed)
        return 1e-2 * rng.standard_normal((x.shape[0], m))
    if mode == "identity":
        return _as_2d(x / h)
    if mode == "continuum":
        if T_star is None:
            raise ValueError("continuum initialization needs the solved map")
        return _as_2d(np.asarray(T_star(x)) / h)
    raise ValueError(f"unknown initialization {mode!r}")


def postprocess(state: EmbeddingState | np.ndarray, h: float) -> np.ndarray:
    """Shift so the minimum is zero (1D) or the mean is zero, then scale by h."""
    Y = _as_2d(state.Y if isinstance(state, EmbeddingState) else state)
    if Y.shape[1] == 1:
        return (h * (Y - Y.min()))[:, 0]
    return h * (Y - Y.mean(axis=0))


def discrete_map(x, T_values) -> PiecewiseLinearMap:
    """Interpolate embedded values over sorted data points."""
    x = np.asarray(x, dtype=float).ravel()
    order = np.argsort(x)
    xs, ts = x[order], np.asarray(T_values, dtype=float).ravel()[order]
    keep = np.concatenate([[True], np.diff(xs) > 0])
    return PiecewiseLinearMap(xs[keep], ts[keep])
