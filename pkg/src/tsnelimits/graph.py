"""Affinity matrices for the data (P) and the embedding (Q)."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .data import BandwidthField, PointCloud
from .kernels import KernelSpec

_GAUSSIAN_FLOOR = 1e-16


class IsolatedVertexError(ValueError):
    """A point has no neighbor inside the kernel support."""

    def __init__(self, index: int):
        super().__init__(f"point {index} has no neighbors within its bandwidth")
        self.index = index


@dataclass(frozen=True)
class RepulsionKernelSpec:
    """Embedding kernel: ``student-t`` (1 + t^2)^-1 or ``gaussian`` exp(-t^2)."""

    family: str = "student-t"

    def __post_init__(self):
        if self.family not in ("student-t", "gaussian"):
            raise ValueError(f"unknown repulsion kernel {self.family!r}")

    def from_squared(self, t2):
        """Evaluate ``psi`` from squared distances."""
        t2 = np.asarray(t2, dtype=float)
        return 1.0 / (1.0 + t2) if self.family == "student-t" else np.exp(-t2)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.from_squared(t * t)


@dataclass
class AffinityGraph:
    """Sparse data affinities.

    Attributes
    ----------
    conditional : csr_matrix
        ``p_{j|i}``; rows sum to one, zero diagonal.
    symmetrized : csr_matrix
        ``p_ij = (p_{i|j} + p_{j|i}) / (2n)``; sums to one.
    weights : csr_matrix
        Raw kernel values ``eta_{h_i}(|x_i - x_j|)`` for ``j != i``.
    degrees : ndarray
        ``d_i``; includes the self term ``eta_{h_i}(0)`` when
        ``include_self_in_degree`` is set.
    bandwidths : ndarray
        ``h_i = sigma(x_i) h``.
    """

    conditional: sparse.csr_matrix
    symmetrized: sparse.csr_matrix
    weights: sparse.csr_matrix
    degrees: np.ndarray
    bandwidths: np.ndarray
    h: float
    include_self_in_degree: bool = True

    @property
    def n(self) -> int:
        return self.conditional.shape[0]

    def dense(self) -> np.ndarray:
        return self.symmetrized.toarray()


def build_affinities(cloud: PointCloud | np.ndarray, kernel: KernelSpec, bandwidths: BandwidthField,
                     h: float, include_self_in_degree: bool = True) -> AffinityGraph:
    """Kernel affinities ``p_{j|i}`` and their symmetrization ``p_ij``.

    The self pair is excluded from ``p_{j|i}``.  Neighbors are found with a
    k-d tree inside ``h_i`` times the kernel support (for the Gaussian, the
    radius where the kernel falls below 1e-16 of its peak).
    """
    x = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n < 2:
        raise ValueError("need at least two points")
    if not h > 0:
        raise ValueError("h must be positive")
    if d != kernel.d:
        raise ValueError(f"kernel dimension {kernel.d} does not match data dimension {d}")
    hi = np.asarray(bandwidths(x), dtype=float) * h
    if kernel.family == "gaussian":
        reach = np.sqrt(-2.0 * np.log(_GAUSSIAN_FLOOR))
    else:
        reach = kernel.support
    tree = cKDTree(x)
    pairs = tree.query_pairs(reach * hi.max(), output_type="ndarray")
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    dist = np.linalg.norm(x[rows] - x[cols], axis=1)
    w = kernel.scaled(dist, hi[rows])
    floor = 0.0 if kernel.family != "gaussian" else _GAUSSIAN_FLOOR * kernel.profile(0.0) / hi[rows] ** d
    keep = w > floor
    W = sparse.csr_matrix((w[keep], (rows[keep], cols[keep])), shape=(n, n))
    W.sort_indices()
    row_sum = np.asarray(W.sum(axis=1)).ravel()
    empty = np.flatnonzero(row_sum <= 0)
    if empty.size:
        raise IsolatedVertexError(int(empty[0]))
    cond = sparse.diags(1.0 / row_sum) @ W
    cond = cond.tocsr()
    sym = ((cond + cond.T) / (2.0 * n)).tocsr()
    sym.sort_indices()
    degrees = row_sum + (kernel.profile(0.0) / hi**d if include_self_in_degree else 0.0)
    return AffinityGraph(cond, sym, W, degrees, hi, float(h), include_self_in_degree)


def export_edges(graph: AffinityGraph, path, header: str | None = None) -> None:
    """Write ``p_ij`` as an ``i, j, p_ij`` edge list."""
    coo = graph.symmetrized.tocoo()
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "p_ij"])
        for i, j, v in zip(coo.row, coo.col, coo.data):
            writer.writerow([int(i), int(j), repr(float(v))])


@dataclass
class EmbeddingAffinity:
    """Dense ``q_ij`` with zero diagonal, the raw ``psi`` values and ``Z``."""

    q: np.ndarray
    psi: np.ndarray
    Z: float
    kernel: RepulsionKernelSpec


def pairwise_sq_dists(Y: np.ndarray) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[1] == 1:
        diff = Y[:, 0][:, None] - Y[:, 0][None, :]
        return diff * diff
    if Y.shape[0] <= 2000:
        diff = Y[:, None, :] - Y[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)
    sq = np.sum(Y * Y, axis=1)
    out = sq[:, None] + sq[None, :] - 2.0 * Y @ Y.T
    return np.clip(out, 0.0, None)


def build_q(embedding, psi: RepulsionKernelSpec | None = None) -> EmbeddingAffinity:
    """``q_ij = psi(|y_i - y_j|) / sum_{k != l} psi(|y_k - y_l|)``."""
    psi = psi or RepulsionKernelSpec()
    Y = np.asarray(embedding, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] < 2:
        raise ValueError("need at least two points")
    vals = psi.from_squared(pairwise_sq_dists(Y))
    np.fill_diagonal(vals, 0.0)
    Z = float(vals.sum())
    return EmbeddingAffinity(vals / Z, vals, Z, psi)
