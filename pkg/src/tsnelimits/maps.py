"""Piecewise linear maps on tensor grids."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PiecewiseLinearMap:
    """Map ``T: Omega -> R^m`` given by nodal values on a tensor grid.

    Parameters
    ----------
    axes : tuple of arrays
        Strictly increasing node coordinates, one array per data dimension.
    values : ndarray
        Nodal values of shape ``(*grid_shape, m)``.  A 1D array is accepted
        for d = m = 1.
    """

    axes: tuple
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.axes, np.ndarray) and self.axes.ndim == 1:
            self.axes = (self.axes,)
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        shape = tuple(a.size for a in self.axes)
        values = np.asarray(self.values, dtype=float)
        if values.shape == shape:
            values = values[..., None]
        if values.shape[:-1] != shape:
            raise ValueError(f"values of shape {values.shape} do not match grid {shape}")
        if any(np.any(np.diff(a) <= 0) for a in self.axes):
            raise ValueError("grid nodes must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("map values must be finite")
        self.values = values

    @classmethod
    def from_function(cls, func, *axes):
        """Sample ``func`` at the grid nodes; ``func`` takes an (N, d) array."""
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        flat = mesh.reshape(-1, len(axes))
        out = np.asarray(func(flat[:, 0] if len(axes) == 1 else flat), dtype=float)
        out = out.reshape(mesh.shape[:-1] + (-1,))
        return cls(axes, out)

    @property
    def d(self) -> int:
        return len(self.axes)

    @property
    def m(self) -> int:
        return self.values.shape[-1]

    @property
    def x(self) -> np.ndarray:
        """Nodes of a one dimensional map."""
        return self.axes[0]

    def widths(self):
        return [np.diff(a) for a in self.axes]

    def cell_volumes(self) -> np.ndarray:
        vol = np.ones(())
        for w in self.widths():
            vol = np.multiply.outer(vol, w)
        return vol

    def cell_centers(self) -> np.ndarray:
        mids = [0.5 * (a[1:] + a[:-1]) for a in self.axes]
        return np.stack(np.meshgrid(*mids, indexing="ij"), axis=-1)

    def jacobians(self) -> np.ndarray:
        """Per-cell Jacobian of shape ``(*cells, m, d)``.

        In 1D this is the exact slope of each linear piece.  For d >= 2 it is
        the Jacobian of the multilinear interpolant at the cell center, which
        is exact for affine maps.
        """
        v = self.values
        cols = []
        for axis, w in enumerate(self.widths()):
            diff = np.diff(v, axis=axis)
            for other in range(self.d):
                if other != axis:
                    sl_lo = [slice(None)] * diff.ndim
                    sl_hi = [slice(None)] * diff.ndim
                    sl_lo[other] = slice(None, -1)
                    sl_hi[other] = slice(1, None)
                    diff = 0.5 * (diff[tuple(sl_lo)] + diff[tuple(sl_hi)])
            shape = [1] * self.d
            shape[axis] = -1
            cols.append(diff / w.reshape(shape + [1]))
        return np.stack(cols, axis=-1)

    def scaled(self, lam: float) -> "PiecewiseLinearMap":
        return PiecewiseLinearMap(self.axes, lam * self.values, dict(self.meta))

    def __call__(self, x):
        """Evaluate a one dimensional map by linear interpolation."""
        if self.d != 1:
            raise NotImplementedError("evaluation implemented for d=1 maps")
        x = np.asarray(x, dtype=float)
        out = np.stack([np.interp(x, self.x, self.values[:, k]) for k in range(self.m)], axis=-1)
        return out[..., 0] if self.m == 1 else out
