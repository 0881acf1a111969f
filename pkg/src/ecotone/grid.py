"""Uniform tensor grids on intervals and rectangles with trapezoidal weights."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class Grid:
    """Uniform node grid on ``[0, L_1] x ... x [0, L_dim]``.

    Nodal fields are flat arrays of length :attr:`node_count`; in 2D the flat
    index is the C-order ravel of ``shape`` (x varies slowest).
    """

    extents: tuple[float, ...]
    shape: tuple[int, ...]
    spacing: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if len(self.extents) != len(self.shape) or len(self.shape) not in (1, 2):
            raise ConfigError(f"grid dimension must be 1 or 2, got {len(self.shape)}")
        for n in self.shape:
            if int(n) != n or n < 3:
                raise ConfigError(f"need at least 3 nodes per axis, got {n}")
        for ext in self.extents:
            if not (np.isfinite(ext) and ext > 0):
                raise ConfigError(f"extent must be positive, got {ext}")
        object.__setattr__(
            self, "spacing", tuple(float(e) / (n - 1) for e, n in zip(self.extents, self.shape))
        )

    @property
    def dim(self) -> int:
        return len(self.shape)

    @cached_property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def min_spacing(self) -> float:
        return min(self.spacing)

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.arange(n) * h for n, h in zip(self.shape, self.spacing))

    @cached_property
    def axis_weights(self) -> tuple[np.ndarray, ...]:
        out = []
        for n, h in zip(self.shape, self.spacing):
            w = np.full(n, h)
            w[0] = w[-1] = 0.5 * h
            out.append(w)
        return tuple(out)

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weight of every node (flat)."""
        if self.dim == 1:
            w = self.axis_weights[0].copy()
        else:
            w = np.outer(*self.axis_weights).ravel()
        w.setflags(write=False)
        return w

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(node_count, dim)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        c = np.stack([m.ravel() for m in mesh], axis=1)
        c.setflags(write=False)
        return c

    @property
    def x(self) -> np.ndarray:
        return self.coords[:, 0]

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, self.check(values)))

    def check(self, values, name: str = "field") -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        if arr.shape == self.shape and self.dim == 2:
            arr = arr.ravel()
        if arr.shape != (self.node_count,):
            raise ShapeError(
                f"{name} has shape {arr.shape}, expected ({self.node_count},) for grid {self.shape}"
            )
        return arr

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(x)`` (1D) or ``func(x, y)`` (2D) at the nodes."""
        return np.asarray(func(*self.coords.T), dtype=float) * np.ones(self.node_count)

    def node_index(self, point) -> int:
        """Flat index of the node nearest to ``point``."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = [int(np.clip(round(p / h), 0, n - 1)) for p, h, n in zip(point, self.spacing, self.shape)]
        return int(np.ravel_multi_index(idx, self.shape))


def make_grid(dim: int, extents, nodes_per_axis) -> Grid:
    """Build a uniform grid; scalars are broadcast to every axis."""
    if dim not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {dim}")
    extents = tuple(float(e) for e in np.broadcast_to(np.asarray(extents, dtype=float), (dim,)))
    nodes = tuple(int(n) for n in np.broadcast_to(np.asarray(nodes_per_axis), (dim,)))
    return Grid(extents=extents, shape=nodes)
