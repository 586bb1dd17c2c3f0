"""Uniform tensor grids, cell-averaged fields, and nested-grid transfer."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from .errors import GridMismatchError, InputError


@dataclass(frozen=True)
class Grid:
    """Cell-centred uniform grid on the box [0, extents[0]] x ... .

    Cells are numbered in C order; a field is stored as an (n, size) array.
    """

    extents: Tuple[float, ...]
    cells: Tuple[int, ...]

    def __post_init__(self):
        ext = tuple(float(e) for e in np.atleast_1d(self.extents))
        cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        if len(ext) != len(cells) or len(ext) not in (1, 2):
            raise InputError("grid must be 1D or 2D with one extent per cell count")
        if any(c < 2 for c in cells):
            raise InputError("each axis needs at least 2 cells")
        if any(not (e > 0 and np.isfinite(e)) for e in ext):
            raise InputError("grid extents must be positive and finite")
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "cells", cells)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def dx(self) -> Tuple[float, ...]:
        return tuple(e / c for e, c in zip(self.extents, self.cells))

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def cell_measure(self) -> float:
        return float(np.prod(self.dx))

    @property
    def measure(self) -> float:
        return float(np.prod(self.extents))

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.dx[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    @cached_property
    def centers(self) -> np.ndarray:
        """(dim, size) coordinates of cell centres."""
        mesh = np.meshgrid(*[self.axis_centers(k) for k in range(self.dim)], indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh])

    @cached_property
    def faces(self):
        """Interior faces as (left, right, axis, inv_h) arrays.

        ``right`` is the neighbour of ``left`` one step up along ``axis``.
        Boundary faces carry zero flux and are not listed.
        """
        index = np.arange(self.size).reshape(self.cells)
        lefts, rights, axes = [], [], []
        for k in range(self.dim):
            lo = [slice(None)] * self.dim
            hi = [slice(None)] * self.dim
            lo[k] = slice(0, -1)
            hi[k] = slice(1, None)
            left = index[tuple(lo)].reshape(-1)
            lefts.append(left)
            rights.append(index[tuple(hi)].reshape(-1))
            axes.append(np.full(left.size, k, dtype=np.int64))
        left = np.concatenate(lefts).astype(np.int64)
        right = np.concatenate(rights).astype(np.int64)
        axis = np.concatenate(axes)
        inv_h = 1.0 / np.asarray(self.dx)[axis]
        return left, right, axis, inv_h

    @cached_property
    def face_centers(self) -> np.ndarray:
        """(dim, n_faces) coordinates of interior face midpoints."""
        left, right, _, _ = self.faces
        return 0.5 * (self.centers[:, left] + self.centers[:, right])

    def refine(self, factor: int) -> "Grid":
        return Grid(self.extents, tuple(c * int(factor) for c in self.cells))


@dataclass(frozen=True, eq=False)
class Field:
    """Cell-averaged densities of n species on a grid, shape (n, grid.size)."""

    data: np.ndarray
    grid: Grid

    def __post_init__(self):
        arr = np.array(self.data, dtype=float)
        if arr.ndim == 1:
            arr = arr[None]
        arr = arr.reshape(arr.shape[0], -1)
        if arr.shape[1] != self.grid.size:
            raise InputError(f"field has {arr.shape[1]} cells, grid has {self.grid.size}")
        if not np.all(np.isfinite(arr)):
            raise InputError("field entries must be finite")
        if np.any(arr < 0):
            raise InputError("field entries must be nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def mass(self) -> np.ndarray:
        return self.data.sum(axis=1) * self.grid.cell_measure

    def reshaped(self) -> np.ndarray:
        return self.data.reshape((self.n,) + self.grid.cells)

    def __eq__(self, other):
        if not isinstance(other, Field):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.data, other.data)

    __hash__ = None


def values_on(x, grid: Grid) -> np.ndarray:
    """Raw (n, size) array of ``x``; a Field must live on ``grid``."""
    if isinstance(x, Field):
        if x.grid != grid:
            raise GridMismatchError(f"field lives on {x.grid}, expected {grid}")
        return x.data
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None]
    arr = arr.reshape(arr.shape[0], -1)
    if arr.shape[1] != grid.size:
        raise GridMismatchError(f"array has {arr.shape[1]} cells, grid has {grid.size}")
    return arr


def _ratio(coarse: Grid, fine: Grid):
    if coarse.extents != fine.extents or coarse.dim != fine.dim:
        raise GridMismatchError("grids do not cover the same box")
    ratios = []
    for c, f in zip(coarse.cells, fine.cells):
        if f % c:
            raise GridMismatchError(f"cell counts {f} and {c} are not nested")
        ratios.append(f // c)
    return tuple(ratios)


def transfer(field, from_grid: Grid, to_grid: Grid) -> Field:
    """Restriction by cell averaging (fine to coarse) or piecewise-constant prolongation."""
    data = values_on(field, from_grid)
    n = data.shape[0]
    if from_grid == to_grid:
        return Field(data, to_grid)
    if all(f >= t for f, t in zip(from_grid.cells, to_grid.cells)):
        ratio = _ratio(to_grid, from_grid)
        shape = [n]
        for c, r in zip(to_grid.cells, ratio):
            shape += [c, r]
        blocks = data.reshape(shape)
        out = blocks.mean(axis=tuple(range(2, 2 + 2 * to_grid.dim, 2)))
        return Field(out.reshape(n, -1), to_grid)
    if all(f <= t for f, t in zip(from_grid.cells, to_grid.cells)):
        ratio = _ratio(from_grid, to_grid)
        out = data.reshape((n,) + from_grid.cells)
        for k, r in enumerate(ratio):
            out = np.repeat(out, r, axis=k + 1)
        return Field(out.reshape(n, -1), to_grid)
    raise GridMismatchError("mixed refinement directions are not supported")
