"""Raster sets on uniform grids, hyperplanes and the set operations built on them.

A cell belongs to a set iff its flag is set; geometric quantities are always
evaluated at cell centers, so all raster operations below are exact set
arithmetic on the mask.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.special import gammaln

__all__ = [
    "Hyperplane",
    "RasterSet",
    "volume",
    "reflect",
    "hausdorff_distance",
    "dilate",
    "ball_volume",
    "ball_radius_for_volume",
]


def ball_volume(radius, dim: int) -> float:
    """Lebesgue measure of a ``dim``-ball of the given radius."""
    logc = 0.5 * dim * np.log(np.pi) - gammaln(0.5 * dim + 1.0)
    return float(np.exp(logc) * radius**dim)


def ball_radius_for_volume(vol: float, dim: int) -> float:
    logc = 0.5 * dim * np.log(np.pi) - gammaln(0.5 * dim + 1.0)
    return float((vol / np.exp(logc)) ** (1.0 / dim))


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """The plane ``{x : <x, normal> = offset}``; ``H+`` is ``<x, normal> > offset``."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).copy()
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("hyperplane normal must be nonzero")
        if abs(norm - 1.0) > 1e-12:
            n = n / norm
        n.flags.writeable = False
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def axis(cls, dim: int, axis: int, offset: float = 0.0, sign: int = 1) -> "Hyperplane":
        """Axis-aligned plane ``x[axis] = offset``; ``sign=-1`` flips the positive side."""
        n = np.zeros(dim)
        n[axis] = 1.0 if sign >= 0 else -1.0
        return cls(n, offset if sign >= 0 else -offset)

    @property
    def dim(self) -> int:
        return self.normal.shape[0]

    def side(self, x) -> np.ndarray:
        """Signed distance ``<x, n> - offset`` (positive on ``H+``)."""
        return np.asarray(x, dtype=float) @ self.normal - self.offset

    def reflect(self, x) -> np.ndarray:
        return reflect(x, self)


def reflect(x, H: Hyperplane) -> np.ndarray:
    """Mirror image of ``x`` (one point or a stack of points) across ``H``."""
    x = np.asarray(x, dtype=float)
    s = x @ H.normal - H.offset
    return x - 2.0 * s[..., None] * H.normal


@dataclass(frozen=True, eq=False)
class RasterSet:
    """Indicator of a set on the grid ``origin + (index + 1/2) * cell``.

    ``mask`` has one axis per spatial dimension; the set lives inside the box
    ``[origin, origin + shape * cell]``.
    """

    origin: np.ndarray
    cell: float
    mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)  # private copy
        origin = np.array(self.origin, dtype=float).reshape(-1)
        if not self.cell > 0:
            raise ValueError("cell must be positive")
        if mask.ndim != origin.shape[0]:
            raise ValueError(f"mask has {mask.ndim} axes but origin has {origin.shape[0]}")
        if min(mask.shape) < 1:
            raise ValueError("every grid axis needs at least one cell")
        mask.flags.writeable = False
        origin.flags.writeable = False
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "cell", float(self.cell))

    # construction -------------------------------------------------------
    @classmethod
    def empty(cls, origin, cell: float, shape) -> "RasterSet":
        return cls(origin, cell, np.zeros(tuple(shape), dtype=bool))

    @classmethod
    def centered_grid(cls, half_width: float, n: int, dim: int) -> "RasterSet":
        """Empty ``n^dim`` grid covering ``[-half_width, half_width]^dim``."""
        cell = 2.0 * half_width / n
        return cls.empty(np.full(dim, -half_width), cell, (n,) * dim)

    @classmethod
    def from_predicate(cls, pred, origin, cell: float, shape) -> "RasterSet":
        grid = cls.empty(origin, cell, shape)
        return grid.with_mask(np.asarray(pred(grid.centers()), dtype=bool).reshape(grid.shape))

    def with_mask(self, mask) -> "RasterSet":
        return RasterSet(self.origin, self.cell, mask)

    # geometry -------------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.mask.ndim

    @property
    def shape(self) -> tuple:
        return self.mask.shape

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.origin.copy(), self.origin + np.array(self.shape) * self.cell

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.shape[axis]) + 0.5) * self.cell

    def centers(self) -> np.ndarray:
        """Cell centers, shape ``(*grid_shape, dim)``."""
        axes = [self.axis_centers(k) for k in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def set_centers(self) -> np.ndarray:
        """Centers of the cells in the set, shape ``(count, dim)``."""
        idx = np.argwhere(self.mask)
        return self.origin + (idx + 0.5) * self.cell

    def index_of(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Integer cell indices of points and a flag for points inside the grid box."""
        x = np.asarray(x, dtype=float)
        idx = np.floor((x - self.origin) / self.cell).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < np.array(self.shape)), axis=-1)
        return idx, inside

    def lookup(self, x) -> np.ndarray:
        """Membership of arbitrary points (the cell containing each point decides)."""
        idx, inside = self.index_of(x)
        out = np.zeros(inside.shape, dtype=bool)
        if np.any(inside):
            sel = idx[inside]
            out[inside] = self.mask[tuple(sel.T)]
        return out

    def same_grid(self, other: "RasterSet") -> bool:
        return (
            self.shape == other.shape
            and self.cell == other.cell
            and np.array_equal(self.origin, other.origin)
        )

    def equals(self, other: "RasterSet") -> bool:
        return self.same_grid(other) and np.array_equal(self.mask, other.mask)

    def __repr__(self):
        return (
            f"RasterSet(dim={self.dim}, shape={self.shape}, cell={self.cell:g}, "
            f"count={self.count})"
        )


def volume(A: RasterSet) -> float:
    return A.count * A.cell**A.dim


def _require_same_grid(A: RasterSet, B: RasterSet):
    if not A.same_grid(B):
        raise ValueError("raster sets must share the same grid")


def hausdorff_distance(A: RasterSet, B: RasterSet) -> float:
    """Hausdorff distance between the cell-center sets of ``A`` and ``B``."""
    _require_same_grid(A, B)
    if A.count == 0 or B.count == 0:
        raise ValueError("Hausdorff undefined for empty set")
    if np.array_equal(A.mask, B.mask):
        return 0.0
    to_b = distance_transform_edt(~B.mask, sampling=A.cell)
    to_a = distance_transform_edt(~A.mask, sampling=A.cell)
    return float(max(to_b[A.mask].max(), to_a[B.mask].max()))


def dilate(A: RasterSet, r: float) -> RasterSet:
    """Cells whose center lies within ``r`` of some center of ``A`` (same grid)."""
    if r < 0:
        raise ValueError("dilation radius must be nonnegative")
    if r == 0 or A.count == 0:
        return A
    dist = distance_transform_edt(~A.mask, sampling=A.cell)
    # EDT is exact on integer offsets; slack guards against sqrt round-off
    return A.with_mask(dist <= r * (1 + 1e-12) + 1e-12 * A.cell)
