"""Symmetrization transforms on raster sets and sampled 1D functions.

All set transforms act on cell masks and preserve the number of set cells
exactly.  Steiner and polarization are bit permutations; the circular
transform reassigns cells within rings of one cell width.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry.raster import Hyperplane, RasterSet, hausdorff_distance

__all__ = [
    "SampledFunction1D",
    "GridIncompatibleError",
    "polarize",
    "steiner",
    "circular",
    "decreasing_rearrangement",
    "rearrangement_order",
    "polarization_schedule_to_steiner",
    "star_function",
]

_TOL = 1e-9


class GridIncompatibleError(ValueError):
    """The hyperplane does not map grid cells onto grid cells."""


@dataclass(frozen=True, eq=False)
class SampledFunction1D:
    """Values of a function on a uniformly spaced, strictly increasing grid.

    Use :meth:`on_interval` for the midpoint grid of ``[-a, a]``; integrals
    are then ``sum(values) * spacing``.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float).reshape(-1)
        values = np.array(self.values, dtype=float).reshape(-1)
        if grid.shape != values.shape or grid.size < 1:
            raise ValueError("grid and values must be nonempty and of equal length")
        if grid.size > 1:
            steps = np.diff(grid)
            if np.any(steps <= 0):
                raise ValueError("grid must be strictly increasing")
            if np.ptp(steps) > 1e-9 * max(1.0, abs(steps[0])):
                raise ValueError("grid must be uniformly spaced")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        grid.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @classmethod
    def on_interval(cls, a: float, values) -> "SampledFunction1D":
        values = np.asarray(values, dtype=float).reshape(-1)
        n = values.size
        h = 2.0 * a / n
        return cls(-a + (np.arange(n) + 0.5) * h, values)

    @classmethod
    def from_callable(cls, f, a: float, n: int) -> "SampledFunction1D":
        h = 2.0 * a / n
        x = -a + (np.arange(n) + 0.5) * h
        return cls(x, np.asarray(f(x), dtype=float) * np.ones(n))

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0]) if self.grid.size > 1 else 1.0

    def integral(self) -> float:
        return float(self.values.sum() * self.spacing)

    def __len__(self):
        return self.values.size


# --------------------------------------------------------------------------
def _mirror_indices(A: RasterSet, H: Hyperplane):
    """Integer cell index of each cell's mirror image, or raise if not on the grid."""
    if H.dim != A.dim:
        raise ValueError(f"hyperplane dimension {H.dim} does not match set dimension {A.dim}")
    c = A.centers().reshape(-1, A.dim)
    side = c @ H.normal - H.offset
    m = c - 2.0 * side[:, None] * H.normal
    f = (m - A.origin) / A.cell - 0.5
    idx = np.rint(f)
    if np.max(np.abs(f - idx)) > 1e-6:
        raise GridIncompatibleError("hyperplane is not grid-compatible: mirrored cell centers fall off the grid lattice")
    return idx.astype(np.int64), side


def polarize(A: RasterSet, H: Hyperplane) -> RasterSet:
    """Two-point rearrangement: push mass from ``H-`` to ``H+`` cell pairs.

    For a pair ``(c, sigma c)`` with ``c`` in ``H+`` the output holds ``c`` iff
    either holds, and ``sigma c`` iff both do.  Mirror cells off the grid count
    as empty; a set cell in ``H-`` whose mirror is off the grid would be lost,
    which raises ``ValueError``.
    """
    idx, side = _mirror_indices(A, H)
    shape = np.array(A.shape)
    on_grid = np.all((idx >= 0) & (idx < shape), axis=1)
    flat = A.mask.reshape(-1)
    mirror_flat = np.zeros(flat.size, dtype=np.int64)
    mirror_flat[on_grid] = np.ravel_multi_index(tuple(idx[on_grid].T), A.shape)
    partner = np.where(on_grid, flat[mirror_flat], False)

    tol = _TOL * A.cell
    plus = side > tol
    minus = side < -tol
    if np.any(minus & ~on_grid & flat):
        raise ValueError("polarization would move set cells off the grid")
    out = flat.copy()
    out[plus] = flat[plus] | partner[plus]
    out[minus] = flat[minus] & partner[minus]
    return A.with_mask(out.reshape(A.shape))


def _plane_position(A: RasterSet, axis: int, center: float | None) -> float:
    """Centering plane in index units (cell ``i`` spans ``[i, i+1]``)."""
    L = A.shape[axis]
    if center is None:
        return L / 2.0
    p = (center - A.origin[axis]) / A.cell
    if abs(2 * p - round(2 * p)) > 1e-6:
        raise GridIncompatibleError("Steiner plane must pass through cell centers or cell boundaries")
    return round(2 * p) / 2.0


def steiner(A: RasterSet, axis: int, center: float | None = None) -> RasterSet:
    """Replace each grid line along ``axis`` by a centered run of equal length.

    The centering plane is the grid midplane unless ``center`` (a coordinate
    along ``axis``) is given.  When a run cannot be centered exactly, it sits
    one half cell toward the lower index.
    """
    if not 0 <= axis < A.dim:
        raise ValueError(f"axis must be in [0, {A.dim - 1}]")
    L = A.shape[axis]
    p = _plane_position(A, axis, center)
    counts = A.mask.sum(axis=axis, keepdims=True)
    start = np.floor(p - counts / 2.0 + 1e-9).astype(np.int64)
    if np.any((start < 0) & (counts > 0)) or np.any(start + counts > L):
        raise ValueError("a centered column does not fit in the grid")
    ar = np.arange(L).reshape([-1 if k == axis else 1 for k in range(A.dim)])
    return A.with_mask((ar >= start) & (ar < start + counts))


def circular(A: RasterSet, ring_width: float | None = None) -> RasterSet:
    """Circular symmetrization about the positive first axis (2D only).

    Cells are grouped into rings of width ``ring_width`` (default: one cell)
    by the radius of their centers.  In each ring the same number of cells is
    kept, chosen by smallest ``|angle|``, so arcs are centered on the positive
    axis.  A cell whose center is the origin keeps its state.
    """
    if A.dim != 2:
        raise ValueError("circular symmetrization needs a 2D set")
    w = A.cell if ring_width is None else float(ring_width)
    c = A.centers().reshape(-1, 2)
    r = np.hypot(c[:, 0], c[:, 1])
    theta = np.arctan2(c[:, 1], c[:, 0])
    flat = A.mask.reshape(-1)
    at_origin = r < _TOL * A.cell
    ring = np.where(at_origin, -1, np.floor(r / w).astype(np.int64))
    # order within a ring: |angle|, then upper half first, then radius
    key = np.lexsort((r, -theta, np.round(np.abs(theta), 12), ring))
    ring_sorted = ring[key]
    starts = np.flatnonzero(np.r_[True, ring_sorted[1:] != ring_sorted[:-1]])
    sizes = np.diff(np.r_[starts, ring_sorted.size])
    set_per_ring = np.add.reduceat(flat[key].astype(np.int64), starts)
    rank = np.arange(ring_sorted.size) - np.repeat(starts, sizes)
    keep_sorted = rank < np.repeat(set_per_ring, sizes)
    out = np.empty_like(flat)
    out[key] = keep_sorted
    return A.with_mask(out.reshape(A.shape))


def rearrangement_order(grid) -> np.ndarray:
    """Grid positions ordered by distance to 0, left before right on ties."""
    grid = np.asarray(grid, dtype=float)
    scale = np.max(np.abs(grid)) if grid.size else 1.0
    return np.lexsort((grid, np.round(np.abs(grid) / max(scale, 1e-300), 9)))


def decreasing_rearrangement(g: SampledFunction1D) -> SampledFunction1D:
    """Symmetric decreasing rearrangement: largest value nearest 0, alternating sides."""
    if np.any(g.values < 0):
        raise ValueError("decreasing rearrangement needs nonnegative values")
    out = np.empty_like(g.values)
    out[rearrangement_order(g.grid)] = np.sort(g.values)[::-1]
    return SampledFunction1D(g.grid, out)


def star_function(g: SampledFunction1D) -> SampledFunction1D:
    """``l -> sup{ integral of g over E : |E| = 2l }`` on half-widths ``0, h/2, ..., a``."""
    h = g.spacing
    vals = np.concatenate([[0.0], np.cumsum(np.sort(g.values)[::-1]) * h])
    half_widths = np.arange(vals.size) * h / 2.0
    return SampledFunction1D(half_widths, vals)


# --------------------------------------------------------------------------
def _axis_of(A: RasterSet, H: Hyperplane) -> tuple[int, float]:
    n = H.normal
    k = int(np.argmax(np.abs(n)))
    if H.dim != A.dim or abs(abs(n[k]) - 1.0) > 1e-12:
        raise ValueError("target hyperplane must be axis-aligned")
    return k, H.offset / n[k]


def _second_moment(A: RasterSet, axis: int, c: float) -> float:
    x = A.axis_centers(axis) - c
    counts = A.mask.sum(axis=tuple(k for k in range(A.dim) if k != axis))
    return float(np.dot(counts, x * x))


def polarization_schedule_to_steiner(
    A: RasterSet,
    H_axis: Hyperplane,
    budget: int,
    seed: int = 0,
) -> tuple[RasterSet, list[float]]:
    """Greedy polarization sequence approaching the Steiner symmetral about ``H_axis``.

    Candidates are all grid-compatible planes parallel to ``H_axis`` (through
    cell centers or cell boundaries), each oriented with ``H+`` toward
    ``H_axis``.  Each round scans them in a seeded random order and applies
    the first one that changes the set without increasing the Hausdorff
    distance to the target.  Such a step strictly lowers the second moment
    about ``H_axis``, so the search cannot cycle.

    Returns the final set and the distance trace, starting with the initial
    distance; the trace is nonincreasing.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    axis, c = _axis_of(A, H_axis)
    target = steiner(A, axis, center=c)
    if A.count == 0:
        return A, [0.0]
    rng = np.random.default_rng(seed)
    L = A.shape[axis]
    lo = A.origin[axis]
    planes = []
    for j in range(1, 2 * L):
        pos = lo + j * A.cell / 2.0
        sign = -1 if pos >= c - _TOL * A.cell else 1
        planes.append(Hyperplane.axis(A.dim, axis, pos, sign=sign))

    d = hausdorff_distance(A, target)
    trace = [d]
    moment = _second_moment(A, axis, c)
    used = 0
    while used < budget and d > 0:
        moved = False
        for i in rng.permutation(len(planes)):
            try:
                B = polarize(A, planes[i])
            except ValueError:
                continue
            if np.array_equal(B.mask, A.mask):
                continue
            dB = hausdorff_distance(B, target)
            mB = _second_moment(B, axis, c)
            if dB < d or (dB == d and mB < moment - 1e-9 * A.cell**2):
                A, d, moment = B, dB, mB
                trace.append(d)
                used += 1
                moved = True
                break
        if not moved:
            break
    return A, trace
