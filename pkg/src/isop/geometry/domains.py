"""Analytic and raster-backed domains used by the path samplers.

Every domain answers membership queries.  Most also provide a signed distance
(negative inside), which walk-on-spheres and the Brownian-bridge exit
correction need.  Boundary pieces are named by *labels*: predicates on
boundary points, e.g. ``"inner"``/``"outer"`` for an annulus.
"""
from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .raster import RasterSet, ball_volume, volume as raster_volume
from scipy.ndimage import distance_transform_edt

__all__ = [
    "Domain",
    "Ball",
    "Annulus",
    "Rectangle",
    "Polygon2D",
    "SlitDisk",
    "BallUnion",
    "BallIntersection",
    "RasterDomain",
    "rasterize",
    "schwarz_ball",
    "channel",
]

LabelFn = Callable[[np.ndarray], np.ndarray]

_CHUNK = 65536


def _norm(x):
    return np.sqrt(np.einsum("...i,...i->...", x, x))


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {x.shape}")
    return x


class Domain:
    """Base class.  Subclasses set ``kind`` and ``dim``."""

    kind = "abstract"
    dim: int

    def __init__(self, labels: Mapping[str, LabelFn] | None = None):
        self._extra_labels = dict(labels or {})

    # membership and distance --------------------------------------------
    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    @property
    def has_sdf(self) -> bool:
        return type(self).sdf is not Domain.sdf

    def sdf(self, x) -> np.ndarray:
        """Signed distance to the boundary, negative inside."""
        raise NotImplementedError(f"{self.kind} domain has no signed distance")

    def distance(self, x) -> np.ndarray:
        """Distance to the boundary.  May be a lower bound (never an overestimate)."""
        return np.abs(self.sdf(x))

    def project(self, x) -> np.ndarray:
        """Nearest boundary point for points near the boundary.

        Only points within the walk-on-spheres absorption shell are projected;
        deep interior points may map to a non-nearest boundary point.
        """
        raise NotImplementedError

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def volume(self) -> float:
        raise NotImplementedError(f"no analytic volume for {self.kind}")

    def bounding_radius(self, center=None) -> float:
        """Radius of a ball around ``center`` (default: origin) containing the domain."""
        lo, hi = self.bbox()
        c = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        corners = np.stack(np.meshgrid(*zip(lo, hi), indexing="ij"), -1).reshape(-1, self.dim)
        return float(_norm(corners - c).max())

    # boundary pieces --------------------------------------------------------
    def _builtin_labels(self) -> dict[str, LabelFn]:
        return {}

    @property
    def labels(self) -> dict[str, LabelFn]:
        out = {"boundary": lambda y: np.ones(np.shape(y)[:-1], dtype=bool)}
        out.update(self._builtin_labels())
        out.update(self._extra_labels)
        return out

    def label_mask(self, label, y) -> np.ndarray:
        """Which exit points ``y`` lie on the named (or callable) boundary piece."""
        if callable(label):
            return np.asarray(label(y), dtype=bool)
        try:
            fn = self.labels[label]
        except KeyError:
            raise KeyError(
                f"unknown boundary label {label!r} for {self.kind}; "
                f"known: {sorted(self.labels)}"
            ) from None
        return np.asarray(fn(y), dtype=bool)

    def with_labels(self, **labels: LabelFn) -> "Domain":
        import copy

        other = copy.copy(self)
        other._extra_labels = {**self._extra_labels, **labels}
        return other

    # exit detection helpers ---------------------------------------------------
    def bridge_cross_prob(self, x, y, var) -> np.ndarray:
        """Probability that a Brownian bridge from ``x`` to ``y`` (both inside)
        with variance ``var`` per coordinate touched the boundary.

        Uses the half-space formula ``exp(-2 d1 d2 / var)`` with the local
        boundary distances, which is exact for flat boundaries.
        """
        if not self.has_sdf:
            return np.zeros(np.shape(x)[:-1])
        d1 = self.distance(x)
        d2 = self.distance(y)
        return np.exp(-2.0 * d1 * d2 / var)

    def zero_thickness_hit(self, x, y, eps):
        """Segments that come within ``eps`` of zero-thickness boundary pieces."""
        return None

    def exit_fraction(self, x, y, iters: int = 30) -> np.ndarray:
        """Fraction along ``x -> y`` (x inside, y outside) of the first boundary crossing."""
        lo = np.zeros(x.shape[0])
        hi = np.ones(x.shape[0])
        d = y - x
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            inside = self.contains(x + mid[:, None] * d)
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return hi

    def boundary_point(self, p) -> np.ndarray:
        """Snap points near the boundary onto it when a projection is available."""
        try:
            return self.project(p)
        except NotImplementedError:
            return p


# ---------------------------------------------------------------------------
class Ball(Domain):
    kind = "ball"

    def __init__(self, radius: float, center=None, dim: int | None = None, labels=None):
        super().__init__(labels)
        if center is None:
            center = np.zeros(3 if dim is None else dim)
        self.center = np.asarray(center, dtype=float)
        self.dim = self.center.shape[0]
        if not radius > 0:
            raise ValueError("ball radius must be positive")
        self.radius = float(radius)

    def contains(self, x):
        x = _as_points(x, self.dim)
        return _norm(x - self.center) < self.radius

    def sdf(self, x):
        x = _as_points(x, self.dim)
        return _norm(x - self.center) - self.radius

    def project(self, x):
        x = _as_points(x, self.dim)
        v = x - self.center
        r = _norm(v)[..., None]
        r = np.where(r == 0, 1.0, r)
        return self.center + self.radius * v / r

    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    def bounding_radius(self, center=None):
        c = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        return float(np.linalg.norm(self.center - c) + self.radius)

    def volume(self):
        return ball_volume(self.radius, self.dim)

    def scaled(self, s: float) -> "Ball":
        return Ball(self.radius * s, self.center * s)

    def translated(self, v) -> "Ball":
        return Ball(self.radius, self.center + np.asarray(v, dtype=float))

    def __repr__(self):
        return f"Ball(radius={self.radius:g}, center={self.center.tolist()})"


class Annulus(Domain):
    """``{r_inner < |x - center| < r_outer}``; boundary labels ``inner``/``outer``."""

    kind = "annulus"

    def __init__(self, r_inner: float, r_outer: float, center=None, dim: int = 2, labels=None):
        super().__init__(labels)
        if not 0 < r_inner < r_outer:
            raise ValueError("annulus needs 0 < r_inner < r_outer")
        self.center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        self.dim = self.center.shape[0]
        self.r_inner = float(r_inner)
        self.r_outer = float(r_outer)

    def contains(self, x):
        r = _norm(_as_points(x, self.dim) - self.center)
        return (r > self.r_inner) & (r < self.r_outer)

    def sdf(self, x):
        r = _norm(_as_points(x, self.dim) - self.center)
        return np.maximum(r - self.r_outer, self.r_inner - r)

    def project(self, x):
        v = _as_points(x, self.dim) - self.center
        r = _norm(v)[..., None]
        target = np.where(
            np.abs(r - self.r_inner) < np.abs(r - self.r_outer), self.r_inner, self.r_outer
        )
        r = np.where(r == 0, 1.0, r)
        return self.center + target * v / r

    def _builtin_labels(self):
        mid = 0.5 * (self.r_inner + self.r_outer)
        return {
            "inner": lambda y: _norm(y - self.center) <= mid,
            "outer": lambda y: _norm(y - self.center) > mid,
        }

    def bbox(self):
        return self.center - self.r_outer, self.center + self.r_outer

    def volume(self):
        return ball_volume(self.r_outer, self.dim) - ball_volume(self.r_inner, self.dim)


class Rectangle(Domain):
    """Open axis-aligned box ``lo < x < hi`` in any dimension."""

    kind = "rectangle"

    def __init__(self, lo, hi, labels=None):
        super().__init__(labels)
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise ValueError("rectangle needs lo < hi componentwise")
        self.dim = self.lo.shape[0]

    @classmethod
    def centered(cls, sides, center=None, labels=None) -> "Rectangle":
        sides = np.asarray(sides, dtype=float)
        c = np.zeros_like(sides) if center is None else np.asarray(center, dtype=float)
        return cls(c - sides / 2, c + sides / 2, labels=labels)

    @property
    def sides(self):
        return self.hi - self.lo

    def contains(self, x):
        x = _as_points(x, self.dim)
        return np.all((x > self.lo) & (x < self.hi), axis=-1)

    def sdf(self, x):
        x = _as_points(x, self.dim)
        mid = 0.5 * (self.lo + self.hi)
        q = np.abs(x - mid) - 0.5 * (self.hi - self.lo)
        outside = _norm(np.maximum(q, 0.0))
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    def project(self, x):
        x = _as_points(x, self.dim)
        clipped = np.clip(x, self.lo, self.hi)
        gaps = np.minimum(clipped - self.lo, self.hi - clipped)
        k = np.argmin(gaps, axis=-1)
        out = clipped.copy()
        flat = out.reshape(-1, self.dim)
        kk = k.reshape(-1)
        rows = np.arange(flat.shape[0])
        lo_side = (flat[rows, kk] - self.lo[kk]) <= (self.hi[kk] - flat[rows, kk])
        flat[rows, kk] = np.where(lo_side, self.lo[kk], self.hi[kk])
        strictly_inside = np.all((x > self.lo) & (x < self.hi), axis=-1)
        return np.where(strictly_inside[..., None], out, clipped)

    def bridge_cross_prob(self, x, y, var):
        # product over faces; each face is an exact half-space
        survive = np.ones(np.shape(x)[:-1])
        for k in range(self.dim):
            for face in (self.lo[k], self.hi[k]):
                d1 = np.abs(x[..., k] - face)
                d2 = np.abs(y[..., k] - face)
                survive = survive * (1.0 - np.exp(-2.0 * d1 * d2 / var))
        return 1.0 - survive

    def _builtin_labels(self):
        out = {}
        tol = 1e-9 * float(np.max(self.hi - self.lo))
        for k in range(self.dim):
            out[f"x{k}-"] = (lambda k: lambda y: np.abs(y[..., k] - self.lo[k]) <= tol)(k)
            out[f"x{k}+"] = (lambda k: lambda y: np.abs(y[..., k] - self.hi[k]) <= tol)(k)
        if self.dim == 2:
            out.update(left=out["x0-"], right=out["x0+"], bottom=out["x1-"], top=out["x1+"])
        return out

    def bbox(self):
        return self.lo.copy(), self.hi.copy()

    def volume(self):
        return float(np.prod(self.hi - self.lo))

    def __repr__(self):
        return f"Rectangle(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


def _point_segment(p, a, b):
    """Distance and closest point from points ``p`` (N,d) to segments ``a->b`` (E,d).

    Returns arrays of shape (N, E) and (N, E, d).
    """
    ab = b - a
    L2 = np.einsum("ij,ij->i", ab, ab)
    L2 = np.where(L2 == 0, 1.0, L2)
    ap = p[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("nej,ej->ne", ap, ab) / L2, 0.0, 1.0)
    q = a[None] + t[..., None] * ab[None]
    return _norm(p[:, None, :] - q), q


class Polygon2D(Domain):
    """Simple polygon given by its vertices (either orientation)."""

    kind = "polygon-2d"
    dim = 2

    def __init__(self, vertices, labels=None):
        super().__init__(labels)
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("polygon needs at least three 2D vertices")
        self.vertices = v
        self._a = v
        self._b = np.roll(v, -1, axis=0)

    def _chunks(self, x):
        flat = x.reshape(-1, 2)
        for s in range(0, flat.shape[0], max(1, _CHUNK // len(self._a))):
            yield s, flat[s : s + max(1, _CHUNK // len(self._a))]

    def contains(self, x):
        x = _as_points(x, 2)
        out = np.empty(x.reshape(-1, 2).shape[0], dtype=bool)
        xa, ya = self._a[:, 0], self._a[:, 1]
        xb, yb = self._b[:, 0], self._b[:, 1]
        for s, p in self._chunks(x):
            px = p[:, :1]
            py = p[:, 1:]
            straddle = (ya > py) != (yb > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xcross = xa + (py - ya) * (xb - xa) / (yb - ya)
            crossings = np.count_nonzero(straddle & (px < xcross), axis=1)
            out[s : s + p.shape[0]] = crossings % 2 == 1
        inside = out.reshape(x.shape[:-1])
        return inside & (self._unsigned(x) > 0)

    def _unsigned(self, x):
        out = np.empty(x.reshape(-1, 2).shape[0])
        for s, p in self._chunks(x):
            d, _ = _point_segment(p, self._a, self._b)
            out[s : s + p.shape[0]] = d.min(axis=1)
        return out.reshape(x.shape[:-1])

    def sdf(self, x):
        x = _as_points(x, 2)
        d = self._unsigned(x)
        return np.where(self.contains(x), -d, d)

    def distance(self, x):
        return self._unsigned(_as_points(x, 2))

    def project(self, x):
        x = _as_points(x, 2)
        out = np.empty(x.reshape(-1, 2).shape)
        for s, p in self._chunks(x):
            d, q = _point_segment(p, self._a, self._b)
            k = np.argmin(d, axis=1)
            out[s : s + p.shape[0]] = q[np.arange(p.shape[0]), k]
        return out.reshape(x.shape)

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def volume(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2)


def channel(profile: Callable, x_start: float, x_end: float, n: int = 400, labels=None) -> Polygon2D:
    """Planar channel ``{x_start < x < x_end, |y| < profile(x)/2}`` as a polygon."""
    xs = np.linspace(x_start, x_end, n)
    w = np.asarray(profile(xs), dtype=float) / 2
    if np.any(w <= 0):
        raise ValueError("channel profile must be positive")
    top = np.column_stack([xs, w])
    bottom = np.column_stack([xs[::-1], -w[::-1]])
    poly = Polygon2D(np.vstack([bottom[::-1], top[::-1]]), labels=labels)
    poly.profile = profile
    return poly


def _seg_seg_distance_2d(p0, p1, q0, q1):
    """Distance between 2D segments p0p1 (N,2) and q0q1 (E,2); result (N, E)."""
    def cross(a, b):
        return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]

    r = (p1 - p0)[:, None, :]
    s = (q1 - q0)[None, :, :]
    qp = q0[None, :, :] - p0[:, None, :]
    denom = cross(r, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross(qp, s) / denom
        u = cross(qp, r) / denom
    intersect = (denom != 0) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
    d1, _ = _point_segment(p0, q0, q1)
    d2, _ = _point_segment(p1, q0, q1)
    d3, _ = _point_segment(q0, p0, p1)
    d4, _ = _point_segment(q1, p0, p1)
    d = np.minimum(np.minimum(d1, d2), np.minimum(d3.T, d4.T))
    return np.where(intersect, 0.0, d)


class SlitDisk(Domain):
    """Disk of radius ``radius`` minus radial slits ``[a, 1] * radius * e^{i alpha_k}``.

    Labels: ``slits`` and ``circle``.  Slits have zero thickness; a discrete
    path step hits one when its segment passes within ``eps`` of it.
    """

    kind = "slit-disk"
    dim = 2

    def __init__(self, angles, a: float, radius: float = 1.0, labels=None):
        super().__init__(labels)
        angles = np.asarray(angles, dtype=float).reshape(-1)
        if angles.size == 0:
            raise ValueError("slit disk needs at least one slit")
        if np.any(np.diff(angles) < 0) or angles[0] < 0 or angles[-1] > 2 * np.pi:
            raise ValueError("slit angles must satisfy 0 <= a1 <= ... <= an <= 2 pi")
        if not 0 < a < 1:
            raise ValueError("slit inner endpoint must satisfy 0 < a < 1")
        self.angles = angles
        self.a = float(a)
        self.radius = float(radius)
        u = np.column_stack([np.cos(angles), np.sin(angles)])
        self._s0 = self.a * self.radius * u
        self._s1 = self.radius * u

    @classmethod
    def equally_spaced(cls, n: int, a: float, radius: float = 1.0) -> "SlitDisk":
        return cls(2 * np.pi * np.arange(n) / n, a, radius)

    def _slit_distance(self, x):
        flat = x.reshape(-1, 2)
        d, q = _point_segment(flat, self._s0, self._s1)
        k = np.argmin(d, axis=1)
        rows = np.arange(flat.shape[0])
        return d[rows, k].reshape(x.shape[:-1]), q[rows, k].reshape(x.shape)

    def contains(self, x):
        x = _as_points(x, 2)
        ds, _ = self._slit_distance(x)
        return (_norm(x) < self.radius) & (ds > 0)

    def sdf(self, x):
        x = _as_points(x, 2)
        r = _norm(x)
        ds, _ = self._slit_distance(x)
        inside = (r < self.radius) & (ds > 0)
        dist_in = np.minimum(self.radius - r, ds)
        return np.where(inside, -dist_in, np.where(r >= self.radius, r - self.radius, 0.0))

    def project(self, x):
        x = _as_points(x, 2)
        r = _norm(x)
        ds, qs = self._slit_distance(x)
        rr = np.where(r == 0, 1.0, r)[..., None]
        qc = self.radius * x / rr
        use_slit = (ds < np.abs(self.radius - r))[..., None]
        return np.where(use_slit, qs, qc)

    def zero_thickness_hit(self, x, y, eps):
        d = _seg_seg_distance_2d(x, y, self._s0, self._s1)
        k = np.argmin(d, axis=1)
        rows = np.arange(x.shape[0])
        hit = d[rows, k] <= eps
        # hit location: closest slit point to the segment's nearest approach
        mid = 0.5 * (x + y)
        _, q = _point_segment(mid, self._s0, self._s1)
        return hit, q[rows, k]

    def _builtin_labels(self):
        def on_slits(y):
            ds, _ = self._slit_distance(y)
            return ds <= np.abs(self.radius - _norm(y))

        return {"slits": on_slits, "circle": lambda y: ~on_slits(y)}

    def bbox(self):
        return np.full(2, -self.radius), np.full(2, self.radius)

    def bounding_radius(self, center=None):
        c = np.zeros(2) if center is None else np.asarray(center, dtype=float)
        return float(np.linalg.norm(c) + self.radius)

    def volume(self):
        return float(np.pi * self.radius**2)


class BallUnion(Domain):
    kind = "ball-union"

    def __init__(self, centers, radii, labels=None):
        super().__init__(labels)
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.radii = np.asarray(radii, dtype=float).reshape(-1)
        if self.radii.shape[0] != self.centers.shape[0] or np.any(self.radii <= 0):
            raise ValueError("one positive radius per center required")
        self.dim = self.centers.shape[1]

    def _sd_each(self, x):
        x = _as_points(x, self.dim)
        return _norm(x[..., None, :] - self.centers) - self.radii

    def contains(self, x):
        return np.any(self._sd_each(x) < 0, axis=-1)

    def sdf(self, x):
        # exact outside; inside its magnitude is a lower bound on the depth
        return self._sd_each(x).min(axis=-1)

    def _on_boundary(self, sd):
        # on some sphere and inside none of the balls
        return np.all(sd >= -1e-9, axis=-1) & np.any(np.abs(sd) <= 1e-9, axis=-1)

    def _crease_candidates(self, flat):
        """Closest points on every pairwise sphere-sphere intersection (N, pairs, d)."""
        out = []
        m = len(self.radii)
        for i in range(m):
            for j in range(i + 1, m):
                ci, cj = self.centers[i], self.centers[j]
                ri, rj = self.radii[i], self.radii[j]
                L = np.linalg.norm(cj - ci)
                if L == 0 or L >= ri + rj or L <= abs(ri - rj):
                    continue
                u = (cj - ci) / L
                a = (L * L + ri * ri - rj * rj) / (2 * L)
                h = np.sqrt(max(ri * ri - a * a, 0.0))
                base = ci + a * u
                w = flat - base
                w = w - (w @ u)[:, None] * u
                wn = _norm(w)[:, None]
                if self.dim == 1:
                    continue
                # a point on the crease axis: any orthogonal direction is nearest
                fallback = np.zeros(self.dim)
                fallback[np.argmin(np.abs(u))] = 1.0
                fallback -= (fallback @ u) * u
                fallback /= np.linalg.norm(fallback)
                dirn = np.where(wn > 0, w / np.where(wn == 0, 1.0, wn), fallback)
                out.append(base + h * dirn)
        if not out:
            return np.empty((flat.shape[0], 0, self.dim))
        return np.stack(out, axis=1)

    def project(self, x):
        # nearest point on a sphere or crease that lies on the combined boundary
        x = _as_points(x, self.dim)
        flat = x.reshape(-1, self.dim)
        v = flat[:, None, :] - self.centers
        n = _norm(v)[..., None]
        n = np.where(n == 0, 1.0, n)
        cand = np.concatenate(
            [self.centers + self.radii[:, None] * v / n, self._crease_candidates(flat)], axis=1
        )
        sd = _norm(cand[:, :, None, :] - self.centers) - self.radii  # (N, cands, m)
        valid = self._on_boundary(sd)
        dist = np.where(valid, _norm(cand - flat[:, None, :]), np.inf)
        k = np.argmin(dist, axis=1)
        return cand[np.arange(len(flat)), k].reshape(x.shape)

    def bbox(self):
        return (self.centers - self.radii[:, None]).min(0), (self.centers + self.radii[:, None]).max(0)


class BallIntersection(BallUnion):
    kind = "ball-intersection"

    def contains(self, x):
        return np.all(self._sd_each(x) < 0, axis=-1)

    def sdf(self, x):
        # inside, |max| is a lower bound on the depth
        return self._sd_each(x).max(axis=-1)

    def _on_boundary(self, sd):
        # on some sphere and inside all of the balls
        return np.all(sd <= 1e-9, axis=-1) & np.any(np.abs(sd) <= 1e-9, axis=-1)

    def bbox(self):
        return (self.centers - self.radii[:, None]).max(0), (self.centers + self.radii[:, None]).min(0)


class RasterDomain(Domain):
    """Domain backed by a raster set; the union of its cells is the domain.

    The distance is a conservative lower bound derived from the Euclidean
    distance transform, so walk-on-spheres remains exact in law but absorbs
    within about one cell diagonal of the raster boundary.
    """

    kind = "raster"

    def __init__(self, raster: RasterSet, labels=None):
        super().__init__(labels)
        self.raster = raster
        self.dim = raster.dim
        padded = np.pad(raster.mask, 1, constant_values=False)
        edt = distance_transform_edt(padded, sampling=raster.cell)
        self._edt = edt[(slice(1, -1),) * self.dim]

    def contains(self, x):
        return self.raster.lookup(_as_points(x, self.dim))

    def sdf(self, x):
        x = _as_points(x, self.dim)
        idx, inside = self.raster.index_of(x)
        e = np.zeros(inside.shape)
        if np.any(inside):
            e[inside] = self._edt[tuple(idx[inside].T)]
        depth = np.maximum(e - np.sqrt(self.dim) * self.raster.cell, 0.0)
        member = self.raster.lookup(x)
        return np.where(member, -depth, 0.0)

    def project(self, x):
        return _as_points(x, self.dim)

    def bridge_cross_prob(self, x, y, var):
        return np.zeros(np.shape(x)[:-1])

    def bbox(self):
        return self.raster.bbox()

    def volume(self):
        return raster_volume(self.raster)


def rasterize(domain: Domain, cell: float | None = None, bbox=None, grid: RasterSet | None = None) -> RasterSet:
    """Cells whose centers lie in ``domain``.

    Either pass an existing ``grid`` (its mask is ignored) or a ``cell`` size;
    the default cell is the bounding-box diameter over 512.
    """
    if grid is None:
        lo, hi = domain.bbox() if bbox is None else (np.asarray(bbox[0], float), np.asarray(bbox[1], float))
        if cell is None:
            cell = float(np.linalg.norm(hi - lo)) / 512
        shape = np.maximum(np.ceil((hi - lo) / cell - 1e-9).astype(int), 1)
        # center the grid on the box so symmetric shapes rasterize symmetrically
        center = 0.5 * (lo + hi)
        origin = center - shape * cell / 2
        grid = RasterSet.empty(origin, cell, tuple(shape))
    pts = grid.centers()
    mask = domain.contains(pts.reshape(-1, grid.dim)).reshape(grid.shape)
    return grid.with_mask(mask)


def schwarz_ball(A) -> Ball:
    """Origin-centered ball with the same volume as ``A`` (raster or domain)."""
    from .raster import ball_radius_for_volume

    if isinstance(A, RasterSet):
        if A.count == 0:
            raise ValueError("Schwarz symmetrization of an empty set")
        vol, dim = raster_volume(A), A.dim
    else:
        vol, dim = A.volume(), A.dim
    return Ball(ball_radius_for_volume(vol, dim), np.zeros(dim))
