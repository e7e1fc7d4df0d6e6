"""Path samplers: Brownian motion, symmetric alpha-stable processes, walk-on-spheres.

Normalizations
--------------
* Plain Brownian motion has generator ``Delta/2``: a step of length ``dt``
  adds ``sqrt(dt) * Z``.  Mean exit time from a ball is ``(R^2 - |x|^2)/d``.
* The alpha-stable family is ``X_t = B(2 S_t)`` with ``S`` a positive
  ``alpha/2``-stable subordinator, so ``E exp(i xi.X_t) = exp(-t |xi|^alpha)``.
  At ``alpha = 2`` this is Brownian motion at twice the speed.

Reproducibility
---------------
Work is split into fixed-size chunks; chunk ``k`` draws from
``SeedSequence(seed, spawn_key=(k,))``.  Results are reassembled in chunk
order, so outputs depend on the seed and inputs but not on the worker count.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree
from scipy.special import gamma as gamma_fn, jv

from .geometry.domains import Ball, Domain, Rectangle
from .geometry.raster import RasterSet

__all__ = [
    "SimConfig",
    "StableParams",
    "StoppedPath",
    "ExitBatch",
    "Complement",
    "default_workers",
    "chunk_rng",
    "map_chunks",
    "bm_step",
    "positive_stable",
    "stable_step",
    "sample_exit",
    "sample_exits",
    "walk_on_spheres",
    "walk_on_spheres_batch",
    "unit_ball_exit_time",
    "sphere_walk_hitting",
    "bm_path",
    "sausage_mask",
    "sausage_volume",
    "write_path_csv",
]

DEFAULT_CHUNK = 8192


# ---------------------------------------------------------------------------
# configuration
@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    max_time: float = 10.0
    eps_shell: float = 1e-4
    seed: int = 0
    slit_eps: float = 1e-3
    bridge: bool = True
    chunk_size: int = DEFAULT_CHUNK
    workers: int | None = None
    max_wos_steps: int = 100_000

    def __post_init__(self):
        for name in ("dt", "max_time", "eps_shell", "slit_eps"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "seed", int(self.seed))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.max_time > 0:
            raise ValueError("max_time must be positive")
        if self.dt > self.max_time:
            raise ValueError("dt must not exceed max_time")
        if not self.eps_shell > 0:
            raise ValueError("eps_shell must be positive")
        if self.slit_eps < 0:
            raise ValueError("slit_eps must be nonnegative")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if self.workers is not None and self.workers < 1:
            raise ValueError("workers must be at least 1")

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class StableParams:
    alpha: float
    dim: int

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")

    @property
    def is_gaussian(self) -> bool:
        return self.alpha == 2


@dataclass(frozen=True)
class StoppedPath:
    exit_time: float
    exit_point: np.ndarray
    boundary_label: str | None
    truncated: bool


@dataclass
class ExitBatch:
    """Outcomes of many stopped paths in one domain (arrays indexed by path)."""

    domain: Domain
    exit_time: np.ndarray
    exit_point: np.ndarray
    truncated: np.ndarray
    seed: int = 0
    horizon: float = np.inf

    def __len__(self):
        return self.exit_time.shape[0]

    def on(self, label) -> np.ndarray:
        """Paths that exited through the named boundary piece (truncated ones never do)."""
        out = np.zeros(len(self), dtype=bool)
        ok = ~self.truncated
        if np.any(ok):
            out[ok] = self.domain.label_mask(label, self.exit_point[ok])
        return out

    def label_of(self, i: int) -> str | None:
        if self.truncated[i]:
            return None
        y = self.exit_point[i : i + 1]
        named = [k for k in self.domain.labels if k != "boundary"]
        for k in named:
            if self.domain.label_mask(k, y)[0]:
                return k
        return "boundary"

    def __getitem__(self, i: int) -> StoppedPath:
        return StoppedPath(
            float(self.exit_time[i]), self.exit_point[i].copy(), self.label_of(i), bool(self.truncated[i])
        )


class Complement(Domain):
    """``R^d`` minus the closure of ``A``; exiting it means hitting ``A``."""

    kind = "complement"

    def __init__(self, A: Domain):
        super().__init__()
        self.A = A
        self.dim = A.dim

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return ~self.A.contains(x) & (self.A.sdf(x) > 0) if self.A.has_sdf else ~self.A.contains(x)

    def sdf(self, x):
        return -self.A.sdf(x)

    def project(self, x):
        return self.A.project(x)

    def bbox(self):
        return np.full(self.dim, -np.inf), np.full(self.dim, np.inf)


# ---------------------------------------------------------------------------
# chunked execution
def default_workers() -> int:
    env = os.environ.get("ISOP_DEFAULT_WORKERS")
    if env:
        try:
            w = int(env)
        except ValueError:
            raise ValueError(f"ISOP_DEFAULT_WORKERS must be an integer, got {env!r}") from None
        if w < 1:
            raise ValueError("ISOP_DEFAULT_WORKERS must be at least 1")
        return w
    return os.cpu_count() or 1


def chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def map_chunks(
    fn: Callable[[np.random.Generator, int, int], object],
    n: int,
    seed: int,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int | None = None,
) -> list:
    """Run ``fn(rng, start, size)`` over consecutive chunks; results in chunk order."""
    if n < 1:
        raise ValueError("need at least one sample")
    starts = list(range(0, n, chunk_size))
    tasks = [(k, s, min(chunk_size, n - s)) for k, s in enumerate(starts)]
    w = default_workers() if workers is None else workers

    def run(task):
        k, s, m = task
        return fn(chunk_rng(seed, k), s, m)

    if w <= 1 or len(tasks) == 1:
        return [run(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=min(w, len(tasks))) as pool:
        return list(pool.map(run, tasks))


def _starts(x, n, dim=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return np.broadcast_to(x, (n, x.shape[0]))
    if x.shape[0] != n:
        raise ValueError(f"got {x.shape[0]} start points for {n} paths")
    return x


# ---------------------------------------------------------------------------
# steppers
def bm_step(x, dt: float, rng: np.random.Generator) -> np.ndarray:
    """One Brownian step (generator ``Delta/2``): ``x + sqrt(dt) Z``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    return x + np.sqrt(dt) * rng.standard_normal(x.shape)


def positive_stable(beta: float, size, rng: np.random.Generator) -> np.ndarray:
    """Positive ``beta``-stable variables with Laplace transform ``exp(-lambda^beta)``.

    Kanter's representation: with ``U ~ U(0, pi)`` and ``E ~ Exp(1)``,
    ``S = sin(beta U) / sin(U)^(1/beta) * (sin((1-beta) U) / E)^((1-beta)/beta)``.
    """
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    if beta == 1:
        return np.ones(size)
    U = rng.uniform(0.0, np.pi, size)
    E = rng.exponential(1.0, size)
    a = np.sin(beta * U) / np.sin(U) ** (1.0 / beta)
    b = (np.sin((1.0 - beta) * U) / E) ** ((1.0 - beta) / beta)
    return a * b


def _stable_scale(dt, p: StableParams, size, rng):
    """Per-path ``sqrt(2 S_dt)`` for the subordinated step."""
    if p.alpha == 2:
        return np.full(size, np.sqrt(2.0 * dt))
    beta = p.alpha / 2.0
    S = dt ** (1.0 / beta) * positive_stable(beta, size, rng)
    return np.sqrt(2.0 * S)


def stable_step(x, dt: float, p: StableParams, rng: np.random.Generator) -> np.ndarray:
    """One step of the symmetric alpha-stable process (alpha = 2 is speed-2 BM)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.dim:
        raise ValueError(f"point dimension {x.shape[-1]} does not match process dimension {p.dim}")
    lead = x.shape[:-1]
    scale = _stable_scale(dt, p, lead, rng)
    return x + np.asarray(scale)[..., None] * rng.standard_normal(x.shape)


# ---------------------------------------------------------------------------
# exit simulation
def _exit_chunk(D: Domain, x0, cfg: SimConfig, rng, process, crn: bool, horizon: float):
    x0 = np.array(x0, dtype=float)
    m, d = x0.shape
    if not np.all(D.contains(x0)):
        raise ValueError("start point outside the domain")
    gaussian = process is None or process.is_gaussian
    var_rate = 1.0 if process is None else 2.0  # alpha = 2 runs at twice the speed
    use_bridge = cfg.bridge and gaussian and D.has_sdf
    slit_eps = cfg.slit_eps

    pos = x0.copy()
    exit_time = np.full(m, float(horizon))
    exit_point = x0.copy()
    active = np.ones(m, dtype=bool)
    nsteps = int(np.ceil(horizon / cfg.dt - 1e-9))
    t = 0.0
    for k in range(nsteps):
        h = min(cfg.dt, horizon - t)
        if crn:
            Z = rng.standard_normal((m, d))
            U = rng.random(m) if use_bridge else None
            scale = None if gaussian else _stable_scale(h, process, m, rng)
            idx = np.flatnonzero(active)
            z = Z[idx]
            u = U[idx] if use_bridge else None
            sc = None if gaussian else scale[idx]
        else:
            idx = np.flatnonzero(active)
            z = rng.standard_normal((idx.size, d))
            u = rng.random(idx.size) if use_bridge else None
            sc = None if gaussian else _stable_scale(h, process, idx.size, rng)
        x = pos[idx]
        y = x + (np.sqrt(var_rate * h) * z if gaussian else sc[:, None] * z)

        out = ~D.contains(y)
        ept = y.copy()
        if np.any(out):
            if gaussian:
                f = D.exit_fraction(x[out], y[out])
                ept[out] = D.boundary_point(x[out] + f[:, None] * (y[out] - x[out]))
            # jump processes exit to wherever they land
        zt = D.zero_thickness_hit(x, y, slit_eps) if slit_eps > 0 else None
        if zt is not None:
            hit, where = zt
            hit = hit & ~out
            ept[hit] = where[hit]
            out = out | hit
        if use_bridge:
            inside = ~out
            if np.any(inside):
                xi, yi = x[inside], y[inside]
                p = D.bridge_cross_prob(xi, yi, var_rate * h)
                cross = u[inside] < p
                if np.any(cross):
                    xc, yc = xi[cross], yi[cross]
                    near = np.where((D.distance(xc) <= D.distance(yc))[:, None], xc, yc)
                    sub = np.flatnonzero(inside)[cross]
                    ept[sub] = D.boundary_point(near)
                    out[sub] = True
        done = idx[out]
        exit_time[done] = t + h / 2.0
        exit_point[done] = ept[out]
        active[done] = False
        stay = idx[~out]
        pos[stay] = y[~out]
        t += h
        if not active.any():
            break
    exit_point[active] = pos[active]
    return exit_time, exit_point, active


def sample_exits(
    D: Domain,
    x,
    n: int,
    cfg: SimConfig,
    process: StableParams | None = None,
    crn: bool = True,
    horizon: float | None = None,
) -> ExitBatch:
    """Simulate ``n`` discretized paths from ``x`` until they leave ``D``.

    Exits are detected when a step lands outside (the crossing is located by
    bisection and snapped to the boundary), when a step passes within
    ``cfg.slit_eps`` of a zero-thickness boundary piece, or, for Gaussian
    steps, with the Brownian-bridge crossing probability.  The exit time is the
    midpoint of the step in which the exit happened.

    ``crn=True`` draws a full chunk of noise every step, so a path sees the
    same increments in any domain and exit times are pathwise monotone in the
    domain.  ``crn=False`` only draws for live paths (faster for long runs).

    ``horizon`` defaults to ``cfg.max_time``; paths still inside are truncated.
    """
    if process is not None and process.dim != D.dim:
        raise ValueError("process dimension does not match domain dimension")
    T = cfg.max_time if horizon is None else float(horizon)
    if T > cfg.max_time:
        raise ValueError("horizon exceeds max_time")
    X = _starts(x, n)
    if X.shape[1] != D.dim:
        raise ValueError("start point dimension does not match domain dimension")
    if not np.all(D.contains(X[:1] if np.ndim(x) == 1 else X)):
        raise ValueError("start point outside the domain")

    def run(rng, s, m):
        return _exit_chunk(D, X[s : s + m], cfg, rng, process, crn, T)

    parts = map_chunks(run, n, cfg.seed, cfg.chunk_size, cfg.workers)
    return ExitBatch(
        D,
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
        seed=cfg.seed,
        horizon=T,
    )


def sample_exit(D: Domain, x, cfg: SimConfig, rng: np.random.Generator | None = None,
                process: StableParams | None = None) -> StoppedPath:
    """Single stopped path (for batches use :func:`sample_exits`)."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if not D.contains(x)[0]:
        raise ValueError("start point outside the domain")
    rng = chunk_rng(cfg.seed, 0) if rng is None else rng
    et, ep, tr = _exit_chunk(D, x, cfg, rng, process, True, cfg.max_time)
    b = ExitBatch(D, et, ep, tr, cfg.seed, cfg.max_time)
    return b[0]


# ---------------------------------------------------------------------------
# walk-on-spheres
def _unit_vectors(rng, m, d):
    v = rng.standard_normal((m, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _wos_chunk(D: Domain, x0, cfg: SimConfig, rng):
    pos = np.array(x0, dtype=float)
    m, d = pos.shape
    active = np.ones(m, dtype=bool)
    steps = np.zeros(m, dtype=np.int64)
    for _ in range(cfg.max_wos_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        r = D.distance(pos[idx])
        absorbed = r < cfg.eps_shell
        if np.any(absorbed):
            a = idx[absorbed]
            pos[a] = D.boundary_point(pos[a])
            active[a] = False
        live = idx[~absorbed]
        pos[live] += r[~absorbed, None] * _unit_vectors(rng, live.size, d)
        steps[live] += 1
    return pos, active, steps


def walk_on_spheres_batch(D: Domain, x, n: int, cfg: SimConfig) -> ExitBatch:
    """Brownian exit positions by walk-on-spheres (no exit times: they are NaN)."""
    if not D.has_sdf:
        raise ValueError(f"{D.kind} domain has no signed distance; walk-on-spheres needs one")
    X = _starts(x, n)
    if not np.all(D.contains(X[:1] if np.ndim(x) == 1 else X)):
        raise ValueError("start point outside the domain")

    def run(rng, s, m):
        return _wos_chunk(D, X[s : s + m], cfg, rng)

    parts = map_chunks(run, n, cfg.seed, cfg.chunk_size, cfg.workers)
    pts = np.concatenate([p[0] for p in parts])
    trunc = np.concatenate([p[1] for p in parts])
    return ExitBatch(D, np.full(n, np.nan), pts, trunc, seed=cfg.seed)


def walk_on_spheres(D: Domain, x, cfg: SimConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    if not D.has_sdf:
        raise ValueError(f"{D.kind} domain has no signed distance; walk-on-spheres needs one")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if not D.contains(x)[0]:
        raise ValueError("start point outside the domain")
    rng = chunk_rng(cfg.seed, 0) if rng is None else rng
    pos, trunc, _ = _wos_chunk(D, x, cfg, rng)
    if trunc[0]:
        raise RuntimeError("walk-on-spheres did not reach the boundary within max_wos_steps")
    return pos[0]


# ---------------------------------------------------------------------------
# exact ball exit times and the space-time sphere walk
@lru_cache(maxsize=None)
def _bessel_zeros(nu: float, count: int) -> np.ndarray:
    if abs(nu - 0.5) < 1e-12:
        return np.pi * np.arange(1, count + 1)
    zeros = []
    step = 0.05
    x = step
    f_prev = jv(nu, x)
    while len(zeros) < count:
        x_next = x + step
        f_next = jv(nu, x_next)
        if f_prev == 0:
            zeros.append(x)
        elif f_prev * f_next < 0:
            zeros.append(brentq(lambda s: jv(nu, s), x, x_next, xtol=1e-14))
        x, f_prev = x_next, f_next
    return np.array(zeros[:count])


@lru_cache(maxsize=None)
def _exit_time_table(dim: int):
    """Grid and CDF of the exit time of the unit ball from its center (generator Delta/2)."""
    nu = dim / 2.0 - 1.0
    j = _bessel_zeros(nu, 80)
    coef = j ** (nu - 1.0) / (2.0 ** (nu - 1.0) * gamma_fn(nu + 1.0) * jv(nu + 1.0, j))
    lam1 = j[0] ** 2 / 2.0
    s_min = 0.004
    s_max = (np.log(abs(coef[0])) + 32.0) / lam1
    s = np.linspace(s_min, s_max, 40_000)
    surv = np.zeros_like(s)
    for c, jj in zip(coef, j):
        surv += c * np.exp(-0.5 * jj * jj * s)
    F = np.clip(1.0 - surv, 0.0, 1.0)
    F = np.maximum.accumulate(F)
    keep = np.r_[True, np.diff(F) > 0]
    return s[keep], F[keep], lam1


def unit_ball_exit_time(dim: int, size, rng: np.random.Generator) -> np.ndarray:
    """Exit times of standard BM (generator ``Delta/2``) from the unit ball, started at the center."""
    s, F, lam1 = _exit_time_table(int(dim))
    u = rng.random(size)
    out = np.interp(u, F, s)
    tail = u > F[-1]
    if np.any(tail):
        out[tail] = s[-1] + np.log((1.0 - F[-1]) / (1.0 - u[tail])) / lam1
    return out


def sphere_walk_hitting(
    A: Domain,
    x0,
    horizon: float,
    rng: np.random.Generator,
    eps: float,
    speed: float = 1.0,
    escape_radius: float | None = None,
    max_steps: int = 100_000,
):
    """Hitting times of ``A`` for Brownian paths from ``x0`` (one per row).

    Each step jumps to a uniform point on the largest sphere around the
    current position that avoids ``A``; the time spent is ``r^2 T1 / speed``
    with ``T1`` the exact unit-ball exit time.  A path that would overrun
    ``horizon`` inside its current ball has not hit ``A`` by then.  Paths
    within ``eps`` of ``A`` count as hits.

    Returns ``(tau, escaped, unresolved)``: ``tau`` is ``inf`` for non-hits,
    ``escaped`` flags paths stopped beyond ``escape_radius`` (distance from
    the origin), ``unresolved`` flags paths that ran out of steps.
    """
    pos = np.array(x0, dtype=float)
    m, d = pos.shape
    if not np.isfinite(horizon) and escape_radius is None:
        raise ValueError("an infinite horizon needs an escape radius")
    tau = np.full(m, np.inf)
    clock = np.zeros(m)
    active = np.ones(m, dtype=bool)
    escaped = np.zeros(m, dtype=bool)
    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        r = A.sdf(pos[idx])
        hit = r < eps
        if np.any(hit):
            tau[idx[hit]] = clock[idx[hit]]
            active[idx[hit]] = False
        live = idx[~hit]
        r = r[~hit]
        if escape_radius is not None:
            far = np.linalg.norm(pos[live], axis=1) > escape_radius
            if np.any(far):
                escaped[live[far]] = True
                active[live[far]] = False
                live, r = live[~far], r[~far]
        T = r * r * unit_ball_exit_time(d, live.size, rng) / speed
        late = clock[live] + T > horizon
        active[live[late]] = False
        go = live[~late]
        clock[go] += T[~late]
        pos[go] += r[~late, None] * _unit_vectors(rng, go.size, d)
    return tau, escaped, active


# ---------------------------------------------------------------------------
# Wiener sausage
def bm_path(x0, t: float, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Positions at times ``0, dt, ..., t`` of standard BM started at ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    k = int(np.ceil(t / dt - 1e-9))
    steps = np.full(k, dt)
    if k:
        steps[-1] = t - dt * (k - 1)
    inc = np.sqrt(steps)[:, None] * rng.standard_normal((k, x0.shape[0]))
    return np.vstack([x0, x0 + np.cumsum(inc, axis=0)])


def _densify(path: np.ndarray, h: float) -> np.ndarray:
    if path.shape[0] == 1:
        return path
    seg = np.diff(path, axis=0)
    L = np.linalg.norm(seg, axis=1)
    k = np.maximum(np.ceil(L / h).astype(np.int64), 1)
    owner = np.repeat(np.arange(seg.shape[0]), k)
    frac = (np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)) / np.repeat(k, k)
    pts = path[owner] + frac[:, None] * seg[owner]
    return np.vstack([pts, path[-1:]])


def _shape_frame(shape):
    """(center offset, half extents, norm order) of a ball radius, Ball or Rectangle."""
    if isinstance(shape, (int, float, np.floating)):
        r = float(shape)
        return None, r, 2
    if isinstance(shape, Ball):
        return shape.center, shape.radius, 2
    if isinstance(shape, Rectangle):
        return 0.5 * (shape.lo + shape.hi), 0.5 * (shape.hi - shape.lo), np.inf
    raise TypeError("sausage shapes must be a radius, a Ball or a Rectangle")


def _segment_hits(cells, a, b, half, order):
    """Does segment ``a->b`` (scaled coordinates) come within the unit ``order``-ball of ``cells``?"""
    if order == 2:
        ab = b - a
        L2 = np.einsum("ij,ij->i", ab, ab)
        L2 = np.where(L2 == 0, 1.0, L2)
        t = np.clip(np.einsum("ij,ij->i", cells - a, ab) / L2, 0.0, 1.0)
        q = a + t[:, None] * ab
        return np.einsum("ij,ij->i", cells - q, cells - q) <= 1.0
    # slab test: is there s in [0,1] with |cells - a - s (b-a)| <= 1 per axis
    dlt = b - a
    lo = np.zeros(cells.shape[0])
    hi = np.ones(cells.shape[0])
    rel = cells - a
    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = (rel - 1.0) / dlt
        s2 = (rel + 1.0) / dlt
    moving = dlt != 0
    smin = np.where(moving, np.minimum(s1, s2), -np.inf)
    smax = np.where(moving, np.maximum(s1, s2), np.inf)
    fixed_ok = np.where(moving, True, np.abs(rel) <= 1.0)
    lo = np.maximum(lo, smin.max(axis=1))
    hi = np.minimum(hi, smax.min(axis=1))
    return (lo <= hi) & fixed_ok.all(axis=1)


def sausage_mask(path, shape, grid: RasterSet, block: int = 8) -> RasterSet:
    """Cells of ``grid`` whose centers lie in ``path(s) + shape`` for some ``s``.

    ``shape`` is a radius (ball at the path), a :class:`Ball` or a
    :class:`Rectangle` (offsets relative to the path point).  The path is the
    polyline through the sampled positions; membership is decided exactly for
    each linear piece.
    """
    path = np.atleast_2d(np.asarray(path, dtype=float))
    if path.shape[1] != grid.dim:
        raise ValueError("path and grid dimensions differ")
    offset, half, order = _shape_frame(shape)
    if np.any(np.asarray(half) <= 0):
        return grid.with_mask(np.zeros(grid.shape, dtype=bool))
    half = np.broadcast_to(np.asarray(half, dtype=float), (grid.dim,))
    if offset is not None:
        path = path + offset
    h = grid.cell / 4.0
    dense = _densify(path, h)
    scaled = dense / half
    tree = cKDTree(scaled)
    h_s = h / half.min()

    # coarse blocks: keep those that can touch the sausage
    shape_arr = np.array(grid.shape)
    nb = -(-shape_arr // block)
    bidx = np.stack(np.meshgrid(*[np.arange(k) for k in nb], indexing="ij"), -1).reshape(-1, grid.dim)
    bcenter = grid.origin + (bidx + 0.5) * block * grid.cell
    bhalf = block * grid.cell / 2.0
    if order == 2:
        reach = 1.0 + np.sqrt(grid.dim) * bhalf / half.min() + h_s
    else:
        reach = 1.0 + bhalf / half.min() + h_s
    bd, _ = tree.query(bcenter / half, p=order, distance_upper_bound=reach)
    keep_blocks = bidx[np.isfinite(bd)]
    mask = np.zeros(grid.shape, dtype=bool)
    if keep_blocks.size == 0:
        return grid.with_mask(mask)

    offs = np.stack(np.meshgrid(*[np.arange(block)] * grid.dim, indexing="ij"), -1).reshape(-1, grid.dim)
    cells = (keep_blocks[:, None, :] * block + offs[None]).reshape(-1, grid.dim)
    cells = cells[np.all(cells < shape_arr, axis=1)]
    centers = (grid.origin + (cells + 0.5) * grid.cell) / half
    dist, _ = tree.query(centers, p=order, distance_upper_bound=1.0 + h_s)
    inside = dist <= 1.0
    band = ~inside & np.isfinite(dist)
    if np.any(band):
        bc = centers[band]
        lists = tree.query_ball_point(bc, 1.0 + h_s / 2.0 + 1e-12, p=order)
        lens = np.fromiter((len(l) for l in lists), dtype=np.int64, count=len(lists))
        owner = np.repeat(np.arange(bc.shape[0]), lens)
        pts = np.concatenate([np.asarray(l, dtype=np.int64) for l in lists]) if lens.sum() else np.empty(0, np.int64)
        hit = np.zeros(bc.shape[0], dtype=bool)
        last = scaled.shape[0] - 1
        for shift in (-1, 1):
            nb_pts = pts + shift
            ok = (nb_pts >= 0) & (nb_pts <= last)
            a = scaled[pts[ok]]
            b = scaled[nb_pts[ok]]
            r = _segment_hits(bc[owner[ok]], a, b, half, order)
            hit |= np.bincount(owner[ok], weights=r, minlength=bc.shape[0]) > 0
        band_idx = np.flatnonzero(band)
        inside[band_idx[hit]] = True
    sel = cells[inside]
    mask[tuple(sel.T)] = True
    return grid.with_mask(mask)


def sausage_volume(path, shape, grid: RasterSet) -> float:
    """Volume of the raster sausage ``union_s path(s) + shape`` (see :func:`sausage_mask`)."""
    m = sausage_mask(path, shape, grid)
    return m.count * grid.cell**grid.dim


def write_path_csv(times, positions, fh) -> None:
    """Write rows ``t, x1, ..., xd`` to an open text file."""
    positions = np.atleast_2d(positions)
    w = csv.writer(fh)
    w.writerow(["t"] + [f"x{k + 1}" for k in range(positions.shape[1])])
    for t, row in zip(np.asarray(times).reshape(-1), positions):
        w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
