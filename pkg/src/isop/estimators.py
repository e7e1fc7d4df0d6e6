"""Monte Carlo estimators built on the samplers, plus two deterministic oracles.

Every stochastic estimator returns an :class:`Estimate`.  Unless noted, the
standard error is the sample standard deviation over ``sqrt(n)``.
"""
from __future__ import annotations

import csv
import json
import math
import warnings as _warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree
from scipy.special import betainc, gammaln

from .geometry.domains import Ball, Domain, Rectangle
from .geometry.raster import RasterSet
from .stochastic import (
    Complement,
    SimConfig,
    StableParams,
    bm_path,
    map_chunks,
    sample_exits,
    sausage_mask,
    sphere_walk_hitting,
    walk_on_spheres_batch,
)

__all__ = [
    "Estimate",
    "DiscreteMeasure",
    "InsufficientSurvivalError",
    "harmonic_measure",
    "survival_probability",
    "survival_curve",
    "expected_exit_time",
    "kac_eigenvalue",
    "kac_influence",
    "kac_from_exit_times",
    "auto_kac_grid",
    "heat_content",
    "heat_content_curve",
    "capacity_spitzer",
    "riesz_constant",
    "riesz_kernel",
    "ball_self_energy_constant",
    "riesz_energy",
    "capacity_energy",
    "hitting_probability",
    "carleman_bound",
    "sausage_volumes",
    "sausage_expectation",
    "to_json",
    "write_csv",
]


# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int
    seed: int = 0
    truncated_fraction: float = 0.0
    bias_bound: float = 0.0
    warnings: tuple = ()
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError("stderr must be nonnegative")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 <= self.truncated_fraction <= 1.0:
            raise ValueError("truncated_fraction must lie in [0, 1]")

    @classmethod
    def from_samples(cls, values, seed=0, truncated_fraction=0.0, **kw) -> "Estimate":
        v = np.asarray(values, dtype=float).reshape(-1)
        n = v.size
        mean = float(np.mean(v))
        sd = float(np.std(v, ddof=1)) if n > 1 else 0.0
        return cls(mean, sd / math.sqrt(n), n, int(seed), float(truncated_fraction), **kw)

    def z_against(self, value: float) -> float:
        return (self.mean - value) / self.stderr if self.stderr > 0 else (0.0 if self.mean == value else math.inf)

    def to_record(self, op: str = "", params: dict | None = None) -> dict:
        rec = {
            "op": op,
            "params": params or {},
            "mean": self.mean,
            "stderr": self.stderr,
            "n": self.n,
            "seed": self.seed,
            "truncated_fraction": self.truncated_fraction,
        }
        if self.bias_bound:
            rec["bias_bound"] = self.bias_bound
        if self.warnings:
            rec["warnings"] = list(self.warnings)
        return rec


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability weights on a finite point set."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.array(self.points, dtype=float))
        w = np.array(self.weights, dtype=float).reshape(-1)
        if p.shape[0] != w.shape[0]:
            raise ValueError("one weight per point required")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")
        p.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(p, np.full(p.shape[0], 1.0 / p.shape[0]))

    @classmethod
    def normalized(cls, points, weights) -> "DiscreteMeasure":
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        w = w / w.sum()
        w[np.argmax(w)] += 1.0 - w.sum()
        return cls(points, w)

    def scaled(self, s: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points * s, self.weights)


class InsufficientSurvivalError(ValueError):
    pass


def _warn(est_warnings: list, msg: str):
    est_warnings.append(msg)
    _warnings.warn(msg, RuntimeWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# exit-problem estimators
def _check_inside(D: Domain, x):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != D.dim:
        raise ValueError(f"start point has dimension {x.shape[0]}, domain has {D.dim}")
    if not D.contains(x[None])[0]:
        raise ValueError("start point outside the domain")
    return x


def harmonic_measure(D: Domain, E, x, n: int, cfg: SimConfig, method: str = "auto") -> Estimate:
    """Probability that Brownian motion from ``x`` leaves ``D`` through ``E``.

    ``E`` is a boundary label of ``D`` or a predicate on exit points.
    Walk-on-spheres is used when ``D`` has a signed distance (``method="wos"``),
    otherwise step simulation (``method="steps"``).  Truncated paths are left
    out of both numerator and denominator.
    """
    x = _check_inside(D, x)
    if isinstance(E, str) and E not in D.labels:
        raise KeyError(f"unknown boundary label {E!r} for {D.kind}; known: {sorted(D.labels)}")
    if method == "auto":
        method = "wos" if D.has_sdf else "steps"
    if method == "wos":
        batch = walk_on_spheres_batch(D, x, n, cfg)
    elif method == "steps":
        batch = sample_exits(D, x, n, cfg, crn=False)
    else:
        raise ValueError(f"unknown method {method!r}")
    ok = ~batch.truncated
    kept = int(ok.sum())
    trunc = 1.0 - kept / n
    if kept == 0:
        raise RuntimeError("every path was truncated")
    hits = batch.on(E)[ok].astype(float)
    return Estimate.from_samples(hits, cfg.seed, trunc, extras={"method": method})


def survival_probability(
    D: Domain,
    x,
    t: float,
    n: int,
    cfg: SimConfig,
    process: StableParams | None = None,
    crn: bool = True,
) -> Estimate:
    """``P_x(T_D > t)`` for Brownian motion or a stable process."""
    x = _check_inside(D, x)
    if t > cfg.max_time:
        raise ValueError(f"t = {t} exceeds max_time = {cfg.max_time}")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return Estimate(1.0, 0.0, n, cfg.seed, 0.0)
    batch = sample_exits(D, x, n, cfg, process=process, crn=crn, horizon=t)
    return Estimate.from_samples(batch.truncated.astype(float), cfg.seed, 0.0)


def survival_curve(
    D: Domain,
    x,
    t_grid: Sequence[float],
    n: int,
    cfg: SimConfig,
    process: StableParams | None = None,
    crn: bool = False,
):
    """Survival estimates on a time grid from one set of paths.

    Returns ``(p_hat, exit_times)``.
    """
    x = _check_inside(D, x)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be increasing")
    horizon = float(t_grid[-1])
    if horizon > cfg.max_time:
        raise ValueError("t_grid exceeds max_time")
    batch = sample_exits(D, x, n, cfg, process=process, crn=crn, horizon=horizon)
    T = np.where(batch.truncated, np.inf, batch.exit_time)
    return (T[:, None] > t_grid[None, :]).mean(axis=0), T


def expected_exit_time(
    D: Domain, x, n: int, cfg: SimConfig, process: StableParams | None = None, crn: bool = False
) -> Estimate:
    """Mean exit time; truncated paths contribute ``max_time``."""
    x = _check_inside(D, x)
    batch = sample_exits(D, x, n, cfg, process=process, crn=crn)
    trunc = float(batch.truncated.mean())
    notes: list = []
    if trunc > 0.01:
        _warn(notes, f"{trunc:.1%} of paths truncated at max_time; the mean is biased low")
    return Estimate.from_samples(batch.exit_time, cfg.seed, trunc, warnings=tuple(notes))


def _kac_weights(t, p, n):
    """GLS weight rows (slope, intercept) for ``-log p`` on ``t`` and the slope variance."""
    pm = np.minimum.outer(np.arange(t.size), np.arange(t.size))
    C = (1.0 - p[pm]) / (n * p[pm])
    X = np.column_stack([t, np.ones_like(t)])
    Ci = np.linalg.inv(C)
    cov = np.linalg.inv(X.T @ Ci @ X)
    return cov @ X.T @ Ci, float(cov[0, 0])


def _kac_fit(t, p, n):
    W, var = _kac_weights(t, p, n)
    beta = W @ -np.log(p)
    return float(beta[0]), float(math.sqrt(max(var, 0.0))), float(beta[1])


def kac_influence(exit_times, t_grid, p, n) -> np.ndarray:
    """Per-path first-order contributions to the fitted eigenvalue.

    ``mean`` of the result is zero; the margin between two eigenvalues fitted
    on common paths has stderr ``std(psi_1 - psi_2) / sqrt(n)``.
    """
    t = np.asarray(t_grid, dtype=float)
    W, _ = _kac_weights(t, p, n)
    ind = np.asarray(exit_times)[:, None] > t[None, :]
    return -((ind - p[None, :]) / p[None, :]) @ W[0]


def kac_eigenvalue(
    D: Domain,
    x,
    t_grid: Sequence[float] | None,
    n: int,
    cfg: SimConfig,
    p_min: float | None = None,
    crn: bool = False,
    keep_paths: bool = False,
    horizon: float | None = None,
) -> Estimate:
    """Principal Dirichlet eigenvalue of ``-Delta/2`` from the survival decay rate.

    Fits ``-log P(T > t) = lambda t + c`` over ``t_grid`` by generalized least
    squares.  Grid points with ``P_hat < p_min`` (default ``50/n``) are
    dropped; at least 4 must remain.  With ``t_grid=None`` the paths run to
    ``horizon`` and the grid is chosen from them (see :func:`auto_kac_grid`).
    ``keep_paths`` stores the per-path exit times in ``extras["exit_times"]``
    (see :func:`kac_influence`).
    """
    x = _check_inside(D, x)
    if t_grid is None:
        H = cfg.max_time if horizon is None else float(horizon)
        batch = sample_exits(D, x, n, cfg, crn=crn, horizon=H)
        T = np.where(batch.truncated, np.inf, batch.exit_time)
        t_grid = auto_kac_grid(T, H)
    else:
        t = np.asarray(t_grid, dtype=float)
        if t.size < 4:
            raise ValueError("t_grid needs at least 4 points")
        if t[-1] > cfg.max_time:
            raise ValueError("t_grid exceeds max_time")
        batch = sample_exits(D, x, n, cfg, crn=crn, horizon=float(t[-1]))
        T = np.where(batch.truncated, np.inf, batch.exit_time)
    return kac_from_exit_times(T, t_grid, cfg.seed, p_min, keep_paths)


def auto_kac_grid(exit_times, horizon: float, points: int = 6, tail_count: int = 200) -> np.ndarray:
    """Six times from ``t_hi / 4`` to ``t_hi``, where ``tail_count`` paths survive ``t_hi``.

    ``t_hi`` is capped at ``horizon``.  Starting at a quarter of ``t_hi`` leaves
    the higher modes time to decay in the shapes used here.
    """
    T = np.sort(np.asarray(exit_times, dtype=float))
    n = T.size
    k = n - tail_count - 1
    t_hi = horizon if k < 0 else min(float(T[k]), horizon)
    if not t_hi > 0:
        raise InsufficientSurvivalError("insufficient survival mass; shrink t_grid or raise n")
    return np.linspace(t_hi / 4.0, t_hi, points) * (1 - 1e-12)


def kac_from_exit_times(exit_times, t_grid, seed: int = 0, p_min: float | None = None, keep_paths: bool = False) -> Estimate:
    """Kac fit on given exit times (``inf`` for paths that never left)."""
    t = np.asarray(t_grid, dtype=float)
    if t.size < 4:
        raise ValueError("t_grid needs at least 4 points")
    if np.any(np.diff(t) <= 0) or t[0] <= 0:
        raise ValueError("t_grid must be positive and increasing")
    T = np.asarray(exit_times, dtype=float)
    n = T.size
    p_min = 50.0 / n if p_min is None else p_min
    p = (T[:, None] > t[None, :]).mean(axis=0)
    use = p >= p_min
    if use.sum() < 4:
        raise InsufficientSurvivalError("insufficient survival mass; shrink t_grid or raise n")
    lam, se, icpt = _kac_fit(t[use], p[use], n)
    notes: list = []
    if not use.all():
        _warn(notes, f"dropped {int((~use).sum())} grid points with survival below {p_min:.3g}")
    extras = {"t_grid": t.tolist(), "survival": p.tolist(), "used": use.tolist(), "intercept": icpt}
    if keep_paths:
        extras["exit_times"] = T
        extras["fit_grid"] = t[use]
        extras["fit_survival"] = p[use]
    return Estimate(lam, se, n, int(seed), 0.0, warnings=tuple(notes), extras=extras)


# ---------------------------------------------------------------------------
# heat content and Spitzer capacity
def _bounding_ball(A: Domain):
    if isinstance(A, Ball):
        return A.center, A.radius
    lo, hi = A.bbox()
    c = 0.5 * (lo + hi)
    return c, float(np.linalg.norm(hi - lo) / 2)


def _check_box(A: Domain, box: Domain, t: float):
    c, R = _bounding_ball(A)
    need = R + 4.0 * math.sqrt(t)
    if isinstance(box, Ball):
        ok = np.linalg.norm(box.center - c) + need <= box.radius * (1 + 1e-12)
        if not ok:
            raise ValueError(
                f"sampling box too small: needs a ball of radius {need:.6g} around {c.tolist()}"
            )
    elif isinstance(box, Rectangle):
        lo, hi = A.bbox()
        pad = 4.0 * math.sqrt(t)
        if np.any(lo - pad < box.lo) or np.any(hi + pad > box.hi):
            raise ValueError(
                f"sampling box too small: needs [{(lo - pad).tolist()}, {(hi + pad).tolist()}]"
            )
    else:
        raise TypeError("sampling box must be a Ball or a Rectangle")


def _uniform_in(box: Domain, m: int, rng) -> np.ndarray:
    if isinstance(box, Ball):
        v = rng.standard_normal((m, box.dim))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        r = box.radius * rng.random(m) ** (1.0 / box.dim)
        return box.center + r[:, None] * v
    return box.lo + (box.hi - box.lo) * rng.random((m, box.dim))


def default_sampling_box(A: Domain, t_max: float) -> Ball:
    c, R = _bounding_ball(A)
    return Ball(R + 4.0 * math.sqrt(t_max), c)


def _hit_times(A: Domain, box: Domain, t_max: float, n: int, cfg: SimConfig) -> np.ndarray:
    """Hitting times (inf if none by ``t_max``) from uniform starts in ``box`` minus ``A``."""

    def run(rng, s, m):
        pts = np.empty((0, A.dim))
        while pts.shape[0] < m:
            cand = _uniform_in(box, 2 * (m - pts.shape[0]) + 16, rng)
            cand = cand[A.sdf(cand) > 0]
            pts = np.vstack([pts, cand])
        pts = pts[:m]
        tau, _, unresolved = sphere_walk_hitting(A, pts, t_max, rng, cfg.eps_shell)
        if np.any(unresolved):
            raise RuntimeError("sphere walk did not resolve every path")
        return tau

    return np.concatenate(map_chunks(run, n, cfg.seed, cfg.chunk_size, cfg.workers))


def _check_heat_inputs(A: Domain):
    if A.dim != 3:
        raise ValueError("heat content is implemented for d = 3 only")
    if not A.has_sdf:
        raise ValueError("heat content needs a domain with a signed distance")


def heat_content_curve(A: Domain, t_grid, sampling_box: Domain | None, n: int, cfg: SimConfig):
    """Per-sample contributions to ``E_A(t)`` for every ``t`` in ``t_grid``.

    Returns ``(samples, vol_A)`` with ``samples`` of shape ``(n, len(t_grid))``
    such that ``E_A(t_k)`` is estimated by ``samples[:, k].mean() + vol_A``.
    """
    _check_heat_inputs(A)
    t_grid = np.asarray(t_grid, dtype=float).reshape(-1)
    t_max = float(t_grid.max())
    box = default_sampling_box(A, t_max) if sampling_box is None else sampling_box
    _check_box(A, box, t_max)
    vol_A = A.volume()
    tau = _hit_times(A, box, t_max, n, cfg)
    samples = (box.volume() - vol_A) * (tau[:, None] <= t_grid[None, :])
    return samples, vol_A


def heat_content(A: Domain, t: float, sampling_box: Domain | None, n: int, cfg: SimConfig) -> Estimate:
    """``E_A(t) = vol(A) + integral over the complement of P_x(tau_A <= t)`` (d = 3).

    Starts are uniform in ``sampling_box`` minus ``A`` (default: a ball that
    covers ``A`` dilated by ``4 sqrt(t)``).  Hitting is exact up to the
    absorption shell, which biases the estimate up by at most
    ``area(dA) * cfg.eps_shell``; keep ``eps_shell`` well below ``sqrt(t)``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        _check_heat_inputs(A)
        return Estimate(A.volume(), 0.0, n, cfg.seed)
    samples, vol_A = heat_content_curve(A, [t], sampling_box, n, cfg)
    est = Estimate.from_samples(samples[:, 0], cfg.seed)
    return Estimate(est.mean + vol_A, est.stderr, n, cfg.seed, 0.0, bias_bound=0.0)


def capacity_spitzer(
    A: Domain,
    t_grid: Sequence[float] = (1.0, 4.0, 9.0),
    sampling_box: Domain | None = None,
    n: int = 1_000_000,
    cfg: SimConfig | None = None,
    max_condition: float = 1e8,
) -> Estimate:
    """Newtonian capacity as the slope ``c1`` of ``E_A(t) ~ c1 t + c2 sqrt(t) + c3`` (d = 3).

    All grid times share one set of hitting times, so the fitted slope is a
    fixed linear combination of per-sample values and its standard error is
    exact.
    """
    cfg = SimConfig() if cfg is None else cfg
    t = np.asarray(t_grid, dtype=float)
    if t.size < 3:
        raise ValueError("t_grid needs at least 3 points")
    X = np.column_stack([t, np.sqrt(t), np.ones_like(t)])
    cond = np.linalg.cond(X)
    if not cond <= max_condition:
        raise ValueError(f"fit is ill-conditioned (condition number {cond:.3g})")
    W = np.linalg.pinv(X)  # rows: weights of c1, c2, c3
    samples, vol_A = heat_content_curve(A, t, sampling_box, n, cfg)
    per_sample = samples @ W[0] + vol_A * W[0].sum()
    est = Estimate.from_samples(per_sample, cfg.seed)
    E = samples.mean(axis=0) + vol_A
    coef = W @ E
    return Estimate(
        est.mean, est.stderr, n, cfg.seed, 0.0,
        extras={"t_grid": t.tolist(), "heat_content": E.tolist(), "coefficients": coef.tolist()},
    )


# ---------------------------------------------------------------------------
# Riesz energy and capacity
def riesz_constant(alpha: float, n_dim: int) -> float:
    """Normalizing constant of the Riesz kernel ``c |x|^(alpha - n)``."""
    if not 0 < alpha < n_dim:
        raise ValueError("need 0 < alpha < n_dim")
    return math.exp(
        gammaln((n_dim - alpha) / 2.0) - gammaln(alpha / 2.0) - (n_dim / 2.0) * math.log(math.pi)
        - (alpha - 1.0) * math.log(2.0)
    )


def riesz_kernel(r, alpha: float, n_dim: int):
    return riesz_constant(alpha, n_dim) * np.asarray(r, dtype=float) ** (alpha - n_dim)


def ball_self_energy_constant(alpha: float, n_dim: int) -> float:
    """``E |X - Y|^(alpha - n)`` for independent uniform points in the unit ball."""
    a = (n_dim + 1) / 2.0

    def f(r):
        return n_dim * r ** (alpha - 1.0) * betainc(a, 0.5, 1.0 - r * r / 4.0)

    val, _ = integrate.quad(f, 0.0, 2.0, limit=200)
    return float(val)


def _nn_half_distance(points: np.ndarray) -> np.ndarray:
    d, _ = cKDTree(points).query(points, k=2)
    return d[:, 1] / 2.0


def _check_no_duplicates(points: np.ndarray):
    d, _ = cKDTree(points).query(points, k=2)
    if np.any(d[:, 1] == 0):
        raise ValueError("duplicate points in the measure")


def _kernel_matrix(points, alpha, n_dim, self_energy: bool):
    diff = points[:, None, :] - points[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(r, 1.0)
    K = riesz_kernel(r, alpha, n_dim)
    if self_energy:
        rho = _nn_half_distance(points)
        diag = riesz_kernel(rho, alpha, n_dim) * ball_self_energy_constant(alpha, n_dim)
    else:
        diag = np.zeros(points.shape[0])
    np.fill_diagonal(K, diag)
    return K


def riesz_energy(mu: DiscreteMeasure, alpha: float, n_dim: int, self_energy: bool = True) -> float:
    """``sum_ij w_i w_j k_alpha(x_i - x_j)`` over ``i != j`` plus the atom self-energies.

    An atom is treated as a uniform ball whose radius is half the distance to
    its nearest neighbor; ``self_energy=False`` keeps only the pair part.
    """
    p = mu.points
    if p.shape[1] != n_dim:
        raise ValueError("point dimension does not match n_dim")
    if p.shape[0] < 2:
        raise ValueError("need at least two atoms")
    _check_no_duplicates(p)
    w = mu.weights
    total = 0.0
    step = max(1, 4_000_000 // p.shape[0])
    for s in range(0, p.shape[0], step):
        q = p[s : s + step]
        r = np.linalg.norm(q[:, None, :] - p[None, :, :], axis=-1)
        rows = np.arange(q.shape[0])
        r[rows, s + rows] = np.inf
        total += float(w[s : s + step] @ (riesz_kernel(r, alpha, n_dim) @ w))
    if self_energy:
        rho = _nn_half_distance(p)
        total += float(np.sum(w * w * riesz_kernel(rho, alpha, n_dim))) * ball_self_energy_constant(alpha, n_dim)
    return total


def capacity_energy(
    surface_points,
    alpha: float = 2.0,
    n_dim: int = 3,
    iters: int = 2000,
    tol: float = 1e-4,
    self_energy: bool = True,
):
    """Capacity as the reciprocal of the minimal energy over probability weights.

    Frank-Wolfe with away steps and exact line search on the simplex.  The
    reported stderr is the capacity interval implied by the final duality gap.
    Returns ``(Estimate, DiscreteMeasure)``; ``Estimate.extras["trace"]`` holds
    the (nonincreasing) energy after each iteration.
    """
    P = np.atleast_2d(np.asarray(surface_points, dtype=float))
    N = P.shape[0]
    if N < 2:
        raise ValueError("need at least two surface points")
    if P.shape[1] != n_dim:
        raise ValueError("point dimension does not match n_dim")
    _check_no_duplicates(P)
    K = _kernel_matrix(P, alpha, n_dim, self_energy)
    w = np.full(N, 1.0 / N)
    q = K @ w
    E = float(w @ q)
    trace = [E]
    gap = math.inf
    for _ in range(iters):
        s = int(np.argmin(q))
        support = np.flatnonzero(w > 0)
        a = int(support[np.argmax(q[support])])
        gap = 2.0 * (E - q[s])
        if gap <= tol * E:
            break
        away_gap = 2.0 * (q[a] - E)
        if gap >= away_gap:
            curv = K[s, s] - 2.0 * q[s] + E
            gamma = 1.0 if curv <= 0 else min(1.0, (E - q[s]) / curv)
            w *= 1.0 - gamma
            w[s] += gamma
            q = (1.0 - gamma) * q + gamma * K[:, s]
        else:
            gmax = w[a] / (1.0 - w[a]) if w[a] < 1 else math.inf
            curv = E - 2.0 * q[a] + K[a, a]
            gamma = gmax if curv <= 0 else min(gmax, (q[a] - E) / curv)
            w *= 1.0 + gamma
            w[a] -= gamma
            if gamma == gmax:
                w[a] = 0.0
            q = (1.0 + gamma) * q - gamma * K[:, a]
        w = np.clip(w, 0.0, None)
        E_new = float(w @ q)
        # exact line search cannot increase the energy; guard against round-off
        E = min(E_new, trace[-1])
        trace.append(E)
    else:
        s = int(np.argmin(q))
        gap = 2.0 * (E - q[s])
    gap = max(float(gap), 0.0)
    notes: list = []
    converged = gap <= tol * E
    if not converged:
        _warn(notes, f"Frank-Wolfe stopped after {iters} iterations with relative gap {gap / E:.2e}")
    cap = 1.0 / E
    cap_hi = 1.0 / max(E - gap, E * 1e-12)
    mu = DiscreteMeasure.normalized(P, w)
    est = Estimate(
        cap, cap_hi - cap, N, 0, 0.0, warnings=tuple(notes),
        extras={"energy": E, "gap": gap, "trace": trace, "converged": converged},
    )
    return est, mu


# ---------------------------------------------------------------------------
def hitting_probability(
    A: Domain,
    x,
    p: StableParams | None,
    n: int,
    cfg: SimConfig,
    method: str = "auto",
    escape_factor: float = 1000.0,
) -> Estimate:
    """Probability that the process from ``x`` (outside ``A``) hits ``A`` before ``cfg.max_time``.

    Brownian paths (``p`` None or ``alpha = 2``) use the exact space-time
    sphere walk.  With ``max_time = inf`` (d >= 3) paths that reach
    ``escape_factor`` times the size of ``A`` stop as non-hits; the possible
    return mass is reported in ``bias_bound``.  ``method="steps"`` (and every
    ``alpha < 2``) simulates discrete steps with common random numbers, which
    makes the estimate pathwise monotone in ``A``.  ``truncated_fraction``
    counts paths unresolved at ``max_time``: an upper bound on missed hits.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != A.dim:
        raise ValueError("start point dimension does not match the target")
    if p is not None and p.dim != A.dim:
        raise ValueError("process dimension does not match the target")
    if A.has_sdf and A.sdf(x[None])[0] < cfg.eps_shell:
        if A.sdf(x[None])[0] < -cfg.eps_shell:
            raise ValueError("start point inside the target")
        return Estimate(1.0, 0.0, n, cfg.seed, 0.0)
    gaussian = p is None or p.is_gaussian
    if method == "auto":
        method = "sphere" if gaussian and A.has_sdf else "steps"
    if method == "sphere":
        if not gaussian:
            raise ValueError("the sphere walk needs Brownian paths")
        speed = 1.0 if p is None else 2.0
        c, R = _bounding_ball(A)
        horizon = cfg.max_time
        esc = None
        if not math.isfinite(horizon):
            if A.dim < 3:
                raise ValueError("an infinite horizon needs d >= 3 (recurrent otherwise)")
            esc = escape_factor * max(R, np.linalg.norm(x - c))
        shifted = _Shifted(A, c)

        def run(rng, s, m):
            starts = np.broadcast_to(x - c, (m, A.dim)).copy()
            tau, escaped, unresolved = sphere_walk_hitting(shifted, starts, horizon, rng, cfg.eps_shell, speed, esc)
            return np.isfinite(tau), escaped, unresolved

        parts = map_chunks(run, n, cfg.seed, cfg.chunk_size, cfg.workers)
        hit = np.concatenate([q[0] for q in parts])
        escaped = np.concatenate([q[1] for q in parts])
        unresolved = np.concatenate([q[2] for q in parts])
        if math.isfinite(horizon):
            trunc = float(np.mean(~hit & ~escaped))
        else:
            trunc = float(unresolved.mean())
        bias = float(escaped.mean()) * (R / esc) ** (A.dim - 2) if esc else 0.0
        return Estimate.from_samples(hit.astype(float), cfg.seed, trunc, bias_bound=bias, extras={"method": method})
    if method != "steps":
        raise ValueError(f"unknown method {method!r}")
    if not math.isfinite(cfg.max_time):
        raise ValueError("step simulation needs a finite max_time")
    batch = sample_exits(Complement(A), x, n, cfg, process=p, crn=True)
    hit = ~batch.truncated
    return Estimate.from_samples(hit.astype(float), cfg.seed, float(batch.truncated.mean()), extras={"method": method})


class _Shifted(Domain):
    """``A - c``: lets escape radii be measured from the origin."""

    def __init__(self, A: Domain, c):
        super().__init__()
        self.A, self.c, self.dim, self.kind = A, np.asarray(c, float), A.dim, A.kind

    def contains(self, x):
        return self.A.contains(np.asarray(x) + self.c)

    def sdf(self, x):
        return self.A.sdf(np.asarray(x) + self.c)


# ---------------------------------------------------------------------------
def carleman_bound(profile, M: float, r0: float, x0: float, b: float, n_grid: int = 4001) -> float:
    """Upper bound for the harmonic measure of the far part of a channel.

    ``3 M / sqrt(2 pi r0 J)`` with ``J = integral_{x0}^{b} exp(2 pi integral_{x0}^{t} dx/l(x)) dt``,
    clamped to 1.  ``profile`` is a callable ``l(x)`` or a pair ``(xs, ls)``
    of samples covering ``[x0, b]``.  The inner integral is a cumulative
    trapezoid; the outer one is exact for the piecewise-linear inner integral.
    """
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    if not M > 0:
        raise ValueError("M must be positive")
    if b < x0:
        raise ValueError("need b >= x0")
    if b == x0:
        return 1.0
    if callable(profile):
        xs = np.linspace(x0, b, n_grid)
        ls = np.asarray(profile(xs), dtype=float) * np.ones_like(xs)
    else:
        xs_all, ls_all = (np.asarray(v, dtype=float) for v in profile)
        if xs_all[0] > x0 + 1e-12 or xs_all[-1] < b - 1e-12:
            raise ValueError("profile samples must cover [x0, b]")
        xs = np.unique(np.clip(np.r_[x0, xs_all[(xs_all > x0) & (xs_all < b)], b], x0, b))
        ls = np.interp(xs, xs_all, ls_all)
    if np.any(ls <= 0):
        raise ValueError("channel width must be positive")
    if np.any(ls > M * (1 + 1e-12)):
        raise ValueError("channel width exceeds M")
    inner = 2.0 * np.pi * np.concatenate([[0.0], np.cumsum(np.diff(xs) * 0.5 * (1 / ls[1:] + 1 / ls[:-1]))])
    h = np.diff(xs)
    a, c = inner[:-1], inner[1:]
    dlt = c - a
    # integral of exp over [t_k, t_k+1] with a linear exponent
    small = np.abs(dlt) < 1e-8
    with np.errstate(invalid="ignore", divide="ignore"):
        piece = np.where(small, h * np.exp(a) * (1 + dlt / 2), h * np.exp(a) * np.expm1(dlt) / np.where(small, 1, dlt))
    J = float(piece.sum())
    if J <= 0:
        return 1.0
    return float(min(1.0, 3.0 * M / math.sqrt(2.0 * math.pi * r0 * J)))


# ---------------------------------------------------------------------------
# Wiener sausage
def _shape_radius(shape) -> float:
    if isinstance(shape, (int, float, np.floating)):
        return float(shape)
    if isinstance(shape, Ball):
        return float(np.linalg.norm(shape.center) + shape.radius)
    if isinstance(shape, Rectangle):
        return float(np.max(np.linalg.norm(np.stack([shape.lo, shape.hi]), axis=1)) + np.linalg.norm(shape.hi - shape.lo) / 2)
    raise TypeError("sausage shapes must be a radius, a Ball or a Rectangle")


def _shape_runs(shape_family, times):
    """Split sample indices into runs of constant shape: list of (shape, first, last)."""
    if not callable(shape_family):
        return [(shape_family, 0, len(times) - 1)]
    shapes = [shape_family(t) for t in times]
    runs = []
    start = 0
    for k in range(1, len(shapes) + 1):
        if k == len(shapes) or repr(shapes[k]) != repr(shapes[start]):
            runs.append((shapes[start], start, k - 1 if k == len(shapes) else k))
            start = k
    return runs


def _family_radius(shape_family, t):
    if callable(shape_family):
        return max(_shape_radius(shape_family(s)) for s in np.linspace(0, t, 33))
    return _shape_radius(shape_family)


def sausage_volumes(
    shape_families: Sequence,
    t: float,
    dt: float,
    n_paths: int,
    cfg: SimConfig,
    grid_cells: int = 256,
    cell: float | None = None,
    dim: int = 3,
) -> np.ndarray:
    """Sausage volumes of several shape families along common Brownian paths.

    Returns an array ``(n_paths, len(shape_families))``.  The cell size is
    ``2 (rho + 4 sqrt(t)) / grid_cells`` (``rho`` the largest shape radius)
    unless given; each path gets a grid of that cell size covering it.
    """
    if t < 0 or dt <= 0:
        raise ValueError("need t >= 0 and dt > 0")
    if t > cfg.max_time:
        raise ValueError("t exceeds max_time")
    rho = max(_family_radius(f, t) for f in shape_families)
    if cell is None:
        cell = 2.0 * (max(rho, 1e-12) + 4.0 * math.sqrt(t)) / grid_cells

    def run(rng, s, m):
        out = np.zeros((m, len(shape_families)))
        for i in range(m):
            path = bm_path(np.zeros(dim), t, dt, rng) if t > 0 else np.zeros((1, dim))
            times = np.minimum(np.arange(path.shape[0]) * dt, t)
            lo = path.min(axis=0) - rho - 2 * cell
            hi = path.max(axis=0) + rho + 2 * cell
            shape = np.ceil((hi - lo) / cell).astype(int)
            grid = RasterSet.empty(lo, cell, tuple(shape))
            for j, fam in enumerate(shape_families):
                mask = np.zeros(grid.shape, dtype=bool)
                for shp, a, bnd in _shape_runs(fam, times):
                    mask |= sausage_mask(path[a : bnd + 1], shp, grid).mask
                out[i, j] = mask.sum() * cell**dim
        return out

    return np.vstack(map_chunks(run, n_paths, cfg.seed, max(1, min(cfg.chunk_size, 16)), cfg.workers))


def sausage_expectation(
    shape_family, t: float, dt: float, n_paths: int, cfg: SimConfig, grid_cells: int = 256, cell: float | None = None
) -> Estimate:
    """Expected volume of ``union_{s <= t} (B_s + A_s)`` for standard 3D Brownian motion.

    Paths are polylines through samples ``dt`` apart, which misses excursions
    between samples: the estimate is biased low by ``O(sqrt(dt))``.  Compare
    shape families on common paths (:func:`sausage_volumes`) to cancel most
    of it.
    """
    v = sausage_volumes([shape_family], t, dt, n_paths, cfg, grid_cells, cell)[:, 0]
    return Estimate.from_samples(v, cfg.seed, extras={"cell": cell})


# ---------------------------------------------------------------------------
# output records
def to_json(records, fh=None) -> str:
    """Serialize records (dicts or Estimates) as JSON lines."""
    lines = []
    for r in records if isinstance(records, (list, tuple)) else [records]:
        rec = r.to_record() if isinstance(r, Estimate) else r
        lines.append(json.dumps(rec, sort_keys=True, default=_json_default))
    text = "\n".join(lines) + "\n"
    if fh is not None:
        fh.write(text)
    return text


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


CSV_FIELDS = ["op", "params", "mean", "stderr", "n", "seed", "truncated_fraction"]


def write_csv(records: Iterable[dict], fh, header: bool = True) -> None:
    """Append records as CSV rows (params JSON-encoded in one column)."""
    w = csv.writer(fh)
    if header:
        w.writerow(CSV_FIELDS)
    for r in records:
        rec = r.to_record() if isinstance(r, Estimate) else r
        w.writerow([
            json.dumps(rec.get(k), sort_keys=True, default=_json_default) if k == "params" else rec.get(k)
            for k in CSV_FIELDS
        ])
