"""Seeded statistical checks of isoperimetric inequalities.

Each check estimates both sides of an inequality ``lhs <= rhs`` and returns a
:class:`Verdict` with ``margin = rhs - lhs``.  Stochastic sides share random
numbers where the coupling allows, and the margin's standard error comes from
per-path differences.  A margin is a violation only below ``-z_crit`` standard
errors.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .estimators import (
    Estimate,
    _family_radius,
    capacity_energy,
    carleman_bound,
    harmonic_measure,
    kac_from_exit_times,
    kac_influence,
    auto_kac_grid,
    sausage_volumes,
)
from .geometry.domains import (
    Ball,
    BallIntersection,
    BallUnion,
    Domain,
    RasterDomain,
    Rectangle,
    SlitDisk,
    channel,
    rasterize,
    schwarz_ball,
)
from .geometry.raster import Hyperplane, RasterSet, ball_radius_for_volume, volume as raster_volume
from .stochastic import SimConfig, StableParams, _bessel_zeros, sample_exits, walk_on_spheres_batch
from .symmetrize import SampledFunction1D, circular, decreasing_rearrangement, polarize, rearrangement_order, steiner

__all__ = [
    "Z_CRIT",
    "Verdict",
    "make_verdict",
    "check_bll_discrete",
    "check_bll_random",
    "random_bll_instance",
    "check_survival_isoperimetric",
    "check_polarization_exit",
    "check_capacity_isoperimetric",
    "surface_points",
    "check_faber_krahn",
    "check_dubinin",
    "check_carleman",
    "check_eigen_brunn_minkowski",
    "check_wiener_sausage",
    "check_star_dominance",
    "CHECKS",
    "run_check",
    "run_suite",
    "write_summary_csv",
]

Z_CRIT = 4.0
BLL_MAX_FACTORS = 3
BLL_MAX_GRID = 21


# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Verdict:
    theorem: str
    lhs: float
    rhs: float
    margin: float
    sigma: float
    z: float
    status: str
    seed: int = 0
    params: dict = field(default_factory=dict)
    lhs_stderr: float = 0.0
    rhs_stderr: float = 0.0
    exact: bool = False
    details: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {
            "theorem": self.theorem,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "lhs_stderr": self.lhs_stderr,
            "rhs_stderr": self.rhs_stderr,
            "margin": self.margin,
            "sigma": self.sigma,
            "z": self.z,
            "status": self.status,
            "exact": self.exact,
            "seed": self.seed,
            "params": self.params,
        }
        if self.details:
            rec["details"] = self.details
        return _jsonable(rec)


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if isinstance(o, (np.bool_,)):
        return bool(o)
    return o


def make_verdict(
    theorem: str,
    lhs: float,
    rhs: float,
    sigma: float,
    seed: int = 0,
    params: dict | None = None,
    lhs_stderr: float = 0.0,
    rhs_stderr: float = 0.0,
    resolution: float | None = None,
    z_crit: float = Z_CRIT,
    exact: bool = False,
    details: dict | None = None,
) -> Verdict:
    """Classify ``margin = rhs - lhs``.

    Exact comparisons (``sigma = 0``) are violations iff the margin is
    negative.  Otherwise ``z = margin / sigma``: violation iff ``z < -z_crit``,
    inconclusive iff ``|z| < 1`` and ``|margin| < resolution`` (default
    ``2 sigma``), consistent else.
    """
    lhs, rhs = float(lhs), float(rhs)
    margin = rhs - lhs
    if exact or sigma == 0:
        z = math.inf if margin > 0 else (-math.inf if margin < 0 else 0.0)
        status = "violation" if margin < 0 else "consistent"
        sigma = 0.0
    else:
        z = margin / sigma
        res = 2.0 * sigma if resolution is None else resolution
        if z < -z_crit:
            status = "violation"
        elif abs(z) < 1 and abs(margin) < res:
            status = "inconclusive"
        else:
            status = "consistent"
    return Verdict(theorem, lhs, rhs, margin, float(sigma), float(z), status, int(seed), dict(params or {}),
                   float(lhs_stderr), float(rhs_stderr), bool(exact or sigma == 0), dict(details or {}))


def _paired_sigma(lhs_samples, rhs_samples) -> float:
    d = np.asarray(rhs_samples, dtype=float) - np.asarray(lhs_samples, dtype=float)
    return float(np.std(d, ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0


def _se(samples) -> float:
    v = np.asarray(samples, dtype=float)
    return float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0


def _arm_seed(cfg: SimConfig, paired: bool, arm: int) -> SimConfig:
    """Same seed on every arm when paired; otherwise distinct derived seeds."""
    if paired or arm == 0:
        return cfg
    return cfg.with_(seed=int(np.random.SeedSequence([cfg.seed, arm]).generate_state(1)[0]))


# ---------------------------------------------------------------------------
# discrete BLL (exhaustive)
def _f_at(values: np.ndarray, k) -> np.ndarray:
    R = values.size // 2
    k = np.asarray(k)
    out = np.zeros(k.shape)
    ok = np.abs(k) <= R
    out[ok] = values[k[ok] + R]
    return out


def _chain_sum(fs, A, z0) -> float:
    A = np.sort(np.asarray(A, dtype=np.int64))
    m = len(fs)
    Z = np.meshgrid(*([A] * m), indexing="ij")
    prod = np.ones(Z[0].shape)
    prev = np.full(Z[0].shape, int(z0))
    for i in range(m):
        prod = prod * _f_at(fs[i], Z[i] - prev)
        prev = Z[i]
    return math.fsum(prod.ravel().tolist())


def _centered_set(k: int) -> np.ndarray:
    grid = np.arange(-k, k + 1)
    return np.sort(grid[rearrangement_order(grid)[:k]])


def check_bll_discrete(fs: Sequence, A: Sequence[int], z0: int = 0, params: dict | None = None) -> Verdict:
    """Exhaustive chain-sum rearrangement inequality on the integers.

    ``fs`` are value arrays of odd length, centered at offset 0; ``A`` is a set
    of integer positions; the chain starts at ``z0`` on the left side and at 0
    on the rearranged side.  Both sides are summed exactly over all chains.
    """
    fs = [np.asarray(f, dtype=float).reshape(-1) for f in fs]
    A = np.unique(np.asarray(A, dtype=np.int64))
    if not 1 <= len(fs) <= BLL_MAX_FACTORS:
        raise ValueError(f"need 1 to {BLL_MAX_FACTORS} factors")
    if any(f.size % 2 == 0 for f in fs):
        raise ValueError("factor arrays must have odd length (centered at 0)")
    if any(f.size > 2 * BLL_MAX_GRID - 1 for f in fs):
        raise ValueError(f"factor arrays longer than {2 * BLL_MAX_GRID - 1}")
    if A.size == 0 or A.size > BLL_MAX_GRID or A.max() - A.min() >= BLL_MAX_GRID:
        raise ValueError(f"A must be a nonempty subset of {BLL_MAX_GRID} consecutive integers")
    if any(np.any(f < 0) for f in fs):
        raise ValueError("factors must be nonnegative")
    star = []
    for f in fs:
        R = f.size // 2
        g = SampledFunction1D(np.arange(-R, R + 1, dtype=float), f)
        star.append(decreasing_rearrangement(g).values)
    lhs = _chain_sum(fs, A, z0)
    rhs = _chain_sum(star, _centered_set(A.size), 0)
    p = {"m": len(fs), "size_A": int(A.size), "z0": int(z0), **(params or {})}
    return make_verdict("bll-discrete", lhs, rhs, 0.0, params=p, exact=True)


def random_bll_instance(rng: np.random.Generator, m: int = 2) -> dict:
    """Random nonnegative factors (with zeros), a random subset ``A`` and a start ``z0``."""
    fs = []
    for _ in range(m):
        R = int(rng.integers(1, 11))
        v = rng.random(2 * R + 1) * (rng.random(2 * R + 1) < 0.7)
        fs.append(v)
    N = int(rng.integers(3, BLL_MAX_GRID + 1))
    A = np.flatnonzero(rng.random(N) < 0.5) - N // 2
    if A.size == 0:
        A = np.array([int(rng.integers(0, N)) - N // 2])
    z0 = int(rng.integers(-(N // 2), N // 2 + 1))
    return {"fs": fs, "A": A, "z0": z0}


# ---------------------------------------------------------------------------
# survival under Schwarz symmetrization
def _default_starts(D: Domain) -> np.ndarray:
    lo, hi = D.bbox()
    c = 0.5 * (lo + hi)
    return c[None, :]


def check_survival_isoperimetric(
    D: Domain,
    t: float,
    p: StableParams | None,
    n: int,
    cfg: SimConfig,
    z_grid=None,
    paired: bool = True,
) -> Verdict:
    """``sup_z P_z(T_D > t) <= P_0(T_{D*} > t)`` with ``D*`` the centered equal-volume ball.

    The sup runs over ``z_grid`` (default: the bounding-box center).  ``p``
    selects the process (``None``: Brownian motion with generator ``Delta/2``).
    """
    if t > cfg.max_time:
        raise ValueError("t exceeds max_time")
    Z = _default_starts(D) if z_grid is None else np.atleast_2d(np.asarray(z_grid, dtype=float))
    if not np.all(D.contains(Z)):
        raise ValueError("every start in z_grid must lie in D")
    star = schwarz_ball(D)
    rcfg = _arm_seed(cfg, paired, 1)
    rb = sample_exits(star, np.zeros(D.dim), n, rcfg, process=p, crn=True, horizon=t)
    r_ind = rb.truncated.astype(float)
    best = None
    for z in Z:
        lb = sample_exits(D, z, n, cfg, process=p, crn=True, horizon=t)
        ind = lb.truncated.astype(float)
        if best is None or ind.mean() > best[1].mean():
            best = (z, ind)
    z_best, l_ind = best
    sigma = _paired_sigma(l_ind, r_ind) if paired else math.hypot(_se(l_ind), _se(r_ind))
    params = {"t": t, "alpha": 2.0 if p is None else p.alpha, "process": "bm" if p is None else "stable",
              "n": n, "z_grid": Z.tolist(), "paired": paired, "domain": D.kind, "ball_radius": star.radius}
    return make_verdict("survival-isoperimetric", l_ind.mean(), r_ind.mean(), sigma, cfg.seed, params,
                        _se(l_ind), _se(r_ind), details={"argmax_z": z_best.tolist()})


# ---------------------------------------------------------------------------
# polarization and exit probabilities
def polarized_point(D: RasterSet, H: Hyperplane, x) -> np.ndarray:
    """Image of ``x`` under the polarization of ``D``: reflected iff it lies in ``(D \\ sigma D)`` on the negative side."""
    x = np.asarray(x, dtype=float)
    if H.side(x[None])[0] < 0:
        sx = H.reflect(x[None])
        if not D.lookup(sx)[0]:
            return sx[0]
    return x.copy()


def check_polarization_exit(
    D: RasterSet,
    H: Hyperplane,
    x,
    t: float,
    n: int,
    cfg: SimConfig,
    target: RasterSet | None = None,
    paired: bool = True,
) -> Verdict:
    """``p_D(t, x, A) <= p_{D^sigma}(t, x^sigma, A^sigma)`` on raster sets.

    With a ``target`` ``A`` (cells outside ``D``) the event is: the path leaves
    ``D`` by time ``t`` and the first cell it enters outside ``D`` is in ``A``.
    Without a target the event is survival up to ``t``.  The start must lie
    on the closed positive side of ``H``.
    """
    x = np.asarray(x, dtype=float)
    if not D.lookup(x[None])[0]:
        raise ValueError("x must lie in D")
    if H.side(x[None])[0] < 0:
        raise ValueError("x must lie on the positive side of H")
    Ds = polarize(D, H)
    xs = polarized_point(D, H, x)
    As = None
    if target is not None:
        if not target.same_grid(D):
            raise ValueError("target must share the grid of D")
        if np.any(target.mask & D.mask):
            raise ValueError("target must lie outside D")
        As = polarize(target, H)
        if np.any(As.mask & Ds.mask):
            raise ValueError("polarized target meets the polarized domain")

    def event(R: RasterSet, start, A: RasterSet | None, c: SimConfig):
        b = sample_exits(RasterDomain(R), start, n, c, crn=True, horizon=t)
        if A is None:
            return b.truncated.astype(float)
        return (~b.truncated & A.lookup(b.exit_point)).astype(float)

    l = event(D, x, target, cfg)
    r = event(Ds, xs, As, _arm_seed(cfg, paired, 1))
    sigma = _paired_sigma(l, r) if paired else math.hypot(_se(l), _se(r))
    params = {"t": t, "n": n, "x": x.tolist(), "x_sigma": xs.tolist(), "plane_normal": H.normal.tolist(),
              "plane_offset": H.offset, "event": "survival" if target is None else "exit-into-target", "paired": paired}
    return make_verdict("polarization-exit", l.mean(), r.mean(), sigma, cfg.seed, params, _se(l), _se(r))


# ---------------------------------------------------------------------------
# capacities under Steiner and Schwarz symmetrization
def surface_points(K: RasterSet) -> np.ndarray:
    """Centers of set cells with at least one empty face neighbor."""
    m = np.pad(K.mask, 1, constant_values=False)
    interior = m.copy()
    for ax in range(K.dim):
        interior &= np.roll(m, 1, axis=ax) & np.roll(m, -1, axis=ax)
    edge = (m & ~interior)[(slice(1, -1),) * K.dim]
    idx = np.argwhere(edge)
    return K.origin + (idx + 0.5) * K.cell


def _ball_raster_like(K: RasterSet) -> RasterSet:
    r = ball_radius_for_volume(raster_volume(K), K.dim)
    n = int(np.ceil(2 * r / K.cell)) + 4
    grid = RasterSet.empty(np.full(K.dim, -n * K.cell / 2), K.cell, (n,) * K.dim)
    return rasterize(Ball(r, np.zeros(K.dim)), grid=grid)


def _capacity(K: RasterSet, max_points: int, seed: int, iters: int) -> Estimate:
    P = surface_points(K)
    if P.shape[0] < 2:
        raise ValueError("surface extraction failed: fewer than two boundary cells")
    if P.shape[0] > max_points:
        keep = np.sort(np.random.default_rng(seed).choice(P.shape[0], max_points, replace=False))
        P = P[keep]
    est, _ = capacity_energy(P, 2.0, K.dim, iters=iters)
    return est


def check_capacity_isoperimetric(
    K: RasterSet,
    axis: int = 0,
    max_points: int = 2500,
    rel_tol: float = 0.01,
    iters: int = 2000,
    seed: int = 0,
) -> list[Verdict]:
    """``Cap(K*) <= Cap(St K) <= Cap(K)`` for a 3D raster set ``K``.

    Capacities are energy minima over boundary-cell point clouds.  Each
    margin's sigma adds ``rel_tol`` times the larger capacity to the solver
    error, as an allowance for the surface discretization.
    """
    if K.dim != 3:
        raise ValueError("capacity checks need a 3D raster")
    if K.count == 0:
        raise ValueError("empty set")
    St = steiner(K, axis)
    Ks = _ball_raster_like(K)
    cK = _capacity(K, max_points, seed, iters)
    cS = _capacity(St, max_points, seed, iters)
    cB = _capacity(Ks, max_points, seed, iters)
    out = []
    for name, lo, hi in (("capacity-steiner", cS, cK), ("capacity-schwarz", cB, cS)):
        sigma = math.hypot(lo.stderr, hi.stderr) + rel_tol * max(lo.mean, hi.mean)
        out.append(make_verdict(name, lo.mean, hi.mean, sigma, seed,
                                {"axis": axis, "max_points": max_points, "rel_tol": rel_tol, "cells": K.count},
                                lo.stderr, hi.stderr,
                                details={"capacities": {"K": cK.mean, "steiner": cS.mean, "schwarz": cB.mean}}))
    return out


# ---------------------------------------------------------------------------
# eigenvalues
def ball_eigenvalue(radius: float, dim: int) -> float:
    """First Dirichlet eigenvalue of ``-Delta/2`` on a ball."""
    j = _bessel_zeros(dim / 2.0 - 1.0, 1)[0]
    return float(j * j / (2.0 * radius * radius))


def _kac_arm(D: Domain, x, n: int, cfg: SimConfig, horizon: float, t_grid=None):
    b = sample_exits(D, x, n, cfg, crn=True, horizon=horizon)
    T = np.where(b.truncated, np.inf, b.exit_time)
    grid = auto_kac_grid(T, horizon) if t_grid is None else np.asarray(t_grid, dtype=float)
    est = kac_from_exit_times(T, grid, cfg.seed, keep_paths=True)
    psi = kac_influence(T, est.extras["fit_grid"], est.extras["fit_survival"], n)
    return est, psi, T


def _horizon(cfg: SimConfig, lam_low: float, decay: float = 8.0) -> float:
    return min(cfg.max_time, decay / lam_low)


def check_faber_krahn(
    D: Domain,
    n: int,
    cfg: SimConfig,
    x=None,
    t_grid=None,
    paired: bool = True,
) -> Verdict:
    """``lambda_1(D*) <= lambda_1(D)`` from Kac fits on common paths.

    The paths run until the ball's survival has decayed by ``e^-8`` (capped at
    ``max_time``); each arm's fit window then follows its own survival curve
    unless ``t_grid`` is given.
    """
    star = schwarz_ball(D)
    x = _default_starts(D)[0] if x is None else np.asarray(x, dtype=float)
    H = _horizon(cfg, ball_eigenvalue(star.radius, D.dim))
    eD, psiD, _ = _kac_arm(D, x, n, cfg, H, t_grid)
    eS, psiS, _ = _kac_arm(star, np.zeros(D.dim), n, _arm_seed(cfg, paired, 1), H, t_grid)
    sigma = _paired_sigma(psiS, psiD) if paired else math.hypot(eD.stderr, eS.stderr)
    params = {"n": n, "domain": D.kind, "x": x.tolist(), "horizon": H, "paired": paired,
              "ball_radius": star.radius, "ball_eigenvalue_exact": ball_eigenvalue(star.radius, D.dim)}
    return make_verdict("faber-krahn", eS.mean, eD.mean, sigma, cfg.seed, params, eS.stderr, eD.stderr,
                        details={"t_grid_domain": eD.extras["t_grid"], "t_grid_ball": eS.extras["t_grid"]})


def _lens_center(B: Ball, D: Ball) -> np.ndarray:
    d = D.center - B.center
    L = float(np.linalg.norm(d))
    if L >= B.radius + D.radius:
        raise ValueError("the balls do not intersect")
    if L <= abs(B.radius - D.radius):
        small = B if B.radius <= D.radius else D
        return small.center.copy()
    u = d / L
    lo = max(-B.radius, L - D.radius)
    hi = min(B.radius, L + D.radius)
    return B.center + 0.5 * (lo + hi) * u


def check_eigen_brunn_minkowski(B: Ball, D: Ball, n: int, cfg: SimConfig, t: float | None = None,
                                paired: bool = True) -> list[Verdict]:
    """Three checks on a pair of balls, all from common paths.

    ``lambda(1/2 (B + D)) <= (lambda(B) + lambda(D)) / 2``,
    ``lambda(B cap D) <= lambda(B) + lambda(D)`` and, at the centers ``x``, ``y``
    and time ``t``, ``P_(x+y)/2(T_C > t) >= sqrt(P_x(T_B > t) P_y(T_D > t))``
    with ``C = 1/2 (B + D)``.

    The intersection bound is only guaranteed for concentric balls; for
    offset pairs the lens can be arbitrarily thin and the check reports a
    violation.
    """
    if B.dim != D.dim:
        raise ValueError("balls of different dimension")
    mid = _lens_center(B, D)  # raises for disjoint balls
    C = Ball(0.5 * (B.radius + D.radius), 0.5 * (B.center + D.center))
    I = BallIntersection([B.center, D.center], [B.radius, D.radius])
    dim = B.dim
    # the lens contains a ball of radius r_in, so its eigenvalue is at most that ball's
    L = float(np.linalg.norm(D.center - B.center))
    r_in = max(min(B.radius, D.radius, 0.5 * (B.radius + D.radius - L)), 1e-9)
    lam_low = min(ball_eigenvalue(B.radius, dim), ball_eigenvalue(D.radius, dim))
    H = _horizon(cfg, lam_low)
    arms = {}
    for k, (name, dom, x) in enumerate((("B", B, B.center), ("D", D, D.center), ("C", C, C.center), ("I", I, mid))):
        arms[name] = _kac_arm(dom, x, n, _arm_seed(cfg, paired, k), H)
    lam = {k: v[0].mean for k, v in arms.items()}
    se = {k: v[0].stderr for k, v in arms.items()}
    psi = {k: v[1] for k, v in arms.items()}
    base = {"n": n, "paired": paired, "radii": [B.radius, D.radius], "centers": [B.center.tolist(), D.center.tolist()],
            "horizon": H, "lens_inradius": r_in}

    def sig(infl, *names):
        if paired:
            return float(np.std(infl, ddof=1) / math.sqrt(n))
        return math.sqrt(sum((w * se[k]) ** 2 for w, k in names))

    out = []
    rhs = 0.5 * (lam["B"] + lam["D"])
    out.append(make_verdict(
        "eigen-brunn-minkowski", lam["C"], rhs,
        sig(0.5 * psi["B"] + 0.5 * psi["D"] - psi["C"], (0.5, "B"), (0.5, "D"), (1.0, "C")),
        cfg.seed, base, se["C"], 0.5 * math.hypot(se["B"], se["D"]),
        details={"eigenvalues": lam, "exact_C": ball_eigenvalue(C.radius, dim)}))
    out.append(make_verdict(
        "eigen-intersection", lam["I"], lam["B"] + lam["D"],
        sig(psi["B"] + psi["D"] - psi["I"], (1.0, "B"), (1.0, "D"), (1.0, "I")),
        cfg.seed, base, se["I"], math.hypot(se["B"], se["D"]), details={"eigenvalues": lam}))

    t = 1.0 / ball_eigenvalue(C.radius, dim) if t is None else float(t)
    if t > H:
        raise ValueError("t exceeds the simulated horizon")
    ind = {k: (arms[k][2] > t).astype(float) for k in ("B", "D", "C")}
    P = {k: v.mean() for k, v in ind.items()}
    geo = math.sqrt(P["B"] * P["D"])
    if paired:
        infl = ind["C"] - 0.5 * geo * (ind["B"] / P["B"] + ind["D"] / P["D"])
        s = float(np.std(infl, ddof=1) / math.sqrt(n))
    else:
        s = math.sqrt(_se(ind["C"]) ** 2 + (0.5 * geo) ** 2 * ((_se(ind["B"]) / P["B"]) ** 2 + (_se(ind["D"]) / P["D"]) ** 2))
    out.append(make_verdict("survival-interpolation", geo, P["C"], s, cfg.seed, {**base, "t": t, "weight": 0.5},
                            0.0, _se(ind["C"]), details={"survival": P}))
    return out


# ---------------------------------------------------------------------------
# slit disks
def check_dubinin(alphas: Sequence[float], a: float, n: int, cfg: SimConfig, paired: bool = True) -> Verdict:
    """Harmonic measure of the slits seen from 0 is largest for equally spaced slits."""
    k = len(alphas)
    if not 2 <= k <= 6:
        raise ValueError("need 2 to 6 slits")
    if not 0 < a < 1:
        raise ValueError("need 0 < a < 1")
    l = harmonic_measure(SlitDisk(alphas, a), "slits", np.zeros(2), n, cfg)
    r = harmonic_measure(SlitDisk.equally_spaced(k, a), "slits", np.zeros(2), n, _arm_seed(cfg, paired, 1))
    sigma = math.hypot(l.stderr, r.stderr)
    params = {"alphas": list(map(float, alphas)), "a": a, "n": n, "paired": paired, "method": "walk-on-spheres"}
    return make_verdict("dubinin", l.mean, r.mean, sigma, cfg.seed, params, l.stderr, r.stderr)


# ---------------------------------------------------------------------------
# channels
def check_carleman(
    profile: Callable,
    M: float,
    r0: float,
    x0: float,
    b: float,
    n: int,
    cfg: SimConfig,
    x_start: float | None = None,
    x_end: float | None = None,
    vertices: int = 200,
) -> Verdict:
    """Harmonic measure of the far part ``{x >= b}`` of a channel against its width bound.

    The channel ``{x_start < x < x_end, |y| < l(x)/2}`` is closed by a wall at
    ``x_end``; the wall counts as far boundary, which can only raise the
    simulated side.  Constant profiles use an exact rectangle.
    """
    x_start = x0 - M if x_start is None else x_start
    x_end = b + 2.0 * M if x_end is None else x_end
    if not x_start < x0 <= b < x_end:
        raise ValueError("need x_start < x0 <= b < x_end")
    xs = np.linspace(x_start, x_end, 2001)
    ls = np.asarray(profile(xs), dtype=float) * np.ones_like(xs)
    if np.any(ls <= 0):
        raise ValueError("channel width must be positive")
    if np.any(ls > M * (1 + 1e-12)):
        raise ValueError("channel width exceeds M")
    if np.ptp(ls) == 0:
        D = Rectangle([x_start, -ls[0] / 2], [x_end, ls[0] / 2])
    else:
        D = channel(profile, x_start, x_end, n=vertices)
    z0 = np.array([x0, 0.0])
    if D.sdf(z0[None])[0] > -r0 * (1 - 1e-9):
        raise ValueError("the disk B(z0, r0) must lie in the channel")
    far = lambda y: y[:, 0] >= b - 1e-9
    l = harmonic_measure(D, far, z0, n, cfg)
    bound = carleman_bound(profile, M, r0, x0, b)
    params = {"M": M, "r0": r0, "x0": x0, "b": b, "n": n, "x_start": x_start, "x_end": x_end, "domain": D.kind}
    return make_verdict("carleman", l.mean, bound, l.stderr, cfg.seed, params, l.stderr, 0.0)


# ---------------------------------------------------------------------------
# Wiener sausage
def _shape_volume_area(shape) -> tuple[float, float]:
    if isinstance(shape, (int, float, np.floating)):
        r = float(shape)
        return 4.0 / 3.0 * math.pi * r**3, 4.0 * math.pi * r * r
    if isinstance(shape, Ball):
        return shape.volume(), 4.0 * math.pi * shape.radius**2
    if isinstance(shape, Rectangle):
        a, b, c = shape.hi - shape.lo
        return float(a * b * c), float(2 * (a * b + b * c + c * a))
    raise TypeError("sausage shapes must be a radius, a Ball or a Rectangle")


def check_wiener_sausage(shape_family, t: float, dt: float, n_paths: int, cfg: SimConfig,
                         grid_cells: int = 128, paired: bool = True) -> Verdict:
    """Sausage of ``A_s`` versus the sausage of equal-volume balls, on common paths.

    ``shape_family`` is a shape (radius, :class:`Ball` or 3D :class:`Rectangle`)
    or a callable ``s -> shape``.  The raster resolution (cell times the larger
    surface area, halved) enters sigma as a systematic allowance.
    """
    if callable(shape_family):
        ball_family = lambda s: ball_radius_for_volume(_shape_volume_area(shape_family(s))[0], 3)
        probe = [shape_family(s) for s in np.linspace(0, t, 9)]
    else:
        r = ball_radius_for_volume(_shape_volume_area(shape_family)[0], 3)
        ball_family = r
        probe = [shape_family]
    area = max(max(_shape_volume_area(s)[1] for s in probe),
               4 * math.pi * ball_radius_for_volume(max(_shape_volume_area(s)[0] for s in probe), 3) ** 2)
    rho = max(_family_radius(shape_family, t), _family_radius(ball_family, t))
    cell = 2.0 * (max(rho, 1e-12) + 4.0 * math.sqrt(t)) / grid_cells
    if paired:
        V = sausage_volumes([shape_family, ball_family], t, dt, n_paths, cfg, cell=cell)
        vs, vb = V[:, 0], V[:, 1]
        stat = _paired_sigma(vb, vs)
    else:
        vs = sausage_volumes([shape_family], t, dt, n_paths, cfg, cell=cell)[:, 0]
        vb = sausage_volumes([ball_family], t, dt, n_paths, _arm_seed(cfg, False, 1), cell=cell)[:, 0]
        stat = math.hypot(_se(vs), _se(vb))
    resolution = 0.5 * cell * area
    sigma = math.hypot(stat, resolution / 2)
    params = {"t": t, "dt": dt, "n_paths": n_paths, "grid_cells": grid_cells, "cell": cell, "paired": paired}
    return make_verdict("wiener-sausage", vb.mean(), vs.mean(), sigma, cfg.seed, params, _se(vb), _se(vs),
                        resolution=max(resolution, 2 * sigma))


# ---------------------------------------------------------------------------
# circular symmetrization and harmonic measure of an outer arc
def _outer_arc(R: float, tol: float):
    return lambda y: np.linalg.norm(y, axis=1) >= R - tol


def check_star_dominance(
    D: Domain | RasterSet,
    r: float,
    n: int,
    cfg: SimConfig,
    circ: Domain | None = None,
    R: float = 1.0,
    cells: int = 256,
    n_theta: int = 64,
    arc_D=None,
    arc_C=None,
) -> list[Verdict]:
    """Harmonic measure of the outer arc in ``D`` versus its circular symmetral.

    ``u(z)`` is the probability of leaving ``D`` through the outer arc (the
    part of the boundary on ``|z| = R``), ``v`` the same for ``Cir(D)``; both
    are estimated at ``n_theta`` points of ``|z| = r`` (zero off the domain).
    Three verdicts: ``sup u <= sup v``, the star functions ``u* <= v*`` (worst
    grid point), and ``mean u <= mean v``.

    Without ``circ`` both domains are rasters on ``cells`` cells per side; the
    outer arc is then every exit within three cells of ``|z| = R``.
    """
    if circ is None:
        if isinstance(D, RasterSet):
            raster = D
        else:
            raster = rasterize(D, grid=RasterSet.centered_grid(R, cells, 2))
        Dd, Cd = RasterDomain(raster), RasterDomain(circular(raster))
        tol = 3.0 * raster.cell
    else:
        Dd, Cd = D, circ
        tol = 1e-6
    arc_D = _outer_arc(R, tol) if arc_D is None else arc_D
    arc_C = _outer_arc(R, tol) if arc_C is None else arc_C
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    pts = r * np.column_stack([np.cos(th), np.sin(th)])

    def field_on(dom, arc):
        mean = np.zeros(n_theta)
        se = np.zeros(n_theta)
        inside = dom.contains(pts)
        for k in np.flatnonzero(inside):
            b = walk_on_spheres_batch(dom, pts[k], n, cfg.with_(seed=cfg.seed + k))
            hit = (~b.truncated & dom.label_mask(arc, b.exit_point)).astype(float)
            mean[k], se[k] = hit.mean(), _se(hit)
        return mean, se

    u, su = field_on(Dd, arc_D)
    v, sv = field_on(Cd, arc_C)
    base = {"r": r, "n": n, "n_theta": n_theta, "R": R, "raster": circ is None, "seed": cfg.seed}
    out = []
    ku, kv = int(np.argmax(u)), int(np.argmax(v))
    out.append(make_verdict("star-dominance-sup", u[ku], v[kv], math.hypot(su[ku], sv[kv]), cfg.seed, base,
                            su[ku], sv[kv], details={"u": u, "v": v}))
    h = 2 * np.pi / n_theta
    ou, ov = np.argsort(-u, kind="stable"), np.argsort(-v, kind="stable")
    us, vs = np.cumsum(u[ou]) * h, np.cumsum(v[ov]) * h
    s_star = h * np.sqrt(np.cumsum(su[ou] ** 2) + np.cumsum(sv[ov] ** 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        zs = np.where(s_star > 0, (vs - us) / s_star, np.where(vs - us < 0, -np.inf, np.inf))
    j = int(np.argmin(zs))
    out.append(make_verdict("star-dominance-star", us[j], vs[j], s_star[j], cfg.seed, {**base, "half_width": (j + 1) * h / 2},
                            details={"u_star": us, "v_star": vs}))
    out.append(make_verdict("star-dominance-mean", u.mean(), v.mean(),
                            math.sqrt(np.sum(su**2) + np.sum(sv**2)) / n_theta, cfg.seed, base))
    return out


# ---------------------------------------------------------------------------
# suite runner
def _cfg_from(p: dict, seed: int, workers: int | None) -> SimConfig:
    keys = ("dt", "max_time", "eps_shell", "slit_eps", "bridge", "chunk_size", "max_wos_steps")
    kw = {k: p[k] for k in keys if k in p}
    return SimConfig(seed=seed, workers=workers, **kw)


def _domain_2d(spec: dict) -> Domain:
    kind = spec["kind"]
    if kind == "disk":
        return Ball(spec.get("radius", 1.0), spec.get("center", [0.0, 0.0]))
    if kind == "rect":
        return Rectangle.centered(spec["sides"], spec.get("center"))
    if kind == "ball":
        return Ball(spec.get("radius", 1.0), spec.get("center", [0.0, 0.0, 0.0]))
    raise ValueError(f"unknown domain kind {kind!r}")


def _bite_disk(R: float, c, rho: float):
    c = np.asarray(c, dtype=float)

    class _Bite(Domain):
        kind, dim = "bite-disk", 2

        def contains(self, x):
            x = np.atleast_2d(x)
            return (np.linalg.norm(x, axis=1) < R) & (np.linalg.norm(x - c, axis=1) > rho)

        def bbox(self):
            return np.full(2, -R), np.full(2, R)

    return _Bite()


def check_bll_random(instances: int, m: int = 2, seed: int = 0) -> Verdict:
    """Exhaustive check on ``instances`` random inputs, reported as the worst one."""
    rng = np.random.default_rng(seed)
    vs = []
    for i in range(int(instances)):
        inst = random_bll_instance(rng, m)
        vs.append(check_bll_discrete(inst["fs"], inst["A"], inst["z0"], params={"instance": i}))
    worst = min(vs, key=lambda v: v.margin)
    details = {"instances": len(vs), "violations": sum(v.status == "violation" for v in vs),
               "equalities": sum(v.margin == 0 for v in vs), "worst_instance": worst.params["instance"]}
    return make_verdict("bll-discrete", worst.lhs, worst.rhs, 0.0, seed, {"instances": int(instances), "m": m},
                        exact=True, details=details)


def _run_bll(p, seed, workers):
    if "instances" in p:
        return [check_bll_random(p["instances"], int(p.get("m", 2)), seed)]
    return [check_bll_discrete(p["fs"], p["A"], p.get("z0", 0))]


def _run_survival(p, seed, workers):
    proc = None if p.get("alpha", 2.0) == 2.0 and not p.get("stable", False) else StableParams(p.get("alpha", 2.0), 2)
    return [check_survival_isoperimetric(_domain_2d(p["domain"]), p["t"], proc, p["n"], _cfg_from(p, seed, workers),
                                         p.get("z_grid"), p.get("paired", True))]


def _run_polarization(p, seed, workers):
    cells = int(p.get("cells", 96))
    grid = RasterSet.centered_grid(p.get("half_width", 1.25), cells, 2)
    bite = p.get("bite")
    D = _bite_disk(1.0, bite[:2], bite[2]) if bite else Ball(1.0, np.zeros(2))
    Dr = rasterize(D, grid=grid)
    target = None
    if "target_angles" in p:
        lo, hi = p["target_angles"]
        ring = lambda y: ((np.linalg.norm(y, axis=1) >= 1.0) & (np.linalg.norm(y, axis=1) < 1.2)
                          & (np.arctan2(y[:, 1], y[:, 0]) >= lo) & (np.arctan2(y[:, 1], y[:, 0]) <= hi))
        target = grid.with_mask(ring(grid.centers().reshape(-1, 2)).reshape(grid.shape) & ~Dr.mask)
    H = Hyperplane(p.get("normal", [0.0, 1.0]), p.get("offset", 0.0))
    return [check_polarization_exit(Dr, H, p["x"], p["t"], p["n"], _cfg_from(p, seed, workers), target,
                                    p.get("paired", True))]


def _run_capacity(p, seed, workers):
    cells = int(p.get("cells", 24))
    half = p.get("half_width", 1.2)
    grid = RasterSet.centered_grid(half, cells, 3)
    if "box" in p:
        dom = Rectangle.centered(p["box"])
    elif "balls" in p:
        dom = BallUnion(p["balls"]["centers"], p["balls"]["radii"])
    else:
        dom = Ball(p.get("radius", 1.0))
    K = rasterize(dom, grid=grid)
    return check_capacity_isoperimetric(K, p.get("axis", 0), p.get("max_points", 2500), p.get("rel_tol", 0.01),
                                        p.get("iters", 2000), seed)


def _run_faber_krahn(p, seed, workers):
    return [check_faber_krahn(_domain_2d(p["domain"]), p["n"], _cfg_from(p, seed, workers),
                              paired=p.get("paired", True))]


def _run_dubinin(p, seed, workers):
    return [check_dubinin(p["alphas"], p["a"], p["n"], _cfg_from(p, seed, workers), p.get("paired", True))]


def _run_carleman(p, seed, workers):
    M = p["M"]
    if p.get("profile", "strip") == "strip":
        prof = lambda x: np.full(np.shape(x), float(M))
    elif p["profile"] == "funnel":
        prof = lambda x: M / (1.0 + np.maximum(np.asarray(x, dtype=float), 0.0))
    else:
        raise ValueError(f"unknown profile {p['profile']!r}")
    bs = p["b"] if isinstance(p["b"], list) else [p["b"]]
    return [check_carleman(prof, M, p["r0"], p.get("x0", 0.0), b, p["n"], _cfg_from(p, seed, workers)) for b in bs]


def _run_eigen_bm(p, seed, workers):
    B = Ball(p["radii"][0], p["centers"][0])
    D = Ball(p["radii"][1], p["centers"][1])
    return check_eigen_brunn_minkowski(B, D, p["n"], _cfg_from(p, seed, workers), p.get("t"), p.get("paired", True))


def _run_sausage(p, seed, workers):
    if "box" in p:
        shape = Rectangle.centered(p["box"])
    else:
        shape = float(p["radius"])
    return [check_wiener_sausage(shape, p["t"], p["dt"], p["n_paths"], _cfg_from(p, seed, workers),
                                 p.get("grid_cells", 128), p.get("paired", True))]


def _run_star(p, seed, workers):
    cfg = _cfg_from(p, seed, workers)
    if p.get("instance", "bite") == "slit":
        D = SlitDisk([p.get("angle", 0.5)], p.get("a", 0.4))
        return check_star_dominance(D, p["r"], p["n"], cfg, circ=Ball(1.0, np.zeros(2)),
                                    n_theta=p.get("n_theta", 64), arc_D="circle", arc_C="boundary")
    c, rho = p.get("center", [0.45, 0.779]), p.get("rho", 0.3)
    return check_star_dominance(_bite_disk(1.0, c, rho), p["r"], p["n"], cfg, cells=p.get("cells", 256),
                                n_theta=p.get("n_theta", 64))


CHECKS: dict[str, Callable] = {
    "bll-discrete": _run_bll,
    "survival-isoperimetric": _run_survival,
    "polarization-exit": _run_polarization,
    "capacity-isoperimetric": _run_capacity,
    "faber-krahn": _run_faber_krahn,
    "dubinin": _run_dubinin,
    "carleman": _run_carleman,
    "eigen-brunn-minkowski": _run_eigen_bm,
    "wiener-sausage": _run_sausage,
    "star-dominance": _run_star,
}


def run_check(entry: dict, seed: int | None = None, workers: int | None = None) -> list[Verdict]:
    """Run one manifest entry ``{"check": name, "params": {...}, "seed": int}``."""
    name = entry.get("check")
    if name not in CHECKS:
        raise KeyError(f"unknown check {name!r}; known: {sorted(CHECKS)}")
    s = entry.get("seed", 0) if seed is None else seed
    return CHECKS[name](dict(entry.get("params", {})), int(s), workers)


def run_suite(manifest, seed: int | None = None, workers: int | None = None) -> list[Verdict]:
    """Run every entry of a manifest (a list, or a dict with a ``"checks"`` list)."""
    entries = manifest["checks"] if isinstance(manifest, dict) else manifest
    out = []
    for e in entries:
        out.extend(run_check(e, seed, workers))
    return out


SUMMARY_FIELDS = ["theorem", "lhs", "rhs", "margin", "z", "status", "seed"]


def write_summary_csv(verdicts: Sequence[Verdict], fh) -> None:
    w = csv.writer(fh)
    w.writerow(SUMMARY_FIELDS)
    for v in verdicts:
        rec = v.to_record()
        w.writerow([rec[k] for k in SUMMARY_FIELDS])


def verdicts_to_json(verdicts: Sequence[Verdict]) -> str:
    return "\n".join(json.dumps(v.to_record(), sort_keys=True) for v in verdicts) + "\n"
