"""Acceptance checks, one pass/fail line each (see the "acceptance" section of the pytest summary).

Time budgets are stated for an 8-core machine and scale by 8 / cores here.
"""
import json
import math
import os
import time

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE_LINES
from isop.estimators import (
    capacity_energy, carleman_bound, capacity_spitzer, expected_exit_time, harmonic_measure, kac_eigenvalue,
    sausage_expectation,
)
from isop.geometry import Annulus, Ball, Hyperplane, RasterSet, Rectangle, SlitDisk, dilate
from isop.harness import (
    check_bll_discrete, check_bll_random, check_carleman, check_dubinin, check_faber_krahn,
    check_star_dominance, check_survival_isoperimetric, random_bll_instance,
)
from isop.stochastic import SimConfig, StableParams
from isop.symmetrize import SampledFunction1D, polarization_schedule_to_steiner, polarize, star_function

CORES = min(8, os.cpu_count() or 1)
TWO_PI = 2 * math.pi

# frozen oracle values (tests/oracles.py)
DISK_LAMBDA = 2.8915929814733916
SQUARE_LAMBDA = 9.869604401089358
AREA1_DISK_LAMBDA = 9.084207267768615
RECT_SURVIVAL_T03 = 0.4740949
DISK_SURVIVAL_T03 = 0.6618343
SIDES_2_1 = [math.sqrt(2 * math.pi), math.sqrt(math.pi / 2)]


def budget(seconds):
    return seconds * 8 / CORES


def report(tag, ok, detail, elapsed, limit):
    within = elapsed <= budget(limit)
    status = "PASS" if ok and within else "FAIL"
    ACCEPTANCE_LINES.append(f"{tag}: {status}  {detail}  [{elapsed:.1f}s of {budget(limit):.0f}s]")
    print(ACCEPTANCE_LINES[-1])
    return ok and within


def fibonacci_sphere(n, r=1.0):
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    th = math.pi * (1 + 5**0.5) * i
    return r * np.c_[np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)]


def test_oracle_constants_match_closed_forms():
    assert oracles.disk_eigenvalue() == pytest.approx(DISK_LAMBDA, rel=1e-12)
    assert oracles.rectangle_eigenvalue(1, 1) == pytest.approx(SQUARE_LAMBDA, rel=1e-12)
    assert oracles.disk_eigenvalue(1 / math.sqrt(math.pi)) == pytest.approx(AREA1_DISK_LAMBDA, rel=1e-12)
    assert oracles.rectangle_survival(0.3, *SIDES_2_1) == pytest.approx(RECT_SURVIVAL_T03, abs=1e-7)
    assert oracles.disk_survival(0.3) == pytest.approx(DISK_SURVIVAL_T03, abs=1e-7)
    assert oracles.annulus_harmonic(0.5, 2, 1) == pytest.approx(0.5, abs=1e-15)


# ---------------------------------------------------------------------------------------
def test_a01_annulus_harmonic_measure():
    t0 = time.time()
    e = harmonic_measure(Annulus(0.5, 2.0), "inner", [1.0, 0.0], 100_000, SimConfig(seed=1))
    err = abs(e.mean - 0.5)
    ok = err <= 0.01 and err <= 3 * e.stderr
    assert report("A01 annulus harmonic measure", ok, f"mean={e.mean:.4f} se={e.stderr:.4f} target 0.5",
                  time.time() - t0, 30)


def test_a02_ball_exit_time():
    t0 = time.time()
    e = expected_exit_time(Ball(1.0), np.zeros(3), 100_000, SimConfig(seed=1))
    rel = abs(e.mean * 3 - 1)
    assert report("A02 ball exit time", rel <= 0.02, f"mean={e.mean:.4f} target 1/3 rel.err={rel:.3%}",
                  time.time() - t0, 60)


@pytest.mark.parametrize("name,domain,exact", [
    ("disk", Ball(1.0, dim=2), DISK_LAMBDA),
    ("square", Rectangle.centered([1.0, 1.0]), SQUARE_LAMBDA),
])
def test_a03_kac_eigenvalue(name, domain, exact):
    t0 = time.time()
    e = kac_eigenvalue(domain, np.zeros(2), None, 1_000_000, SimConfig(seed=1))
    rel = abs(e.mean / exact - 1)
    ok = rel <= 0.10 and len(e.extras["t_grid"]) == 6
    assert report(f"A03 kac eigenvalue {name}", ok,
                  f"lambda={e.mean:.4f} se={e.stderr:.4f} exact={exact:.4f} rel.err={rel:.2%}", time.time() - t0, 600)


def test_a04_faber_krahn_detection():
    t0 = time.time()
    zs, margins = [], []
    for seed in range(20):
        v = check_faber_krahn(Rectangle.centered([1.0, 1.0]), 20_000, SimConfig(seed=seed))
        zs.append(v.z)
        margins.append(v.margin)
    ok = min(zs) >= 2 and not any(z <= -4 for z in zs)
    exact = SQUARE_LAMBDA - AREA1_DISK_LAMBDA
    assert report("A04 faber-krahn square vs disk", ok,
                  f"min z={min(zs):.2f} mean margin={np.mean(margins):.3f} exact margin={exact:.3f} over 20 seeds",
                  time.time() - t0, 600)


def test_a05_capacity_two_estimators():
    t0 = time.time()
    s = capacity_spitzer(Ball(1.0), (1.0, 4.0, 9.0), None, 1_000_000, SimConfig(seed=1))
    t1 = time.time()
    f, _ = capacity_energy(fibonacci_sphere(2000), 2.0, 3, iters=2000)
    t_fw = time.time() - t1
    rs, rf = abs(s.mean / TWO_PI - 1), abs(f.mean / TWO_PI - 1)
    agree = abs(s.mean / f.mean - 1)
    ok = rs <= 0.07 and rf <= 0.03 and agree <= 0.10 and t_fw <= budget(120)
    assert report("A05 capacity of the unit ball", ok,
                  f"spitzer={s.mean:.3f} ({rs:.1%}) energy={f.mean:.3f} ({rf:.1%}) agreement={agree:.1%} "
                  f"energy time={t_fw:.0f}s", time.time() - t0, 600)


def test_a06_sausage_slope():
    # the mean volume of a radius-1 ball sausage is 2 pi t + 4 sqrt(2 pi t) + 4 pi / 3 (see oracles)
    t0 = time.time()
    cfg = SimConfig(seed=1, max_time=16.0)
    e = sausage_expectation(1.0, 16.0, 1e-3, 200, cfg, grid_cells=256)
    slope = e.mean / 16.0
    rel = abs(slope / TWO_PI - 1)
    exact_ratio = oracles.ball_heat_content(1.0, 16.0) / 16.0
    assert report("A06 sausage E/t at t=16", rel <= 0.10,
                  f"E/t={slope:.3f} se={e.stderr / 16:.3f} target 2pi={TWO_PI:.3f} rel.err={rel:.1%}; "
                  f"exact E/t at t=16 is {exact_ratio:.3f}", time.time() - t0, 600)


def _fixed_instance(rng):
    k = int(rng.integers(1, 11))
    offs = np.arange(-k, k + 1)
    order = np.lexsort((offs, np.abs(offs)))
    fs = []
    for _ in range(int(rng.integers(1, 3))):
        f = np.empty(2 * k + 1)
        f[order] = np.sort(rng.random(2 * k + 1))[::-1]
        fs.append(f)
    A = np.sort(offs[order[: int(rng.integers(1, 2 * k + 2))]])
    return fs, A


def test_a07_bll_exhaustive():
    t0 = time.time()
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(1000):
        inst = random_bll_instance(rng, int(rng.integers(1, 3)))
        v = check_bll_discrete(inst["fs"], inst["A"], inst["z0"])
        bad += v.status == "violation" or not v.exact
    unequal = 0
    for _ in range(200):
        fs, A = _fixed_instance(rng)
        unequal += check_bll_discrete(fs, A, 0).margin != 0.0
    agg = check_bll_random(1000, 2, seed=7)
    ok = bad == 0 and unequal == 0 and agg.details["violations"] == 0
    assert report("A07 discrete rearrangement, exhaustive", ok,
                  f"violations={bad}/1000, unequal fixed instances={unequal}/200", time.time() - t0, 10)


def test_a08_survival_isoperimetric():
    t0 = time.time()
    D = Rectangle.centered(SIDES_2_1)
    v = check_survival_isoperimetric(D, 0.3, None, 100_000, SimConfig(seed=1))
    zl = (v.lhs - RECT_SURVIVAL_T03) / v.lhs_stderr
    zr = (v.rhs - DISK_SURVIVAL_T03) / v.rhs_stderr
    w = check_survival_isoperimetric(D, 0.3, StableParams(1.5, 2), 20_000, SimConfig(seed=1))
    ok = v.z >= 3 and abs(zl) <= 3 and abs(zr) <= 3 and w.status == "consistent"
    assert report("A08 survival, rectangle vs disk", ok,
                  f"alpha=2: z={v.z:.1f}, oracle z lhs={zl:.2f} rhs={zr:.2f}; alpha=1.5: {w.status} z={w.z:.1f}",
                  time.time() - t0, 300)


def _oracle_polarize(mask, H_axis, pos2, sign):
    """Axis-aligned plane at ``pos2 / 2`` in index units; cell i has center i + 1/2."""
    out = mask.copy()
    n = mask.shape[H_axis]
    for i in range(n):
        s = sign * ((2 * i + 1) - pos2)  # twice the signed distance in index units
        if s <= 0:
            continue
        j = pos2 - 1 - i  # mirror index: (i + 1/2) + (j + 1/2) = pos2
        a = np.take(mask, i, axis=H_axis)
        b = np.take(mask, j, axis=H_axis) if 0 <= j < n else np.zeros_like(a)
        idx_i = [slice(None)] * mask.ndim
        idx_i[H_axis] = i
        out[tuple(idx_i)] = a | b
        if 0 <= j < n:
            idx_j = [slice(None)] * mask.ndim
            idx_j[H_axis] = j
            out[tuple(idx_j)] = a & b
    return out


def test_a09_polarization():
    t0 = time.time()
    rng = np.random.default_rng(9)
    n = 32
    grid = RasterSet.empty(np.zeros(2), 1.0, (n, n))
    mismatches = 0
    for _ in range(1000):
        m = np.zeros((n, n), bool)
        m[8:24, 8:24] = rng.random((16, 16)) < rng.uniform(0.1, 0.9)
        axis, pos2, sign = int(rng.integers(0, 2)), int(rng.integers(24, 41)), int(rng.choice([-1, 1]))
        H = Hyperplane.axis(2, axis, pos2 / 2, sign=sign)
        got = polarize(grid.with_mask(m), H).mask
        mismatches += not np.array_equal(got, _oracle_polarize(m, axis, pos2, sign))
    structural = 0
    for _ in range(100):
        m = np.zeros((n, n), bool)
        m[10:22, 10:22] = rng.random((12, 12)) < 0.5
        A = grid.with_mask(m)
        H = Hyperplane.axis(2, int(rng.integers(0, 2)), int(rng.integers(28, 37)) / 2, sign=int(rng.choice([-1, 1])))
        r = float(rng.uniform(0.5, 3.0))
        P = polarize(A, H)
        structural += not polarize(P, H).equals(P)
        lhs, rhs = dilate(P, r).mask, polarize(dilate(A, r), H).mask
        structural += bool(np.any(lhs & ~rhs))
    reached = 0
    for seed in range(100):
        r2 = np.random.default_rng(seed)
        m = np.zeros((64, 64), bool)
        m[16:48, 16:48] = r2.random((32, 32)) < 0.4
        A = RasterSet.empty(np.zeros(2), 1.0, (64, 64)).with_mask(m)
        B, trace = polarization_schedule_to_steiner(A, Hyperplane.axis(2, 1, 32.0), 500, seed=seed)
        reached += trace[-1] <= 2 * A.cell
    ok = mismatches == 0 and structural == 0 and reached >= 95
    assert report("A09 polarization", ok,
                  f"oracle mismatches={mismatches}/1000, idempotence/smoothing failures={structural}, "
                  f"schedule reached 2 cells on {reached}/100", time.time() - t0, 120)


def test_a10_slit_harmonic_measure():
    t0 = time.time()
    cfg = SimConfig(seed=1)
    v = check_dubinin([0.0, math.pi / 6], 0.3, 400_000, cfg)
    eq = check_dubinin([0.0, math.pi], 0.3, 400_000, cfg)
    ok = v.margin >= 0 and v.z >= 3 and abs(eq.margin) <= 2 * max(eq.sigma, 1e-300) and eq.status != "violation"
    assert report("A10 two slits, clustered vs even", ok,
                  f"z={v.z:.1f} margin={v.margin:.4f}; equality case margin={eq.margin:.2e} sigma={eq.sigma:.1e}",
                  time.time() - t0, 300)


def test_a11_channel_bound():
    t0 = time.time()
    cfg = SimConfig(seed=1)
    strip = lambda x: np.full(np.shape(x), 1.0)
    funnel = lambda x: 1.0 / (1.0 + np.maximum(x, 0.0))
    zs = []
    for prof, bs in ((strip, (0.5, 1.0, 1.5, 2.0)), (funnel, (0.5, 1.0, 1.5))):
        for b in bs:
            v = check_carleman(prof, 1.0, 0.4, 0.0, b, 20_000, cfg)
            zs.append(v.margin / v.sigma if v.sigma > 0 else math.inf)
    quad = max(abs(carleman_bound(lambda x, M=M: np.full(np.shape(x), M), M, r0, x0, b) / oracles.strip_carleman(M, r0, x0, b) - 1)
               for M, r0, x0, b in ((1.0, 0.4, 0.0, 2.0), (1.3, 0.4, 0.2, 3.0), (2.0, 0.5, -1.0, 4.0)))
    ok = min(zs) >= 3 and quad <= 1e-6
    assert report("A11 channel width bound", ok,
                  f"min z over 7 cases={min(zs):.1f}; strip quadrature rel.err={quad:.1e}", time.time() - t0, 120)


def test_a12_star_functions():
    t0 = time.time()
    rng = np.random.default_rng(12)
    bad = 0
    for _ in range(1000):
        k = int(rng.integers(2, 60))
        g = SampledFunction1D.on_interval(float(rng.uniform(0.2, 3.0)), rng.random(k) * rng.uniform(0.1, 10))
        s = star_function(g)
        v = s.values
        bad += bool(np.any(np.diff(v) < -1e-12)) or bool(np.any(np.diff(v, 2) > 1e-12 * max(1.0, v[-1])))
        for _ in range(5):
            size = int(rng.integers(0, k + 1))
            E = rng.choice(k, size, replace=False)
            bad += g.values[E].sum() * g.spacing > v[size] * (1 + 1e-12) + 1e-15
    D = SlitDisk([0.5], 0.4)
    vs = check_star_dominance(D, 0.5, 4000, SimConfig(seed=1), circ=Ball(1.0, dim=2), n_theta=64,
                              arc_D="circle", arc_C="boundary")
    sup = vs[0]
    ok = bad == 0 and sup.status == "consistent" and sup.z >= 3
    assert report("A12 star functions and sup comparison", ok,
                  f"property failures={bad}/1000; slit disk sup z={sup.z:.1f}", time.time() - t0, 300)


# reproducibility -------------------------------------------------------------------------
def _repro_runs(workers):
    cfg = SimConfig(seed=5, chunk_size=1000, workers=workers)
    recs = []
    recs.append(harmonic_measure(Annulus(0.5, 2.0), "inner", [1.0, 0.0], 4000, cfg).to_record("a01"))
    recs.append(expected_exit_time(Ball(1.0), np.zeros(3), 3000, cfg).to_record("a02"))
    recs.append(kac_eigenvalue(Rectangle.centered([1.0, 1.0]), np.zeros(2), None, 4000, cfg).to_record("a03"))
    recs.append(check_faber_krahn(Rectangle.centered([1.0, 1.0]), 3000, cfg).to_record())
    recs.append(capacity_spitzer(Ball(1.0), (1.0, 4.0, 9.0), None, 50_000, cfg).to_record("a05"))
    recs.append(sausage_expectation(1.0, 1.0, 0.01, 6, cfg.with_(chunk_size=2), grid_cells=48).to_record("a06"))
    recs.append(check_bll_random(50, 2, seed=5).to_record())
    recs.append(check_survival_isoperimetric(Rectangle.centered(SIDES_2_1), 0.3, None, 3000, cfg).to_record())
    A = RasterSet.empty(np.zeros(2), 1.0, (32, 32)).with_mask(np.random.default_rng(5).random((32, 32)) < 0.4)
    recs.append({"a09": polarization_schedule_to_steiner(A, Hyperplane.axis(2, 1, 16.0), 100, seed=5)[1]})
    recs.append(check_dubinin([0.0, math.pi / 6], 0.3, 4000, cfg).to_record())
    recs.append(check_carleman(lambda x: np.full(np.shape(x), 1.0), 1.0, 0.4, 0.0, 1.0, 3000, cfg).to_record())
    recs.append(check_star_dominance(SlitDisk([0.5], 0.4), 0.5, 300, cfg, circ=Ball(1.0, dim=2), n_theta=8,
                                     arc_D="circle", arc_C="boundary")[0].to_record())
    return [json.dumps(r, sort_keys=True, default=float) for r in recs]


def _means(lines):
    out = []
    for line in lines:
        r = json.loads(line)
        out.append((r.get("mean", r.get("lhs", r.get("a09"))), r.get("rhs")))
    return out


def test_a13_reproducibility():
    t0 = time.time()
    a = _repro_runs(1)
    b = _repro_runs(1)
    c = _repro_runs(8)
    same_bytes = a == b
    same_means = _means(a) == _means(c)
    assert report("A13 reproducibility", same_bytes and same_means,
                  f"byte-identical reruns={same_bytes}; workers 1 vs 8 identical means={same_means} "
                  f"({len(a)} record types)", time.time() - t0, 600)
