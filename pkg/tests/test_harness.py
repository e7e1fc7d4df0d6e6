import io
import json
import math

import numpy as np
import pytest

from isop.geometry import Ball, BallUnion, Hyperplane, RasterSet, Rectangle, rasterize
from isop.harness import (
    Z_CRIT, check_bll_discrete, check_bll_random, check_capacity_isoperimetric, check_carleman,
    check_dubinin, check_eigen_brunn_minkowski, check_faber_krahn, check_polarization_exit,
    check_star_dominance, check_survival_isoperimetric, check_wiener_sausage, make_verdict,
    random_bll_instance, run_check, run_suite, surface_points, write_summary_csv,
)
from isop.stochastic import SimConfig, StableParams

# frozen from tests/oracles.py
RECT_SURVIVAL_T03 = 0.4740949  # 2:1 rectangle of area pi, from its center
DISK_SURVIVAL_T03 = 0.6618343  # unit disk, from its center
SIDES_2_1 = [math.sqrt(2 * math.pi), math.sqrt(math.pi / 2)]

CFG = SimConfig(seed=3)


# verdicts -----------------------------------------------------------------------------
def test_verdict_classification():
    assert make_verdict("x", 1.0, 2.0, 0.1).status == "consistent"
    assert make_verdict("x", 2.0, 1.0, 0.1).status == "violation"
    assert make_verdict("x", 1.0, 0.85, 0.1).status == "consistent"  # z = -1.5, above -z_crit
    assert make_verdict("x", 1.0, 1.05, 0.1).status == "inconclusive"
    assert make_verdict("x", 1.0, 1.05, 0.1, resolution=0.01).status == "consistent"


def test_verdict_threshold_is_one_sided():
    just = make_verdict("x", 0.0, -(Z_CRIT - 0.01) * 0.1, 0.1)
    over = make_verdict("x", 0.0, -(Z_CRIT + 0.01) * 0.1, 0.1)
    assert just.status != "violation" and over.status == "violation"


def test_exact_verdicts():
    v = make_verdict("x", 1.0, 1.0, 0.0, exact=True)
    assert v.exact and v.status == "consistent" and v.z == 0.0
    assert make_verdict("x", 1.0, 1.0 - 1e-15, 0.0).status == "violation"


def test_verdict_record_is_json():
    v = make_verdict("x", 1.0, 3.0, 0.0, params={"a": np.float64(2.0), "v": np.arange(2)})
    rec = json.loads(json.dumps(v.to_record()))
    assert rec["z"] == "inf" and rec["params"] == {"a": 2.0, "v": [0, 1]}
    assert rec["margin"] == 2.0


# discrete rearrangement inequality ------------------------------------------------------
def test_bll_hand_case():
    # f = (1, 2, 3) on offsets -1, 0, 1; A = {2, 3}; chain starts at 0
    v = check_bll_discrete([[1, 2, 3]], [2, 3], 0)
    assert v.lhs == 0.0
    # f* = (2, 3, 1), A* = {-1, 0}
    assert v.rhs == 5.0 and v.exact and v.sigma == 0.0


def test_bll_two_factor_hand_case():
    v = check_bll_discrete([[0, 1, 0], [0, 1, 0]], [5], 5)
    assert v.lhs == v.rhs == 1.0 and v.status == "consistent"


def test_bll_equality_on_fixed_instances():
    rng = np.random.default_rng(0)
    for _ in range(50):
        k = int(rng.integers(1, 8))
        vals = np.sort(rng.random(2 * k + 1))[::-1]
        f = np.empty(2 * k + 1)
        order = np.argsort(np.abs(np.arange(-k, k + 1)) + 0.1 * (np.arange(-k, k + 1) > 0), kind="stable")
        f[order] = vals
        size = int(rng.integers(1, 2 * k + 2))
        A = np.sort(np.arange(-k, k + 1)[order[:size]])
        v = check_bll_discrete([f, f], A, 0)
        assert v.margin == 0.0


def test_bll_random_instances_hold():
    rng = np.random.default_rng(5)
    for _ in range(200):
        inst = random_bll_instance(rng, int(rng.integers(1, 4)))
        assert check_bll_discrete(inst["fs"], inst["A"], inst["z0"]).status == "consistent"


def test_bll_aggregate():
    v = check_bll_random(50, 2, seed=1)
    assert v.details["instances"] == 50 and v.details["violations"] == 0 and v.exact


@pytest.mark.parametrize("fs,A", [
    ([[1.0]] * 4, [0]),                 # too many factors
    ([[1.0, 2.0]], [0]),                # even length
    ([np.ones(43)], [0]),               # too long
    ([[1.0]], list(range(22))),         # A too large
    ([[1.0]], [0, 30]),                 # A too spread out
    ([[-1.0, 1.0, 1.0]], [0]),          # negative values
])
def test_bll_limits(fs, A):
    with pytest.raises(ValueError):
        check_bll_discrete(fs, A)


# survival ------------------------------------------------------------------------------
def test_survival_rectangle_vs_disk():
    v = check_survival_isoperimetric(Rectangle.centered(SIDES_2_1), 0.3, None, 20000, CFG)
    assert v.z >= 3
    assert abs(v.lhs - RECT_SURVIVAL_T03) < 4 * v.lhs_stderr
    assert abs(v.rhs - DISK_SURVIVAL_T03) < 4 * v.rhs_stderr


def test_survival_equality_case():
    v = check_survival_isoperimetric(Ball(1.0, dim=2), 0.3, None, 5000, CFG)
    assert v.margin == 0.0 and v.status != "violation"


def test_survival_pairing_shrinks_sigma():
    D = Rectangle.centered(SIDES_2_1)
    p = check_survival_isoperimetric(D, 0.3, None, 5000, CFG)
    u = check_survival_isoperimetric(D, 0.3, None, 5000, CFG, paired=False)
    assert p.sigma < u.sigma


def test_survival_sup_over_grid():
    D = Rectangle.centered(SIDES_2_1)
    v = check_survival_isoperimetric(D, 0.2, None, 4000, CFG, z_grid=[[0.8, 0.0], [0.0, 0.0]])
    assert v.details["argmax_z"] == [0.0, 0.0]
    with pytest.raises(ValueError):
        check_survival_isoperimetric(D, 0.2, None, 100, CFG, z_grid=[[5.0, 0.0]])


def test_survival_stable():
    v = check_survival_isoperimetric(Rectangle.centered(SIDES_2_1), 0.3, StableParams(1.5, 2), 4000, CFG)
    assert v.status == "consistent" and v.params["alpha"] == 1.5


# polarization ---------------------------------------------------------------------------
GRID = RasterSet.centered_grid(1.25, 48, 2)


def _bitten(c, rho):
    disk = rasterize(Ball(1.0, dim=2), grid=GRID)
    bite = np.linalg.norm(GRID.centers().reshape(-1, 2) - c, axis=1).reshape(GRID.shape) < rho
    return disk.with_mask(disk.mask & ~bite)


def test_polarization_symmetric_domain_is_equality():
    D = rasterize(Ball(1.0, dim=2), grid=GRID)
    v = check_polarization_exit(D, Hyperplane([0.0, 1.0]), [0.1, 0.3], 0.2, 3000, CFG)
    assert v.margin == 0.0 and v.status != "violation"


def test_polarization_bite():
    D = _bitten(np.array([0.45, 0.5]), 0.3)
    v = check_polarization_exit(D, Hyperplane([0.0, 1.0]), [0.0, 0.3], 0.2, 4000, CFG)
    assert v.margin > 0 and v.status == "consistent"


def test_polarization_with_target():
    D = _bitten(np.array([0.45, 0.5]), 0.3)
    y = GRID.centers().reshape(-1, 2)
    r, th = np.linalg.norm(y, axis=1), np.arctan2(y[:, 1], y[:, 0])
    ring = ((r >= 0.95) & (r < 1.2) & (th < -0.5) & (th > -2.0)).reshape(GRID.shape) & ~D.mask
    v = check_polarization_exit(D, Hyperplane([0.0, 1.0]), [0.0, 0.3], 0.3, 4000, CFG, target=GRID.with_mask(ring))
    assert v.status == "consistent" and v.rhs > v.lhs


def test_polarization_short_horizon():
    D = _bitten(np.array([0.45, 0.5]), 0.3)
    v = check_polarization_exit(D, Hyperplane([0.0, 1.0]), [0.0, 0.3], 1e-3, 500, CFG)
    assert v.lhs == v.rhs == 1.0


def test_polarization_preconditions():
    D = _bitten(np.array([0.45, 0.5]), 0.3)
    H = Hyperplane([0.0, 1.0])
    with pytest.raises(ValueError):
        check_polarization_exit(D, H, [0.0, -0.3], 0.1, 10, CFG)  # wrong side
    with pytest.raises(ValueError):
        check_polarization_exit(D, H, [0.45, 0.5], 0.1, 10, CFG)  # in the bite
    with pytest.raises(ValueError):
        check_polarization_exit(D, H, [0.0, 0.3], 0.1, 10, CFG, target=D)  # target meets D


# capacity ------------------------------------------------------------------------------
def test_surface_points_of_a_cube():
    K = RasterSet.empty(np.zeros(3), 1.0, (4, 4, 4)).with_mask(np.ones((4, 4, 4), dtype=bool))
    assert surface_points(K).shape[0] == 4**3 - 2**3


def test_capacity_ball_is_fixed():
    K = rasterize(Ball(1.0), grid=RasterSet.centered_grid(1.2, 24, 3))
    steiner_v, schwarz_v = check_capacity_isoperimetric(K, max_points=600)
    caps = steiner_v.details["capacities"]
    assert max(caps.values()) / min(caps.values()) < 1.03
    assert steiner_v.status != "violation" and schwarz_v.status != "violation"


def test_capacity_chain_on_union_of_balls():
    K = rasterize(BallUnion([[-0.3, 0, 0], [0.4, 0.25, 0]], [0.5, 0.35]), grid=RasterSet.centered_grid(1.0, 24, 3))
    a, b = check_capacity_isoperimetric(K, max_points=600)
    assert a.margin > 0 and b.margin > 0


def test_capacity_rejects_degenerate():
    with pytest.raises(ValueError):
        check_capacity_isoperimetric(RasterSet.empty(np.zeros(3), 0.1, (4, 4, 4)))
    with pytest.raises(ValueError):
        check_capacity_isoperimetric(rasterize(Ball(1.0, dim=2), grid=GRID))


# eigenvalues ----------------------------------------------------------------------------
def test_faber_krahn_square():
    v = check_faber_krahn(Rectangle.centered([1.0, 1.0]), 20000, SimConfig(seed=2, dt=4e-3))
    assert v.status == "consistent" and v.z >= 2
    assert v.params["ball_eigenvalue_exact"] == pytest.approx(9.0842, abs=1e-3)


def test_faber_krahn_equality_case():
    v = check_faber_krahn(Ball(1.0, dim=2), 10000, SimConfig(seed=2, dt=4e-3))
    assert v.margin == 0.0 and v.status != "violation"


def test_brunn_minkowski_concentric():
    vs = check_eigen_brunn_minkowski(Ball(1.0, dim=2), Ball(2.0, dim=2), 8000, SimConfig(seed=2, dt=4e-3))
    names = [v.theorem for v in vs]
    assert names == ["eigen-brunn-minkowski", "eigen-intersection", "survival-interpolation"]
    assert all(v.status != "violation" for v in vs)
    assert vs[0].details["exact_C"] == pytest.approx(2.8916 / 2.25, rel=1e-4)


def test_brunn_minkowski_identical_balls():
    B = Ball(1.0, dim=2)
    vs = check_eigen_brunn_minkowski(B, B, 4000, SimConfig(seed=2, dt=4e-3))
    assert vs[0].margin == pytest.approx(0.0, abs=1e-12)
    assert vs[1].margin == pytest.approx(vs[1].rhs / 2, rel=1e-12)


def test_brunn_minkowski_disjoint_raises():
    with pytest.raises(ValueError):
        check_eigen_brunn_minkowski(Ball(1.0, [0, 0]), Ball(1.0, [3, 0]), 10, CFG)


# slit disks and channels ----------------------------------------------------------------
def test_dubinin_clustered_vs_even():
    v = check_dubinin([0.0, math.pi / 6], 0.3, 20000, CFG)
    assert v.status == "consistent" and v.z >= 3


def test_dubinin_equality_case():
    v = check_dubinin([0.3, 0.3 + math.pi], 0.3, 20000, CFG)
    assert abs(v.margin) < 4 * v.sigma and v.status != "violation"


def test_dubinin_limits():
    with pytest.raises(ValueError):
        check_dubinin([0.0], 0.3, 10, CFG)
    with pytest.raises(ValueError):
        check_dubinin([0.0, 1.0], 1.0, 10, CFG)


def test_carleman_strip():
    strip = lambda x: np.full(np.shape(x), 1.0)
    v = check_carleman(strip, 1.0, 0.4, 0.0, 1.0, 4000, CFG)
    assert v.status == "consistent" and v.params["domain"] == "rectangle"
    assert v.rhs == pytest.approx(3 * math.sqrt(1 / 0.4) / math.sqrt(math.expm1(2 * math.pi)), rel=1e-6)


def test_carleman_funnel():
    v = check_carleman(lambda x: 1.0 / (1 + np.maximum(x, 0)), 1.0, 0.4, 0.0, 1.0, 4000, CFG)
    assert v.status == "consistent" and v.params["domain"] == "polygon-2d"


def test_carleman_vacuous_at_start():
    v = check_carleman(lambda x: np.full(np.shape(x), 1.0), 1.0, 0.4, 0.0, 0.0, 500, CFG)
    assert v.rhs == 1.0 and v.status == "consistent"


def test_carleman_preconditions():
    strip = lambda x: np.full(np.shape(x), 1.0)
    with pytest.raises(ValueError):
        check_carleman(strip, 1.0, 0.6, 0.0, 1.0, 10, CFG)  # disk sticks out
    with pytest.raises(ValueError):
        check_carleman(lambda x: np.full(np.shape(x), 2.0), 1.0, 0.4, 0.0, 1.0, 10, CFG)


# sausage and star functions ---------------------------------------------------------------
def test_sausage_box_vs_ball():
    v = check_wiener_sausage(Rectangle.centered([1.0, 0.5, 0.5]), 1.0, 0.01, 20, CFG, grid_cells=48)
    assert v.margin > 0 and v.status == "consistent"


def test_sausage_ball_is_equality():
    v = check_wiener_sausage(Ball(0.5), 0.5, 0.02, 10, CFG, grid_cells=48)
    assert abs(v.margin) <= 2 * v.sigma and v.status != "violation"


def test_star_dominance_symmetric_instance():
    D = Ball(1.0, dim=2)
    vs = check_star_dominance(D, 0.5, 300, CFG, circ=D, n_theta=8)
    assert all(v.margin == 0.0 for v in vs)


def test_star_dominance_slit():
    from isop.geometry import SlitDisk

    D = SlitDisk([0.5], 0.4)
    vs = check_star_dominance(D, 0.5, 1500, CFG, circ=Ball(1.0, dim=2), n_theta=8, arc_D="circle", arc_C="boundary")
    assert [v.theorem for v in vs] == ["star-dominance-sup", "star-dominance-star", "star-dominance-mean"]
    assert all(v.status == "consistent" for v in vs)


# suite ---------------------------------------------------------------------------------
def test_run_check_unknown():
    with pytest.raises(KeyError):
        run_check({"check": "nope"})


def test_suite_and_summary():
    suite = [
        {"check": "bll-discrete", "seed": 4, "params": {"instances": 20}},
        {"check": "carleman", "seed": 4, "params": {"M": 1.0, "r0": 0.4, "b": [1.0], "n": 500}},
    ]
    vs = run_suite(suite)
    buf = io.StringIO()
    write_summary_csv(vs, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "theorem,lhs,rhs,margin,z,status,seed"
    assert len(lines) == 3 and all(v.seed == 4 for v in vs)
    again = run_suite({"checks": suite})
    assert [v.to_record() for v in again] == [v.to_record() for v in vs]
