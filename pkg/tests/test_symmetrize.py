import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from isop.geometry import Ball, Hyperplane, RasterSet, dilate, rasterize
from isop.symmetrize import (
    GridIncompatibleError, SampledFunction1D, circular, decreasing_rearrangement,
    polarization_schedule_to_steiner, polarize, star_function, steiner,
)


def grid(n, half=1.0):
    return RasterSet.centered_grid(half, n, 2)


def brute_polarize(mask, origin, cell, H):
    """Per-cell-pair case split, one cell at a time."""
    out = mask.copy()
    n0, n1 = mask.shape
    for i in range(n0):
        for j in range(n1):
            c = origin + (np.array([i, j]) + 0.5) * cell
            s = c @ H.normal - H.offset
            if s <= 1e-12:
                continue
            m = c - 2 * s * H.normal
            mi, mj = np.rint((m - origin) / cell - 0.5).astype(int)
            inside = 0 <= mi < n0 and 0 <= mj < n1
            pa = mask[i, j]
            pb = mask[mi, mj] if inside else False
            out[i, j] = pa or pb
            if inside:
                out[mi, mj] = pa and pb
    return out


# polarize -------------------------------------------------------------------
def test_polarize_symmetric_fixed_point():
    A = rasterize(Ball(0.6, dim=2), grid=grid(32))
    H = Hyperplane((0, 1), 0.0)
    assert polarize(A, H).equals(A)


def test_polarize_single_cell_moves_to_positive_side():
    m = np.zeros((8, 8), bool)
    m[2, 1] = True  # second coordinate negative
    A = grid(8).with_mask(m)
    out = polarize(A, Hyperplane((0, 1), 0.0))
    want = np.zeros((8, 8), bool)
    want[2, 6] = True
    assert np.array_equal(out.mask, want)


@pytest.mark.parametrize("seed", range(5))
def test_polarize_matches_pairwise_oracle(seed):
    rng = np.random.default_rng(seed)
    A = grid(32).with_mask(rng.random((32, 32)) < 0.4)
    H = Hyperplane((0, 1), 0.0)
    assert np.array_equal(polarize(A, H).mask, brute_polarize(A.mask, A.origin, A.cell, H))


@pytest.mark.parametrize(
    "H",
    [
        Hyperplane((1, 0), 0.25),
        Hyperplane((-1, 0), 0.0625),
        Hyperplane((1, 1), 0.0),
        Hyperplane((1, -1), 0.0),
    ],
)
def test_polarize_other_planes_match_oracle(H):
    rng = np.random.default_rng(9)
    m = np.zeros((32, 32), bool)
    m[8:24, 8:24] = rng.random((16, 16)) < 0.5
    A = grid(32).with_mask(m)
    assert np.array_equal(polarize(A, H).mask, brute_polarize(A.mask, A.origin, A.cell, H))


def test_polarize_incompatible_plane():
    with pytest.raises(GridIncompatibleError):
        polarize(grid(8), Hyperplane((1, 0), 0.1))
    with pytest.raises(GridIncompatibleError):
        polarize(grid(8), Hyperplane((1, 2), 0.0))


@settings(max_examples=60, deadline=None)
@given(arrays(bool, (16, 16)), st.integers(6, 26), st.sampled_from([1, -1]), st.integers(0, 1))
def test_polarize_count_and_idempotence(m, j, sign, axis):
    A = grid(16).with_mask(m)
    H = Hyperplane.axis(2, axis, -1.0 + j * A.cell / 2, sign=sign)
    try:
        P = polarize(A, H)
    except ValueError:
        return
    assert P.count == A.count
    assert polarize(P, H).equals(P)


@settings(max_examples=100, deadline=None)
@given(arrays(bool, (10, 10)), st.integers(14, 26), st.sampled_from([1, -1]), st.floats(0, 0.3))
def test_smoothing_inclusion(m, j, sign, r):
    big = np.zeros((40, 40), bool)
    big[15:25, 15:25] = m
    A = grid(40, half=2.0).with_mask(big)
    H = Hyperplane.axis(2, 1, -2.0 + (j + 22) * A.cell / 2, sign=sign)
    lhs = dilate(polarize(A, H), r).mask
    rhs = polarize(dilate(A, r), H).mask
    assert not np.any(lhs & ~rhs)


# steiner --------------------------------------------------------------------
def test_steiner_column_example():
    m = np.zeros((1, 9), bool)
    m[0, [1, 5, 6]] = True
    A = RasterSet((0, 0), 1.0, m)
    assert np.flatnonzero(steiner(A, 1).mask[0]).tolist() == [3, 4, 5]


def test_steiner_even_grid_odd_count_ties_low():
    m = np.zeros((1, 8), bool)
    m[0, [0, 7, 6]] = True
    assert np.flatnonzero(steiner(RasterSet((0, 0), 1.0, m), 1).mask[0]).tolist() == [2, 3, 4]


def test_steiner_fixed_point():
    A = rasterize(Ball(0.7, dim=2), grid=grid(40))
    assert steiner(A, 0).equals(A) and steiner(A, 1).equals(A)


@settings(max_examples=60, deadline=None)
@given(arrays(bool, (12, 15)), st.integers(0, 1))
def test_steiner_counts_symmetry_convexity(m, axis):
    A = RasterSet((0, 0), 0.5, m)
    S = steiner(A, axis)
    assert np.array_equal(S.mask.sum(axis), m.sum(axis))
    L = m.shape[axis]
    flipped = np.flip(S.mask, axis)
    counts = m.sum(axis)
    # symmetric about the midplane whenever the run can be centered exactly
    exact = ((L - counts) % 2 == 0)
    sel = [slice(None)] * 2
    sel[1 - axis] = exact
    assert np.array_equal(S.mask[tuple(sel)], flipped[tuple(sel)])
    runs = np.diff(np.pad(S.mask, [(1, 1) if k == axis else (0, 0) for k in range(2)]).astype(int), axis=axis)
    assert np.all((runs == 1).sum(axis) <= 1)


def test_steiner_3d_volume():
    rng = np.random.default_rng(0)
    A = RasterSet((0, 0, 0), 1.0, rng.random((6, 7, 8)) < 0.3)
    assert steiner(A, 2).count == A.count


def test_steiner_custom_center():
    m = np.zeros((1, 10), bool)
    m[0, [0, 9]] = True
    A = RasterSet((0, 0), 1.0, m)
    S = steiner(A, 1, center=3.0)
    assert np.flatnonzero(S.mask[0]).tolist() == [2, 3]


# circular ----------------------------------------------------------------------
def test_circular_disk_fixed_point():
    A = rasterize(Ball(0.8, dim=2), grid=grid(100))
    C = circular(A)
    assert C.count == A.count
    r = np.linalg.norm(A.centers(), axis=-1)
    diff = A.mask ^ C.mask
    # changes are confined to the one ring straddling the radius
    assert np.all(np.abs(r[diff] - 0.8) <= 2 * A.cell)


def test_circular_half_disk():
    g = grid(120)
    up = RasterSet.from_predicate(
        lambda x: (np.linalg.norm(x, axis=-1) < 1) & (x[..., 1] > 0), g.origin, g.cell, g.shape
    )
    right = RasterSet.from_predicate(
        lambda x: (np.linalg.norm(x, axis=-1) < 1) & (x[..., 0] > 0), g.origin, g.cell, g.shape
    )
    C = circular(up)
    assert C.count == up.count
    assert np.count_nonzero(C.mask ^ right.mask) <= 0.03 * right.count


def test_circular_preserves_ring_measure():
    rng = np.random.default_rng(2)
    A = grid(40).with_mask(rng.random((40, 40)) < 0.5)
    C = circular(A)
    r = np.linalg.norm(A.centers(), axis=-1)
    ring = np.floor(r / A.cell)
    for k in np.unique(ring):
        sel = ring == k
        assert A.mask[sel].sum() == C.mask[sel].sum()
    theta = np.abs(np.arctan2(A.centers()[..., 1], A.centers()[..., 0]))
    # within each ring kept cells have smaller |angle| than dropped ones
    for k in np.unique(ring):
        sel = ring == k
        kept, dropped = theta[sel & C.mask], theta[sel & ~C.mask]
        if kept.size and dropped.size:
            assert kept.max() <= dropped.min() + 1e-12


def test_circular_origin_cell():
    m = np.zeros((5, 5), bool)
    m[2, 2] = True
    A = RasterSet((-2.5, -2.5), 1.0, m)
    assert circular(A).equals(A)


# decreasing rearrangement ----------------------------------------------------------
def test_rearrangement_example():
    g = SampledFunction1D.on_interval(1.0, [0, 3, 1, 2, 0])
    assert decreasing_rearrangement(g).values.tolist() == [0, 2, 3, 1, 0]


def test_rearrangement_constant():
    g = SampledFunction1D.on_interval(2.0, np.full(7, 1.5))
    assert np.array_equal(decreasing_rearrangement(g).values, g.values)


def test_rearrangement_negative_error():
    with pytest.raises(ValueError):
        decreasing_rearrangement(SampledFunction1D.on_interval(1.0, [1, -1, 0]))


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=40))
def test_rearrangement_properties(vals):
    g = SampledFunction1D.on_interval(1.0, vals)
    r = decreasing_rearrangement(g)
    assert np.array_equal(np.sort(r.values), np.sort(g.values))
    assert r.values.max() == g.values.max() and r.values.sum() == pytest.approx(g.values.sum())
    order = np.argsort(np.round(np.abs(r.grid), 9), kind="stable")
    assert np.all(np.diff(r.values[order]) <= 0)
    # symmetric up to the unpaired placement of equal-distance nodes
    assert np.all(np.abs(r.values - r.values[::-1]) <= np.abs(np.diff(np.sort(r.values))).max(initial=0) + 1e-12)


# star function --------------------------------------------------------------
def test_star_constant():
    g = SampledFunction1D.on_interval(1.5, np.ones(30))
    s = star_function(g)
    np.testing.assert_allclose(s.values, 2 * s.grid, atol=1e-12)
    assert s.grid[-1] == pytest.approx(1.5)


def test_star_half_indicator():
    a = 1.0
    g = SampledFunction1D.from_callable(lambda x: (x > 0).astype(float), a, 40)
    s = star_function(g)
    np.testing.assert_allclose(s.values, np.minimum(2 * s.grid, a), atol=1e-12)


def test_star_random_subset_oracle():
    rng = np.random.default_rng(11)
    g = SampledFunction1D.on_interval(1.0, rng.normal(size=50))
    s = star_function(g)
    assert s.values[-1] == pytest.approx(g.integral())
    for k in (1, 7, 25, 49):
        idx = np.argsort(rng.random((100_000 // 4, 50)), axis=1)[:, :k]
        sums = g.values[idx].sum(axis=1) * g.spacing
        assert sums.max() <= s.values[k] + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=30))
def test_star_nondecreasing_for_nonnegative_and_concave(vals):
    g = SampledFunction1D.on_interval(1.0, vals)
    s = star_function(g)
    assert np.all(np.diff(s.values, 2) <= 1e-12)
    gp = SampledFunction1D.on_interval(1.0, np.abs(vals))
    assert np.all(np.diff(star_function(gp).values) >= -1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=3, max_size=25), st.data())
def test_majorization_convex_functions(vals, data):
    g = np.array(vals)
    bumps = np.array(data.draw(st.lists(st.floats(0, 3), min_size=len(vals), max_size=len(vals))))
    h = g + bumps  # pointwise larger, so h* dominates g*
    G = decreasing_rearrangement(SampledFunction1D.on_interval(1.0, g))
    Hh = decreasing_rearrangement(SampledFunction1D.on_interval(1.0, h))
    assert np.all(G.values <= Hh.values + 1e-12)
    for phi in (lambda x: x, lambda x: x**2, np.exp, lambda x: np.maximum(x - 1.0, 0)):
        assert phi(g).sum() <= phi(h).sum() + 1e-9


# polarization schedule ---------------------------------------------------------
def test_schedule_fixed_point():
    A = steiner(grid(16).with_mask(np.random.default_rng(0).random((16, 16)) < 0.5), 0)
    B, trace = polarization_schedule_to_steiner(A, Hyperplane.axis(2, 0, 0.0), 10)
    assert trace == [0.0] and B.equals(A)


def test_schedule_two_cells():
    m = np.zeros((1, 8), bool)
    m[0, [0, 7]] = True
    A = RasterSet((0.0, -4.0), 1.0, m)
    B, trace = polarization_schedule_to_steiner(A, Hyperplane.axis(2, 1, 0.0), 8)
    assert trace[-1] == 0.0
    assert np.flatnonzero(B.mask[0]).tolist() == [3, 4]


@pytest.mark.parametrize("seed", range(3))
def test_schedule_trace_nonincreasing_and_converges(seed):
    rng = np.random.default_rng(seed)
    A = grid(32).with_mask(rng.random((32, 32)) < 0.5)
    B, trace = polarization_schedule_to_steiner(A, Hyperplane.axis(2, 1, 0.0), 300, seed=seed)
    assert np.all(np.diff(trace) <= 0)
    assert B.count == A.count
    assert trace[-1] <= 2 * A.cell


def test_schedule_budget_validation():
    with pytest.raises(ValueError):
        polarization_schedule_to_steiner(grid(4), Hyperplane.axis(2, 0, 0.0), 0)
