import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dataext.core import Allocation
from dataext.errors import AxisNotFound, ReferenceNotInGrid
from dataext.externality import delta, detect, slope_scan, welch_z
from dataext.sweep import RiskSurface

A0, A1 = Allocation({"A": 0, "B": 0}), Allocation({"A": 0, "B": 1})


def two_point(risks0, risks1):
    return RiskSurface.from_trials([A0, A1], {(0, "A"): risks0, (1, "A"): risks1})


def test_welch_z():
    assert welch_z(3.0, 3.0, 4.0) == pytest.approx(0.6)
    assert welch_z(1.0, 0.0, 0.0) == math.inf
    assert welch_z(0.0, 0.0, 0.0) == 0.0
    assert math.isnan(welch_z(1.0, math.nan, 1.0))


def test_two_point_inversion():
    s = two_point([1.0, 1.0], [2.0, 2.0])
    (f,) = detect(s)
    assert (f.sub, f.sup, f.magnitude) == (A0, A1, 1.0)
    assert f.z == math.inf and f.significant
    assert detect(two_point([2.0, 2.0], [1.0, 1.0])) == []


def test_detect_includes_insignificant_findings():
    s = two_point([1.0, 3.0], [2.0, 4.0])
    (f,) = detect(s)
    assert f.magnitude == 1.0
    assert f.z == pytest.approx(1 / math.sqrt(2))
    assert not f.significant


def four_point():
    grid = [Allocation({"A": a, "B": b}) for a in (0, 1) for b in (0, 1)]
    means = {(0, 0): 5.0, (0, 1): 3.0, (1, 0): 4.0, (1, 1): 6.0}
    table = {}
    for i, a in enumerate(grid):
        m = means[(a["A"], a["B"])]
        table[(i, "A")] = [m - 0.1, m + 0.1]
    return RiskSurface.from_trials(grid, table)


def test_delta_on_four_point_grid():
    s = four_point()
    rep = delta(s, "A", {"A": 1, "B": 1})
    assert rep.best_sub == Allocation({"A": 0, "B": 1})
    assert rep.delta == pytest.approx(3.0)
    assert rep.significant
    top = delta(s, "A", {"A": 0, "B": 0})
    assert top.delta == 0.0 and top.best_sub == top.reference and top.z == 0.0


def test_delta_tie_prefers_smaller_allocation():
    grid = [Allocation({"A": 2, "B": 2}), Allocation({"A": 1, "B": 0}), Allocation({"A": 0, "B": 1}), Allocation({"A": 1, "B": 1})]
    table = {(0, "A"): [5.0, 5.0], (1, "A"): [1.0, 1.0], (2, "A"): [1.0, 1.0], (3, "A"): [1.0, 1.0]}
    rep = delta(RiskSurface.from_trials(grid, table), "A", {"A": 2, "B": 2})
    assert rep.best_sub == Allocation({"A": 0, "B": 1})


def test_delta_errors():
    s = four_point()
    with pytest.raises(ReferenceNotInGrid):
        delta(s, "A", {"A": 7})
    with pytest.raises(ReferenceNotInGrid):
        delta(s, "Z", {"A": 1, "B": 1})


def test_failed_cells_are_skipped():
    grid = [A0, A1, Allocation({"A": 0, "B": 2})]
    s = RiskSurface.from_trials(grid, {(0, "A"): "Boom: x", (1, "A"): [1.0, 1.0], (2, "A"): [2.0, 2.0]})
    assert [(f.sub, f.sup) for f in detect(s)] == [(A1, grid[2])]
    assert delta(s, "A", grid[2]).best_sub == A1


surfaces = st.lists(
    st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=10, unique=True
).flatmap(
    lambda pts: st.tuples(
        st.just([Allocation({"A": a, "B": b}) for a, b in pts]),
        st.lists(
            st.lists(st.integers(0, 6).map(float), min_size=2, max_size=3),
            min_size=2 * len(pts),
            max_size=2 * len(pts),
        ),
    )
).map(
    lambda t: RiskSurface.from_trials(
        t[0], {(i, g): t[1][2 * i + k] for i in range(len(t[0])) for k, g in enumerate("AB")}
    )
)


def brute_delta(s, g, r):
    ref = s.grid[r]
    best = None
    for i, a in enumerate(s.grid):
        if i != r and all(a.get(h) <= ref.get(h) for h in "AB"):
            gap = s.mean(r, g) - s.mean(i, g)
            if gap > 0:
                key = (-gap, a.total, a.get("A"), a.get("B"), i)
                best = key if best is None or key < best else best
    return (0.0, r) if best is None else (-best[0], best[-1])


@given(surfaces)
@settings(max_examples=150)
def test_delta_matches_exhaustive_scan(s):
    for r in range(len(s.grid)):
        for g in "AB":
            rep = delta(s, g, s.grid[r])
            gap, idx = brute_delta(s, g, r)
            assert rep.delta == gap
            assert rep.best_sub == s.grid[idx]


@given(surfaces)
@settings(max_examples=150)
def test_detect_matches_brute_force(s):
    expected = set()
    for i, lo in enumerate(s.grid):
        for j, hi in enumerate(s.grid):
            if i != j and all(lo.get(h) <= hi.get(h) for h in "AB"):
                for g in "AB":
                    gap = s.mean(j, g) - s.mean(i, g)
                    if gap > 0:
                        expected.add((g, i, j, gap))
    found = {(f.eval_group, f.sub_index, f.sup_index, f.magnitude) for f in detect(s)}
    assert found == expected
    mags = [f.magnitude for f in detect(s)]
    assert mags == sorted(mags, reverse=True)


@given(surfaces, st.data())
@settings(max_examples=100)
def test_removing_grid_points_never_raises_delta(s, data):
    r = data.draw(st.integers(0, len(s.grid) - 1))
    keep = sorted(set(data.draw(st.lists(st.integers(0, len(s.grid) - 1)))) | {r})
    sub = s.subset(keep)
    for g in "AB":
        assert delta(sub, g, s.grid[r]).delta <= delta(s, g, s.grid[r]).delta


@given(surfaces, st.sampled_from([0.25, 0.5, 2.0, 8.0]))
@settings(max_examples=100)
def test_delta_scales_with_risk(s, c):
    scaled = s.scaled(c)
    for r in range(len(s.grid)):
        a, b = delta(s, "A", s.grid[r]), delta(scaled, "A", s.grid[r])
        assert b.delta == c * a.delta
        assert b.best_sub == a.best_sub
        assert (math.isnan(a.z) and math.isnan(b.z)) or b.z == pytest.approx(a.z, rel=1e-12)


def test_slope_scan_signs():
    grid = [Allocation({"A": 1, "B": b}) for b in (0, 10, 100, 1000)]
    table = {(i, "A"): [m, m] for i, m in enumerate([1.0, 2.0, 2.0, 0.5])}
    segs = slope_scan(RiskSurface.from_trials(grid, table), "A", "B")
    assert [s.sign for s in segs] == [1, 0, -1]
    assert [s.change for s in segs] == [1.0, 0.0, -1.5]
    assert segs[0].lo == grid[0] and segs[0].hi == grid[1]


def test_slope_scan_axis_errors():
    s = four_point()
    with pytest.raises(AxisNotFound):
        slope_scan(s, "A", "C")
    single = RiskSurface.from_trials([A0], {(0, "A"): [1.0]})
    with pytest.raises(AxisNotFound):
        slope_scan(single, "A", "B")


def test_finding_json_uses_null_for_infinite_z():
    (f,) = detect(two_point([1.0, 1.0], [2.0, 2.0]))
    d = f.to_dict()
    assert d["z"] is None and d["sub"] == {"A": 0, "B": 0} and d["sup"] == {"A": 0, "B": 1}
