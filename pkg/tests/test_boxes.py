from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from klab.boxes import Box, BoxUnion
from klab.geometry import SignedPerm

F = Fraction

small = st.integers(-8, 8).map(lambda k: F(k, 4))


@st.composite
def boxes(draw, dim=2):
    lo, hi = [], []
    for _ in range(dim):
        a, b = draw(small), draw(small)
        if a == b:
            b = a + F(1, 4)
        lo.append(min(a, b))
        hi.append(max(a, b))
    return Box.make(lo, hi)


@st.composite
def unions(draw, dim=2):
    return BoxUnion.from_list(dim, draw(st.lists(boxes(dim), min_size=1, max_size=3)))


points = st.tuples(st.integers(-20, 20).map(lambda k: F(k, 8)), st.integers(-20, 20).map(lambda k: F(k, 8)))


def test_open_box_excludes_its_boundary():
    b = Box.make([0, 0], [1, 1])
    assert b.contains((F(1, 2), F(1, 2)))
    assert not b.contains((0, F(1, 2)))
    assert b.closure_contains((0, F(1, 2)))


def test_union_simplify_merges_contained_boxes():
    u = BoxUnion.of(Box.make([0, 0], [2, 2]), Box.make([F(1, 2), F(1, 2)], [1, 1]))
    assert len(u.boxes) == 1


def test_minus_points_removes_exactly_the_point():
    u = BoxUnion.of(Box.make([-1, -1], [1, 1])).minus_points([(0, 0)])
    assert not u.contains((0, 0))
    assert u.contains((F(1, 100), 0))
    assert u.contains((0, F(-1, 100)))


@given(unions(), unions(), points)
def test_intersection_is_pointwise_and(u, v, p):
    assert u.intersect(v).contains(p) == (u.contains(p) and v.contains(p))


@given(unions(), unions(), points)
def test_union_is_pointwise_or(u, v, p):
    assert u.union(v).contains(p) == (u.contains(p) or v.contains(p))


@given(unions(), unions(), points)
def test_minus_closure_avoids_the_closure(u, v, p):
    d = u.minus_closure(v)
    assert d.contains(p) == (u.contains(p) and not v.closure_contains(p))


@given(unions(), unions())
def test_subset_agrees_with_intersection(u, v):
    assert u.subset_of(v) == u.intersect(v).same_set(u)


@given(unions())
def test_grid_points_lie_inside(u):
    for p in u.grid(F(1, 8)):
        assert u.contains(p)


@given(unions(), st.sampled_from([(1, 0), (0, 1)]), st.sampled_from([(1, 1), (-1, 1), (1, -1), (-1, -1)]))
def test_signed_permutation_image_matches_pointwise_action(u, perm, signs):
    g = SignedPerm(perm, signs)
    img = u.signed_perm_image(perm, signs)
    for p in u.grid(F(1, 4)):
        assert img.contains(g.apply(p))
    inv = g.inverse()
    assert img.signed_perm_image(inv.perm, inv.signs).same_set(u)


def test_grid_budget_coarsens_onto_a_sublattice():
    u = BoxUnion.of(Box.make([-1] * 3, [1] * 3))
    fine = set(u.grid(F(1, 8), budget=None))
    coarse = u.grid(F(1, 8), budget=500)
    assert 0 < len(coarse) <= 500
    assert set(coarse) <= fine


def test_unbounded_sides_are_clipped_by_the_window():
    u = BoxUnion.of(Box.make([float("-inf")], [0]))
    pts = u.grid(F(1), window=F(3))
    assert pts == [(F(-2),), (F(-1),)]


def test_json_round_trip():
    u = BoxUnion.of(Box.make([0, F(-1, 3)], [F(5, 2), 1]), Box.make([3, 0], [4, 1]))
    assert BoxUnion.from_json(u.to_json()).same_set(u)


def test_of_requires_a_box():
    with pytest.raises(ValueError):
        BoxUnion.of()
