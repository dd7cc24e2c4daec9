from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from klab import gallery
from klab import linalg as la
from klab.boxes import Box, BoxUnion
from klab.errors import EmptyComposite, NotInvariant, NotSubset
from klab.geometry import (AffineMap, CoordinateChange, GroupAction, PolySection, SignedPerm, check_change,
                           check_chart, check_tangent_bundle, compose_ccs, restrict_chart)

F = Fraction

perms2 = st.tuples(st.permutations([0, 1]).map(tuple), st.tuples(st.sampled_from([1, -1]), st.sampled_from([1, -1])))
pts2 = st.tuples(st.integers(-9, 9).map(F), st.integers(-9, 9).map(F))


@given(perms2, perms2, pts2)
def test_signed_perm_composition_and_inverse(a, b, x):
    g, h = SignedPerm(*a), SignedPerm(*b)
    assert g.compose(h).apply(x) == g.apply(h.apply(x))
    assert g.inverse().apply(g.apply(x)) == tuple(x)
    assert la.matvec(g.matrix(), x) == g.apply(x)


def test_group_generation_orbit_and_stabilizer():
    rot = (((0, -1), (1, 0)), ((1, 0), (0, 1)))
    g = GroupAction.generate(2, 2, [rot])
    assert g.order == 4
    assert g.check_closed()
    assert len(g.orbit((F(1), F(0)))) == 4
    assert len(g.stabilizer((F(0), F(0)))) == 4


coef = st.integers(-3, 3).map(F)
terms = st.lists(st.tuples(coef, st.tuples(st.integers(0, 3), st.integers(0, 3))), min_size=1, max_size=4)


@given(st.lists(terms, min_size=1, max_size=2), pts2)
def test_exact_and_float_evaluation_agree(comps, x):
    s = PolySection.from_terms(2, comps)
    exact = np.array([float(v) for v in s.eval(x)])
    num = s.eval_np(np.array([[float(v) for v in x]]))[0]
    assert np.allclose(exact, num, rtol=1e-12, atol=1e-9)
    J = np.array([[float(v) for v in r] for r in s.jacobian(x)]).reshape(s.fiber_rank, 2)
    assert np.allclose(J, s.jac_np(np.array([[float(v) for v in x]]))[0], rtol=1e-12, atol=1e-9)


@given(pts2)
def test_affine_compose_and_preimage(x):
    f = AffineMap.make([[1, 0], [0, 2], [0, 0]], [1, 0, 3], 2)
    g = AffineMap.make([[0, 1], [1, 0]], [0, -1], 2)
    assert f.compose(g).apply(x) == f.apply(g.apply(x))
    box = BoxUnion.of(Box.make([-2, -4, 2], [3, 4, 4]))
    assert f.preimage(box).contains(x) == box.contains(f.apply(x))


def test_axis_map_detection():
    assert AffineMap.make([[1], [0]], [0, 0], 1).is_axis
    assert not AffineMap.make([[1], [1]], [0, 0], 1).is_axis


def test_gallery_charts_pass_chart_checks():
    for name in ("EX-Z2", "EX-SYM", "EX-CHAIN", "EX-JUMP"):
        p = gallery.get(name)
        for c in p.charts.values():
            assert all(chk.ok for chk in check_chart(c)), (name, c.id)


def test_change_checks_on_chain():
    p = gallery.get("EX-CHAIN")
    for cc in p.changes.values():
        assert all(c.ok for c in check_change(cc, p.charts))
        assert check_tangent_bundle(cc, p.charts).ok


def test_intertwining_failure_has_a_witness():
    p = gallery.get("EX-CHAIN")
    cc = p.changes[("c1", "c2")]
    bad = CoordinateChange(cc.source, cc.target, cc.domain, AffineMap.make([[1], [0]], [0, F(1, 2)], 1), cc.bundle_map)
    checks = {c.name: c for c in check_change(bad, p.charts)}
    assert checks["intertwining"].verdict == "CERTIFIED-FAIL"
    assert checks["intertwining"].witness["point"] is not None


def test_tangent_bundle_fails_on_a_degenerate_normal_direction():
    q = gallery.chart("q", gallery.box((-1, 1)), gallery.section("t", "t"), [("o", (0,))])
    p = gallery.chart("p", gallery.box((-1, 1), (-1, 1)), gallery.section("t u", "t", "u**2"), [("o", (0, 0))])
    cc = gallery.change(q, p, gallery.box((-1, 1)), [[1], [0]], [0, 0], [[1], [0]])
    assert check_tangent_bundle(cc, {"q": q, "p": p}).verdict == "CERTIFIED-FAIL"


def test_composition_with_direct_change_finds_witness():
    p = gallery.get("EX-CHAIN")
    comp, h = compose_ccs(p.changes[("c2", "c3")], p.changes[("c1", "c2")], p.charts, direct=p.changes[("c1", "c3")])
    assert h == 0
    assert comp.base_map.equals(p.changes[("c1", "c3")].base_map)


def test_empty_composite_raises():
    p = gallery.get("EX-STRIP")
    with pytest.raises(EmptyComposite):
        zx = p.changes[("z", "x")]
        far = CoordinateChange("x", "y", BoxUnion.of(Box.make([1, -1], [2, 1])), AffineMap.identity(2), la.identity(2))
        compose_ccs(far, zx, p.charts)


def test_restriction_requires_invariant_subset():
    c = gallery.get("EX-SYM").charts["S"]
    with pytest.raises(NotInvariant):
        restrict_chart(c, BoxUnion.of(Box.make([0], [1])))
    with pytest.raises(NotSubset):
        restrict_chart(c, BoxUnion.of(Box.make([-2], [2])))
    assert restrict_chart(c, BoxUnion.of(Box.make([F(-1, 2)], [F(1, 2)]))).base.contains((F(0),))
