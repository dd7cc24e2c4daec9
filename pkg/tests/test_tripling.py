import itertools
from fractions import Fraction

import pytest

from fixtures import level1, reversed_chain_target, sub_system
from klab import gallery
from klab import linalg as la
from klab.atlas import check_gcs
from klab.boxes import Box, BoxUnion
from klab.degree import chart_count
from klab.errors import HypothesisViolation, NotAdmissible, NotConcerted, NotTripled
from klab.level1 import build_level1_embedding, build_level1_gcs, stabilize_gcs
from klab.pipeline import count_gcs, level1_presentation
from klab import tripling as tp

F = Fraction
SCENES = ["EX-Z2", "EX-SYM", "EX-JUMP", "EX-CHAIN", "EX-FIG3", "EX-FIG4", "EX-STRIP"]


@pytest.fixture(scope="module")
def tripled():
    out = {}
    for name in SCENES:
        l1g = level1_presentation(gallery.get(name))
        out[name] = (l1g, tp.build_tripling(l1g))
    return out


@pytest.mark.parametrize("name", SCENES)
def test_family_matches_sampled_enumeration(name, tripled):
    l1g, tr = tripled[name]
    assert len(l1g.order) <= 4
    assert tp.sampled_family(l1g, tr.cover) == list(tr.index.candidates)


@pytest.mark.parametrize("name", SCENES)
def test_cover_and_refinement_checks_pass(name, tripled):
    _, tr = tripled[name]
    assert all(c.ok for c in tr.checks), [(c.name, c.witness) for c in tr.checks if not c.ok]


@pytest.mark.parametrize("name", SCENES)
def test_nesting_and_its_converse(name, tripled):
    l1g, tr = tripled[name]
    assert tp.verify_nesting(l1g, tr.index).ok
    assert tp.probe_nesting(l1g, tr.index).ok
    assert tp.verify_converse(l1g, tr.index).ok


def test_expected_families(tripled):
    assert tripled["EX-Z2"][1].index.listing() == ["{Z}"]
    assert tripled["EX-JUMP"][1].index.listing() == ["{q}", "{p}", "{q,p}"]
    chain = tripled["EX-CHAIN"][1].index
    assert chain.listing() == ["{c1}", "{c2}", "{c3}", "{c1,c2}", "{c2,c3}", "{c1,c2,c3}"]
    assert chain.pruned == (("c1", "c3"),)


def test_singleton_tripling_is_trivial(tripled):
    _, tr = tripled["EX-SYM"]
    assert tr.cover == {}
    assert tr.refined.order == ("S",)
    assert tr.refined.changes == {}


def test_cover_inner_regions_are_nested(tripled):
    l1g, tr = tripled["EX-CHAIN"]
    v12 = tr.cover[("c1", "c2")].V1
    v13 = tr.cover[("c1", "c3")].V1
    assert v13.closure_subset_of(v12)


def test_exact_and_sampled_intersections_agree(tripled):
    l1g, tr = tripled["EX-CHAIN"]
    _, tags = tp.nesting_identification(l1g, tr.index, F(1, 16))
    assert tp.intersecting_pairs(tags) <= tr.intersecting


@pytest.mark.parametrize("name", ["EX-JUMP", "EX-CHAIN", "EX-FIG3"])
def test_corrupted_cover_is_caught_with_a_witness(name, tripled):
    l1g, tr = tripled[name]
    pair = sorted(tr.cover)[0]
    bad = tp.build_index(l1g, tp.corrupt_cover(l1g, tr.cover, pair))
    exact = tp.verify_nesting(l1g, bad)
    probe = tp.probe_nesting(l1g, bad)
    assert exact.verdict == "CERTIFIED-FAIL" and exact.witness["point"]
    assert probe.verdict == "CERTIFIED-FAIL" and len(probe.witness["points"]) == 2


@pytest.mark.parametrize("name", ["EX-JUMP", "EX-CHAIN"])
def test_refined_system_is_a_good_coordinate_system(name, tripled):
    _, tr = tripled[name]
    assert all(c.ok for c in check_gcs(tr.refined))
    for T1, T2 in tr.intersecting:
        if set(T1) < set(T2):
            assert (tr.ids[T1], tr.ids[T2]) in tr.refined.changes


def test_intersecting_members_are_comparable_by_inclusion(tripled):
    _, tr = tripled["EX-CHAIN"]
    for T1, T2 in tr.intersecting:
        assert set(T1) <= set(T2) or set(T2) <= set(T1)


def test_regions_cover_every_label(tripled):
    for name in SCENES:
        l1g, tr = tripled[name]
        covered = {lab for T in tr.index.members for lab, p in l1g.charts[T[-1]].footprint
                   if tr.index.regions[T].contains(p)}
        assert covered == set(l1g.gcs.labels), name


# ---------------------------------------------------------------------------
# concerted embeddings and admissibility


def test_reversed_target_is_concerted_after_tripling(tripled):
    l1g, tr = tripled["EX-CHAIN"]
    target, kemb = reversed_chain_target(l1g.gcs)
    assert tp.order_conflicts(l1g.gcs, target) == [("c1", "c2")]
    ce = tp.concert_embedding(kemb, tr, target)
    assert ce.audit().ok
    assert ce.target_index[("c1", "c2")] == "c1"
    assert ce.target_index[("c1", "c2", "c3")] == "c3"


def test_two_chart_reversal():
    l1g = build_level1_gcs(sub_system(level1("EX-CHAIN").gcs, ["c1", "c2"]))
    target, kemb = reversed_chain_target(l1g.gcs)
    with pytest.raises(NotConcerted):
        build_level1_embedding(kemb, l1g, target)
    tr = tp.build_tripling(l1g)
    ce = tp.concert_embedding(kemb, tr, target)
    assert ce.audit().ok and ce.conflicts == [("c1", "c2")]


def test_admissible_reorder_only_constrains_intersecting_pairs():
    a = {"x": 0, "y": 1, "z": 2}
    b = {"x": 1, "y": 0, "z": 2}
    chk, order = tp.admissible_reorder(["x", "y", "z"], [a, b], {("x", "z"), ("z", "x")})
    assert chk.ok and order == ("x", "y", "z")
    chk, order = tp.admissible_reorder(["x", "y", "z"], [a, b], {("x", "y"), ("y", "x")})
    assert not chk.ok and order is None
    assert chk.witness["pairs"] == (("x", "y"),)


# ---------------------------------------------------------------------------
# fiber products


@pytest.fixture(scope="module")
def synthetic():
    dom, targets = tp.synthetic_pair()
    l1g = build_level1_gcs(dom)
    tr = tp.build_tripling(l1g)
    embs = [build_level1_embedding(k, l1g, t) for t, k in targets]
    return tp.fiber_product(embs[0], embs[1], tr)


def test_synthetic_pair_has_fiber_product_dimension_ten(synthetic):
    dims = {tp.label(T): fc.dims for T, fc in synthetic.charts.items()}
    assert dims["y"]["E1"] == 6 and dims["y"]["E2"] == 6 and dims["y"]["E_min"] == 2
    assert dims["y"]["actual"] == 10 == dims["y"]["formula"]
    assert dims["y+x"]["actual"] == 10
    assert synthetic.dim(("y",)) == 10


def test_synthetic_pair_checks_pass(synthetic):
    names = {c.name for c in synthetic.checks}
    assert {"fp_dimension", "fp_monotone", "tangent_bundle", "intertwining"} <= names
    assert all(c.ok for c in synthetic.checks)


def _stabilized_fp(l1g, k=1):
    tr = tp.build_tripling(l1g)
    embs = []
    for _ in range(2):
        big, kemb = stabilize_gcs(l1g.gcs, k)
        embs.append(build_level1_embedding(kemb, l1g, big))
    return tp.fiber_product(embs[0], embs[1], tr)


def test_chain_fiber_product_is_monotone_and_tangent():
    fp = _stabilized_fp(level1("EX-CHAIN"))
    assert all(c.ok for c in fp.checks), [(c.name, c.witness, c.notes) for c in fp.checks if not c.ok]
    dims = {tp.label(T): fp.dim(T) for T in fp.charts}
    assert dims == {"c1": 3, "c2": 4, "c3": 5, "c1+c2": 5, "c2+c3": 6, "c1+c2+c3": 7}
    for T1, T2 in itertools.permutations(fp.charts, 2):
        if set(T1) < set(T2):
            assert fp.dim(T1) <= fp.dim(T2)
    assert sum(1 for c in fp.checks if c.name == "tangent_bundle") == len(fp.gcs.changes)


def test_z2_fiber_product_counts_two():
    fp = _stabilized_fp(level1("EX-Z2"), 2)
    chart = next(iter(fp.gcs.charts.values()))
    assert chart.dim == 6
    assert chart_count(chart) == 2
    assert count_gcs(fp.gcs)[0] == 2


def test_fiber_product_needs_a_section_independent_of_normal_directions():
    with pytest.raises(HypothesisViolation):
        _stabilized_fp(level1("EX-JUMP"))


def test_fiber_product_requires_the_tripled_source():
    l1g = level1("EX-Z2")
    other = level1("EX-Z2")
    tr = tp.build_tripling(other)
    big, kemb = stabilize_gcs(l1g.gcs, 1)
    emb = build_level1_embedding(kemb, l1g, big)
    with pytest.raises(NotTripled):
        tp.fiber_product(emb, emb, tr)


def test_fiber_product_rejects_disagreeing_orders():
    l1g = build_level1_gcs(sub_system(level1("EX-CHAIN").gcs, ["c1", "c2"]))
    tr = tp.build_tripling(l1g)
    big, kemb = stabilize_gcs(l1g.gcs, 1)
    good = build_level1_embedding(kemb, l1g, big)
    flipped = type(big)(big.charts, big.changes, big.provenance, big.labels, None, big.underlying, {}, ("c2", "c1"))
    bad = type(good)(l1g, flipped, good.per_index, good.witnesses)
    with pytest.raises(NotAdmissible):
        tp.fiber_product(good, bad, tr)


def test_rowwise_preimage_of_a_box():
    A = la.mat([[1, 0], [0, 2], [0, 0]])
    box = Box.make([0, 0, -1], [1, 4, 1])
    pre = tp.rowwise_preimage(A, (F(0), F(0), F(0)), box, 2)
    assert pre == Box.make([0, 0], [1, 2])
    assert tp.rowwise_preimage(A, (F(0), F(0), F(2)), box, 2) is None
    u = tp.rowwise_preimage_union(A, (F(0),) * 3, BoxUnion.of(box), 2)
    assert u.contains((F(1, 2), F(1)))
