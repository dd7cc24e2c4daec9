from fractions import Fraction

import pytest

from klab import gallery
from klab.identification import (TopologyProbeConfig, UnionFind, build_identification, matching_check,
                                  maximal_domain, maximality_check)

F = Fraction


def test_union_find_uses_the_minimum_representative():
    uf = UnionFind()
    for x in (3, 1, 2):
        uf.add(x)
    uf.union(3, 2)
    uf.union(2, 1)
    assert uf.find(3) == 1


def test_identification_glues_along_changes_and_groups():
    p = gallery.get("EX-FIG3")
    ident = build_identification(p, TopologyProbeConfig(grid_step=F(1, 10)), extra=[("q", (1,))])
    assert ident.same(("q", (F(1),)), ("p", (F(1),)))
    assert not ident.same(("q", (F(1),)), ("p", (F(0),)))
    sym = gallery.get("EX-SYM")
    ident = build_identification(sym, TopologyProbeConfig(grid_step=F(1, 10)))
    assert ident.same(("S", (F(2, 5),)), ("S", (F(-2, 5),)))


def test_maximal_domain_matches_the_declared_domain():
    p = gallery.get("EX-FIG3")
    ident = build_identification(p, TopologyProbeConfig(grid_step=F(1, 10)))
    dom = maximal_domain(ident, "q", "p")
    assert dom["extra"] == [] and dom["missing"] == []
    assert maximality_check(ident).ok


def test_matching_witness_names_a_shared_sequence():
    p = gallery.get("EX-DISKS")
    c = matching_check(p, TopologyProbeConfig(grid_step=F(1, 20)))
    assert c.verdict == "CERTIFIED-FAIL"
    a, b = c.witness["sequence_sample"]
    assert a.startswith("x(") or a.startswith("y(")


def test_identification_csv_is_sorted_and_stable():
    p = gallery.get("EX-FIG3")
    cfg = TopologyProbeConfig(grid_step=F(1, 4))
    one = build_identification(p, cfg).to_csv()
    two = build_identification(p, cfg).to_csv()
    assert one == two
    assert one.splitlines()[0] == "chart_id,coords,class_id,flag"


def test_delta_schedule_must_decrease():
    with pytest.raises(ValueError):
        TopologyProbeConfig(delta_schedule=(F(1, 4), F(1, 2)))
