"""Shared builders for tests: gallery systems at level 1 and targets with a
reversed order on one intersecting pair."""

from fractions import Fraction

from klab import gallery
from klab import linalg as la
from klab.atlas import GoodCoordinateSystem, extract_gcs, strongly_intersecting_shrink
from klab.geometry import AffineMap, CoordinateChange
from klab.level1 import build_level1_gcs, chart_embedding, stabilize_chart


def shrunk(name, key="radii", grid=Fraction(1, 20)):
    p = gallery.get(name)
    g = extract_gcs(p, gallery.radii_of(p, key))
    return strongly_intersecting_shrink(g, grid)


def level1(name, **kw):
    return build_level1_gcs(shrunk(name), **kw)


def sub_system(g: GoodCoordinateSystem, keep) -> GoodCoordinateSystem:
    charts = {i: g.charts[i] for i in keep}
    changes = {k: cc for k, cc in g.changes.items() if k[0] in keep and k[1] in keep}
    labels = tuple(lab for lab in g.labels if any(lab in c.labels() for c in charts.values()))
    return GoodCoordinateSystem(charts, changes, {k: g.provenance.get(k, "given") for k in changes},
                                labels, None, {i: i for i in charts}, {}, None)


def reversed_chain_target(g: GoodCoordinateSystem):
    """Target for the chain system where ``c1`` is stabilized by two
    directions so that the change between ``c1`` and ``c2`` runs backwards.
    Returns the target and the chart embeddings."""
    c1, c2 = g.charts["c1"], g.charts["c2"]
    big1 = stabilize_chart(c1, 2)
    charts = {"c1": big1, "c2": c2}
    A = ((Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)), (Fraction(0), Fraction(0)))
    m21 = AffineMap(A, (Fraction(0),) * 3, 2)
    dom = c2.base.intersect(m21.preimage(big1.base))
    changes = {("c2", "c1"): CoordinateChange("c2", "c1", dom, m21, A, (0,))}
    order = ("c2", "c1")
    if "c3" in g.charts:
        c3 = g.charts["c3"]
        charts["c3"] = c3
        I3 = la.identity(3)
        m13 = AffineMap(I3, (Fraction(0),) * 3, 3)
        changes[("c1", "c3")] = CoordinateChange("c1", "c3", big1.base.intersect(c3.base), m13, I3, (0,))
        changes[("c2", "c3")] = g.changes[("c2", "c3")]
        order = ("c2", "c1", "c3")
    target = GoodCoordinateSystem(charts, changes, {k: "given" for k in changes}, g.labels, None,
                                  {i: i for i in charts}, {}, order)
    kemb = {"c1": chart_embedding(c1, big1, 2)}
    for i in charts:
        if i != "c1":
            c = g.charts[i]
            kemb[i] = CoordinateChange(i, i, c.base, AffineMap.identity(c.dim), la.identity(c.rank), (0,))
    return target, kemb
