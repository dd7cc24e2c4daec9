"""Finite presentations, axiom validation and good coordinate systems.

A presentation lists charts, coordinate changes and a finite set of X labels
with a rational metric.  A good coordinate system (GCS) is a totally ordered
family of charts with a change ``y -> x`` for every ``y < x`` whose coverages
meet.  Everything here is exact box arithmetic on top of :mod:`geometry`; the
topological probes live in :mod:`identification`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .boxes import Box, BoxUnion
from .errors import (
    BallConfigUnrealizable,
    BallTooLarge,
    CoverageLost,
    EmptyComposite,
    IndexSetChanged,
    IterationBudgetExceeded,
    MarginTooLarge,
    MixedDimensionBlock,
    NotCovering,
    NotInvariant,
    NotSubset,
    OrderNotInduced,
)
from .geometry import (
    AffineMap,
    CoordinateChange,
    KuranishiChart,
    check_chart,
    check_change,
    check_tangent_bundle,
    compose_ccs,
)
from . import linalg as la
from .identification import (
    TopologyProbeConfig,
    build_identification,
    matching_check,
    matching_samples,
    maximality_check,
    strongly_intersecting_probe,
)
from .results import Check, failed, passed

RESTRICTED = "RESTRICTED"
INVERTED = "INVERTED"
GIVEN = "GIVEN"


# ---------------------------------------------------------------------------
# presentations


@dataclass
class KuranishiPresentation:
    charts: dict  # id -> KuranishiChart
    changes: dict  # (source, target) -> CoordinateChange
    labels: tuple
    metric: dict  # (label, label) -> Fraction, both orders present
    orientation: dict = field(default_factory=dict)  # chart id -> (tangent sign, fiber sign)
    config: dict = field(default_factory=dict)
    name: str = ""

    def d(self, a: str, b: str) -> Fraction:
        if a == b:
            return Fraction(0)
        return self.metric[(a, b)]

    def chart_of_center(self, label: str) -> KuranishiChart:
        found = [c for c in self.charts.values() if c.center == label]
        if len(found) != 1:
            raise KeyError(f"no unique chart centred at {label}")
        return found[0]

    def ball(self, label: str, r) -> set:
        return {m for m in self.labels if self.d(label, m) < r}


def check_metric(p: KuranishiPresentation) -> Check:
    for a in p.labels:
        for b in p.labels:
            if p.d(a, b) != p.d(b, a) or (a != b and p.d(a, b) <= 0):
                return failed("metric", pair=(a, b))
            for c in p.labels:
                if p.d(a, c) > p.d(a, b) + p.d(b, c):
                    return failed("metric", triangle=(a, b, c))
    return passed("metric")


def existence_check(p: KuranishiPresentation) -> Check:
    """Every label is covered, and for each label q in the footprint of a chart
    centred at p there is a change from q's chart to p's chart."""
    covered = {lab for c in p.charts.values() for lab in c.labels()}
    missing = [lab for lab in p.labels if lab not in covered]
    if missing:
        return failed("existence", uncovered=tuple(missing))
    centers = {c.center: c.id for c in p.charts.values() if c.center is not None}
    for c in p.charts.values():
        for lab in c.labels():
            if lab != c.center and lab in centers and (centers[lab], c.id) not in p.changes:
                return failed("existence", missing_change=f"{centers[lab]}->{c.id}")
    return passed("existence")


def compatibility_check(system, grid_step=Fraction(1, 20)) -> Check:
    """For every composable triple ``r -> q -> p`` with a direct change
    ``r -> p``, the composite equals a group element times the direct change
    on the common domain.  An empty common domain is vacuous."""
    n = 0
    for (r, q), cc_rq in sorted(system.changes.items()):
        for (q2, p), cc_qp in sorted(system.changes.items()):
            if q2 != q or p == r or p == q or r == q:
                continue
            direct = system.changes.get((r, p))
            if direct is None:
                continue
            try:
                _, w = compose_ccs(cc_qp, cc_rq, system.charts, direct=direct)
            except EmptyComposite:
                continue
            n += 1
            if w == "NoWitness":
                return failed("compatibility", triple=(r, q, p))
    return passed("compatibility", triples=n)


@dataclass
class ValidationReport:
    checks: dict  # name -> Check for compatibility / maximality / matching
    structural: list  # per-chart and per-change checks
    grid_step: Fraction

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks.values()) and all(c.ok for c in self.structural)


def validate_presentation(p: KuranishiPresentation, grid_step=Fraction(1, 20),
                          cfg: TopologyProbeConfig | None = None) -> ValidationReport:
    grid_step = Fraction(grid_step)
    cfg = cfg or TopologyProbeConfig(grid_step=grid_step)
    structural: list[Check] = [check_metric(p), existence_check(p)]
    for cid in sorted(p.charts):
        for c in check_chart(p.charts[cid]):
            c.notes.append({"chart": cid})
            structural.append(c)
    for key in sorted(p.changes):
        cc = p.changes[key]
        for c in check_change(cc, p.charts, grid_step) + [check_tangent_bundle(cc, p.charts, grid_step)]:
            c.notes.append({"change": f"{key[0]}->{key[1]}"})
            structural.append(c)
    ident = build_identification(p, cfg, extra=matching_samples(p, cfg))
    checks = {
        "compatibility": compatibility_check(p, grid_step),
        "maximality": maximality_check(ident, resolution=grid_step),
        "matching": matching_check(p, cfg, ident),
    }
    return ValidationReport(checks, structural, grid_step)


# ---------------------------------------------------------------------------
# good coordinate systems


def order_key(chart: KuranishiChart) -> tuple:
    return (chart.rank, chart.group.order, chart.id)


@dataclass
class GoodCoordinateSystem:
    charts: dict  # index -> chart (chart.id == index)
    changes: dict  # (y, x) -> CoordinateChange with y < x
    provenance: dict
    labels: tuple
    source: KuranishiPresentation | None = None
    underlying: dict = field(default_factory=dict)  # index -> chart id in source
    flags: dict = field(default_factory=dict)
    explicit_order: tuple | None = None  # overrides the rank order when given

    @property
    def order(self) -> tuple:
        if self.explicit_order is not None:
            return tuple(self.explicit_order)
        return tuple(sorted(self.charts, key=lambda i: order_key(self.charts[i])))

    def le(self, y, x) -> bool:
        if self.explicit_order is not None:
            pos = {k: n for n, k in enumerate(self.explicit_order)}
            return pos[y] <= pos[x]
        return order_key(self.charts[y]) <= order_key(self.charts[x])

    @property
    def leq_table(self) -> dict:
        return {(y, x): self.le(y, x) for y in self.charts for x in self.charts}

    @property
    def coverage(self) -> dict:
        return {i: frozenset(c.labels()) for i, c in self.charts.items()}

    def index_pairs(self) -> set:
        if self.explicit_order is None:
            return index_pairs(self.charts, self.coverage)
        cov = self.coverage
        return {(y, x) for y, x in itertools.permutations(self.charts, 2)
                if self.le(y, x) and not self.le(x, y) and cov[y] & cov[x]}


def index_pairs(charts: dict, coverage: dict) -> set:
    out = set()
    for y, x in itertools.permutations(charts, 2):
        if order_key(charts[y]) < order_key(charts[x]) and coverage[y] & coverage[x]:
            out.add((y, x))
    return out


def _restrict_change(cc: CoordinateChange, src_base: BoxUnion, tgt_base: BoxUnion) -> CoordinateChange:
    dom = cc.domain.intersect(src_base).intersect(cc.base_map.preimage(tgt_base))
    return cc.with_domain(dom)


def _invert_change(cc: CoordinateChange, src: KuranishiChart, tgt: KuranishiChart) -> CoordinateChange:
    """Inverse of an equal-dimension change ``src -> tgt``, as ``tgt -> src``."""
    inv = cc.base_map.inverse()
    image = BoxUnion.from_list(tgt.dim, [cc.base_map.image_box(b) for b in cc.domain.boxes])
    hom = None
    if cc.group_hom is not None and sorted(cc.group_hom) == list(range(tgt.group.order)):
        hom = tuple(cc.group_hom.index(k) for k in range(tgt.group.order))
    return CoordinateChange(tgt.id, src.id, image, inv, la.inverse(cc.bundle_map), hom)


def extract_gcs(p: KuranishiPresentation, radii: dict, seeds: Iterable[str] | None = None) -> GoodCoordinateSystem:
    """Restrict the seed charts by deleting zeros outside the half-balls and
    assemble changes by restriction, or by inversion when only the reverse
    change exists."""
    radii = {k: Fraction(v) for k, v in radii.items()}
    seeds = sorted(seeds if seeds is not None else radii)
    charts: dict = {}
    underlying: dict = {}
    for x in seeds:
        c = p.chart_of_center(x)
        ball = p.ball(x, radii[x])
        if not ball <= set(c.labels()):
            raise BallTooLarge(f"the ball of radius {radii[x]} around {x} leaves the coverage of chart {c.id}",
                               seed=x, outside=tuple(sorted(ball - set(c.labels()))))
        half = p.ball(x, radii[x] / 2)
        drop = [q for lab, pt in c.footprint if lab not in half for q in c.group.orbit(pt)]
        charts[c.id] = c.with_base(c.base.minus_points(drop))
        underlying[c.id] = c.id
    covered = set().union(*(set(c.labels()) for c in charts.values())) if charts else set()
    missing = [lab for lab in p.labels if lab not in covered]
    if missing:
        raise NotCovering(f"half-balls miss {', '.join(missing)}", missing=tuple(missing))
    cov = {i: frozenset(c.labels()) for i, c in charts.items()}
    changes, prov = {}, {}
    for y, x in sorted(index_pairs(charts, cov)):
        cy, cx = charts[y], charts[x]
        if (y, x) in p.changes and cy.center in p.charts[x].labels():
            changes[(y, x)] = _restrict_change(p.changes[(y, x)], cy.base, cx.base)
            prov[(y, x)] = RESTRICTED
        elif (x, y) in p.changes and cx.center in p.charts[y].labels():
            if cy.dim != cx.dim or cy.group.order != cx.group.order or cy.rank != cx.rank:
                raise BallConfigUnrealizable(
                    f"only the change {x}->{y} exists but the charts have different dimensions", pair=(y, x))
            inv = _invert_change(p.changes[(x, y)], p.charts[x], p.charts[y])
            changes[(y, x)] = _restrict_change(inv, cy.base, cx.base)
            prov[(y, x)] = INVERTED
        else:
            raise BallConfigUnrealizable(f"no change between {y} and {x} in either direction", pair=(y, x))
    return GoodCoordinateSystem(charts, changes, prov, tuple(p.labels), p, underlying)


def as_gcs(charts: Iterable[KuranishiChart], changes: Iterable[CoordinateChange], labels: Iterable[str],
           source=None) -> GoodCoordinateSystem:
    """Wrap explicitly given charts and changes as a GCS (order by the usual key)."""
    charts = {c.id: c for c in charts}
    ch = {(c.source, c.target): c for c in changes}
    for (y, x) in ch:
        if not order_key(charts[y]) < order_key(charts[x]):
            raise OrderNotInduced(f"change {y}->{x} goes against the order")
    return GoodCoordinateSystem(charts, ch, {k: GIVEN for k in ch}, tuple(labels), source,
                                {i: i for i in charts})


def check_gcs(g: GoodCoordinateSystem, grid_step=Fraction(1, 20)) -> list[Check]:
    """Structural checks for a GCS: order, dimension monotonicity, covering,
    the change table over I, inverted-change shapes, change axioms and
    compatibility."""
    out: list[Check] = []
    bad = [(y, x) for y in g.charts for x in g.charts
           if g.charts[y].rank < g.charts[x].rank and not (g.le(y, x) and not g.le(x, y))]
    out.append(passed("order_dimension") if not bad else failed("order_dimension", pair=bad[0]))
    covered = set().union(*g.coverage.values()) if g.charts else set()
    miss = sorted(set(g.labels) - covered)
    out.append(passed("covering") if not miss else failed("covering", missing=tuple(miss)))
    pairs = g.index_pairs()
    missing = sorted(pairs - set(g.changes))
    out.append(passed("change_table") if not missing else failed("change_table", missing=missing[0]))
    for k, prov in sorted(g.provenance.items()):
        if prov == INVERTED:
            y, x = k
            if g.charts[y].dim != g.charts[x].dim or g.charts[y].group.order != g.charts[x].group.order:
                out.append(failed("inverted_shape", pair=k))
    for k in sorted(g.changes):
        cc = g.changes[k]
        if cc.domain.is_empty():
            continue
        for c in check_change(cc, g.charts, grid_step) + [check_tangent_bundle(cc, g.charts, grid_step)]:
            c.notes.append({"change": f"{k[0]}->{k[1]}"})
            out.append(c)
    out.append(compatibility_check(g, grid_step))
    return out


def composition_closed(g: GoodCoordinateSystem) -> Check:
    """Whenever two listed changes compose on a nonempty domain, the direct
    change is present and contains that domain."""
    for (z, y), a in sorted(g.changes.items()):
        for (y2, x), b in sorted(g.changes.items()):
            if y2 != y:
                continue
            dom = a.domain.intersect(a.base_map.preimage(b.domain))
            if dom.is_empty():
                continue
            direct = g.changes.get((z, x))
            if direct is None or not dom.subset_of(direct.domain):
                return failed("composition_closed", triple=(z, y, x))
    return passed("composition_closed")


# ---------------------------------------------------------------------------
# shrinkings


def shrink_gcs(g: GoodCoordinateSystem, bases: dict) -> GoodCoordinateSystem:
    """Restrict every chart to ``bases[index]`` (missing indices keep their base)
    and restrict changes accordingly."""
    charts = {}
    for i, c in g.charts.items():
        sub = bases.get(i, c.base)
        if not sub.subset_of(c.base):
            raise NotSubset(f"shrinking of {i} is not inside its base")
        if not c.group.base_invariant(sub):
            raise NotInvariant(f"shrinking of {i} is not group invariant")
        charts[i] = c.with_base(sub)
    covered = set().union(*(set(c.labels()) for c in charts.values())) if charts else set()
    lost = sorted(set(g.labels) - covered)
    if lost:
        raise CoverageLost(f"shrinking loses {', '.join(lost)}", lost=tuple(lost))
    changes = {k: _restrict_change(cc, charts[k[0]].base, charts[k[1]].base) for k, cc in g.changes.items()}
    out = GoodCoordinateSystem(charts, changes, dict(g.provenance), g.labels, g.source, dict(g.underlying),
                               dict(g.flags), g.explicit_order)
    if out.index_pairs() != g.index_pairs():
        raise IndexSetChanged("shrinking changes the set of intersecting pairs",
                              before=sorted(g.index_pairs()), after=sorted(out.index_pairs()))
    return out


def _clearance(u: BoxUnion, z: tuple) -> Fraction:
    """Largest r = 2^-k (k >= 0) with the open cube of radius r around z inside u."""
    r = Fraction(1)
    for _ in range(60):
        if BoxUnion.of(Box.cube(z, r)).subset_of(u):
            return r
        r /= 2
    return Fraction(0)


def default_margin(g: GoodCoordinateSystem) -> Fraction:
    """A power of two below a quarter of the zero separation and half the
    clearance of every footprint zero."""
    m = Fraction(1)
    for c in g.charts.values():
        zs = c.zero_points()
        for a, b in itertools.combinations(zs, 2):
            m = min(m, max(abs(u - v) for u, v in zip(a, b)) / 4)
        for z in zs:
            m = min(m, _clearance(c.base, z) / 2)
    k = Fraction(1)
    while k > m:
        k /= 2
    return k


def zero_neighbourhood(c: KuranishiChart, radius) -> BoxUnion:
    """Union of cubes of the given radius around the footprint orbits."""
    return BoxUnion.from_list(c.dim, [Box.cube(z, radius) for z in c.zero_points()]).simplify()


def strong_shrinking_sequence(g: GoodCoordinateSystem, k: int, margin=None) -> list[GoodCoordinateSystem]:
    """Member j (1-based) keeps cubes of radius ``margin * 2^(1-j)`` around the
    footprint zeros of every chart."""
    if k <= 0:
        return []
    for c in g.charts.values():
        if not c.base.bounded():
            raise MarginTooLarge(f"chart {c.id} has an unbounded base")
    margin = Fraction(margin) if margin is not None else default_margin(g)
    out = []
    for j in range(1, k + 1):
        r = margin * Fraction(2) ** (1 - j)
        bases = {}
        for i, c in g.charts.items():
            u = zero_neighbourhood(c, r)
            if not u.closure_subset_of(c.base):
                raise MarginTooLarge(f"margin {margin} does not fit inside chart {i}", index=i, margin=margin)
            bases[i] = u
        try:
            out.append(shrink_gcs(g, bases))
        except (CoverageLost, IndexSetChanged) as e:
            raise MarginTooLarge(f"margin {margin} changes the coverage: {e}", margin=margin) from e
    return out


def strongly_intersecting_shrink(g: GoodCoordinateSystem, grid_step=Fraction(1, 20), max_iters: int = 6,
                                 margin=None) -> GoodCoordinateSystem:
    """Walk down the strong shrinking sequence until the strongly intersecting
    probe passes; iteration 0 is ``g`` itself."""
    cfg = TopologyProbeConfig(grid_step=Fraction(grid_step))
    last = None
    for j in range(max_iters + 1):
        cand = g if j == 0 else strong_shrinking_sequence(g, j, margin)[-1]
        chk = strongly_intersecting_probe(cand, cfg)
        if chk.ok:
            cand.flags["strongly_intersecting"] = True
            cand.flags["shrink_iteration"] = j
            return cand
        last = chk
    raise IterationBudgetExceeded(f"still not strongly intersecting after {max_iters} shrinkings",
                                  witness=last.witness if last is not None else None)


# ---------------------------------------------------------------------------
# grouping by an order partition


@dataclass
class OrderPartition:
    blocks: tuple  # tuple of tuples of indices, in increasing block order

    def block_of(self, i) -> int:
        return next(k for k, b in enumerate(self.blocks) if i in b)


@dataclass
class BlockChart:
    """A disjoint union of same-rank charts treated as one chart."""

    name: str
    components: tuple  # charts

    @property
    def rank(self) -> int:
        return self.components[0].rank

    @property
    def coverage(self) -> frozenset:
        return frozenset(lab for c in self.components for lab in c.labels())


@dataclass
class GroupedGCS:
    gcs: GoodCoordinateSystem
    partition: OrderPartition
    charts: tuple  # BlockChart per block
    changes: dict  # (block_y, block_x) -> tuple of component changes


def partition_by_rank(g: GoodCoordinateSystem) -> OrderPartition:
    ranks = sorted({c.rank for c in g.charts.values()})
    return OrderPartition(tuple(tuple(i for i in g.order if g.charts[i].rank == r) for r in ranks))


def group_by_partition(g: GoodCoordinateSystem, part: OrderPartition) -> GroupedGCS:
    flat = [i for b in part.blocks for i in b]
    if sorted(flat) != sorted(g.charts) or len(set(flat)) != len(flat):
        raise OrderNotInduced("the partition does not cover every index exactly once")
    for b in part.blocks:
        if len({g.charts[i].rank for i in b}) != 1:
            raise MixedDimensionBlock(f"block {b} mixes bundle ranks", block=b)
    for a, b in itertools.combinations(range(len(part.blocks)), 2):
        for y in part.blocks[a]:
            for x in part.blocks[b]:
                if not g.le(y, x):
                    raise OrderNotInduced(f"{y} lies in an earlier block than {x} but is not below it", pair=(y, x))
    blocks = tuple(BlockChart("+".join(b), tuple(g.charts[i] for i in b)) for b in part.blocks)
    changes: dict = {}
    for (y, x), cc in sorted(g.changes.items()):
        changes.setdefault((part.block_of(y), part.block_of(x)), []).append(cc)
    return GroupedGCS(g, part, blocks, {k: tuple(v) for k, v in changes.items()})


# ---------------------------------------------------------------------------
# the induced presentation


def induce_kuranishi(g: GoodCoordinateSystem) -> KuranishiPresentation:
    """One chart per label: the smallest index covering it, with changes
    taken from the GCS table (or the identity inside one index)."""
    order = g.order
    home = {lab: next(i for i in order if lab in g.coverage[i]) for lab in g.labels}
    users: dict = {}
    for lab, i in home.items():
        users.setdefault(i, []).append(lab)
    charts = {}
    names = {}
    for lab in g.labels:
        i = home[lab]
        c = g.charts[i]
        name = i if (c.center == lab or len(users[i]) == 1) else f"{i}@{lab}"
        names[lab] = name
        charts[name] = KuranishiChart(name, c.base, c.rank, c.group, c.section, c.footprint, lab)
    changes = {}
    for p_lab in g.labels:
        for q_lab in g.labels:
            if q_lab == p_lab or q_lab not in charts[names[p_lab]].labels():
                continue
            iq, ip = home[q_lab], home[p_lab]
            src, tgt = names[q_lab], names[p_lab]
            if iq == ip:
                c = g.charts[iq]
                changes[(src, tgt)] = CoordinateChange(src, tgt, c.base, AffineMap.identity(c.dim),
                                                       la.identity(c.rank), tuple(range(c.group.order)))
            else:
                cc = g.changes[(iq, ip)]
                changes[(src, tgt)] = CoordinateChange(src, tgt, cc.domain, cc.base_map, cc.bundle_map, cc.group_hom)
    metric = dict(g.source.metric) if g.source is not None else {}
    orientation = {}
    if g.source is not None:
        for lab in g.labels:
            orientation[names[lab]] = g.source.orientation.get(g.underlying.get(home[lab], home[lab]), (1, 1))
    return KuranishiPresentation(charts, changes, tuple(g.labels), metric, orientation,
                                 name=(g.source.name + "-induced") if g.source is not None else "induced")
