"""Tripling: a chart-refinement of a level-1 good coordinate system indexed
by subsets of the original index set, the nesting check on it, concerted
embeddings, admissible reordering and fiber products of embedding pairs.

For every intersecting pair ``(b, a)`` three regions are chosen:

* ``U1`` in chart ``b``: the base minus the closure of an inset ``V1`` of the
  change domain,
* ``U2`` in chart ``a``: the tube over ``V1`` inside the level-1 region ``W``
  together with everything outside the closure of the orbit of ``W``,
* ``U3`` in chart ``a``: the orbit of ``W``.

Subsets ``T`` whose members all change into ``max T`` and whose ``U3``
regions meet are kept, each with the region ``U_T`` in chart ``max T``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction

from . import linalg as la
from .atlas import GoodCoordinateSystem, _restrict_change
from .boxes import INF, Box, BoxUnion
from .errors import HypothesisViolation, NoRoomToShrink, NotAdmissible, NotConcerted, NotTripled
from .geometry import AffineMap, CoordinateChange, GroupAction, KuranishiChart, PolySection, check_change, \
    check_tangent_bundle
from .identification import TopologyProbeConfig, build_identification
from .level1 import Level1CoordinateChange, Level1Embedding, Level1GCS, make_level1
from .results import Check, failed, passed

log = logging.getLogger(__name__)

DEFAULT_INSET = Fraction(1, 8)


# ---------------------------------------------------------------------------
# region helpers


def orbit_union(chart: KuranishiChart, u: BoxUnion) -> BoxUnion:
    """Union of all group translates of ``u``."""
    out = u
    for g, _ in chart.group.elements:
        out = out.union(u.signed_perm_image(g.perm, g.signs))
    return out


def inset(u: BoxUnion, frac) -> BoxUnion:
    """Shrink every box of ``u`` by ``frac`` of its side on each end."""
    frac = Fraction(frac)
    boxes = []
    for b in u.boxes:
        if not b.bounded():
            raise NoRoomToShrink("cannot inset an unbounded box")
        boxes.append(Box(tuple(l + frac * (h - l) for l, h in zip(b.lo, b.hi)),
                         tuple(h - frac * (h - l) for l, h in zip(b.lo, b.hi))))
    return BoxUnion.from_list(u.dim, boxes)


def box_samples(u: BoxUnion, grid_step, budget: int = 4096) -> list[tuple]:
    """Midpoints of a uniform subdivision of every box, ``1/grid_step`` cells
    per axis capped so that a box yields at most ``budget`` points, plus
    the box centres."""
    per_axis = max(1, min(int(1 / Fraction(grid_step)), int(round(budget ** (1 / max(u.dim, 1))))))
    pts = set()
    for b in u.boxes:
        if not b.bounded():
            raise ValueError("cannot sample an unbounded box")
        axes = [[l + (h - l) * Fraction(2 * i + 1, 2 * per_axis) for i in range(per_axis)]
                for l, h in zip(b.lo, b.hi)]
        pts.update(itertools.product(*axes))
        pts.add(b.center())
    return sorted(pts)


def label(T: tuple) -> str:
    return "+".join(T)


# ---------------------------------------------------------------------------
# tripled cover


@dataclass(frozen=True)
class TripleCover:
    """The three regions chosen for one intersecting pair ``(b, a)``."""

    pair: tuple
    V1: BoxUnion  # chart b
    U1: BoxUnion  # chart b
    U2: BoxUnion  # chart a
    U3: BoxUnion  # chart a


def _core(l1g: Level1GCS, b, a) -> BoxUnion:
    """Boxes of the change domain ``b -> a`` cut down by every other outgoing
    change domain of ``b`` that meets them, so that inner regions of all
    changes out of ``b`` coincide near each common point."""
    D = l1g.table[(b, a)].cc.domain
    others = [l1.cc.domain for (bb, aa), l1 in sorted(l1g.table.items()) if bb == b and aa != a]
    boxes = []
    for B in D.boxes:
        core = BoxUnion(D.dim, (B,))
        for O in others:
            cut = core.intersect(O)
            if not cut.is_empty():
                core = cut
        boxes.extend(core.boxes)
    return BoxUnion.from_list(D.dim, boxes)


def choose_cover(l1g: Level1GCS, frac=DEFAULT_INSET) -> dict:
    """One TripleCover per entry of the level-1 table.  Inner regions of the
    changes out of one chart are strictly nested, deeper for later targets."""
    out = {}
    frac = Fraction(frac)
    order = l1g.order
    for (b, a), l1 in sorted(l1g.table.items()):
        cb, ca = l1g.charts[b], l1g.charts[a]
        D = l1.cc.domain
        targets = sorted((aa for bb, aa in l1g.table if bb == b), key=order.index)
        depth = frac * (targets.index(a) + 1) / len(targets)
        V1 = orbit_union(cb, inset(_core(l1g, b, a), depth))
        if V1.is_empty() or not V1.closure_subset_of(D):
            raise NoRoomToShrink(f"no invariant inset of the change domain {b}->{a}", pair=(b, a))
        U3 = orbit_union(ca, l1.tub.W)
        U1 = cb.base.minus_closure(V1)
        near = orbit_union(ca, l1.tub.W.intersect(l1.tub.preimage(V1)))
        U2 = near.union(ca.base.minus_closure(U3))
        out[(b, a)] = TripleCover((b, a), V1, U1, U2, U3)
    return out


def check_cover(l1g: Level1GCS, cover: dict) -> list[Check]:
    """Exact box checks of the four conditions on every pair."""
    checks = []
    for (b, a), tc in sorted(cover.items()):
        l1 = l1g.table[(b, a)]
        cb, ca = l1g.charts[b], l1g.charts[a]
        D = l1.cc.domain
        pair = f"{b}->{a}"
        ok_a = cb.base.subset_of(tc.U1.union(D))
        checks.append(passed("cover_outside_domain", pair=pair) if ok_a else failed("cover_outside_domain", pair=pair))
        ok_b = ca.base.minus_closure(tc.U3).subset_of(tc.U2)
        checks.append(passed("cover_outside_tube", pair=pair) if ok_b else failed("cover_outside_tube", pair=pair))
        S = l1.tub.W.intersect(tc.U2)
        P = l1.cc.base_map.preimage(S)
        ok_c = l1.tub.preimage(P).intersect(l1.tub.W).same_set(S)
        checks.append(passed("cover_saturated", pair=pair) if ok_c else failed("cover_saturated", pair=pair))
        ok_d = _restrict_change(l1.cc, tc.U1, tc.U2).domain.is_empty()
        checks.append(passed("cover_separated", pair=pair) if ok_d else failed("cover_separated", pair=pair))
        inv = cb.group.base_invariant(tc.U1) and ca.group.base_invariant(tc.U2)
        checks.append(passed("cover_invariant", pair=pair) if inv else failed("cover_invariant", pair=pair))
    return checks


# ---------------------------------------------------------------------------
# the subset family


@dataclass
class TriplingIndex:
    order: tuple  # original index order
    members: tuple  # admissible subsets, each a tuple sorted by the original order
    regions: dict  # T -> U_T in chart max T
    candidates: tuple  # admissible subsets before empty regions are dropped
    pruned: tuple = ()

    def max(self, T: tuple):
        return T[-1]

    def min(self, T: tuple):
        return T[0]

    def le(self, T1: tuple, T2: tuple) -> bool:
        return self.order.index(T1[-1]) <= self.order.index(T2[-1])

    @property
    def order_table(self) -> dict:
        return {(T1, T2): self.le(T1, T2) for T1 in self.members for T2 in self.members}

    def listing(self) -> list[str]:
        return ["{" + ",".join(T) + "}" for T in self.members]


def _pi_preimage(l1g: Level1GCS, cover: dict, b, a, X: BoxUnion) -> BoxUnion:
    """``pi_{ab}^-1(X)`` intersected with ``U3`` of ``(b, a)``."""
    l1 = l1g.table[(b, a)]
    return orbit_union(l1g.charts[a], l1.tub.W.intersect(l1.tub.preimage(X)))


def _outside_constraints(l1g: Level1GCS, cover: dict, c, rest: set) -> BoxUnion:
    """Intersection of ``U2`` over pairs ``(g, c)`` and ``U1`` over pairs
    ``(c, e)`` with ``g, e`` outside the subset."""
    u = l1g.charts[c].base
    for (p, q), tc in sorted(cover.items()):
        if q == c and p in rest:
            u = u.intersect(tc.U2)
        if p == c and q in rest:
            u = u.intersect(tc.U1)
    return u


def subset_region(l1g: Level1GCS, cover: dict, T: tuple) -> BoxUnion:
    m = T[-1]
    rest = set(l1g.order) - set(T)
    u = _outside_constraints(l1g, cover, m, rest)
    for b in T[:-1]:
        u = u.intersect(cover[(b, m)].U3)
        u = u.intersect(_pi_preimage(l1g, cover, b, m, _outside_constraints(l1g, cover, b, rest)))
    return u


def admissible_family(l1g: Level1GCS, cover: dict) -> list[tuple]:
    """Subsets whose members all change into the maximum and whose ``U3``
    regions have a common point (exact box arithmetic)."""
    order = l1g.order
    out = []
    for r in range(1, len(order) + 1):
        for T in itertools.combinations(order, r):
            m = T[-1]
            if not all((b, m) in cover for b in T[:-1]):
                continue
            u = l1g.charts[m].base
            for b in T[:-1]:
                u = u.intersect(cover[(b, m)].U3)
            if not u.is_empty():
                out.append(T)
    return out


def sampled_family(l1g: Level1GCS, cover: dict, grid_step=Fraction(1, 16)) -> list[tuple]:
    """Independent enumeration of the same family: membership is tested on
    grid points and box centres of one ``U3`` region by pointwise
    containment in the others, never by box intersection."""
    order = l1g.order
    pairs = set(l1g.table)
    out = []
    for r in range(1, len(order) + 1):
        for T in itertools.combinations(order, r):
            m = T[-1]
            if any((b, m) not in pairs for b in T[:-1]):
                continue
            if len(T) == 1:
                out.append(T)
                continue
            regions = [cover[(b, m)].U3 for b in T[:-1]]
            first = regions[0]
            pts = box_samples(first, grid_step)
            for u in regions[1:]:
                pts += [bx.center() for bx in u.boxes]
            if any(all(u.contains(p) for u in regions) for p in pts):
                out.append(T)
    return out


def build_index(l1g: Level1GCS, cover: dict) -> TriplingIndex:
    cands = admissible_family(l1g, cover)
    members, regions, pruned = [], {}, []
    for T in cands:
        u = subset_region(l1g, cover, T)
        p = u.sample_point()
        if p is None or not u.contains(p):
            pruned.append(T)
            log.warning("subset %s has an empty region and is dropped", label(T))
            continue
        members.append(T)
        regions[T] = u
    return TriplingIndex(tuple(l1g.order), tuple(members), regions, tuple(cands), tuple(pruned))


# ---------------------------------------------------------------------------
# nesting


def nesting_identification(l1g: Level1GCS, index: TriplingIndex, grid_step=Fraction(1, 8)):
    """Identification space of the level-1 system seeded by samples of every
    region, with each class tagged by the subsets whose region it meets."""
    samples: dict = {}
    for T in index.members:
        u = index.regions[T]
        pts = box_samples(u, grid_step)
        samples.setdefault(T[-1], []).extend(pts)
    ident = build_identification(l1g.gcs, TopologyProbeConfig(grid_step=grid_step), samples=samples)
    tags: dict = {}
    for node in ident.uf.parent:
        cid, x = node
        for T in index.members:
            if T[-1] == cid and index.regions[T].contains(x):
                tags.setdefault(ident.uf.find(node), {}).setdefault(T, node)
    return ident, tags


def intersecting_pairs(tags: dict) -> set:
    out = set()
    for found in tags.values():
        for T1, T2 in itertools.combinations(sorted(found), 2):
            out.add((T1, T2))
            out.add((T2, T1))
    return out


def regions_meet(l1g: Level1GCS, index: TriplingIndex, T1: tuple, T2: tuple):
    """Exact test whether the regions of two subsets meet in the
    identification space.  Returns a point of the region of the subset with
    the smaller top chart that is identified with a point of the other
    region, or None.  Regions are group invariant and the system is strongly
    intersecting, so a direct change between the top charts decides it."""
    m1, m2 = T1[-1], T2[-1]
    if l1g.order.index(m1) > l1g.order.index(m2):
        T1, T2, m1, m2 = T2, T1, m2, m1
    U1, U2 = index.regions[T1], index.regions[T2]
    if m1 == m2:
        meet = U1.intersect(U2)
    else:
        cc = l1g.gcs.changes.get((m1, m2))
        if cc is None:
            return None
        meet = U1.intersect(cc.domain).intersect(cc.base_map.preimage(U2))
    return None if meet.is_empty() else (m1, meet.sample_point())


def exact_intersecting(l1g: Level1GCS, index: TriplingIndex) -> set:
    out = set()
    for T1, T2 in itertools.combinations(index.members, 2):
        if regions_meet(l1g, index, T1, T2) is not None:
            out.add((T1, T2))
            out.add((T2, T1))
    return out


def verify_nesting(l1g: Level1GCS, index: TriplingIndex) -> Check:
    """Regions of subsets that meet in the identification space are nested
    (exact box test over every incomparable pair)."""
    for T1, T2 in itertools.combinations(index.members, 2):
        if set(T1) <= set(T2) or set(T2) <= set(T1):
            continue
        hit = regions_meet(l1g, index, T1, T2)
        if hit is not None:
            return failed("nesting", pair=(label(T1), label(T2)), point=_fmt_node(hit))
    return passed("nesting", pairs=len(index.members) * (len(index.members) - 1) // 2)


def probe_nesting(l1g: Level1GCS, index: TriplingIndex, grid_step=Fraction(1, 8)) -> Check:
    """Sampled counterpart of :func:`verify_nesting`: region samples are glued
    in the identification space and every class may only carry nested
    subsets."""
    _, tags = nesting_identification(l1g, index, grid_step)
    for rep in sorted(tags):
        found = tags[rep]
        for T1, T2 in itertools.combinations(sorted(found), 2):
            if not (set(T1) <= set(T2) or set(T2) <= set(T1)):
                return failed("nesting_probe", resolution=grid_step, pair=(label(T1), label(T2)),
                              points=(_fmt_node(found[T1]), _fmt_node(found[T2])))
    return passed("nesting_probe", exact=False, resolution=grid_step, classes=len(tags))


def verify_converse(l1g: Level1GCS, index: TriplingIndex) -> Check:
    """Nested subsets have regions meeting in the identification space
    (exact box test)."""
    for T1, T2 in itertools.permutations(index.members, 2):
        if set(T1) < set(T2) and regions_meet(l1g, index, T1, T2) is None:
            return failed("nested_regions_meet", pair=(label(T1), label(T2)))
    return passed("nested_regions_meet")


def _fmt_node(node) -> str:
    return f"{node[0]}:(" + ",".join(str(v) for v in node[1]) + ")"


# ---------------------------------------------------------------------------
# refined system


@dataclass
class Tripling:
    l1g: Level1GCS
    cover: dict
    index: TriplingIndex
    refined: GoodCoordinateSystem
    ids: dict  # T -> chart id in the refined system
    intersecting: set  # ordered pairs (T1, T2) whose regions meet
    level1: dict = field(default_factory=dict)  # (id1, id2) -> Level1CoordinateChange
    checks: list = field(default_factory=list)

    def T_of(self, cid: str) -> tuple:
        return next(T for T, i in self.ids.items() if i == cid)


def _identity_change(chart: KuranishiChart, src_id: str, tgt_id: str, dom: BoxUnion) -> CoordinateChange:
    return CoordinateChange(src_id, tgt_id, dom, AffineMap.identity(chart.dim), la.identity(chart.rank),
                            tuple(range(chart.group.order)))


def check_strong_neighborhoods(l1g: Level1GCS, index: TriplingIndex) -> Check:
    """Each region is saturated by the tubular projection to every smaller
    member, inside the level-1 region of that pair."""
    for T in index.members:
        m = T[-1]
        for b in T[:-1]:
            l1 = l1g.table[(b, m)]
            S = index.regions[T].intersect(l1.tub.W)
            P = l1.cc.base_map.preimage(S)
            if not l1.tub.preimage(P).intersect(l1.tub.W).same_set(S):
                return failed("strong_neighborhood", subset=label(T), member=b)
    return passed("strong_neighborhood")


def build_tripling(l1g: Level1GCS, margin=DEFAULT_INSET, cover: dict | None = None) -> Tripling:
    """Choose the cover (unless given), enumerate the subset family, compute
    the regions and emit the refined system with its induced changes."""
    cover = cover if cover is not None else choose_cover(l1g, margin)
    index = build_index(l1g, cover)
    inter = exact_intersecting(l1g, index)
    ids = {T: label(T) for T in index.members}
    charts = {ids[T]: l1g.charts[T[-1]].with_base(index.regions[T]).with_id(ids[T]) for T in index.members}
    pos = {k: n for n, k in enumerate(l1g.order)}
    order = tuple(ids[T] for T in sorted(index.members, key=lambda T: (pos[T[-1]], len(T), [pos[i] for i in T])))
    changes, prov, level1 = {}, {}, {}
    for T1, T2 in sorted(inter):
        if not set(T1) < set(T2):
            continue
        m1, m2 = T1[-1], T2[-1]
        k = (ids[T1], ids[T2])
        U1, U2 = index.regions[T1], index.regions[T2]
        if m1 == m2:
            cc = _identity_change(l1g.charts[m1], k[0], k[1], U1.intersect(U2))
        else:
            base = l1g.changes[(m1, m2)]
            r = _restrict_change(base, U1, U2)
            cc = CoordinateChange(k[0], k[1], r.domain, r.base_map, r.bundle_map, r.group_hom)
            l1 = l1g.table[(m1, m2)]
            sub = make_level1(cc, l1.tub.W.intersect(U2), l1.Etilde)
            level1[k] = Level1CoordinateChange(sub.cc, sub.tub, sub.Etilde, sub.pi_tilde, sub.pi_hat, l1.certificate)
        if cc.domain.is_empty():
            continue
        changes[k] = cc
        prov[k] = "restricted"
    refined = GoodCoordinateSystem(charts, changes, prov, l1g.gcs.labels, None,
                                   {ids[T]: T[-1] for T in index.members}, {}, order)
    tr = Tripling(l1g, cover, index, refined, ids, inter, level1)
    tr.checks = check_cover(l1g, cover) + [check_strong_neighborhoods(l1g, index), check_refines(tr)]
    return tr


def check_refines(tr: Tripling) -> Check:
    """Every region sits inside its chart and the order map is monotone."""
    l1g = tr.l1g
    for T in tr.index.members:
        if not tr.index.regions[T].subset_of(l1g.charts[T[-1]].base):
            return failed("chart_refinement", subset=label(T))
    for T1, T2 in itertools.permutations(tr.index.members, 2):
        if tr.refined.le(tr.ids[T1], tr.ids[T2]) and not l1g.gcs.le(T1[-1], T2[-1]):
            return failed("chart_refinement", pair=(label(T1), label(T2)))
    return passed("chart_refinement")


def corrupt_cover(l1g: Level1GCS, cover: dict, pair: tuple) -> dict:
    """Replace ``U1`` of ``pair`` by the whole base of its source chart."""
    out = dict(cover)
    tc = cover[pair]
    out[pair] = TripleCover(pair, tc.V1, l1g.charts[pair[0]].base, tc.U2, tc.U3)
    return out


# ---------------------------------------------------------------------------
# concerted embeddings


def order_conflicts(g: GoodCoordinateSystem, target: GoodCoordinateSystem) -> list[tuple]:
    """Intersecting pairs on which the two orders put the change in
    different directions."""
    cov = g.coverage
    out = []
    for y, x in itertools.combinations(sorted(g.charts), 2):
        if cov[y] & cov[x] and (g.le(y, x), g.le(x, y)) != (target.le(y, x), target.le(x, y)):
            out.append((y, x))
    return out


@dataclass
class ConcertedEmbedding:
    tripling: Tripling
    target: GoodCoordinateSystem
    target_index: dict  # T -> index of the target chart receiving T
    maps: dict  # T -> CoordinateChange from the refined chart of T into the target chart
    regions: dict  # T -> target region around the image of U_T
    radius: Fraction
    conflicts: list  # intersecting index pairs whose orders disagreed before reindexing

    def domain_le(self, T1, T2) -> bool:
        return self.tripling.index.le(T1, T2)

    def target_le(self, T1, T2) -> bool:
        return self.target.le(self.target_index[T1], self.target_index[T2])

    def audit(self) -> Check:
        """On every pair of meeting regions the change runs from the smaller
        subset to the larger one and both reindexed orders allow it."""
        for T1, T2 in sorted(self.tripling.intersecting):
            if not set(T1) < set(T2):
                continue
            if not (self.domain_le(T1, T2) and self.target_le(T1, T2)):
                return failed("concerted", pair=(label(T1), label(T2)))
        return passed("concerted", pairs=len(self.tripling.intersecting) // 2, resolved=len(self.conflicts))


def _embedding_for(T: tuple, kemb: dict, target: GoodCoordinateSystem, U: BoxUnion, cid: str):
    m = T[-1]
    t = max(T, key=lambda i: target.order.index(i))
    e = kemb[m]
    if t != m:
        h = target.changes.get((m, t))
        if h is None:
            raise NotConcerted(f"target has no change {m}->{t}", pair=(m, t))
        dom = e.domain.intersect(e.base_map.preimage(h.domain))
        if not U.subset_of(dom):
            raise NotConcerted(f"region of {label(T)} does not reach the target chart {t}", subset=label(T))
        e = CoordinateChange(m, t, dom, h.base_map.compose(e.base_map), la.matmul(h.bundle_map, e.bundle_map))
    return t, CoordinateChange(cid, t, U, e.base_map, e.bundle_map)


def concert_embedding(kemb: dict, tr: Tripling, target: GoodCoordinateSystem,
                      grid_step=Fraction(1, 8), max_halvings: int = 12) -> ConcertedEmbedding:
    """Reindex an embedding of the tripled domain by subsets.  Each subset is
    sent to the target chart of its largest member in the target order; the
    target regions are tubes around the images, thinned until regions of
    subsets that do not meet in the domain do not meet in the target."""
    idx = tr.index
    tix, maps = {}, {}
    for T in idx.members:
        tix[T], maps[T] = _embedding_for(T, kemb, target, idx.regions[T], tr.ids[T])
    r = Fraction(1, 4)
    for _ in range(max_halvings + 1):
        regions = {T: maps[T].base_map.tube(idx.regions[T], r).intersect(target.charts[tix[T]].base)
                   for T in idx.members}
        if _target_disjointness(target, regions, tix, tr.intersecting, grid_step) is None:
            return ConcertedEmbedding(tr, target, tix, maps, regions, r, order_conflicts(tr.l1g.gcs, target))
        r /= 2
    raise NotConcerted("target regions keep meeting for subsets that do not meet in the domain")


def _target_disjointness(target, regions: dict, tix: dict, inter: set, grid_step):
    samples: dict = {}
    for T, u in regions.items():
        samples.setdefault(tix[T], []).extend(box_samples(u, grid_step))
    ident = build_identification(target, TopologyProbeConfig(grid_step=grid_step), samples=samples)
    tags: dict = {}
    for node in ident.uf.parent:
        for T, u in regions.items():
            if tix[T] == node[0] and u.contains(node[1]):
                tags.setdefault(ident.uf.find(node), set()).add(T)
    for found in tags.values():
        for T1, T2 in itertools.combinations(sorted(found), 2):
            if (T1, T2) not in inter:
                return (T1, T2)
    return None


# ---------------------------------------------------------------------------
# admissible pairs


def admissible_reorder(indices, orders: list, intersecting: set):
    """``orders`` are position maps (index -> rank) of the domain and the two
    targets.  Every intersecting pair must be ordered the same way by all of
    them; non-intersecting pairs are unconstrained.  Returns the check and the
    common order (the domain order) or None."""
    bad = []
    for y, x in itertools.combinations(sorted(indices), 2):
        if (y, x) not in intersecting and (x, y) not in intersecting:
            continue
        dirs = {(o[y] <= o[x], o[x] <= o[y]) for o in orders}
        if len(dirs) > 1:
            bad.append((y, x))
    if bad:
        return failed("admissible", pairs=tuple(bad)), None
    first = orders[0]
    return passed("admissible"), tuple(sorted(indices, key=lambda i: (first[i], str(i))))


def positions(g: GoodCoordinateSystem) -> dict:
    return {k: n for n, k in enumerate(g.order)}


def domain_intersecting(g: GoodCoordinateSystem) -> set:
    cov = g.coverage
    return {(y, x) for y, x in itertools.permutations(g.charts, 2) if cov[y] & cov[x]}


# ---------------------------------------------------------------------------
# fiber products


def rowwise_preimage(A: la.Mat, c: tuple, box: Box, n: int) -> Box | None:
    """Preimage of an open box under ``x -> A x + c`` for a matrix with at
    most one nonzero per row (columns may repeat)."""
    lo = [-INF] * n
    hi = [INF] * n
    for i, row in enumerate(A):
        nz = [(j, a) for j, a in enumerate(row) if a != 0]
        if len(nz) > 1:
            raise HypothesisViolation("map has a row with several nonzero entries")
        if not nz:
            if not (box.lo[i] < c[i] < box.hi[i]):
                return None
            continue
        j, a = nz[0]
        l, h = (box.lo[i] - c[i]) / a, (box.hi[i] - c[i]) / a
        l, h = min(l, h), max(l, h)
        lo[j], hi[j] = max(lo[j], l), min(hi[j], h)
    out = Box(tuple(lo), tuple(hi))
    return None if out.is_empty() else out


def rowwise_preimage_union(A: la.Mat, c: tuple, u: BoxUnion, n: int) -> BoxUnion:
    return BoxUnion.from_list(n, [b for b in (rowwise_preimage(A, c, bx, n) for bx in u.boxes) if b is not None])


def _select(rows: list, m: int) -> la.Mat:
    return tuple(tuple(Fraction(int(j == r)) for j in range(m)) for r in rows)


@dataclass
class FiberProductChart:
    T: tuple
    chart: KuranishiChart
    U1: BoxUnion  # first target region
    U2: BoxUnion  # second target region
    shared_base: dict  # first-target row -> second-target row of the shared base coordinates
    shared_fiber: dict  # first-target fiber row -> second-target fiber row
    free_base: tuple  # second-target rows kept as fp coordinates
    free_fiber: tuple
    M2: la.Mat  # fp coordinates -> second-target coordinates
    c2: tuple
    N2: la.Mat  # fp fiber -> second-target fiber
    dims: dict  # E1, E2, E_min, formula, actual


@dataclass
class FiberProduct:
    tripling: Tripling
    charts: dict  # T -> FiberProductChart
    gcs: GoodCoordinateSystem
    checks: list = field(default_factory=list)

    def dim(self, T) -> int:
        return self.charts[T].chart.rank

    def order_table(self) -> dict:
        return {(label(T1), label(T2)): self.dim(T1) <= self.dim(T2) for T1 in self.charts for T2 in self.charts}


def _axis_pairs(e: CoordinateChange, dim_src: int, rank_src: int):
    base = e.base_map.require_axis()
    fib = AffineMap(e.bundle_map, (Fraction(0),) * len(e.bundle_map), rank_src).axis_columns
    if fib is None:
        raise HypothesisViolation(f"bundle map of {e.source}->{e.target} is not a coordinate embedding")
    return base, fib


def _fp_chart(tr: Tripling, T: tuple, emb1: Level1Embedding, emb2: Level1Embedding) -> FiberProductChart:
    l1g = tr.l1g
    m, n = T[-1], T[0]
    cm = l1g.charts[m]
    t1, t2 = emb1.target.charts[m], emb2.target.charts[m]
    if t1.group.order > 1 or t2.group.order > 1:
        raise HypothesisViolation("fiber products are built for trivial isotropy only", index=m)
    e1, e2 = emb1.per_index[m].emb, emb2.per_index[m].emb
    (bc1, fc1), (bc2, fc2) = _axis_pairs(e1, cm.dim, cm.rank), _axis_pairs(e2, cm.dim, cm.rank)
    if n == m:
        shared_k, shared_f = list(range(cm.dim)), list(range(cm.rank))
    else:
        phi = l1g.changes[(n, m)]
        shared_k = list(phi.base_map.tangent_rows)
        fib = AffineMap(phi.bundle_map, (Fraction(0),) * cm.rank, l1g.charts[n].rank).axis_columns
        if fib is None:
            raise HypothesisViolation(f"bundle map of {n}->{m} is not a coordinate embedding")
        shared_f = [r for r, _ in fib]
    d1, d2, r1, r2 = t1.dim, t2.dim, t1.rank, t2.rank
    sb = {bc1[k][0]: bc2[k][0] for k in shared_k}
    sf = {fc1[k][0]: fc2[k][0] for k in shared_f}
    inv_b = {v: k for k, v in sb.items()}
    inv_f = {v: k for k, v in sf.items()}
    free_b = tuple(r for r in range(d2) if r not in inv_b)
    free_f = tuple(r for r in range(r2) if r not in inv_f)
    dfp, rfp = d1 + len(free_b), r1 + len(free_f)
    coef_b = {bc1[k][0]: (bc1[k][1], bc2[k][1]) for k in shared_k}
    M2, c2 = [], []
    for r in range(d2):
        row = [Fraction(0)] * dfp
        if r in inv_b:
            r1_ = inv_b[r]
            a1, a2 = coef_b[r1_]
            row[r1_] = a2 / a1
            c2.append(e2.base_map.b[r] - a2 * e1.base_map.b[r1_] / a1)
        else:
            row[d1 + free_b.index(r)] = Fraction(1)
            c2.append(Fraction(0))
        M2.append(tuple(row))
    coef_f = {fc1[k][0]: (fc1[k][1], fc2[k][1]) for k in shared_f}
    N2 = []
    for r in range(r2):
        row = [Fraction(0)] * rfp
        if r in inv_f:
            g1 = inv_f[r]
            a1, a2 = coef_f[g1]
            row[g1] = a2 / a1
        else:
            row[r1 + free_f.index(r)] = Fraction(1)
        N2.append(tuple(row))
    M2, c2, N2 = tuple(M2), tuple(c2), tuple(N2)
    P1 = tuple(tuple(Fraction(int(i == j)) for j in range(dfp)) for i in range(d1))
    U = tr.index.regions[T]
    U1 = e1.base_map.tube(U, INF).intersect(t1.base)
    U2 = e2.base_map.tube(U, INF).intersect(t2.base)
    boxes = []
    for b1 in U1.boxes:
        p1 = rowwise_preimage(P1, (Fraction(0),) * d1, b1, dfp)
        if p1 is None:
            continue
        for b2 in U2.boxes:
            p2 = rowwise_preimage(M2, c2, b2, dfp)
            if p2 is not None and p1.intersect(p2) is not None:
                boxes.append(p1.intersect(p2))
    base = BoxUnion.from_list(dfp, boxes)
    s1 = t1.section.compose_affine(P1, (Fraction(0),) * d1, dfp)
    s2 = t2.section.compose_affine(M2, c2, dfp)
    for g1, g2 in sf.items():
        lhs = PolySection.from_polys(dfp, [s2.polys[g2]])
        rhs = PolySection.from_polys(dfp, [s1.polys[g1]]).linear_combine(((N2[g2][g1],),))
        if not lhs.same_as(rhs):
            raise HypothesisViolation(f"sections disagree on a shared fiber direction of {label(T)}",
                                      subset=label(T), row=g1)
    sec = PolySection.from_polys(dfp, list(s1.polys) + [s2.polys[r] for r in free_f])
    fp_pts = []
    for lab, p in cm.footprint:
        if U.contains(p):
            w1, w2 = e1.apply(p), e2.apply(p)
            q = tuple(w1) + tuple(w2[r] for r in free_b)
            if not (base.contains(q) and sec.is_zero_at(q)):
                raise HypothesisViolation(f"footprint point {lab} is not a zero of the fiber product", label=lab)
            fp_pts.append((lab, q))
    chart = KuranishiChart(tr.ids[T], base, rfp, GroupAction.trivial(dfp, rfp), sec, tuple(fp_pts))
    E_min = l1g.charts[n].rank
    dims = {"E1": r1, "E2": r2, "E_min": E_min, "formula": r1 + r2 - E_min, "actual": rfp}
    return FiberProductChart(T, chart, U1, U2, sb, sf, free_b, free_f, M2, c2, N2, dims)


def _fp_change(tr: Tripling, T1: tuple, T2: tuple, fc1: FiberProductChart, fc2: FiberProductChart,
               emb1: Level1Embedding, emb2: Level1Embedding) -> CoordinateChange | None:
    m1, m2 = T1[-1], T2[-1]
    c1, c2_ = fc1.chart, fc2.chart
    d1 = emb1.target.charts[m1].dim
    r1 = emb1.target.charts[m1].rank
    if m1 == m2:
        h1 = AffineMap.identity(d1)
        h2 = AffineMap.identity(emb2.target.charts[m1].dim)
        B1, B2 = la.identity(r1), la.identity(emb2.target.charts[m1].rank)
        dom1, dom2 = emb1.target.charts[m1].base, emb2.target.charts[m1].base
        U = tr.index.regions[T1].intersect(tr.index.regions[T2])
    else:
        k1, k2 = emb1.target.changes[(m1, m2)], emb2.target.changes[(m1, m2)]
        h1, h2, B1, B2 = k1.base_map, k2.base_map, k1.bundle_map, k2.bundle_map
        dom1, dom2 = k1.domain, k2.domain
        ref = tr.refined.changes.get((tr.ids[T1], tr.ids[T2]))
        if ref is None:
            return None
        U = ref.domain
    n = c1.dim
    P1 = tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(d1))
    sel_b = _select([d1_ for d1_ in fc2.free_base], emb2.target.charts[m2].dim)
    A_top = la.matmul(h1.A, P1)
    A_bot = la.matmul(sel_b, la.matmul(h2.A, fc1.M2))
    b_bot = la.matvec(sel_b, la.vadd(la.matvec(h2.A, fc1.c2), h2.b))
    A = tuple(A_top) + tuple(A_bot)
    b = tuple(h1.b) + tuple(b_bot)
    rf = c1.rank
    Q1 = tuple(tuple(Fraction(int(i == j)) for j in range(rf)) for i in range(r1))
    sel_f = _select(list(fc2.free_fiber), emb2.target.charts[m2].rank)
    B = tuple(la.matmul(B1, Q1)) + tuple(la.matmul(sel_f, la.matmul(B2, fc1.N2)))
    e1 = emb1.per_index[m1].emb
    dom = c1.base.intersect(rowwise_preimage_union(P1, (Fraction(0),) * d1, e1.base_map.tube(U, INF), n))
    dom = dom.intersect(rowwise_preimage_union(P1, (Fraction(0),) * d1, dom1, n))
    dom = dom.intersect(rowwise_preimage_union(fc1.M2, fc1.c2, dom2, n))
    dom = dom.intersect(rowwise_preimage_union(A, b, c2_.base, n))
    if dom.is_empty():
        return None
    return CoordinateChange(c1.id, c2_.id, dom, AffineMap(A, b, n), B, (0,))


def fiber_product(emb1: Level1Embedding, emb2: Level1Embedding, tr: Tripling,
                  grid_step=Fraction(1, 20)) -> FiberProduct:
    """Fiber-product charts over every subset of a tripling and the induced
    changes between nested subsets."""
    if emb1.source is not tr.l1g or emb2.source is not tr.l1g:
        raise NotTripled("the embeddings do not start from the tripled level-1 system")
    g = tr.l1g.gcs
    chk, _ = admissible_reorder(list(g.charts), [positions(g), positions(emb1.target), positions(emb2.target)],
                                domain_intersecting(g))
    if not chk.ok:
        raise NotAdmissible("the embedding orders disagree on intersecting pairs", **chk.witness)
    charts = {T: _fp_chart(tr, T, emb1, emb2) for T in tr.index.members}
    changes = {}
    for T1, T2 in itertools.permutations(tr.index.members, 2):
        if set(T1) < set(T2):
            cc = _fp_change(tr, T1, T2, charts[T1], charts[T2], emb1, emb2)
            if cc is not None:
                changes[(cc.source, cc.target)] = cc
    pos = {k: i for i, k in enumerate(g.order)}
    order = tuple(tr.ids[T] for T in sorted(charts, key=lambda T: (charts[T].chart.rank, len(T), [pos[i] for i in T])))
    gcs = GoodCoordinateSystem({fc.chart.id: fc.chart for fc in charts.values()}, changes,
                               {k: "fiber product" for k in changes}, g.labels, None,
                               {tr.ids[T]: T[-1] for T in charts}, {}, order)
    fp = FiberProduct(tr, charts, gcs)
    fp.checks = check_fiber_product(fp, grid_step)
    return fp


def check_fiber_product(fp: FiberProduct, grid_step=Fraction(1, 20)) -> list[Check]:
    checks = []
    bad = [label(T) for T, fc in fp.charts.items() if fc.dims["formula"] != fc.dims["actual"]]
    checks.append(passed("fp_dimension") if not bad else failed("fp_dimension", subsets=tuple(bad)))
    mono = [(label(T1), label(T2)) for T1, T2 in itertools.permutations(fp.charts, 2)
            if set(T1) < set(T2) and fp.dim(T1) > fp.dim(T2)]
    checks.append(passed("fp_monotone") if not mono else failed("fp_monotone", pairs=tuple(mono)))
    for key, cc in sorted(fp.gcs.changes.items()):
        for c in check_change(cc, fp.gcs.charts, grid_step):
            checks.append(_tag(c, key))
        checks.append(_tag(check_tangent_bundle(cc, fp.gcs.charts, grid_step), key))
    return checks


def _tag(c: Check, key) -> Check:
    c.notes.append({"change": f"{key[0]}->{key[1]}"})
    return c


# ---------------------------------------------------------------------------
# synthetic pair with bundle dimensions (6, 6, 2)


def synthetic_pair():
    """Domain: a 2-dimensional chart ``y`` with section ``(a, b)`` changing
    into a 6-dimensional chart ``x`` with the identity section.  Both targets
    stabilize ``y`` by four directions and keep ``x``; their change ``y -> x``
    is the identity on six coordinates."""
    from .level1 import chart_embedding, stabilize_chart

    one = Fraction(1)
    y = KuranishiChart("y", BoxUnion.of(Box.make([-one] * 2, [one] * 2)), 2, GroupAction.trivial(2, 2),
                       PolySection.from_terms(2, [[(one, (1, 0))], [(one, (0, 1))]]), (("o", (Fraction(0),) * 2),))
    x = KuranishiChart("x", BoxUnion.of(Box.make([-one] * 6, [one] * 6)), 6, GroupAction.trivial(6, 6),
                       PolySection.from_terms(6, [[(one, tuple(int(i == j) for i in range(6)))] for j in range(6)]),
                       (("o", (Fraction(0),) * 6),))
    A = tuple(tuple(Fraction(int(i == j)) for j in range(2)) for i in range(6))
    yx = CoordinateChange("y", "x", y.base, AffineMap(A, (Fraction(0),) * 6, 2), A, (0,))
    dom = GoodCoordinateSystem({"y": y, "x": x}, {("y", "x"): yx}, {("y", "x"): "given"}, ("o",), None,
                               {"y": "y", "x": "x"}, {}, ("y", "x"))
    targets = []
    for _ in range(2):
        ys = stabilize_chart(y, 4)
        I6 = la.identity(6)
        big = CoordinateChange("y", "x", ys.base, AffineMap(I6, (Fraction(0),) * 6, 6), I6, (0,))
        tgt = GoodCoordinateSystem({"y": ys, "x": x}, {("y", "x"): big}, {("y", "x"): "given"}, ("o",), None,
                                   {"y": "y", "x": "x"}, {}, ("y", "x"))
        kemb = {"y": chart_embedding(y, ys, 4),
                "x": CoordinateChange("x", "x", x.base, AffineMap.identity(6), I6, (0,))}
        targets.append((tgt, kemb))
    return dom, targets
