"""The identification space as a sampled quotient.

Samples are exact rational points tagged with a chart id.  Starting from grid
samples, every sample is pushed through every group element and every
coordinate change in both directions (images and exact preimages), and the
resulting nodes are merged in a union-find.  Because the maps are affine with
rational coefficients, every glued pair is an exact identification; no
tolerance matching is needed.

A *system* is any object with ``charts`` (id -> KuranishiChart) and
``changes`` ((source, target) -> CoordinateChange); presentations, good
coordinate systems and tripled systems all qualify.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .boxes import BoxUnion
from .errors import ClassNotInShrinking, PairBudgetExceeded
from .results import Check, failed, passed

Node = tuple  # (chart_id, point)


@dataclass
class TopologyProbeConfig:
    """Resolution settings for sampled topology probes.

    ``grid_step`` is relative: each chart samples on the lattice
    ``grid_step * (shortest side of its bounding box) * Z^n``.
    """

    grid_step: Fraction = Fraction(1, 20)
    delta_schedule: tuple | None = None  # absolute; default step/2^k, k = 0..4, per chart
    pair_budget: int = 20000
    node_budget: int = 250000

    def __post_init__(self):
        self.grid_step = Fraction(self.grid_step)
        if self.delta_schedule is not None:
            ds = tuple(Fraction(d) for d in self.delta_schedule)
            if any(d <= 0 for d in ds) or any(a <= b for a, b in zip(ds, ds[1:])):
                raise ValueError("delta schedule must be positive and strictly decreasing")
            self.delta_schedule = ds

    def deltas(self, step: Fraction) -> tuple:
        if self.delta_schedule is not None:
            return self.delta_schedule
        return tuple(step / 2**k for k in range(5))


class UnionFind:
    """Union-find whose canonical representative is the minimum element."""

    def __init__(self):
        self.parent: dict = {}

    def add(self, x) -> None:
        if x not in self.parent:
            self.parent[x] = x

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra


@dataclass
class IdentificationSpace:
    system: object
    uf: UnionFind
    nodes: dict = field(default_factory=dict)  # chart id -> list of points (insertion order)
    steps: dict = field(default_factory=dict)
    truncated: bool = False

    def cls(self, node: Node):
        return self.uf.find(node)

    def same(self, a: Node, b: Node) -> bool:
        return a in self.uf.parent and b in self.uf.parent and self.uf.find(a) == self.uf.find(b)

    def classes(self) -> dict:
        out: dict = {}
        for n in self.uf.parent:
            out.setdefault(self.uf.find(n), []).append(n)
        for v in out.values():
            v.sort()
        return out

    def class_of(self, node: Node) -> list:
        r = self.uf.find(node)
        return sorted(n for n in self.uf.parent if self.uf.find(n) == r)

    def charts_of_class(self, node: Node) -> set:
        return {c for c, _ in self.class_of(node)}

    def to_csv(self, flags: dict | None = None) -> str:
        """One row per sample: chart_id, coords..., class_id, flag."""
        classes = self.classes()
        ids = {rep: k for k, rep in enumerate(sorted(classes))}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["chart_id", "coords", "class_id", "flag"])
        for node in sorted(self.uf.parent):
            c, p = node
            flag = (flags or {}).get(node, "INTERIOR")
            w.writerow([c, " ".join(str(v) for v in p), ids[self.uf.find(node)], flag])
        return buf.getvalue()


def _outgoing(system) -> dict:
    out: dict = {}
    for (s, t), cc in system.changes.items():
        out.setdefault(s, []).append(cc)
    return out


def _incoming(system) -> dict:
    inc: dict = {}
    for (s, t), cc in system.changes.items():
        inc.setdefault(t, []).append(cc)
    return inc


def chart_samples(system, grid_step) -> dict:
    out = {}
    for cid, ch in system.charts.items():
        step = ch.step(grid_step)
        out[cid] = [tuple(p) for p in ch.base.grid(step)]
    return out


def build_identification(system, cfg: TopologyProbeConfig | None = None,
                         extra: Iterable[Node] = (), samples: dict | None = None,
                         include_grid: bool = True) -> IdentificationSpace:
    """Union-find closed under all group elements and all changes (both
    directions), seeded by grid samples of every chart plus ``extra`` nodes."""
    cfg = cfg or TopologyProbeConfig()
    uf = UnionFind()
    ident = IdentificationSpace(system, uf)
    for cid, ch in system.charts.items():
        ident.steps[cid] = ch.step(cfg.grid_step)
    seeds: list = []
    if samples is not None:
        for cid, pts in samples.items():
            seeds.extend((cid, tuple(p)) for p in pts)
    elif include_grid:
        for cid, pts in chart_samples(system, cfg.grid_step).items():
            seeds.extend((cid, p) for p in pts)
    seeds.extend((c, tuple(Fraction(v) for v in p)) for c, p in extra)
    outgoing, incoming = _outgoing(system), _incoming(system)
    queue = deque()

    def visit(node: Node) -> None:
        if node not in uf.parent:
            uf.add(node)
            ident.nodes.setdefault(node[0], []).append(node[1])
            queue.append(node)

    for s in seeds:
        if system.charts[s[0]].base.contains(s[1]):
            visit(s)
    while queue:
        if len(uf.parent) > cfg.node_budget:
            ident.truncated = True
            break
        node = queue.popleft()
        cid, x = node
        ch = system.charts[cid]
        for i in range(1, ch.group.order):
            y = (cid, ch.group.act(i, x))
            visit(y)
            uf.union(node, y)
        for cc in outgoing.get(cid, ()):
            if cc.domain.contains(x):
                y = (cc.target, cc.apply(x))
                visit(y)
                uf.union(node, y)
        for cc in incoming.get(cid, ()):
            u = cc.image_contains(x)
            if u is not None:
                y = (cc.source, u)
                visit(y)
                uf.union(node, y)
    return ident


# ---------------------------------------------------------------------------
# maximality and matching probes on presentations


def maximal_domain(ident: IdentificationSpace, q: str, p: str) -> dict:
    """Samples of chart ``q`` whose class meets chart ``p``, compared with the
    declared domain of the change ``q -> p`` (when present)."""
    system = ident.system
    if q == p:
        pts = sorted(ident.nodes.get(q, []))
        return {"maximal": pts, "declared": pts, "extra": [], "missing": []}
    in_p = {ident.cls(n) for n in ((p, x) for x in ident.nodes.get(p, []))}
    maximal = sorted(x for x in ident.nodes.get(q, []) if ident.cls((q, x)) in in_p)
    cc = system.changes.get((q, p))
    declared = sorted(x for x in ident.nodes.get(q, []) if cc is not None and cc.domain.contains(x))
    ms, ds = set(maximal), set(declared)
    return {"maximal": maximal, "declared": declared,
            "extra": sorted(ms - ds), "missing": sorted(ds - ms)}


def _fmt_node(n: Node) -> str:
    return f"{n[0]}({','.join(str(v) for v in n[1])})"


def maximality_check(ident: IdentificationSpace, resolution=None) -> Check:
    """Every identified cross-chart pair (q-node, p-node) with a change
    ``q -> p`` must have the q-node in the declared domain and its image in
    the class; each chart's samples in one class must form one group orbit."""
    system = ident.system
    for rep, members in sorted(ident.classes().items()):
        by_chart: dict = {}
        for c, x in members:
            by_chart.setdefault(c, []).append(x)
        for (q, p), cc in sorted(system.changes.items()):
            if q in by_chart and p in by_chart:
                for x in by_chart[q]:
                    if not cc.domain.contains(x):
                        return failed("maximality", resolution=resolution, change=f"{q}->{p}",
                                      source=_fmt_node((q, x)), identified_with=_fmt_node((p, by_chart[p][0])))
        for c, xs in by_chart.items():
            orbit = set(system.charts[c].group.orbit(xs[0]))
            for x in xs[1:]:
                if x not in orbit:
                    return failed("maximality", resolution=resolution, reason="chart map not injective",
                                  first=_fmt_node((c, xs[0])), second=_fmt_node((c, x)))
    return passed("maximality", exact=False, resolution=resolution)


def _zero_list(system) -> list:
    return [(cid, lab, z) for cid, ch in system.charts.items() for lab, p in ch.footprint for z in ch.group.orbit(p)]


def matching_samples(system, cfg: TopologyProbeConfig) -> list:
    """Refinement samples ``v +- delta/2 e_i`` around every zero for every delta."""
    extra = []
    for cid, lab, z in _zero_list(system):
        ch = system.charts[cid]
        for d in cfg.deltas(ch.step(cfg.grid_step)):
            for i in range(ch.dim):
                for sgn in (1, -1):
                    q = list(z)
                    q[i] += sgn * d / 2
                    extra.append((cid, tuple(q)))
    return extra


def matching_check(system, cfg: TopologyProbeConfig | None = None,
                   ident: IdentificationSpace | None = None) -> Check:
    """Topological matching: look for identified sequences converging to two
    differently labelled zeros.  Refinement samples ``v +- delta/2 e_i`` are
    added around every zero for every delta of the schedule; a pair of labels
    fails when, at every delta, some class has samples within delta of both."""
    cfg = cfg or TopologyProbeConfig()
    if ident is None:
        ident = build_identification(system, cfg, extra=matching_samples(system, cfg))
    zeros = _zero_list(system)
    arrays = {c: (pts, np.array([[float(v) for v in p] for p in pts])) for c, pts in ident.nodes.items() if pts}
    near: dict = {}
    for cid, lab, z in zeros:
        if cid not in arrays:
            continue
        pts, X = arrays[cid]
        deltas = cfg.deltas(ident.steps[cid])
        dist = np.max(np.abs(X - np.array([float(v) for v in z])), axis=1)
        for k, d in enumerate(deltas):
            s = near.setdefault((cid, lab, z, k), set())
            for j in np.nonzero(dist < float(d) * (1 + 1e-9))[0]:
                x = pts[j]
                if max(abs(a - b) for a, b in zip(x, z)) < d:
                    s.add(ident.cls((cid, x)))
    nlev = len(cfg.deltas(Fraction(1)))
    for i, (c1, l1, z1) in enumerate(zeros):
        for c2, l2, z2 in zeros[i + 1:]:
            if l1 == l2 or c1 == c2:
                continue
            common = None
            for k in range(nlev):
                shared = near.get((c1, l1, z1, k), set()) & near.get((c2, l2, z2, k), set())
                if not shared:
                    common = None
                    break
                common = min(shared)
            if common is not None:
                members = ident.class_of(common)
                a = next(n for n in members if n[0] == c1)
                b = next(n for n in members if n[0] == c2)
                return failed("matching", resolution=cfg.grid_step,
                              labels=(l1, l2), zeros=(_fmt_node((c1, z1)), _fmt_node((c2, z2))),
                              sequence_sample=(_fmt_node(a), _fmt_node(b)))
    return passed("matching", exact=False, resolution=cfg.grid_step)


# ---------------------------------------------------------------------------
# good-coordinate-system probes


def strongly_intersecting_probe(g, cfg: TopologyProbeConfig | None = None) -> Check:
    """Whenever the bases of two indices meet in the identification space of
    the source presentation, their coverages must meet in X."""
    cfg = cfg or TopologyProbeConfig()
    K = g.source if getattr(g, "source", None) is not None else g
    samples: dict = {}
    for idx, ch in g.charts.items():
        under = g.underlying.get(idx, idx) if hasattr(g, "underlying") else idx
        samples.setdefault(under, []).extend(ch.base.grid(ch.step(cfg.grid_step)))
    ident = build_identification(K, cfg, samples=samples)
    tags: dict = {}
    for node in ident.uf.parent:
        c, x = node
        for idx, ch in g.charts.items():
            under = g.underlying.get(idx, idx) if hasattr(g, "underlying") else idx
            if under == c and ch.base.contains(x):
                tags.setdefault(ident.cls(node), {}).setdefault(idx, node)
    for rep in sorted(tags):
        t = tags[rep]
        idxs = sorted(t)
        for i, a in enumerate(idxs):
            for b in idxs[i + 1:]:
                if not (g.coverage[a] & g.coverage[b]):
                    return failed("strongly_intersecting", resolution=cfg.grid_step,
                                  indices=(a, b), witness=(_fmt_node(t[a]), _fmt_node(t[b])))
    return passed("strongly_intersecting", exact=False, resolution=cfg.grid_step)


def classify_point(g, g_shrunk, node: Node, cfg: TopologyProbeConfig | None = None) -> str:
    """INTERIOR or JUMPING for the class of ``node`` in the shrinking."""
    cfg = cfg or TopologyProbeConfig()
    cid, x = node[0], tuple(Fraction(v) for v in node[1])
    if not g_shrunk.charts[cid].base.contains(x):
        raise ClassNotInShrinking(f"{_fmt_node((cid, x))} is not in the shrunken chart")
    small = build_identification(g_shrunk, cfg, extra=[(cid, x)], include_grid=False)
    i_z = max(g_shrunk.charts[c].dim for c, _ in small.class_of((cid, x)))
    big = build_identification(g, cfg, extra=[(cid, x)], include_grid=False)
    j_z = i_z
    for c, y in big.class_of((cid, x)):
        if c in g_shrunk.charts and g_shrunk.charts[c].base.closure_contains(y):
            j_z = max(j_z, g_shrunk.charts[c].dim)
    return "JUMPING" if i_z < j_z else "INTERIOR"


def _face_points(box, axis: int, side: int, step: Fraction) -> list[tuple]:
    v = box.lo[axis] if side < 0 else box.hi[axis]
    if isinstance(v, float):
        return []
    other_lo = [box.lo[i] for i in range(box.dim) if i != axis]
    other_hi = [box.hi[i] for i in range(box.dim) if i != axis]
    from .boxes import Box as _Box

    pts = []
    if other_lo:
        face = BoxUnion(box.dim - 1, (_Box(tuple(other_lo), tuple(other_hi)),))
        centre = face.boxes[0].center()
        grid = [centre] + [q for q in face.grid(step) if q != centre]
    else:
        grid = [()]
    for q in grid:
        p = list(q)
        p.insert(axis, v)
        pts.append(tuple(p))
    return pts


def hausdorff_probe(g, g_shrunk, cfg: TopologyProbeConfig | None = None, carve: dict | None = None) -> Check:
    """Probe the relative topology of the shrunken identification space.

    Non-separable pairs in the affine class arise at boundary faces of change
    domains: a point ``p`` on such a face with ``p`` in the source base and
    ``phi(p)`` in the target base, not identified with ``phi(p)``.  For each
    candidate the probe builds, at every delta of the schedule, the inward
    sample ``u = p + (delta/2) n`` and checks that ``u`` lies in the relative
    neighbourhood of ``p`` (source chart minus closures of change domains
    toward higher charts that do not contain ``p``) while ``phi(u)`` lies in the
    neighbourhood of ``phi(p)``.  ``u`` and ``phi(u)`` are identified, so when
    this holds at every delta the two classes cannot be separated.
    """
    cfg = cfg or TopologyProbeConfig()
    candidates = []
    for (y, x), cc in sorted(g_shrunk.changes.items()):
        src, tgt = g_shrunk.charts[y], g_shrunk.charts[x]
        step = src.step(cfg.grid_step)
        for box in cc.domain.boxes:
            for axis in range(src.dim):
                for side in (-1, 1):
                    for p in _face_points(box, axis, side, step):
                        if cc.domain.contains(p) or not src.base.contains(p):
                            continue
                        z = cc.apply(p)
                        if not tgt.base.contains(z):
                            continue
                        candidates.append((y, x, p, z, axis, -side))
    if len(candidates) > cfg.pair_budget:
        raise PairBudgetExceeded(f"{len(candidates)} candidate pairs exceed the budget {cfg.pair_budget}")
    if not candidates:
        return passed("hausdorff", exact=False, resolution=cfg.grid_step, candidates=0)
    ident = build_identification(g_shrunk, cfg, extra=[(c[0], c[2]) for c in candidates] + [(c[1], c[3]) for c in candidates],
                                 include_grid=False)
    for y, x, p, z, axis, inward in candidates:
        if ident.same((y, p), (x, z)):
            continue
        cc = g_shrunk.changes[(y, x)]
        src = g_shrunk.charts[y]
        scale = max([Fraction(1)] + [abs(a) for row in cc.base_map.A for a in row])
        seq = []
        ok = True
        for d in cfg.deltas(src.step(cfg.grid_step)):
            u = list(p)
            u[axis] += inward * d / (2 * scale)
            u = tuple(u)
            if not (cc.domain.contains(u) and src.base.contains(u)):
                ok = False
                break
            fu = cc.apply(u)
            if max(abs(a - b) for a, b in zip(u, p)) >= d or max(abs(a - b) for a, b in zip(fu, z)) >= d:
                ok = False
                break
            # relative-topology carve-out around p
            for (yy, xx), other in g_shrunk.changes.items():
                if yy != y or xx == x:
                    continue
                dom = (carve or {}).get((yy, xx), other.domain)
                if not dom.closure_contains(p) and dom.closure_contains(u):
                    ok = False
            if not ok:
                break
            seq.append(u)
        if ok:
            return failed("hausdorff", resolution=cfg.grid_step,
                          pair=(_fmt_node((y, p)), _fmt_node((x, z))),
                          sequence=tuple(_fmt_node((y, u)) for u in seq))
    return passed("hausdorff", exact=False, resolution=cfg.grid_step, candidates=len(candidates))
