"""Level-1 coordinate changes, level-1 good coordinate systems and level-1
embeddings for axis-map coordinate changes.

Base maps are coordinate embeddings (each source coordinate lands on one
target coordinate with a nonzero scale), so the normal complement of the
image is spanned by the remaining coordinate directions, the tubular
projection is the coordinate projection and tubes are boxes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import linalg as la
from .atlas import GoodCoordinateSystem, _restrict_change, default_margin, shrink_gcs
from .boxes import INF, Box, BoxUnion
from .errors import (
    EmptyComposite,
    EmptyCommonDomain,
    InductionBlocked,
    NoRoomToShrink,
    NotConcerted,
    TransversalityUnachievable,
)
from .geometry import (
    AffineMap,
    CoordinateChange,
    GroupAction,
    KuranishiChart,
    PolySection,
    SignedPerm,
    compose_ccs,
    find_section_zeros,
)
from .results import Check, failed, passed
from .zeros import TOL_RANK, TOL_ZERO, newton, seed_grid

TOL_COMPAT = 1e-9
MAX_HALVINGS = 20


# ---------------------------------------------------------------------------
# linear helpers


def projection_matrix(cols: list[tuple], n: int) -> la.Mat:
    """Orthogonal projection of R^n onto the span of ``cols``."""
    if not cols:
        return la.zeros(n, n)
    E = la.from_columns(cols, n)
    Et = la.transpose(E)
    return la.matmul(la.matmul(E, la.inverse(la.matmul(Et, E))), Et)


def left_inverse(B: la.Mat) -> la.Mat:
    """``(B^T B)^-1 B^T`` for an injective ``B``."""
    if not B or not B[0]:
        return ()
    Bt = la.transpose(B)
    return la.matmul(la.inverse(la.matmul(Bt, B)), Bt)


def same_span(a: list[tuple], b: list[tuple], n: int) -> bool:
    if len(a) == 0 or len(b) == 0:
        return len(a) == len(b) == 0 or (la.rank(la.from_columns(a or b, n)) == 0)
    ra = la.rank(la.from_columns(a, n))
    rb = la.rank(la.from_columns(b, n))
    rab = la.rank(la.from_columns(list(a) + list(b), n))
    return ra == rb == rab


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class TubularData:
    """Tube ``W`` around the image of an axis embedding, with the coordinate
    projection ``pi`` onto the image."""

    W: BoxUnion
    base_map: AffineMap

    @property
    def tangent_rows(self) -> tuple:
        return self.base_map.tangent_rows

    @property
    def normal_rows(self) -> tuple:
        return self.base_map.normal_rows

    @property
    def normal_frame(self) -> list[tuple]:
        m = self.base_map.m
        return [tuple(Fraction(int(i == r)) for i in range(m)) for r in self.normal_rows]

    def pi(self, z) -> tuple:
        """Source coordinates of the projection of ``z``."""
        return self.base_map.projection_parameter(z)

    def pi_point(self, z) -> tuple:
        return self.base_map.apply(self.pi(z))

    def preimage(self, s: BoxUnion) -> BoxUnion:
        """``pi^-1(s)`` for ``s`` in source coordinates (infinite normal sides)."""
        return self.base_map.tube(s, INF)


@dataclass(frozen=True)
class Level1CoordinateChange:
    cc: CoordinateChange
    tub: TubularData
    Etilde: tuple  # basis columns in the target fiber
    pi_tilde: la.Mat  # target fiber -> source fiber on Etilde
    pi_hat: la.Mat  # target fiber -> Etilde
    certificate: dict = field(default_factory=dict, compare=False)

    @property
    def key(self) -> tuple:
        return (self.cc.source, self.cc.target)


def _clearance_radius(cc: CoordinateChange, tgt: KuranishiChart) -> Fraction:
    """Half the distance, in the normal directions, from the embedded image to
    the faces of the target boxes it passes through; capped at 1."""
    bm = cc.base_map
    best = Fraction(2)
    for b in cc.domain.boxes:
        img = bm.image_box(b)
        for tb in tgt.base.boxes:
            if not all(tb.lo[i] < bm.b[i] < tb.hi[i] for i in bm.normal_rows):
                continue
            if not all(max(img.lo[i], tb.lo[i]) < min(img.hi[i], tb.hi[i]) for i in bm.tangent_rows):
                continue
            for i in bm.normal_rows:
                for bound in (tb.lo[i], tb.hi[i]):
                    if not isinstance(bound, float):
                        best = min(best, abs(bound - bm.b[i]))
    return best / 2


def _quotient_basis(E: list[tuple], n: int) -> list[tuple]:
    return la.left_kernel_basis(la.from_columns(E, n), n) if E else [tuple(Fraction(int(i == j)) for i in range(n)) for j in range(n)]


def certify(l1: Level1CoordinateChange, tgt: KuranishiChart, src: KuranishiChart, grid_step=Fraction(1, 20)) -> dict:
    """Level-1 certificate: zeros of the target inside W lie on the image, the
    quotient section vanishes on W only along the image, and its normal
    linearization has smallest singular value above ``TOL_RANK`` at samples
    of the image."""
    cc, tub = l1.cc, l1.tub
    bm = cc.base_map
    normal = tub.normal_rows
    out = {"leaks": [], "quotient_off_image": [], "sigma_min": float("inf"), "samples": 0}
    if tub.W.is_empty():
        return out
    step = tgt.step(grid_step)
    exact, floats = find_section_zeros(tgt.section, tub.W, step, tgt.zero_points())
    for z in exact:
        if any(z[i] != bm.b[i] for i in normal):
            out["leaks"].append(tuple(str(v) for v in z))
    for z in floats:
        if any(abs(z[i] - float(bm.b[i])) > 1e-7 for i in normal):
            out["leaks"].append(tuple(f"{v:.9g}" for v in z))
    if not normal:
        return out
    Q = _quotient_basis(list(l1.Etilde), tgt.rank)
    quot = tgt.section.linear_combine(tuple(tuple(q) for q in Q))
    # quotient zeros inside W must lie on the image
    for b in tub.W.boxes:
        lo = [float(v) for v in b.lo]
        hi = [float(v) for v in b.hi]
        seeds = seed_grid(lo, hi, float(step), max_seeds=512)
        pts, res = newton(quot.eval_np, quot.jac_np, seeds)
        for p, r in zip(pts, res):
            if r < TOL_ZERO and all(l < v < h for v, l, h in zip(p, lo, hi)):
                if any(abs(p[i] - float(bm.b[i])) > 1e-7 for i in normal):
                    out["quotient_off_image"].append(tuple(f"{v:.9g}" for v in p))
                    break
    # transversality of the quotient in the normal directions over the image
    N = np.array([[float(v) for v in c] for c in tub.normal_frame]).T
    Qm = np.array([[float(v) for v in q] for q in Q])
    samples = [tuple(u) for u in cc.domain.grid(src.step(grid_step))] + [u for u in src.zero_points() if cc.domain.contains(u)]
    smin = float("inf")
    for u in samples:
        z = np.array([float(v) for v in bm.apply(u)])
        J = tgt.section.jac_np(z[None, :])[0]
        sv = np.linalg.svd(Qm @ J @ N, compute_uv=False)
        smin = min(smin, float(sv.min()) if sv.size else float("inf"))
    out["sigma_min"] = smin
    out["samples"] = len(samples)
    return out


def certificate_ok(cert: dict) -> bool:
    return not cert["leaks"] and not cert["quotient_off_image"] and cert["sigma_min"] > TOL_RANK


def make_level1(cc: CoordinateChange, W: BoxUnion, Etilde=None) -> Level1CoordinateChange:
    B = cc.bundle_map
    E = tuple(la.columns(B)) if Etilde is None else tuple(Etilde)
    rank_t = len(B)
    return Level1CoordinateChange(cc, TubularData(W, cc.base_map), E, left_inverse(B), projection_matrix(list(E), rank_t))


def build_level1_cc(cc: CoordinateChange, charts: dict, shrink_margin=None, grid_step=Fraction(1, 20)):
    """Level-1 data for ``cc``.  ``shrink_margin`` is the fiber radius; None uses half the normal
    clearance; the radius is halved until the certificate passes.  Returns
    ``(level-1 change, {target id: target chart})``."""
    src, tgt = charts[cc.source], charts[cc.target]
    cc.base_map.require_axis()
    r = Fraction(shrink_margin) if shrink_margin is not None else _clearance_radius(cc, tgt)
    if r <= 0:
        raise NoRoomToShrink(f"no room for a tube around the image of {cc.source}->{cc.target}")
    for _ in range(MAX_HALVINGS + 1):
        W = cc.base_map.tube(cc.domain, r).intersect(tgt.base)
        l1 = make_level1(cc, W)
        cert = certify(l1, tgt, src, grid_step)
        if certificate_ok(cert):
            cert["fiber_radius"] = r
            return Level1CoordinateChange(l1.cc, l1.tub, l1.Etilde, l1.pi_tilde, l1.pi_hat, cert), {tgt.id: tgt}
        if cert["sigma_min"] <= TOL_RANK and not cert["leaks"] and not cert["quotient_off_image"]:
            break
        r /= 2
    raise TransversalityUnachievable(f"level-1 certificate fails for {cc.source}->{cc.target}", certificate=cert)


# ---------------------------------------------------------------------------
# level-1 good coordinate systems


@dataclass
class Level1GCS:
    base: GoodCoordinateSystem  # the input
    gcs: GoodCoordinateSystem  # the precompact shrinking carrying the level-1 data
    table: dict  # (y, x) -> Level1CoordinateChange
    witnesses: dict = field(default_factory=dict)  # (z, y, x) -> group element index in x
    margin: Fraction = Fraction(0)
    rho: Fraction = Fraction(1, 2)
    fiber_scale: Fraction = Fraction(1)
    fiber_scales: dict = field(default_factory=dict)

    @property
    def charts(self) -> dict:
        return self.gcs.charts

    @property
    def changes(self) -> dict:
        return self.gcs.changes

    @property
    def order(self) -> tuple:
        return self.gcs.order


def _purely_normal(g: GoodCoordinateSystem, x) -> set:
    tang = set()
    for (y, xx), cc in g.changes.items():
        if xx == x and not cc.domain.is_empty():
            tang.update(cc.base_map.tangent_rows)
    return set(range(g.charts[x].dim)) - tang


def shrink_boxes(c: KuranishiChart, widths: tuple) -> BoxUnion:
    boxes = [Box(tuple(z[i] - widths[i] for i in range(c.dim)), tuple(z[i] + widths[i] for i in range(c.dim)))
             for z in c.zero_points()]
    u = BoxUnion.from_list(c.dim, boxes)
    if not c.group.base_invariant(u):
        w = min(widths)
        u = BoxUnion.from_list(c.dim, [Box.cube(z, w) for z in c.zero_points()])
    return u


def level1_shrinking(g: GoodCoordinateSystem, x, position: int, margin, rho, scale, inner=None) -> BoxUnion:
    c = g.charts[x]
    normal = _purely_normal(g, x)
    t = Fraction(margin) * Fraction(rho) ** position
    widths = tuple(Fraction(scale) * t if i in normal else t for i in range(c.dim))
    u = shrink_boxes(c, widths)
    if inner is not None and x in inner:
        u = u.union(inner[x])
    if not u.closure_subset_of(c.base):
        raise NoRoomToShrink(f"shrinking boxes do not fit inside chart {x}", index=x)
    return u


def build_level1_gcs(g: GoodCoordinateSystem, margin=None, rho=Fraction(1, 2), fiber_scale=Fraction(1),
                     inner: dict | None = None, grid_step=Fraction(1, 20)) -> Level1GCS:
    """Induction up the order.  At index ``a`` the shrinking of ``a`` is fixed
    (halving its purely normal widths until every incoming level-1
    certificate passes) and the level-1 changes into ``a`` are built; charts
    below ``a`` are never touched again."""
    margin = Fraction(margin) if margin is not None else default_margin(g)
    rho = Fraction(rho)
    order = g.order
    bases: dict = {}
    scales: dict = {}
    table: dict = {}
    for pos, a in enumerate(order):
        frozen = {b: bases[b] for b in order[:pos]}
        scale = Fraction(fiber_scale)
        for _ in range(MAX_HALVINGS + 1):
            ua = level1_shrinking(g, a, pos, margin, rho, scale, inner)
            tgt = g.charts[a].with_base(ua)
            built, ok = {}, True
            for (b, aa), cc in sorted(g.changes.items()):
                if aa != a:
                    continue
                src = g.charts[b].with_base(bases[b])
                rcc = _restrict_change(cc, bases[b], ua)
                if rcc.domain.is_empty():
                    continue
                W = rcc.base_map.tube(rcc.domain, INF).intersect(ua)
                l1 = make_level1(rcc, W)
                cert = certify(l1, tgt, src, grid_step)
                if not certificate_ok(cert):
                    ok = False
                    break
                built[(b, a)] = Level1CoordinateChange(l1.cc, l1.tub, l1.Etilde, l1.pi_tilde, l1.pi_hat, cert)
            if ok:
                break
            scale /= 2
        else:
            raise TransversalityUnachievable(f"no fiber radius certifies the changes into {a}", index=a)
        for b, u in frozen.items():
            if bases[b] is not u:
                raise InductionBlocked(f"step {a} modified the chart {b}", pair=(b, a))
        bases[a] = ua
        scales[a] = scale
        table.update(built)
    gp = shrink_gcs(g, bases)
    for k, l1 in table.items():
        if not gp.changes[k].domain.same_set(l1.cc.domain):
            raise InductionBlocked("restricted domains disagree with the level-1 table", pair=k)
    l1g = Level1GCS(g, gp, table, {}, margin, rho, Fraction(fiber_scale), scales)
    for tri in triples(l1g):
        try:
            chk = check_level1_compat(l1g, tri, grid_step)
        except EmptyCommonDomain:
            continue
        if not chk.ok:
            raise InductionBlocked(f"level-1 compatibility fails on {tri}", witness=chk.witness)
        l1g.witnesses[tri] = chk.notes[0]["h"]
    return l1g


def triples(l1g) -> list[tuple]:
    out = []
    order = l1g.order
    for z, y, x in itertools.combinations(order, 3):
        if (z, y) in l1g.table and (y, x) in l1g.table and (z, x) in l1g.table:
            out.append((z, y, x))
    return out


def orbit_sheets_ok(l1: Level1CoordinateChange, tgt: KuranishiChart) -> bool:
    """Group translates of W are disjoint from W or equal to it."""
    W = l1.tub.W
    for g, _ in tgt.group.elements[1:]:
        img = W.signed_perm_image(g.perm, g.signs)
        if img.meets(W) and not img.same_set(W):
            return False
    return True


def check_level1_compat(l1g: Level1GCS, triple: tuple, grid_step=Fraction(1, 20)) -> Check:
    """The five identities for the triple ``(c, b, a)`` with ``c < b < a``:
    composition up to a witness, projection composition, pullback of the
    extended subbundle, and composition of the fiber maps."""
    c, b, a = triple
    t_cb, t_ca, t_ba = l1g.table[(c, b)], l1g.table[(c, a)], l1g.table[(b, a)]
    charts = l1g.charts
    A = charts[a]
    try:
        _, h = compose_ccs(t_ba.cc, t_cb.cc, charts, direct=t_ca.cc)
    except EmptyComposite:
        raise EmptyCommonDomain(f"triple {triple} has an empty common domain") from None
    if h == "NoWitness":
        return failed("level1_composition", triple=triple)
    hb, hf = A.group.elements[h]
    hinv = A.group.elements[A.group.inverse_index(h)][0]
    # projection composition on W_ac ∩ W_ab ∩ pi_ab^-1(W_bc)
    region = t_ca.tub.W.intersect(t_ba.tub.W).intersect(t_ba.tub.preimage(t_cb.tub.W))
    for z in region.grid(A.step(grid_step)):
        lhs = t_cb.tub.pi(t_ba.tub.pi(z))
        rhs = t_ca.tub.pi(hinv.apply(z))
        if lhs != rhs:
            return failed("level1_projection", triple=triple, point=tuple(str(v) for v in z))
    # extended subbundle pullback: E_ac (moved by h) = B_ba E_cb, and E_ac inside E_ab
    moved = [hf.apply(v) for v in t_ca.Etilde]
    pushed = [la.matvec(t_ba.cc.bundle_map, v) for v in t_cb.Etilde]
    if not same_span(moved, pushed, A.rank) or not same_span(moved + list(t_ba.Etilde), list(t_ba.Etilde), A.rank):
        return failed("level1_subbundle", triple=triple)
    # fiber identifications compose
    for v in t_ca.Etilde:
        lhs = la.matvec(t_cb.pi_tilde, la.matvec(t_ba.pi_tilde, hf.apply(v)))
        rhs = la.matvec(t_ca.pi_tilde, v)
        if lhs != rhs:
            return failed("level1_fiber_identification", triple=triple, vector=tuple(str(x) for x in v))
    # projections compose: P_ac' P_ab = P_ac' with P_ac' the projection onto h E_ac
    P = projection_matrix(moved, A.rank)
    if la.matmul(P, t_ba.pi_hat) != P or la.matmul(t_ba.pi_hat, P) != P:
        return failed("level1_fiber_projection", triple=triple)
    return passed("level1_compat", h=h)


def check_all_compat(l1g: Level1GCS) -> list[Check]:
    out = []
    for tri in triples(l1g):
        try:
            out.append(check_level1_compat(l1g, tri))
        except EmptyCommonDomain:
            out.append(passed("level1_compat", vacuous=True, triple=tri))
    return out


# ---------------------------------------------------------------------------
# stabilization and level-1 embeddings


def stabilize_chart(c: KuranishiChart, k: int, new_id: str | None = None) -> KuranishiChart:
    """``U x (-1,1)^k`` with bundle ``E + R^k`` and section ``s + (new coordinates)``."""
    n = c.dim
    boxes = [Box(b.lo + (Fraction(-1),) * k, b.hi + (Fraction(1),) * k) for b in c.base.boxes]
    base = BoxUnion(n + k, tuple(boxes))
    polys = []
    for p in c.section.polys:
        polys.append({e + (0,) * k: v for e, v in p.items()})
    for j in range(k):
        e = [0] * (n + k)
        e[n + j] = 1
        polys.append({tuple(e): Fraction(1)})
    sec = PolySection.from_polys(n + k, polys)
    gens = []
    for g, h in c.group.elements[1:]:
        gens.append((SignedPerm(g.perm + tuple(range(n, n + k)), g.signs + (1,) * k),
                     SignedPerm(h.perm + tuple(range(c.rank, c.rank + k)), h.signs + (1,) * k)))
    group = GroupAction.generate(n + k, c.rank + k, gens) if gens else GroupAction.trivial(n + k, c.rank + k)
    fp = tuple((lab, p + (Fraction(0),) * k) for lab, p in c.footprint)
    return KuranishiChart(new_id or c.id, base, c.rank + k, group, sec, fp, c.center)


def _block(M: la.Mat, rows: int, cols: int, k: int) -> la.Mat:
    out = []
    for i in range(rows + k):
        row = []
        for j in range(cols + k):
            if i < rows and j < cols:
                row.append(M[i][j])
            elif i >= rows and j >= cols:
                row.append(Fraction(int(i - rows == j - cols)))
            else:
                row.append(Fraction(0))
        out.append(tuple(row))
    return tuple(out)


def stabilize_change(cc: CoordinateChange, src: KuranishiChart, tgt: KuranishiChart, k: int) -> CoordinateChange:
    A = _block(cc.base_map.A, tgt.dim, src.dim, k)
    B = _block(cc.bundle_map, tgt.rank, src.rank, k)
    dom = BoxUnion(src.dim + k, tuple(Box(b.lo + (Fraction(-1),) * k, b.hi + (Fraction(1),) * k) for b in cc.domain.boxes))
    return CoordinateChange(cc.source, cc.target, dom, AffineMap(A, cc.base_map.b + (Fraction(0),) * k, src.dim + k), B)


def chart_embedding(c: KuranishiChart, big: KuranishiChart, k: int) -> CoordinateChange:
    """The zero-section inclusion of ``c`` into its stabilization."""
    n, r = c.dim, c.rank
    A = tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n + k))
    B = tuple(tuple(Fraction(int(i == j)) for j in range(r)) for i in range(r + k))
    return CoordinateChange(c.id, big.id, c.base, AffineMap(A, (Fraction(0),) * (n + k), n), B)


def stabilize_gcs(g: GoodCoordinateSystem, k: int = 1):
    """Stabilize every chart by ``k`` trivial directions.  Returns the new GCS
    and the per-index chart embeddings."""
    charts = {i: stabilize_chart(c, k) for i, c in g.charts.items()}
    changes = {key: stabilize_change(cc, g.charts[key[0]], g.charts[key[1]], k) for key, cc in g.changes.items()}
    big = GoodCoordinateSystem(charts, changes, dict(g.provenance), g.labels, None, {i: i for i in charts}, {},
                               g.explicit_order)
    kemb = {i: chart_embedding(g.charts[i], charts[i], k) for i in g.charts}
    return big, kemb


@dataclass
class ChartEmbedding1:
    """Level-1 chart embedding over the whole target base."""

    emb: CoordinateChange
    Ftilde: tuple
    Pi_tilde: la.Mat
    Pi_hat: la.Mat

    def Pi(self, z) -> tuple:
        return self.emb.base_map.projection_parameter(z)


@dataclass
class Level1Embedding:
    source: Level1GCS
    target: GoodCoordinateSystem
    per_index: dict  # index -> ChartEmbedding1
    witnesses: dict = field(default_factory=dict)  # (y, x) -> group element index


def build_level1_embedding(kemb: dict, base_level1: Level1GCS, target: GoodCoordinateSystem,
                           grid_step=Fraction(1, 20)) -> Level1Embedding:
    g = base_level1.gcs
    for y, x in itertools.permutations(g.charts, 2):
        if g.coverage[y] & g.coverage[x] and g.le(y, x) != target.le(y, x):
            raise NotConcerted(f"orders disagree on the intersecting pair {(y, x)}", pair=(y, x))
    per = {}
    for i in sorted(g.order, key=lambda j: g.order.index(j), reverse=True):
        e = kemb[i]
        e.base_map.require_axis()
        F_ = tuple(la.columns(e.bundle_map))
        per[i] = ChartEmbedding1(e, F_, left_inverse(e.bundle_map), projection_matrix(list(F_), target.charts[i].rank))
    emb = Level1Embedding(base_level1, target, per)
    for (y, x), cc in sorted(g.changes.items()):
        big = target.changes.get((y, x))
        if big is None:
            raise NotConcerted(f"target has no change {y}->{x}", pair=(y, x))
        ey, ex = kemb[y], kemb[x]
        lhs = big.base_map.compose(ey.base_map)
        rhs = ex.base_map.compose(cc.base_map)
        T = target.charts[x]
        found = None
        for k, (h, hf) in enumerate(T.group.elements):
            Hm = h.matrix()
            if la.matmul(Hm, rhs.A) == lhs.A and la.matvec(Hm, rhs.b) == lhs.b and \
                    la.matmul(hf.matrix(), la.matmul(ex.bundle_map, cc.bundle_map)) == la.matmul(big.bundle_map, ey.bundle_map):
                found = k
                break
        if found is None:
            raise NotConcerted(f"embedding square for {y}->{x} does not commute", pair=(y, x))
        emb.witnesses[(y, x)] = found
    return emb


def check_level1_embedding(emb: Level1Embedding, grid_step=Fraction(1, 20)) -> Check:
    """Projection squares: ``Pi_x o phi'_xy = phi_xy o Pi_y`` at samples of the
    target change domains that project into the source change domain."""
    g = emb.source.gcs
    for (y, x), cc in sorted(g.changes.items()):
        big = emb.target.changes[(y, x)]
        Y = emb.target.charts[y]
        for w in big.domain.grid(Y.step(grid_step)):
            u = emb.per_index[y].Pi(w)
            if not cc.domain.contains(u):
                continue
            lhs = emb.per_index[x].Pi(big.apply(w))
            rhs = cc.apply(u)
            if lhs != rhs:
                return failed("level1_embedding_square", pair=(y, x), point=tuple(str(v) for v in w))
    for i, pe in emb.per_index.items():
        for v in pe.Ftilde:
            if la.matvec(pe.Pi_hat, v) != tuple(v):
                return failed("level1_embedding_projection", index=i)
    return passed("level1_embedding")
