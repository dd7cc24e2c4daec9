"""Multisection perturbations, lifting through level-1 changes, zero sets,
orientation and signed counts.

Perturbation branches are finite sums of bump-supported constant sections
``eps * a * bump(z)`` where ``bump`` is a product of quintic smoothstep
profiles equal to 1 on the inner half of a cube.  Coefficient vectors come
from a counter-based generator keyed by (seed, chart, bump, draw), so results
do not depend on evaluation order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .boxes import Box, BoxUnion
from .errors import (
    HypothesisViolation,
    OrientationInconsistent,
    RegularValueSearchExhausted,
    SupportEscapesDomain,
    VdimNonconstant,
    VdimNonzero,
)
from .geometry import GroupAction, PolySection
from .level1 import Level1CoordinateChange, Level1GCS
from .results import Check, failed, passed
from .zeros import TOL_RANK, TOL_ZERO, dedupe, newton, seed_grid

MAX_DRAWS = 1000
MIN_SEP = 1e-7


# ---------------------------------------------------------------------------
# float helpers


def contains_np(u: BoxUnion, X: np.ndarray) -> np.ndarray:
    """Vectorized open-set membership of float points."""
    mask = np.zeros(len(X), dtype=bool)
    for b in u.boxes:
        lo = np.array([float(v) for v in b.lo])
        hi = np.array([float(v) for v in b.hi])
        mask |= np.all((X > lo) & (X < hi), axis=1)
    return mask


def _smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10 - 15 * x + 6 * x * x)


def _smoothstep_d(x: np.ndarray) -> np.ndarray:
    inside = (x > 0) & (x < 1)
    return np.where(inside, 30 * x * x * (1 - x) * (1 - x), 0.0)


def _rng(seed: int, chart: str, bump: int, draw: int) -> np.random.Generator:
    h = hashlib.sha256(f"{seed}|{chart}|{bump}|{draw}".encode()).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(h[:16], "little")))


# ---------------------------------------------------------------------------
# branches


@dataclass(frozen=True)
class Bump:
    """``vector * profile`` with the profile 1 on the cube of radius
    ``radius/2`` around ``center`` and 0 outside the cube of radius ``radius``."""

    center: tuple
    radius: Fraction
    vector: tuple  # floats, already scaled

    @property
    def support(self) -> Box:
        return Box.cube(self.center, self.radius)

    def profile(self, X: np.ndarray):
        c = np.array([float(v) for v in self.center])
        r = float(self.radius)
        d = np.abs(X - c) / r
        t = 2 * d - 1
        f = 1 - _smoothstep(t)
        df = -_smoothstep_d(t) * 2 * np.sign(X - c) / r
        val = np.prod(f, axis=1)
        grad = np.empty_like(X)
        for i in range(X.shape[1]):
            others = np.prod(np.delete(f, i, axis=1), axis=1) if X.shape[1] > 1 else np.ones(len(X))
            grad[:, i] = df[:, i] * others
        return val, grad


@dataclass(frozen=True)
class BumpBranch:
    bumps: tuple
    rank: int
    dim: int

    @property
    def trivial(self) -> bool:
        return not self.bumps

    def eval_np(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros((len(X), self.rank))
        for b in self.bumps:
            v, _ = b.profile(X)
            out += v[:, None] * np.array(b.vector)[None, :]
        return out

    def jac_np(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros((len(X), self.rank, self.dim))
        for b in self.bumps:
            _, g = b.profile(X)
            out += np.array(b.vector)[None, :, None] * g[:, None, :]
        return out


@dataclass(frozen=True)
class LiftedBranch:
    """``z -> B tau(pi(z))`` on W, zero elsewhere."""

    l1: Level1CoordinateChange
    inner: BumpBranch

    @property
    def trivial(self) -> bool:
        return self.inner.trivial

    @property
    def bumps(self) -> tuple:
        return self.inner.bumps

    def _parts(self):
        bm = self.l1.cc.base_map
        cols = bm.require_axis()
        rows = np.array([i for i, _ in cols], dtype=int)
        scale = np.array([float(a) for _, a in cols])
        off = np.array([float(bm.b[i]) for i, _ in cols])
        B = np.array([[float(v) for v in r] for r in self.l1.cc.bundle_map])
        return rows, scale, off, B

    def eval_np(self, X: np.ndarray) -> np.ndarray:
        rows, scale, off, B = self._parts()
        out = np.zeros((len(X), B.shape[0]))
        mask = contains_np(self.l1.tub.W, X)
        if mask.any():
            U = (X[mask][:, rows] - off) / scale
            out[mask] = self.inner.eval_np(U) @ B.T
        return out

    def jac_np(self, X: np.ndarray) -> np.ndarray:
        rows, scale, off, B = self._parts()
        out = np.zeros((len(X), B.shape[0], X.shape[1]))
        mask = contains_np(self.l1.tub.W, X)
        if mask.any():
            U = (X[mask][:, rows] - off) / scale
            Ji = self.inner.jac_np(U)  # (n, rank_src, dim_src)
            P = np.zeros((len(rows), X.shape[1]))
            P[np.arange(len(rows)), rows] = 1 / scale
            out[mask] = np.einsum("ij,njk,kl->nil", B, Ji, P)
        return out


@dataclass(frozen=True)
class Multisection:
    chart: str
    rank: int
    dim: int
    branches: tuple  # ((weight, branch), ...)
    symmetrized: bool = False
    support: BoxUnion | None = None

    @property
    def empty(self) -> bool:
        return all(br.trivial for _, br in self.branches)

    @staticmethod
    def zero(chart: str, rank: int, dim: int) -> "Multisection":
        return Multisection(chart, rank, dim, ((Fraction(1), BumpBranch((), rank, dim)),), False, BoxUnion.empty(dim))


def symmetrize(branch: BumpBranch, group: GroupAction) -> tuple:
    """One branch per group element, ``g . tau = g_fiber o tau o g^-1``, with
    equal weights."""
    w = Fraction(1, group.order)
    out = []
    for g, gf in group.elements:
        bumps = tuple(Bump(g.apply(b.center), b.radius, tuple(float(v) for v in gf.apply(b.vector))) for b in branch.bumps)
        out.append((w, BumpBranch(bumps, branch.rank, branch.dim)))
    return tuple(out)


class EffectiveSection:
    """``s + sum of terms`` evaluated in floating point."""

    def __init__(self, base: PolySection, terms=()):
        self.base = base
        self.terms = [t for t in terms if not t.trivial]

    def eval_np(self, X: np.ndarray) -> np.ndarray:
        out = self.base.eval_np(X)
        for t in self.terms:
            out = out + t.eval_np(X)
        return out

    def jac_np(self, X: np.ndarray) -> np.ndarray:
        out = self.base.jac_np(X)
        for t in self.terms:
            out = out + t.jac_np(X)
        return out


# ---------------------------------------------------------------------------
# zero finding


def find_zeros(section, region: BoxUnion, step, extra_seeds=()) -> list[np.ndarray]:
    """Newton zeros of ``section`` inside ``region`` from grid seeds and extra seeds."""
    seeds = []
    for b in region.boxes:
        lo = [float(v) for v in b.lo]
        hi = [float(v) for v in b.hi]
        seeds.append(seed_grid(lo, hi, float(step), max_seeds=4096))
    extra = [np.asarray(s, float) for s in extra_seeds]
    if extra:
        seeds.append(np.array(extra))
    if not seeds:
        return []
    S = np.concatenate(seeds, axis=0)
    pts, res = newton(section.eval_np, section.jac_np, S)
    keep = (res < TOL_ZERO) & contains_np(region, pts)
    found = dedupe(pts[keep], MIN_SEP)
    return sorted(found, key=lambda z: tuple(np.round(z, 9)))


def _bump_seeds(bump: Bump, per_axis: int = 9) -> np.ndarray:
    c = np.array([float(v) for v in bump.center])
    r = float(bump.radius)
    return seed_grid(c - r, c + r, 2 * r / per_axis, max_seeds=4096)


def sigma_min(J: np.ndarray) -> float:
    if J.size == 0:
        return float("inf")
    return float(np.linalg.svd(J, compute_uv=False).min())


# ---------------------------------------------------------------------------
# the genericity step


def _sup_dist(a, b) -> float:
    return max(abs(float(x) - float(y)) for x, y in zip(a, b))


def _snap(z: np.ndarray, exact_points, tol: float) -> tuple:
    """An exact footprint point within ``tol`` of ``z``, else a nearby rational.
    Newton converges slowly to degenerate zeros, hence the coarse tolerance."""
    for p in exact_points:
        if _sup_dist(p, z) < tol:
            return tuple(p)
    return tuple(Fraction(float(v)).limit_denominator(10**6) for v in z)


def _bump_radius(center, region: BoxUnion, avoid: BoxUnion, must_fit, obstacles, group: GroupAction) -> Fraction:
    allowed = region.minus_closure(avoid) if not avoid.is_empty() else region
    r = Fraction(1, 4)
    images = [g.apply(center) for g, _ in group.elements[1:]]
    for _ in range(40):
        cube = BoxUnion.of(Box.cube(center, r))
        ok = cube.closure_subset_of(allowed)
        ok = ok and all(_sup_dist(q, center) > 2 * float(r) for q in obstacles)
        ok = ok and all(q == center or _sup_dist(q, center) > 2 * float(r) for q in images)
        for dom in must_fit:
            if ok and dom.closure_contains(center):
                ok = cube.closure_subset_of(dom)
        if ok:
            return r
        r /= 2
    raise HypothesisViolation(f"no room for a bump around {tuple(str(v) for v in center)}")


def genericity_perturb(section, U: BoxUnion, U1: BoxUnion | None, U2: BoxUnion, O: BoxUnion | None,
                       group: GroupAction, seed: int, chart: str = "", step=None, exact_points=(),
                       must_fit=(), force: bool = False) -> Multisection:
    """Perturb ``section`` near its degenerate zeros in ``(U2 u O) \\ closure(U1)``.

    Each degenerate zero (up to the group) gets a bump whose cube stays inside
    the allowed region and inside every domain in ``must_fit`` that contains
    its centre.  Coefficient vectors are redrawn until every perturbed zero
    inside the bumps has smallest singular value above ``TOL_RANK``; the result
    is symmetrized with equal weights.  ``force`` bumps transverse zeros too.
    """
    dim = U.dim
    rank = len(section.eval_np(np.zeros((1, dim)))[0])
    U1 = U1 if U1 is not None else BoxUnion.empty(dim)
    region = U2.union(O).intersect(U) if O is not None else U2.intersect(U)
    if step is None:
        step = region.shortest_side() / 20 if not region.is_empty() else Fraction(1, 20)
    zeros = find_zeros(section, region, step, [[float(v) for v in p] for p in exact_points])
    degenerate = []
    for z in zeros:
        J = section.jac_np(z[None, :])[0]
        bad = sigma_min(J) <= TOL_RANK * max(1.0, float(np.abs(J).max(initial=0.0)))
        if bad or force:
            degenerate.append(z)
    cluster = min(float(step) / 4, 1e-3)
    reps: list[tuple] = []
    for z in degenerate:
        c = _snap(z, exact_points, cluster)
        if any(_sup_dist(g.apply(r), c) < cluster for r in reps for g, _ in group.elements):
            continue
        if U1.closure_contains(c):
            raise HypothesisViolation(f"degenerate zero {tuple(str(v) for v in c)} inside the transverse region")
        reps.append(c)
    if not reps:
        return Multisection.zero(chart, rank, dim)
    bumps_geom = []
    for k, c in enumerate(reps):
        obstacles = [tuple(z) for z in zeros if _sup_dist(z, c) > cluster]
        obstacles += [g.apply(r) for j, r in enumerate(reps) if j != k for g, _ in group.elements]
        r = _bump_radius(c, region, U1, must_fit, obstacles, group)
        bumps_geom.append((c, r))
    for draw in range(MAX_DRAWS):
        bumps = []
        for k, (c, r) in enumerate(bumps_geom):
            a = _rng(seed, chart, k, draw).uniform(-1.0, 1.0, rank)
            eps = float(r / 4) ** 2
            bumps.append(Bump(c, r, tuple(float(v) for v in eps * a)))
        branch = BumpBranch(tuple(bumps), rank, dim)
        eff = EffectiveSection(section if isinstance(section, PolySection) else section.base,
                               [branch] if isinstance(section, PolySection) else list(section.terms) + [branch])
        ok = True
        for b in bumps:
            box = BoxUnion.of(b.support)
            for z in find_zeros(eff, box, b.radius / 8, _bump_seeds(b)):
                J = eff.jac_np(z[None, :])[0]
                if sigma_min(J) <= TOL_RANK:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            support = BoxUnion.from_list(dim, [Box.cube(g.apply(c), r) for c, r in bumps_geom for g, _ in group.elements])
            return Multisection(chart, rank, dim, symmetrize(branch, group), group.order > 1, support)
    raise RegularValueSearchExhausted(f"no regular value after {MAX_DRAWS} draws on chart {chart}")


# ---------------------------------------------------------------------------
# lifting


def lift_perturbation(l1: Level1CoordinateChange, tau: Multisection) -> Multisection:
    """Pull ``tau`` back through the projection of ``l1`` and extend it along
    the normal fibers inside the extended subbundle.  Bumps whose support
    misses the closure of the change domain contribute nothing; a bump that
    straddles its boundary is an error."""
    dom = l1.cc.domain
    tgt_dim = l1.cc.base_map.m
    tgt_rank = len(l1.cc.bundle_map)
    out = []
    for w, br in tau.branches:
        keep = []
        for b in br.bumps:
            cube = BoxUnion.of(b.support)
            if cube.closure_subset_of(dom):
                keep.append(b)
            elif cube.intersect(dom).is_empty() and not any(dom.closure_contains(p) for p in [b.center]):
                continue
            else:
                raise SupportEscapesDomain(f"bump at {tuple(str(v) for v in b.center)} leaves the domain of "
                                           f"{l1.cc.source}->{l1.cc.target}")
        out.append((w, LiftedBranch(l1, BumpBranch(tuple(keep), br.rank, br.dim))))
    return Multisection(l1.cc.target, tgt_rank, tgt_dim, tuple(out), tau.symmetrized, None)


def check_lift_identity(l1: Level1CoordinateChange, tau: Multisection, src_section: PolySection,
                        tgt_section: PolySection, grid_step=Fraction(1, 20)) -> Check:
    """On the embedded image the lifted section equals the bundle-map image of
    the source section plus perturbation, at grid samples of the domain."""
    lifted = lift_perturbation(l1, tau)
    B = np.array([[float(v) for v in r] for r in l1.cc.bundle_map])
    dom = l1.cc.domain
    if dom.is_empty():
        return passed("lift_identity", exact=False, samples=0)
    pts = dom.grid(dom.shortest_side() * Fraction(grid_step))
    if not pts:
        return passed("lift_identity", exact=False, samples=0)
    U = np.array([[float(v) for v in p] for p in pts])
    Z = l1.cc.base_map.apply_np(U)
    for (w, br), (_, lb) in zip(tau.branches, lifted.branches):
        lhs = tgt_section.eval_np(Z) + lb.eval_np(Z)
        rhs = (src_section.eval_np(U) + br.eval_np(U)) @ B.T
        err = float(np.max(np.abs(lhs - rhs))) if len(U) else 0.0
        if err > 1e-9:
            return failed("lift_identity", certified=False, error=f"{err:.3g}")
    return passed("lift_identity", exact=False, samples=len(pts))


# ---------------------------------------------------------------------------
# global perturbation


@dataclass
class Perturbation:
    l1g: Level1GCS
    seed: int
    own: dict  # index -> Multisection
    lifts: dict  # index -> [(source index, lifted Multisection)]

    def effective(self, index, combo: tuple) -> EffectiveSection:
        """Effective section at ``index`` for one branch choice per
        contribution (lifts in order, then the own perturbation)."""
        parts = [ms for _, ms in self.lifts[index]] + [self.own[index]]
        terms = [ms.branches[k][1] for ms, k in zip(parts, combo)]
        return EffectiveSection(self.l1g.charts[index].section, terms)

    def combos(self, index):
        parts = [ms for _, ms in self.lifts[index]] + [self.own[index]]
        for combo in itertools.product(*[range(len(ms.branches)) for ms in parts]):
            w = Fraction(1)
            for ms, k in zip(parts, combo):
                w *= ms.branches[k][0]
            yield combo, w


def global_perturb(l1g: Level1GCS, seed: int = 0, grid_step=Fraction(1, 20)) -> Perturbation:
    """Perturb up the order.  At each index the lower perturbations are lifted
    through the level-1 table (the lifted section is transverse on the tubes);
    the remaining degenerate zeros outside the tubes get bumps that fit inside
    every outgoing change domain."""
    vd = {c.vdim for c in l1g.charts.values()}
    if len(vd) > 1:
        raise VdimNonconstant(f"virtual dimensions {sorted(vd)} differ")
    own: dict = {}
    lifts: dict = {}
    for a in l1g.order:
        ch = l1g.charts[a]
        lifts[a] = []
        tubes = BoxUnion.empty(ch.dim)
        for j in l1g.order:
            if (j, a) in l1g.table:
                l1 = l1g.table[(j, a)]
                lifts[a].append((j, lift_perturbation(l1, own[j])))
                tubes = tubes.union(l1.tub.W)
        base_terms = [ms.branches[0][1] for _, ms in lifts[a]]
        eff = EffectiveSection(ch.section, base_terms)
        must_fit = [l1g.table[(a, x)].cc.domain for x in l1g.order if (a, x) in l1g.table]
        own[a] = genericity_perturb(eff, ch.base, tubes, ch.base, None, ch.group, seed, chart=str(a),
                                    step=ch.step(grid_step), exact_points=ch.zero_points(), must_fit=must_fit)
    return Perturbation(l1g, seed, own, lifts)


# ---------------------------------------------------------------------------
# zero sets, orientation and counting


@dataclass(frozen=True)
class ZeroEntry:
    """One perturbed zero.  ``weight / stabilizer`` is its share of the count:
    the branch weight divided by the group order, written with the point
    stabilizer so that a zero fixed by the whole group reads ``1/|Stab|``."""

    chart: str
    branches: tuple
    point: tuple
    residual: float
    det: float
    sign: int
    sigma_min: float
    stabilizer: int
    weight: Fraction
    counted_at: str

    @property
    def counted(self) -> bool:
        return self.counted_at == self.chart


@dataclass
class ZeroSet:
    entries: list
    vdims: dict
    order: tuple

    def by_chart(self, chart) -> list:
        return [e for e in self.entries if e.chart == chart]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["chart_id", "coords", "sign", "weight", "stabilizer", "branches", "counted_at"])
        for e in self.entries:
            w.writerow([e.chart, " ".join(_fmt_coord(v) for v in e.point), e.sign, str(e.weight), e.stabilizer,
                        "/".join(str(k) for k in e.branches), e.counted_at])
        return buf.getvalue()


def _fmt_coord(v) -> str:
    """Ten decimals, with negative zero printed as zero."""
    return f"{round(float(v), 10) + 0.0:.10f}"


def _owner(l1g: Level1GCS, a, z: np.ndarray):
    """Smallest lower index whose change image contains ``z``."""
    for j in l1g.order:
        if (j, a) not in l1g.table:
            continue
        l1 = l1g.table[(j, a)]
        bm = l1.cc.base_map
        if not contains_np(l1.tub.W, z[None, :])[0]:
            continue
        if any(abs(z[i] - float(bm.b[i])) > 1e-7 for i in bm.normal_rows):
            continue
        u = np.array([(z[i] - float(bm.b[i])) / float(c) for i, c in bm.require_axis()])
        if contains_np(l1.cc.domain, u[None, :])[0]:
            return j
    return None


def zero_set(l1g: Level1GCS, pert: Perturbation, cfg=None, grid_step=Fraction(1, 20)) -> ZeroSet:
    """Zeros of every branch combination in every chart, with signs,
    stabilizers, weights and the index at which each zero is counted."""
    vdims = {a: l1g.charts[a].vdim for a in l1g.order}
    entries = []
    for a in l1g.order:
        ch = l1g.charts[a]
        G = ch.group.order
        extra = [[float(v) for v in p] for p in ch.zero_points()]
        for ms in [pert.own[a]] + [m for _, m in pert.lifts[a]]:
            for _, br in ms.branches:
                for b in br.bumps:
                    S = _bump_seeds(b)
                    if isinstance(br, LiftedBranch):
                        S = br.l1.cc.base_map.apply_np(S)
                    extra.extend(S.tolist())
        for combo, w in pert.combos(a):
            eff = pert.effective(a, combo)
            for z in find_zeros(eff, ch.base, ch.step(grid_step), extra):
                J = eff.jac_np(z[None, :])[0]
                res = float(np.max(np.abs(eff.eval_np(z[None, :])[0]))) if ch.rank else 0.0
                det = float(np.linalg.det(J)) if J.shape[0] == J.shape[1] else float("nan")
                sgn = 1 if det > 0 else -1
                stab = ch.group.stabilizer_float(z)
                owner = _owner(l1g, a, z)
                entries.append(ZeroEntry(str(a), combo, tuple(float(v) for v in z), res, det, sgn, sigma_min(J),
                                         stab, w * Fraction(stab, G), str(owner) if owner is not None else str(a)))
    return ZeroSet(entries, vdims, tuple(l1g.order))


@dataclass
class OrientationData:
    signs: dict  # chart -> (TU sign, E sign)
    consistent: bool = True
    witness: dict = field(default_factory=dict)

    def sign(self, chart) -> int:
        tu, e = self.signs.get(chart, (1, 1))
        return tu * e


def check_orientation(l1g: Level1GCS, signs: dict, grid_step=Fraction(1, 20)) -> Check:
    """Every level-1 change preserves the orientation of ``TU + E*``: with N
    the normal frame, ``sign det[A | N] * sign det[B | J N]`` must equal the
    ratio of the chart signs at every sample of the change domain."""
    for (y, x), l1 in sorted(l1g.table.items()):
        cc = l1.cc
        tgt = l1g.charts[x]
        N = np.array([[float(v) for v in c] for c in l1.tub.normal_frame]).T.reshape(tgt.dim, -1)
        A = np.array([[float(v) for v in r] for r in cc.base_map.A]).reshape(tgt.dim, -1)
        B = np.array([[float(v) for v in r] for r in cc.bundle_map]).reshape(tgt.rank, -1)
        if B.shape[1] + N.shape[1] != tgt.rank:
            continue
        s_base = np.sign(np.linalg.det(np.hstack([A, N])))
        ey = signs.get(y, (1, 1))
        ex = signs.get(x, (1, 1))
        want = ey[0] * ey[1] * ex[0] * ex[1]
        src = l1g.charts[y]
        pts = [p for p in cc.domain.grid(src.step(grid_step))] + [p for p in src.zero_points() if cc.domain.contains(p)]
        for u in pts:
            z = cc.base_map.apply_np(np.array([[float(v) for v in u]]))
            J = tgt.section.jac_np(z)[0]
            d = np.linalg.det(np.hstack([B, J @ N]))
            if abs(d) <= TOL_RANK:
                continue
            if int(s_base * np.sign(d)) != want:
                return failed("orientation", certified=False, change=f"{y}->{x}", point=tuple(str(v) for v in u))
    return passed("orientation", exact=False)


def orientation_data(l1g: Level1GCS, grid_step=Fraction(1, 20)) -> OrientationData:
    src = l1g.gcs.source
    under = l1g.gcs.underlying
    signs = {}
    for a in l1g.order:
        cid = under.get(a, a)
        signs[a] = tuple(src.orientation.get(cid, (1, 1))) if src is not None else (1, 1)
    chk = check_orientation(l1g, signs, grid_step)
    return OrientationData(signs, chk.ok, chk.witness)


def signed_count(zs: ZeroSet, ori: OrientationData) -> Fraction:
    """Sum over counted zeros of weight * sign * orientation / stabilizer."""
    if any(v != 0 for v in zs.vdims.values()):
        raise VdimNonzero(f"virtual dimension {sorted(set(zs.vdims.values()))} is not zero")
    if not ori.consistent:
        raise OrientationInconsistent("coordinate changes do not preserve orientation", **ori.witness)
    total = Fraction(0)
    for e in zs.entries:
        if not e.counted:
            continue
        if e.sigma_min <= TOL_RANK:
            raise HypothesisViolation(f"zero {e.point} in chart {e.chart} is not transverse")
        total += e.weight * e.sign * ori.sign(e.chart) / e.stabilizer
    return total
