"""Charts, group actions, polynomial sections and coordinate changes.

Everything here is exact: points and coefficients are rationals, group
elements are signed permutations, base maps are affine with rational entries
and bundle maps are constant matrices.  The only floating-point code paths are
the Newton seeds used to locate zeros that are not listed in a footprint.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import linalg as la
from .boxes import Box, BoxUnion, as_point
from .errors import (
    EmptyComposite,
    NonAxisMap,
    NotInvariant,
    NotSubset,
    PointOutsideBase,
    RankDeficientEmbedding,
)
from .results import Check, failed, passed
from .zeros import TOL_RANK, TOL_ZERO, dedupe, newton, seed_grid, snap_rational

# ---------------------------------------------------------------------------
# signed permutations and finite groups


@dataclass(frozen=True)
class SignedPerm:
    """The linear map ``y_j = signs[j] * x[perm[j]]``."""

    perm: tuple
    signs: tuple

    @staticmethod
    def identity(n: int) -> "SignedPerm":
        return SignedPerm(tuple(range(n)), (1,) * n)

    @staticmethod
    def from_matrix(m: Sequence[Sequence]) -> "SignedPerm":
        m = la.mat(m)
        if not la.is_signed_perm(m):
            raise ValueError(f"not a signed permutation matrix: {la.fmt_mat(m)}")
        perm, signs = [], []
        for row in m:
            j = next(k for k, v in enumerate(row) if v != 0)
            perm.append(j)
            signs.append(int(row[j]))
        return SignedPerm(tuple(perm), tuple(signs))

    @property
    def n(self) -> int:
        return len(self.perm)

    def apply(self, x: Sequence) -> tuple:
        return tuple(s * x[p] for p, s in zip(self.perm, self.signs))

    def compose(self, other: "SignedPerm") -> "SignedPerm":
        """``self o other``."""
        perm = tuple(other.perm[p] for p in self.perm)
        signs = tuple(s * other.signs[p] for p, s in zip(self.perm, self.signs))
        return SignedPerm(perm, signs)

    def inverse(self) -> "SignedPerm":
        perm = [0] * self.n
        signs = [1] * self.n
        for j, (p, s) in enumerate(zip(self.perm, self.signs)):
            perm[p] = j
            signs[p] = s
        return SignedPerm(tuple(perm), tuple(signs))

    def matrix(self) -> la.Mat:
        rows = []
        for p, s in zip(self.perm, self.signs):
            rows.append(tuple(Fraction(s if k == p else 0) for k in range(self.n)))
        return tuple(rows)

    def to_json(self) -> list:
        return la.fmt_mat(self.matrix())


@dataclass(frozen=True)
class GroupAction:
    """A finite group acting on base and fiber by signed permutations.

    ``elements[i] = (base_action, fiber_action)``; index 0 is the identity and
    ``table[i][j]`` is the index of ``elements[i] o elements[j]``.
    """

    dim: int
    rank: int
    elements: tuple
    table: tuple

    @staticmethod
    def trivial(dim: int, rank: int) -> "GroupAction":
        return GroupAction(dim, rank, ((SignedPerm.identity(dim), SignedPerm.identity(rank)),), ((0,),))

    @staticmethod
    def generate(dim: int, rank: int, generators: Iterable[tuple]) -> "GroupAction":
        """Close a set of ``(base, fiber)`` signed permutations under composition."""
        ident = (SignedPerm.identity(dim), SignedPerm.identity(rank))
        elems = [ident]
        gens = [(g if isinstance(g, SignedPerm) else SignedPerm.from_matrix(g),
                 h if isinstance(h, SignedPerm) else SignedPerm.from_matrix(h)) for g, h in generators]
        frontier = list(elems)
        while frontier:
            new = []
            for a in frontier:
                for g in gens:
                    c = (g[0].compose(a[0]), g[1].compose(a[1]))
                    if c not in elems:
                        elems.append(c)
                        new.append(c)
            frontier = new
        # sort non-identity elements for a canonical order
        rest = sorted(elems[1:], key=lambda e: (e[0].perm, e[0].signs, e[1].perm, e[1].signs))
        elems = [ident] + rest
        index = {e: i for i, e in enumerate(elems)}
        table = []
        for a in elems:
            row = []
            for b in elems:
                c = (a[0].compose(b[0]), a[1].compose(b[1]))
                if c not in index:
                    raise ValueError("group not closed (base action not faithful to fiber action?)")
                row.append(index[c])
            table.append(tuple(row))
        return GroupAction(dim, rank, tuple(elems), tuple(table))

    @property
    def order(self) -> int:
        return len(self.elements)

    def inverse_index(self, i: int) -> int:
        return next(j for j in range(self.order) if self.table[i][j] == 0)

    def act(self, i: int, x: Sequence) -> tuple:
        return self.elements[i][0].apply(x)

    def act_fiber(self, i: int, v: Sequence) -> tuple:
        return self.elements[i][1].apply(v)

    def orbit(self, x: Sequence) -> list[tuple]:
        out = []
        for i in range(self.order):
            y = self.act(i, x)
            if y not in out:
                out.append(y)
        return out

    def stabilizer(self, x: Sequence) -> list[int]:
        x = tuple(x)
        return [i for i in range(self.order) if self.act(i, x) == x]

    def stabilizer_float(self, x: np.ndarray, tol: float = 1e-7) -> int:
        cnt = 0
        for i in range(self.order):
            g = self.elements[i][0]
            y = np.array([s * x[p] for p, s in zip(g.perm, g.signs)])
            if np.max(np.abs(y - x), initial=0.0) < tol:
                cnt += 1
        return cnt

    def base_invariant(self, u: BoxUnion) -> bool:
        for g, _ in self.elements[1:]:
            img = u.signed_perm_image(g.perm, g.signs)
            if not img.same_set(u):
                return False
        return True

    def check_closed(self) -> bool:
        index = {e: i for i, e in enumerate(self.elements)}
        if self.elements[0] != (SignedPerm.identity(self.dim), SignedPerm.identity(self.rank)):
            return False
        for a in self.elements:
            inv = (a[0].inverse(), a[1].inverse())
            if inv not in index:
                return False
            for b in self.elements:
                if (a[0].compose(b[0]), a[1].compose(b[1])) not in index:
                    return False
        return True

    def to_json(self) -> list:
        return [{"base": g.to_json(), "fiber": h.to_json()} for g, h in self.elements[1:]]


# ---------------------------------------------------------------------------
# polynomials


Poly = dict  # exponent tuple -> Fraction


def _clean(p: Poly) -> Poly:
    return {e: c for e, c in p.items() if c != 0}


def poly_add(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for e, c in b.items():
        out[e] = out.get(e, Fraction(0)) + c
    return _clean(out)


def poly_scale(a: Poly, k) -> Poly:
    k = Fraction(k)
    return _clean({e: c * k for e, c in a.items()})


def poly_mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for e1, c1 in a.items():
        for e2, c2 in b.items():
            e = tuple(x + y for x, y in zip(e1, e2))
            out[e] = out.get(e, Fraction(0)) + c1 * c2
    return _clean(out)


def poly_const(c, nvars: int) -> Poly:
    return _clean({(0,) * nvars: Fraction(c)})


def poly_eval(p: Poly, x: Sequence) -> Fraction:
    total = Fraction(0)
    for e, c in p.items():
        term = c
        for xi, k in zip(x, e):
            if k:
                term *= xi**k
        total += term
    return total


def poly_diff(p: Poly, i: int) -> Poly:
    out: Poly = {}
    for e, c in p.items():
        if e[i]:
            f = list(e)
            f[i] -= 1
            out[tuple(f)] = out.get(tuple(f), Fraction(0)) + c * e[i]
    return _clean(out)


def poly_subst_affine(p: Poly, A: la.Mat, b: Sequence, nvars_new: int) -> Poly:
    """Substitute ``x = A y + b`` into ``p(x)``."""
    lin = []
    for row, bi in zip(A, b):
        q: Poly = {}
        for j, a in enumerate(row):
            if a:
                e = [0] * nvars_new
                e[j] = 1
                q[tuple(e)] = Fraction(a)
        if bi:
            q[(0,) * nvars_new] = q.get((0,) * nvars_new, Fraction(0)) + Fraction(bi)
        lin.append(q)
    powers: dict = {}

    def power(i: int, k: int) -> Poly:
        key = (i, k)
        if key not in powers:
            powers[key] = poly_const(1, nvars_new) if k == 0 else poly_mul(power(i, k - 1), lin[i])
        return powers[key]

    out: Poly = {}
    for e, c in p.items():
        term = poly_const(c, nvars_new)
        for i, k in enumerate(e):
            if k:
                term = poly_mul(term, power(i, k))
        out = poly_add(out, term)
    return out


def _poly_key(p: Poly) -> tuple:
    return tuple(sorted(p.items()))


@dataclass(frozen=True)
class PolySection:
    """A polynomial section of the trivial bundle ``R^base_dim x R^fiber_rank``."""

    base_dim: int
    fiber_rank: int
    components: tuple  # tuple of sorted ((exp, coef), ...) tuples

    @staticmethod
    def from_polys(base_dim: int, polys: Sequence[Poly]) -> "PolySection":
        comps = []
        for p in polys:
            for e in p:
                if len(e) != base_dim:
                    raise ValueError("exponent arity mismatch")
            comps.append(_poly_key(_clean({tuple(e): Fraction(c) for e, c in p.items()})))
        return PolySection(base_dim, len(polys), tuple(comps))

    @staticmethod
    def from_terms(base_dim: int, comps: Sequence[Sequence[tuple]]) -> "PolySection":
        """``comps[k]`` is a list of ``(coef, exponent_vector)`` pairs."""
        polys = []
        for terms in comps:
            p: Poly = {}
            for coef, exps in terms:
                e = tuple(int(v) for v in exps)
                p[e] = p.get(e, Fraction(0)) + Fraction(coef)
            polys.append(p)
        return PolySection.from_polys(base_dim, polys)

    @cached_property
    def polys(self) -> list[Poly]:
        return [dict(c) for c in self.components]

    @cached_property
    def derivs(self) -> list[list[Poly]]:
        return [[poly_diff(p, i) for i in range(self.base_dim)] for p in self.polys]

    def eval(self, x: Sequence) -> tuple:
        x = as_point(x)
        return tuple(poly_eval(p, x) for p in self.polys)

    def jacobian(self, x: Sequence) -> la.Mat:
        x = as_point(x)
        return tuple(tuple(poly_eval(d, x) for d in row) for row in self.derivs)

    def is_zero_at(self, x: Sequence) -> bool:
        return all(v == 0 for v in self.eval(x))

    def compose_affine(self, A: la.Mat, b: Sequence, new_dim: int) -> "PolySection":
        return PolySection.from_polys(new_dim, [poly_subst_affine(p, A, b, new_dim) for p in self.polys])

    def linear_combine(self, M: la.Mat) -> "PolySection":
        """The section ``M . s`` (fiber-wise matrix product)."""
        polys = []
        for row in M:
            acc: Poly = {}
            for coef, p in zip(row, self.polys):
                if coef:
                    acc = poly_add(acc, poly_scale(p, coef))
            polys.append(acc)
        return PolySection.from_polys(self.base_dim, polys)

    def same_as(self, other: "PolySection") -> bool:
        return self.fiber_rank == other.fiber_rank and self.components == other.components

    def degree(self) -> int:
        return max((sum(e) for p in self.polys for e in p), default=0)

    # -- floating point, vectorized ----------------------------------
    @cached_property
    def _np_terms(self):
        out = []
        for p in self.polys:
            if p:
                E = np.array(list(p.keys()), dtype=int).reshape(len(p), self.base_dim)
                C = np.array([float(c) for c in p.values()])
            else:
                E = np.zeros((0, self.base_dim), dtype=int)
                C = np.zeros(0)
            out.append((E, C))
        return out

    @cached_property
    def _np_deriv_terms(self):
        out = []
        for row in self.derivs:
            r = []
            for p in row:
                if p:
                    E = np.array(list(p.keys()), dtype=int).reshape(len(p), self.base_dim)
                    C = np.array([float(c) for c in p.values()])
                else:
                    E = np.zeros((0, self.base_dim), dtype=int)
                    C = np.zeros(0)
                r.append((E, C))
            out.append(r)
        return out

    @staticmethod
    def _eval_terms(E: np.ndarray, C: np.ndarray, X: np.ndarray) -> np.ndarray:
        if len(C) == 0:
            return np.zeros(len(X))
        mon = np.prod(X[:, None, :] ** E[None, :, :], axis=2)
        return mon @ C

    def eval_np(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        if self.fiber_rank == 0:
            return np.zeros((len(X), 0))
        return np.stack([self._eval_terms(E, C, X) for E, C in self._np_terms], axis=1)

    def jac_np(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        J = np.zeros((len(X), self.fiber_rank, self.base_dim))
        for k, row in enumerate(self._np_deriv_terms):
            for i, (E, C) in enumerate(row):
                J[:, k, i] = self._eval_terms(E, C, X)
        return J

    def to_json(self) -> list:
        return [[[str(c), list(e)] for e, c in comp] for comp in self.components]

    @staticmethod
    def from_json(base_dim: int, data: list) -> "PolySection":
        return PolySection.from_terms(base_dim, [[(Fraction(c), e) for c, e in comp] for comp in data])


# ---------------------------------------------------------------------------
# affine maps


@dataclass(frozen=True)
class AffineMap:
    """``x -> A x + b`` with rational entries (``A`` is m x n)."""

    A: la.Mat
    b: tuple
    n: int

    @staticmethod
    def make(A: Sequence[Sequence], b: Sequence, n: int | None = None) -> "AffineMap":
        Am = la.mat(A)
        nn = n if n is not None else (len(Am[0]) if Am else 0)
        return AffineMap(Am, tuple(Fraction(v) for v in b), nn)

    @staticmethod
    def identity(n: int) -> "AffineMap":
        return AffineMap(la.identity(n), (Fraction(0),) * n, n)

    @property
    def m(self) -> int:
        return len(self.b)

    def apply(self, x: Sequence) -> tuple:
        return la.vadd(la.matvec(self.A, x), self.b)

    def apply_np(self, X: np.ndarray) -> np.ndarray:
        return X @ la.to_float(self.A, self.m, self.n).T + np.array([float(v) for v in self.b])

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """``self o inner``."""
        return AffineMap(la.matmul(self.A, inner.A), la.vadd(la.matvec(self.A, inner.b), self.b), inner.n)

    def injective(self) -> bool:
        return la.rank(self.A) == self.n

    def equals(self, other: "AffineMap") -> bool:
        return self.A == other.A and self.b == other.b

    def inverse(self) -> "AffineMap":
        if self.m != self.n or not self.injective():
            raise RankDeficientEmbedding("affine map is not invertible")
        Ai = la.inverse(self.A)
        return AffineMap(Ai, tuple(-v for v in la.matvec(Ai, self.b)), self.n)

    # -- axis structure: every column one nonzero, every row at most one --
    @cached_property
    def axis_columns(self) -> tuple | None:
        """``(row_j, coef_j)`` per source column, or None if not an axis map."""
        cols = []
        used = set()
        for j in range(self.n):
            nz = [(i, self.A[i][j]) for i in range(self.m) if self.A[i][j] != 0]
            if len(nz) != 1:
                return None
            i, a = nz[0]
            if i in used:
                return None
            used.add(i)
            cols.append((i, a))
        for i in range(self.m):
            if sum(1 for v in self.A[i] if v != 0) > 1:
                return None
        return tuple(cols)

    @property
    def is_axis(self) -> bool:
        return self.axis_columns is not None

    def require_axis(self) -> tuple:
        cols = self.axis_columns
        if cols is None:
            raise NonAxisMap("map is not a signed-scaled coordinate embedding", A=la.fmt_mat(self.A))
        return cols

    @property
    def tangent_rows(self) -> tuple:
        return tuple(i for i, _ in self.require_axis())

    @property
    def normal_rows(self) -> tuple:
        t = set(self.tangent_rows)
        return tuple(i for i in range(self.m) if i not in t)

    def preimage_box(self, box: Box) -> Box | None:
        cols = self.require_axis()
        for i in self.normal_rows:
            if not (box.lo[i] < self.b[i] < box.hi[i]):
                return None
        lo, hi = [], []
        for j, (i, a) in enumerate(cols):
            l = (box.lo[i] - self.b[i]) / a if not isinstance(box.lo[i], float) else (box.lo[i] if a > 0 else -box.lo[i])
            h = (box.hi[i] - self.b[i]) / a if not isinstance(box.hi[i], float) else (box.hi[i] if a > 0 else -box.hi[i])
            lo.append(min(l, h))
            hi.append(max(l, h))
        out = Box(tuple(lo), tuple(hi))
        return None if out.is_empty() else out

    def preimage(self, u: BoxUnion) -> BoxUnion:
        out = [self.preimage_box(b) for b in u.boxes]
        return BoxUnion.from_list(self.n, [b for b in out if b is not None])

    def image_box(self, box: Box, normal_radius=None) -> Box:
        """Image of an open box, thickened by ``normal_radius`` in the normal
        rows (a degenerate interval when the radius is None)."""
        cols = self.require_axis()
        lo = list(self.b)
        hi = list(self.b)
        for j, (i, a) in enumerate(cols):
            l = a * box.lo[j] + self.b[i] if not isinstance(box.lo[j], float) else a * box.lo[j]
            h = a * box.hi[j] + self.b[i] if not isinstance(box.hi[j], float) else a * box.hi[j]
            lo[i], hi[i] = min(l, h), max(l, h)
        if normal_radius is not None:
            r = normal_radius
            for i in self.normal_rows:
                lo[i] = self.b[i] - r
                hi[i] = self.b[i] + r
        return Box(tuple(lo), tuple(hi))

    def tube(self, u: BoxUnion, radius) -> BoxUnion:
        return BoxUnion.from_list(self.m, [self.image_box(b, radius) for b in u.boxes])

    def left_inverse_point(self, y: Sequence) -> tuple | None:
        """The unique ``x`` with ``A x + b = y``, or None if ``y`` is off the image."""
        cols = self.require_axis()
        for i in self.normal_rows:
            if y[i] != self.b[i]:
                return None
        return tuple((Fraction(y[i]) - self.b[i]) / a for i, a in cols)

    def projection_parameter(self, y: Sequence) -> tuple:
        """Coordinates of the orthogonal projection of ``y`` onto the image."""
        cols = self.require_axis()
        return tuple((Fraction(y[i]) - self.b[i]) / a for i, a in cols)

    def to_json(self) -> dict:
        return {"A": la.fmt_mat(self.A), "b": [str(v) for v in self.b]}

    @staticmethod
    def from_json(d: dict, n: int) -> "AffineMap":
        return AffineMap.make(d["A"], d["b"], n)


def axis_columns_of(M: la.Mat, ncols: int) -> tuple | None:
    return AffineMap(M, (Fraction(0),) * len(M), ncols).axis_columns


# ---------------------------------------------------------------------------
# charts and coordinate changes


@dataclass(frozen=True)
class KuranishiChart:
    id: str
    base: BoxUnion
    rank: int
    group: GroupAction
    section: PolySection
    footprint: tuple  # ((label, point), ...)
    center: str | None = None

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def vdim(self) -> int:
        return self.dim - self.rank

    def labels(self) -> list[str]:
        return [lab for lab, _ in self.footprint]

    def rep(self, label: str) -> tuple:
        for lab, p in self.footprint:
            if lab == label:
                return p
        raise KeyError(label)

    def label_of(self, point: Sequence) -> str | None:
        """Label of the footprint orbit containing ``point`` (exact)."""
        point = tuple(point)
        for lab, p in self.footprint:
            if point in self.group.orbit(p):
                return lab
        return None

    def zero_points(self) -> list[tuple]:
        out = []
        for _, p in self.footprint:
            for q in self.group.orbit(p):
                if q not in out:
                    out.append(q)
        return out

    def with_base(self, base: BoxUnion) -> "KuranishiChart":
        fp = tuple((lab, p) for lab, p in self.footprint if base.contains(p))
        return KuranishiChart(self.id, base, self.rank, self.group, self.section, fp, self.center)

    def with_id(self, new_id: str) -> "KuranishiChart":
        return KuranishiChart(new_id, self.base, self.rank, self.group, self.section, self.footprint, self.center)

    def step(self, h) -> Fraction:
        """Absolute grid step for a relative resolution ``h``."""
        return Fraction(h) * self.base.shortest_side()


@dataclass(frozen=True)
class CoordinateChange:
    source: str
    target: str
    domain: BoxUnion
    base_map: AffineMap
    bundle_map: la.Mat
    group_hom: tuple | None = None

    def apply(self, x: Sequence) -> tuple:
        return self.base_map.apply(x)

    def with_domain(self, dom: BoxUnion) -> "CoordinateChange":
        return CoordinateChange(self.source, self.target, dom, self.base_map, self.bundle_map, self.group_hom)

    def image_contains(self, y: Sequence) -> tuple | None:
        """Preimage of ``y`` inside the domain, or None."""
        x = self.base_map.left_inverse_point(y)
        if x is None or not self.domain.contains(x):
            return None
        return x


def identity_change(chart: KuranishiChart) -> CoordinateChange:
    return CoordinateChange(chart.id, chart.id, chart.base, AffineMap.identity(chart.dim),
                            la.identity(chart.rank), tuple(range(chart.group.order)))


# ---------------------------------------------------------------------------
# operations


def eval_section(chart: KuranishiChart, point: Sequence) -> tuple:
    p = as_point(point)
    if not chart.base.contains(p):
        raise PointOutsideBase(f"{p} is not in the base of chart {chart.id}")
    return chart.section.eval(p)


def jacobian(section: PolySection, point: Sequence) -> la.Mat:
    if len(point) != section.base_dim:
        raise ValueError("arity mismatch")
    return section.jacobian(point)


def _poly_nonzero_witness(section: PolySection, base: BoxUnion, step) -> tuple | None:
    for x in base.grid(step):
        v = section.eval(x)
        if any(c != 0 for c in v):
            return x
    # fall back to box centres (a nonzero polynomial vanishing on a full grid
    # would need very high degree)
    for b in base.boxes:
        x = b.center()
        if any(c != 0 for c in section.eval(x)):
            return x
    return None


def check_equivariance(chart: KuranishiChart, grid_step=Fraction(1, 20)) -> Check:
    """Exact symbolic check ``s(g x) = g_fiber s(x)`` for every group element,
    cross-checked on the grid."""
    s = chart.section
    step = chart.step(grid_step)
    grid = chart.base.grid(step)
    for i, (g, h) in enumerate(chart.group.elements):
        if i == 0:
            continue
        lhs = s.compose_affine(g.matrix(), (0,) * chart.dim, chart.dim)
        rhs = s.linear_combine(h.matrix())
        symbolic_ok = lhs.same_as(rhs)
        # grid cross-check
        grid_bad = None
        for x in grid:
            if s.eval(g.apply(x)) != h.apply(s.eval(x)):
                grid_bad = x
                break
        if symbolic_ok != (grid_bad is None):
            # symbolic equality is authoritative; a disagreement can only mean
            # the grid missed a mismatch, which is recorded
            pass
        if not symbolic_ok:
            diff = PolySection.from_polys(chart.dim, [poly_add(a, poly_scale(b, -1)) for a, b in zip(lhs.polys, rhs.polys)])
            x = grid_bad if grid_bad is not None else _poly_nonzero_witness(diff, chart.base, step)
            mismatch = tuple(str(v) for v in diff.eval(x)) if x is not None else None
            return failed("equivariance", element=i, base=g.to_json(), fiber=h.to_json(),
                          point=tuple(str(v) for v in x) if x else None, mismatch=mismatch)
    return passed("equivariance")


def find_section_zeros(section: PolySection, region: BoxUnion, step, exact_points: Iterable = (),
                       min_sep: float = 1e-6) -> tuple[list[tuple], list[np.ndarray]]:
    """Zeros of ``section`` in ``region``: the given exact points that lie in the
    region, plus Newton zeros from grid seeds.  Returns (exact, float-only)."""
    exact = [tuple(p) for p in exact_points if region.contains(p) and section.is_zero_at(p)]
    floats: list[np.ndarray] = []
    if section.fiber_rank == 0:
        return exact, floats
    for b in region.boxes:
        lo = [float(v) if not isinstance(v, float) else -4.0 for v in b.lo]
        hi = [float(v) if not isinstance(v, float) else 4.0 for v in b.hi]
        seeds = seed_grid(lo, hi, float(step))
        pts, res = newton(section.eval_np, section.jac_np, seeds)
        for p, r in zip(pts, res):
            if r < TOL_ZERO and all(lo_ < v < hi_ for v, lo_, hi_ in zip(p, lo, hi)):
                floats.append(p)
    floats = dedupe(floats, 1e-5)
    out_float = []
    for p in floats:
        if any(np.max(np.abs(p - np.array([float(v) for v in e]))) < 1e-4 for e in exact):
            continue
        q = snap_rational(p, section.is_zero_at)
        if q is not None and region.contains(q):
            if q not in exact:
                exact.append(q)
        else:
            out_float.append(p)
    return exact, out_float


def normal_linearization(cc: CoordinateChange, target: KuranishiChart, z: Sequence,
                         normal_basis: list[tuple] | None = None, quotient_basis: list[tuple] | None = None):
    """``Q^T J_target(z) N`` where N spans the normal complement of the image of
    the base map and Q the orthogonal complement of the bundle-map image."""
    A = cc.base_map.A
    N = normal_basis if normal_basis is not None else la.left_kernel_basis(A, target.dim)
    Q = quotient_basis if quotient_basis is not None else la.left_kernel_basis(cc.bundle_map, target.rank)
    if isinstance(z[0], Fraction):
        J = target.section.jacobian(z)
        Nm = la.from_columns(N, target.dim)
        Qt = tuple(tuple(q) for q in Q)
        return la.matmul(la.matmul(Qt, J), Nm) if Q and N else ()
    J = target.section.jac_np(np.asarray(z, float)[None, :])[0]
    Nm = np.array([[float(v) for v in c] for c in N]).T if N else np.zeros((target.dim, 0))
    Qm = np.array([[float(v) for v in q] for q in Q]) if Q else np.zeros((0, target.rank))
    return Qm @ J @ Nm


def check_tangent_bundle(cc: CoordinateChange, charts: dict, grid_step=Fraction(1, 20),
                         normal_basis=None, quotient_basis=None) -> Check:
    """Normal linearization invertible at every zero of the target on the
    embedded image."""
    src, tgt = charts[cc.source], charts[cc.target]
    if not cc.base_map.injective():
        raise RankDeficientEmbedding(f"base map of {cc.source}->{cc.target} is not injective")
    if la.rank(cc.bundle_map) != src.rank:
        raise RankDeficientEmbedding(f"bundle map of {cc.source}->{cc.target} is not injective")
    n_normal = tgt.dim - src.dim
    if n_normal != tgt.rank - src.rank:
        return failed("tangent_bundle", reason="normal and quotient ranks differ",
                      normal=n_normal, quotient=tgt.rank - src.rank)
    if n_normal == 0:
        return passed("tangent_bundle", exact=True, zeros=0)
    # zeros of the target on the image = images of source zeros in the domain
    pulled = tgt.section.compose_affine(cc.base_map.A, cc.base_map.b, src.dim)
    exact, floats = find_section_zeros(pulled, cc.domain, src.step(grid_step), src.zero_points())
    for u in exact:
        z = cc.apply(u)
        L = normal_linearization(cc, tgt, z, normal_basis, quotient_basis)
        d = la.det(L)
        if d == 0:
            return failed("tangent_bundle", point=tuple(str(v) for v in z), det="0")
    for u in floats:
        z = cc.base_map.apply_np(u[None, :])[0]
        L = normal_linearization(cc, tgt, z, normal_basis, quotient_basis)
        d = float(np.linalg.det(L))
        scale = max(1.0, float(np.linalg.norm(L)))
        if abs(d) <= TOL_RANK * scale:
            return failed("tangent_bundle", certified=False, point=tuple(f"{v:.12g}" for v in z), det=f"{d:.3g}")
    return passed("tangent_bundle", exact=not floats, zeros=len(exact) + len(floats))


def restrict_chart(chart: KuranishiChart, sub: BoxUnion) -> KuranishiChart:
    if not sub.subset_of(chart.base):
        raise NotSubset(f"restriction of chart {chart.id} is not inside its base")
    if not chart.group.base_invariant(sub):
        raise NotInvariant(f"restriction of chart {chart.id} is not group invariant")
    return chart.with_base(sub)


def find_group_hom(cc: CoordinateChange, src: KuranishiChart, tgt: KuranishiChart) -> tuple | None:
    """For each source element g, a target element h with
    ``phi o g = h o phi`` and ``B o g_fiber = h_fiber o B``."""
    A, b, B = cc.base_map.A, cc.base_map.b, cc.bundle_map
    out = []
    for g, gf in src.group.elements:
        Ag = la.matmul(A, g.matrix())
        Bg = la.matmul(B, gf.matrix()) if B and B[0] else B
        found = None
        for k, (h, hf) in enumerate(tgt.group.elements):
            if la.matmul(h.matrix(), A) == Ag and h.apply(b) == b:
                HB = la.matmul(hf.matrix(), B) if B and B[0] else B
                if HB == Bg:
                    found = k
                    break
        if found is None:
            return None
        out.append(found)
    return tuple(out)


def check_change(cc: CoordinateChange, charts: dict, grid_step=Fraction(1, 20)) -> list[Check]:
    """Pre-coordinate-change axioms: injectivity, exact intertwining,
    equivariance and footprint agreement."""
    src, tgt = charts[cc.source], charts[cc.target]
    checks = []
    inj = cc.base_map.injective() and la.rank(cc.bundle_map) == src.rank
    checks.append(passed("injective") if inj else failed("injective", change=f"{cc.source}->{cc.target}"))
    if not cc.domain.subset_of(src.base):
        checks.append(failed("domain_in_base", change=f"{cc.source}->{cc.target}"))
    img_ok = all(tgt.base.contains(cc.apply(x)) for x in cc.domain.grid(src.step(grid_step)))
    checks.append(passed("image_in_base", exact=False) if img_ok else failed("image_in_base", change=f"{cc.source}->{cc.target}"))
    lhs = tgt.section.compose_affine(cc.base_map.A, cc.base_map.b, src.dim)
    rhs = src.section.linear_combine(cc.bundle_map)
    if lhs.same_as(rhs):
        checks.append(passed("intertwining"))
    else:
        diff = PolySection.from_polys(src.dim, [poly_add(a, poly_scale(b, -1)) for a, b in zip(lhs.polys, rhs.polys)])
        x = _poly_nonzero_witness(diff, cc.domain, src.step(grid_step))
        checks.append(failed("intertwining", change=f"{cc.source}->{cc.target}",
                             point=tuple(str(v) for v in x) if x else None))
    hom = cc.group_hom if cc.group_hom is not None else find_group_hom(cc, src, tgt)
    checks.append(passed("change_equivariance") if hom is not None else failed("change_equivariance", change=f"{cc.source}->{cc.target}"))
    bad = None
    for lab, p in src.footprint:
        for q in src.group.orbit(p):
            if cc.domain.contains(q):
                z = cc.apply(q)
                if tgt.label_of(z) != lab:
                    bad = (lab, q, tgt.label_of(z))
    if bad:
        checks.append(failed("footprint_agreement", label=bad[0], point=tuple(str(v) for v in bad[1]), target_label=bad[2]))
    else:
        checks.append(passed("footprint_agreement"))
    return checks


def check_chart(chart: KuranishiChart) -> list[Check]:
    checks = []
    checks.append(passed("group_closed") if chart.group.check_closed() else failed("group_closed", chart=chart.id))
    checks.append(passed("group_preserves_base") if chart.group.base_invariant(chart.base) else failed("group_preserves_base", chart=chart.id))
    bad = [lab for lab, p in chart.footprint if not (chart.base.contains(p) and chart.section.is_zero_at(p))]
    checks.append(passed("footprint_zeros") if not bad else failed("footprint_zeros", chart=chart.id, labels=tuple(bad)))
    orbits = [frozenset(chart.group.orbit(p)) for _, p in chart.footprint]
    distinct = all(a.isdisjoint(b) for a, b in itertools.combinations(orbits, 2))
    checks.append(passed("footprint_orbits") if distinct else failed("footprint_orbits", chart=chart.id))
    checks.append(check_equivariance(chart))
    return checks


def compose_ccs(cc_pq: CoordinateChange, cc_qr: CoordinateChange, charts: dict,
                direct: CoordinateChange | None = None):
    """Compose ``r -> q -> p``.  Returns ``(composite, witness)`` where the
    witness is the index of ``h`` in the group of ``p`` with
    ``composite = h o direct``; it is ``None`` when no direct change was given
    and the string ``"NoWitness"`` when none exists."""
    if cc_qr.target != cc_pq.source:
        raise ValueError("changes are not composable")
    dom = cc_qr.domain.intersect(cc_qr.base_map.preimage(cc_pq.domain))
    if direct is not None:
        dom = dom.intersect(direct.domain)
    if dom.is_empty():
        raise EmptyComposite(f"{cc_qr.source}->{cc_qr.target}->{cc_pq.target} has empty domain")
    base = cc_pq.base_map.compose(cc_qr.base_map)
    bundle = la.matmul(cc_pq.bundle_map, cc_qr.bundle_map)
    hom = None
    if cc_pq.group_hom is not None and cc_qr.group_hom is not None:
        hom = tuple(cc_pq.group_hom[i] for i in cc_qr.group_hom)
    comp = CoordinateChange(cc_qr.source, cc_pq.target, dom, base, bundle, hom)
    if direct is None:
        return comp, None
    tgt = charts[cc_pq.target]
    for k, (h, hf) in enumerate(tgt.group.elements):
        Hm = h.matrix()
        if (la.matmul(Hm, direct.base_map.A) == base.A and la.matvec(Hm, direct.base_map.b) == base.b
                and (not bundle or la.matmul(hf.matrix(), direct.bundle_map) == bundle)):
            return comp, k
    return comp, "NoWitness"
