"""Exact arithmetic on finite unions of open axis-aligned boxes.

Bounds are :class:`fractions.Fraction` values, with ``math.inf`` / ``-math.inf``
marking unbounded sides.  All set predicates (membership, containment,
closure containment, emptiness) are decided exactly from the bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

INF = math.inf

Number = Fraction  # finite bounds; infinite ones are floats


def as_bound(x) -> Fraction | float:
    """Coerce a user value to a bound (Fraction, or +/-inf)."""
    if isinstance(x, float) and math.isinf(x):
        return x
    if isinstance(x, str):
        s = x.strip()
        if s in ("inf", "+inf"):
            return INF
        if s == "-inf":
            return -INF
        return Fraction(s)
    return Fraction(x)


def as_point(p: Iterable) -> tuple[Fraction, ...]:
    return tuple(Fraction(v) for v in p)


def _fmt(x) -> str:
    if isinstance(x, float):
        return "inf" if x > 0 else "-inf"
    return str(x)


@dataclass(frozen=True)
class Box:
    """An open box ``prod_i (lo_i, hi_i)``; a degenerate box (lo == hi) is only
    used as a closed set to subtract."""

    lo: tuple
    hi: tuple

    @staticmethod
    def make(lo: Sequence, hi: Sequence) -> "Box":
        if len(lo) != len(hi):
            raise ValueError("lo/hi length mismatch")
        return Box(tuple(as_bound(v) for v in lo), tuple(as_bound(v) for v in hi))

    @staticmethod
    def cube(center: Sequence, radius) -> "Box":
        r = Fraction(radius)
        return Box(tuple(Fraction(c) - r for c in center), tuple(Fraction(c) + r for c in center))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def is_empty(self) -> bool:
        return any(a >= b for a, b in zip(self.lo, self.hi))

    def contains(self, p) -> bool:
        return all(a < x < b for a, x, b in zip(self.lo, p, self.hi))

    def closure_contains(self, p) -> bool:
        return all(a <= x <= b for a, x, b in zip(self.lo, p, self.hi))

    def bounded(self) -> bool:
        return all(not isinstance(v, float) for v in self.lo + self.hi)

    def intersect(self, other: "Box") -> "Box | None":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        b = Box(lo, hi)
        return None if b.is_empty() else b

    def subset_of_box(self, other: "Box") -> bool:
        return all(o_lo <= lo and hi <= o_hi for lo, hi, o_lo, o_hi in zip(self.lo, self.hi, other.lo, other.hi))

    def center(self) -> tuple:
        out = []
        for a, b in zip(self.lo, self.hi):
            if isinstance(a, float) and isinstance(b, float):
                out.append(Fraction(0))
            elif isinstance(a, float):
                out.append(b - 1)
            elif isinstance(b, float):
                out.append(a + 1)
            else:
                out.append((a + b) / 2)
        return tuple(out)

    def sides(self) -> tuple:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    def signed_perm_image(self, perm: Sequence[int], signs: Sequence[int]) -> "Box":
        """Image under ``x -> y`` with ``y_j = signs[j] * x[perm[j]]``."""
        lo, hi = [], []
        for j, (src, s) in enumerate(zip(perm, signs)):
            if s > 0:
                lo.append(self.lo[src])
                hi.append(self.hi[src])
            else:
                lo.append(-self.hi[src])
                hi.append(-self.lo[src])
        return Box(tuple(lo), tuple(hi))

    def to_json(self) -> dict:
        return {"lo": [_fmt(v) for v in self.lo], "hi": [_fmt(v) for v in self.hi]}

    @staticmethod
    def from_json(d: dict) -> "Box":
        return Box.make(d["lo"], d["hi"])

    def __repr__(self) -> str:
        return "Box(" + " x ".join(f"({_fmt(a)},{_fmt(b)})" for a, b in zip(self.lo, self.hi)) + ")"


def _minus_closed(b: Box, c_lo: tuple, c_hi: tuple) -> list[Box]:
    """Open box ``b`` minus the closed box ``[c_lo, c_hi]`` as a union of open boxes."""
    # disjoint closures-vs-open: nothing to remove
    for a, e, lo, hi in zip(b.lo, b.hi, c_lo, c_hi):
        if e <= lo or a >= hi:
            return [b]
    pieces = []
    for i in range(b.dim):
        if b.lo[i] < c_lo[i]:
            hi = list(b.hi)
            hi[i] = c_lo[i]
            pieces.append(Box(b.lo, tuple(hi)))
        if b.hi[i] > c_hi[i]:
            lo = list(b.lo)
            lo[i] = c_hi[i]
            pieces.append(Box(tuple(lo), b.hi))
    return [p for p in pieces if not p.is_empty()]


def _covered(lo: tuple, hi: tuple, closed: bool, cands: list[Box], axis: int = 0) -> bool:
    """Is the box [lo,hi] (closed) or (lo,hi) (open), restricted to axes >= axis,
    contained in the union of ``cands`` (all of which already cover it on the
    earlier axes)?"""
    d = len(lo)
    if not cands:
        return False
    if axis == d:
        return True
    # shortcut: one candidate covering everything that remains
    for c in cands:
        if all(
            (c.lo[i] < lo[i] and hi[i] < c.hi[i]) if closed else (c.lo[i] <= lo[i] and hi[i] <= c.hi[i])
            for i in range(axis, d)
        ):
            return True
    a, e = lo[axis], hi[axis]
    cuts = sorted({v for c in cands for v in (c.lo[axis], c.hi[axis]) if a < v < e and not isinstance(v, float)})
    points = list(cuts)
    if closed:
        if isinstance(a, float) or isinstance(e, float):
            # closure of an unbounded box is not compact; treat infinite ends as open
            pass
        if not isinstance(a, float):
            points.insert(0, a)
        if not isinstance(e, float):
            points.append(e)
    ends = [a] + cuts + [e]
    # open intervals between consecutive ends
    for k in range(len(ends) - 1):
        ia, ie = ends[k], ends[k + 1]
        if not ia < ie:
            continue
        sub = [c for c in cands if c.lo[axis] <= ia and ie <= c.hi[axis]]
        if not _covered(lo, hi, closed, sub, axis + 1):
            return False
    for pt in points:
        sub = [c for c in cands if c.lo[axis] < pt < c.hi[axis]]
        if not _covered(lo, hi, closed, sub, axis + 1):
            return False
    return True


GRID_BUDGET = 20000


@dataclass(frozen=True)
class BoxUnion:
    """A finite union of open boxes in R^dim (possibly empty)."""

    dim: int
    boxes: tuple = ()

    # -- construction -------------------------------------------------
    @staticmethod
    def of(*boxes: Box) -> "BoxUnion":
        if not boxes:
            raise ValueError("use BoxUnion.empty(dim) for the empty set")
        return BoxUnion(boxes[0].dim, tuple(b for b in boxes if not b.is_empty())).simplify()

    @staticmethod
    def empty(dim: int) -> "BoxUnion":
        return BoxUnion(dim, ())

    @staticmethod
    def from_list(dim: int, boxes: Iterable[Box]) -> "BoxUnion":
        return BoxUnion(dim, tuple(b for b in boxes if not b.is_empty())).simplify()

    @staticmethod
    def whole(dim: int) -> "BoxUnion":
        return BoxUnion(dim, (Box((-INF,) * dim, (INF,) * dim),))

    # -- predicates ---------------------------------------------------
    def is_empty(self) -> bool:
        return not self.boxes

    def contains(self, p) -> bool:
        return any(b.contains(p) for b in self.boxes)

    def closure_contains(self, p) -> bool:
        return any(b.closure_contains(p) for b in self.boxes)

    def subset_of(self, other: "BoxUnion") -> bool:
        """Exact test of ``self`` (open) being contained in ``other``."""
        for b in self.boxes:
            cands = [c for c in other.boxes if c.intersect(b) is not None]
            if not _covered(b.lo, b.hi, False, cands):
                return False
        return True

    def closure_subset_of(self, other: "BoxUnion") -> bool:
        """Exact test of ``closure(self)`` being contained in the open set ``other``."""
        for b in self.boxes:
            if not b.bounded():
                return False
            cands = [c for c in other.boxes if all(cl <= h and l <= ch for l, h, cl, ch in zip(b.lo, b.hi, c.lo, c.hi))]
            if not _covered(b.lo, b.hi, True, cands):
                return False
        return True

    def same_set(self, other: "BoxUnion") -> bool:
        return self.subset_of(other) and other.subset_of(self)

    def meets(self, other: "BoxUnion") -> bool:
        return any(a.intersect(b) is not None for a in self.boxes for b in other.boxes)

    def bounded(self) -> bool:
        return all(b.bounded() for b in self.boxes)

    # -- operations ---------------------------------------------------
    def simplify(self) -> "BoxUnion":
        """Drop duplicate boxes and boxes contained in a single other box."""
        uniq = []
        for b in self.boxes:
            if b not in uniq:
                uniq.append(b)
        keep = []
        for i, b in enumerate(uniq):
            dominated = False
            for j, c in enumerate(uniq):
                if i != j and b.subset_of_box(c) and (not c.subset_of_box(b) or j < i):
                    dominated = True
                    break
            if not dominated:
                keep.append(b)
        return BoxUnion(self.dim, tuple(keep))

    def union(self, other: "BoxUnion") -> "BoxUnion":
        return BoxUnion(self.dim, self.boxes + other.boxes).simplify()

    def intersect(self, other: "BoxUnion") -> "BoxUnion":
        out = []
        for a in self.boxes:
            for b in other.boxes:
                c = a.intersect(b)
                if c is not None:
                    out.append(c)
        return BoxUnion(self.dim, tuple(out)).simplify()

    def intersect_box(self, box: Box) -> "BoxUnion":
        return self.intersect(BoxUnion(self.dim, (box,)))

    def minus_closed_box(self, c_lo, c_hi) -> "BoxUnion":
        out = []
        for b in self.boxes:
            out.extend(_minus_closed(b, tuple(c_lo), tuple(c_hi)))
        return BoxUnion(self.dim, tuple(out)).simplify()

    def minus_closure(self, other: "BoxUnion") -> "BoxUnion":
        """``self`` minus the closure of ``other`` (open result)."""
        cur = self
        for c in other.boxes:
            cur = cur.minus_closed_box(c.lo, c.hi)
        return cur

    def minus_points(self, points: Iterable) -> "BoxUnion":
        cur = self
        for p in points:
            p = as_point(p)
            cur = cur.minus_closed_box(p, p)
        return cur

    def signed_perm_image(self, perm, signs) -> "BoxUnion":
        return BoxUnion(self.dim, tuple(b.signed_perm_image(perm, signs) for b in self.boxes)).simplify()

    def bounding_box(self) -> Box:
        if not self.boxes:
            raise ValueError("empty union has no bounding box")
        lo = tuple(min(b.lo[i] for b in self.boxes) for i in range(self.dim))
        hi = tuple(max(b.hi[i] for b in self.boxes) for i in range(self.dim))
        return Box(lo, hi)

    def shortest_side(self) -> Fraction:
        """Shortest bounded side of the bounding box (1 if all sides unbounded)."""
        bb = self.bounding_box()
        sides = [s for s in bb.sides() if not isinstance(s, float)]
        return min(sides) if sides else Fraction(1)

    def grid(self, step: Fraction, window: Fraction = Fraction(4), budget: int | None = GRID_BUDGET) -> list[tuple]:
        """Lattice points ``step * Z^dim`` inside the union (unbounded sides
        clipped to ``[-window, window]``), sorted and de-duplicated.  The step
        is doubled while the lattice would exceed ``budget`` points, which
        keeps the coarser lattice inside the finer one."""
        step = Fraction(step)
        if budget is not None:
            while self._lattice_size(step, window) > budget:
                step *= 2
        pts = set()
        for b in self.boxes:
            axes = []
            for a, e in zip(b.lo, b.hi):
                a = -window if isinstance(a, float) else a
                e = window if isinstance(e, float) else e
                k0 = math.floor(a / step) + 1
                vals = []
                k = k0
                while k * step < e:
                    if k * step > a:
                        vals.append(k * step)
                    k += 1
                axes.append(vals)
            pts.update(_product(axes))
        return sorted(pts)

    def _lattice_size(self, step: Fraction, window: Fraction) -> int:
        total = 0
        for b in self.boxes:
            n = 1
            for a, e in zip(b.lo, b.hi):
                a = -window if isinstance(a, float) else a
                e = window if isinstance(e, float) else e
                n *= max(1, math.ceil((e - a) / step))
            total += n
        return total

    def sample_point(self) -> tuple | None:
        """A rational point of the union (box centre), or None if empty."""
        return self.boxes[0].center() if self.boxes else None

    # -- serialization ------------------------------------------------
    def to_json(self) -> dict:
        return {"dim": self.dim, "boxes": [b.to_json() for b in self.boxes]}

    @staticmethod
    def from_json(d: dict) -> "BoxUnion":
        return BoxUnion(int(d["dim"]), tuple(Box.from_json(b) for b in d["boxes"]))

    def __repr__(self) -> str:
        if not self.boxes:
            return f"BoxUnion(dim={self.dim}, empty)"
        return "BoxUnion[" + " u ".join(repr(b) for b in self.boxes) + "]"


def _product(axes: list[list]) -> list[tuple]:
    out = [()]
    for vals in axes:
        out = [p + (v,) for p in out for v in vals]
    return out
