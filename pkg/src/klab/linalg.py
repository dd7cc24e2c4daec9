"""Small exact linear-algebra helpers over the rationals.

Matrices are tuples of row tuples of :class:`Fraction`.  Heavier operations
(rank, nullspace, determinant, inverse) delegate to :mod:`sympy`, which is only
ever fed matrices of size at most a handful.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np
import sympy

Mat = tuple  # tuple[tuple[Fraction, ...], ...]


def mat(rows: Sequence[Sequence]) -> Mat:
    return tuple(tuple(Fraction(v) for v in r) for r in rows)


def shape(m: Mat, ncols: int | None = None) -> tuple[int, int]:
    if not m:
        return (0, ncols or 0)
    return (len(m), len(m[0]))


def identity(n: int) -> Mat:
    return tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))


def zeros(r: int, c: int) -> Mat:
    return tuple(tuple(Fraction(0) for _ in range(c)) for _ in range(r))


def transpose(m: Mat, nrows_if_empty: int = 0) -> Mat:
    if not m:
        return ()
    return tuple(zip(*m))


def matmul(a: Mat, b: Mat) -> Mat:
    if not a:
        return ()
    if not b:
        return tuple(() for _ in a)
    bt = list(zip(*b))
    return tuple(tuple(sum((x * y for x, y in zip(r, c)), Fraction(0)) for c in bt) for r in a)


def matvec(a: Mat, v: Sequence) -> tuple:
    return tuple(sum((x * y for x, y in zip(r, v)), Fraction(0)) for r in a)


def vadd(u: Sequence, v: Sequence) -> tuple:
    return tuple(a + b for a, b in zip(u, v))


def vsub(u: Sequence, v: Sequence) -> tuple:
    return tuple(a - b for a, b in zip(u, v))


def hstack(a: Mat, b: Mat) -> Mat:
    if not a:
        return b
    if not b:
        return a
    return tuple(tuple(r) + tuple(s) for r, s in zip(a, b))


def columns(m: Mat) -> list[tuple]:
    return [tuple(c) for c in zip(*m)] if m else []


def from_columns(cols: Sequence[Sequence], nrows: int) -> Mat:
    if not cols:
        return tuple(() for _ in range(nrows))
    return tuple(tuple(Fraction(c[i]) for c in cols) for i in range(nrows))


def _to_sympy(m: Mat, nrows: int, ncols: int) -> sympy.Matrix:
    if nrows == 0 or ncols == 0:
        return sympy.zeros(nrows, ncols)
    return sympy.Matrix([[sympy.Rational(v.numerator, v.denominator) for v in r] for r in m])


def _from_sympy(m: sympy.Matrix) -> Mat:
    return tuple(tuple(Fraction(int(sympy.fraction(v)[0]), int(sympy.fraction(v)[1])) for v in m.row(i)) for i in range(m.rows))


def rank(m: Mat) -> int:
    if not m or not m[0]:
        return 0
    return _to_sympy(m, len(m), len(m[0])).rank()


def det(m: Mat) -> Fraction:
    n = len(m)
    if n == 0:
        return Fraction(1)
    d = _to_sympy(m, n, n).det()
    num, den = sympy.fraction(sympy.nsimplify(d))
    return Fraction(int(num), int(den))


def inverse(m: Mat) -> Mat:
    n = len(m)
    if n == 0:
        return ()
    return _from_sympy(_to_sympy(m, n, n).inv())


def nullspace(m: Mat, ncols: int) -> list[tuple]:
    """Basis (list of column vectors) of ``{x : m x = 0}``, rational, unnormalized."""
    if not m:
        return [tuple(Fraction(int(i == j)) for i in range(ncols)) for j in range(ncols)]
    basis = _to_sympy(m, len(m), ncols).nullspace()
    out = []
    for v in basis:
        out.append(tuple(Fraction(int(sympy.fraction(x)[0]), int(sympy.fraction(x)[1])) for x in v))
    return out


def left_kernel_basis(m: Mat, nrows: int) -> list[tuple]:
    """Basis of the orthogonal complement of the column span of ``m`` (rows = nrows)."""
    return nullspace(transpose(m), nrows) if m and m[0] else [tuple(Fraction(int(i == j)) for i in range(nrows)) for j in range(nrows)]


def to_float(m: Mat, nrows: int | None = None, ncols: int | None = None) -> np.ndarray:
    if not m:
        return np.zeros((nrows or 0, ncols or 0))
    return np.array([[float(v) for v in r] for r in m], dtype=float)


def is_signed_perm(m: Mat) -> bool:
    n = len(m)
    for r in m:
        nz = [v for v in r if v != 0]
        if len(nz) != 1 or abs(nz[0]) != 1:
            return False
    for c in zip(*m):
        nz = [v for v in c if v != 0]
        if len(nz) != 1:
            return False
    return all(len(r) == n for r in m)


def fmt_mat(m: Mat) -> list[list[str]]:
    return [[str(v) for v in r] for r in m]
