"""The example gallery: small presentations exhibiting the phenomena the
toolkit checks for (maximality and matching failures, jumping points,
non-Hausdorff gluing, degenerate zeros, symmetric zeros)."""

from __future__ import annotations

from fractions import Fraction

import sympy

from . import linalg as la
from .atlas import KuranishiPresentation
from .boxes import Box, BoxUnion
from .errors import UnknownGallery
from .geometry import AffineMap, CoordinateChange, GroupAction, KuranishiChart, PolySection

F = Fraction


def section(variables: str, *exprs: str) -> PolySection:
    """Polynomial section from sympy expressions in the named variables."""
    syms = sympy.symbols(variables)
    syms = syms if isinstance(syms, tuple) else (syms,)
    comps = []
    for e in exprs:
        poly = sympy.Poly(sympy.sympify(e), *syms)
        comps.append([(F(int(c.p), int(c.q)), m) for m, c in poly.terms() if c != 0])
    return PolySection.from_terms(len(syms), comps)


def box(*intervals) -> Box:
    return Box.make([a for a, _ in intervals], [b for _, b in intervals])


def union(*boxes: Box) -> BoxUnion:
    return BoxUnion.from_list(boxes[0].dim, boxes)


def chart(cid, base, sec, footprint, center=None, group=None) -> KuranishiChart:
    base = base if isinstance(base, BoxUnion) else union(base)
    grp = group if group is not None else GroupAction.trivial(base.dim, sec.fiber_rank)
    fp = tuple((lab, tuple(F(v) for v in p)) for lab, p in footprint)
    return KuranishiChart(cid, base, sec.fiber_rank, grp, sec, fp, center)


def change(src: KuranishiChart, tgt: KuranishiChart, domain, A, b, B) -> CoordinateChange:
    domain = domain if isinstance(domain, BoxUnion) else union(domain)
    return CoordinateChange(src.id, tgt.id, domain, AffineMap.make(A, b, src.dim), la.mat(B))


def presentation(name, charts, changes, labels, distances, config=None) -> KuranishiPresentation:
    metric = {}
    for (a, b), v in distances.items():
        metric[(a, b)] = metric[(b, a)] = F(v)
    return KuranishiPresentation({c.id: c for c in charts}, {(c.source, c.target): c for c in changes},
                                 tuple(labels), metric, {c.id: (1, 1) for c in charts}, config or {}, name)


def _cfg(radii: dict, kind: str = "presentation", **extra) -> dict:
    out = {"kind": kind, "radii": {k: str(F(v)) for k, v in radii.items()}}
    out.update(extra)
    return out


# ---------------------------------------------------------------------------


def ex_z2() -> KuranishiPresentation:
    c = chart("Z", box((-1, 1), (-1, 1)), section("x y", "x**2 - y**2", "2*x*y"), [("o", (0, 0))], "o")
    return presentation("EX-Z2", [c], [], ["o"], {}, _cfg({"o": 1}, alt_radii={"o": "1/2"}))


def ex_sym() -> KuranishiPresentation:
    g = GroupAction.generate(1, 1, [([[-1]], [[-1]])])
    c = chart("S", box((-1, 1)), section("t", "t"), [("o", (0,))], "o", g)
    return presentation("EX-SYM", [c], [], ["o"], {}, _cfg({"o": 1}))


def strip_lambda() -> str:
    """Even polynomial with zeros at -3, -1, 1, 3 standing in for the periodic
    function of the strip example on the window (-4, 4)."""
    return "(a**2 - 1)*(a**2 - 9)"


def ex_strip() -> KuranishiPresentation:
    lam = strip_lambda()
    x = chart("x", box((-4, 2), (-1, 1)), section("a b", lam, "b"),
              [("x", (-1, 0)), ("y", (1, 0)), ("z", (-3, 0))], "x")
    y = chart("y", box((-2, 4), (-1, 1)), section("a b", lam, "b"),
              [("x", (-1, 0)), ("y", (1, 0)), ("z", (3, 0))], "y")
    z = chart("z", box((-1, 1)), section("a", lam.replace("a", "(a-3)")), [("z", (0,))], "z")
    overlap = box((-2, 2), (-1, 1))
    changes = [
        change(z, x, box((-1, 1)), [[1], [0]], [-3, 0], [[1], [0]]),
        change(z, y, box((-1, 1)), [[-1], [0]], [3, 0], [[1], [0]]),
        change(x, y, overlap, la.identity(2), [0, 0], la.identity(2)),
        change(y, x, overlap, la.identity(2), [0, 0], la.identity(2)),
    ]
    return presentation("EX-STRIP", [x, y, z], changes, ["x", "y", "z"],
                        {("x", "y"): 1, ("x", "z"): 1, ("y", "z"): 1}, _cfg({"x": 1, "y": 1, "z": 1}))


def plus_shape() -> BoxUnion:
    return union(box((-2, 2), (-1, 1)), box((-1, 1), (-2, 2)))


def ex_disks(z_interval=(0, 2)) -> KuranishiPresentation:
    s = section("a b", "a*(a - 1)", "b")
    x = chart("x", plus_shape(), s, [("x", (0, 0)), ("z", (1, 0))], "x")
    y = chart("y", plus_shape(), s, [("y", (0, 0)), ("z", (1, 0))], "y")
    z = chart("z", box(z_interval), section("t", "t*(t - 1)"), [("z", (1,))], "z")
    emb = dict(A=[[1], [0]], b=[0, 0], B=[[1], [0]])
    changes = [change(z, x, box(z_interval), **emb), change(z, y, box(z_interval), **emb)]
    name = "EX-DISKS" if tuple(z_interval) == (0, 2) else "EX-DISKS-FIXED"
    return presentation(name, [x, y, z], changes, ["x", "y", "z"],
                        {("x", "z"): 1, ("y", "z"): 1, ("x", "y"): 2}, _cfg({"x": 2, "y": 2, "z": 1}))


def ex_disks_fixed() -> KuranishiPresentation:
    """The disks example with the z chart kept away from the origin."""
    return ex_disks((F(1, 2), 2))


def ex_punct() -> KuranishiPresentation:
    s = section("a b", "a*(a - 1)", "b")
    x = chart("x", plus_shape(), s, [("x", (0, 0)), ("z", (1, 0))], "x")
    y = chart("y", plus_shape(), s, [("y", (0, 0)), ("z", (1, 0))], "y")
    punctured = plus_shape().minus_points([(0, 0)])
    z = chart("z", punctured, s, [("z", (1, 0))], "z")
    ident = dict(A=la.identity(2), b=[0, 0], B=la.identity(2))
    changes = [change(z, x, punctured, **ident), change(z, y, punctured, **ident)]
    return presentation("EX-PUNCT", [x, y, z], changes, ["x", "y", "z"],
                        {("x", "z"): 1, ("y", "z"): 1, ("x", "y"): 2}, _cfg({"x": 2, "y": 2, "z": 1}))


def ex_fig3() -> KuranishiPresentation:
    s = section("t", "t*(t - 1)")
    p = chart("p", box((-1, 2)), s, [("p", (0,)), ("q", (1,))], "p")
    q = chart("q", box((F(1, 2), 2)), s, [("q", (1,))], "q")
    changes = [change(q, p, box((F(1, 2), 2)), [[1]], [0], [[1]])]
    return presentation("EX-FIG3", [p, q], changes, ["p", "q"], {("p", "q"): 1}, _cfg({"p": 3, "q": 1}))


def ex_fig4() -> KuranishiPresentation:
    s = section("a b", "a*(a - 1)", "b")
    x = chart("x", box((-2, 2), (-2, 2)), s, [("x", (0, 0)), ("z", (1, 0))], "x")
    y = chart("y", box((-2, 2), (-2, 2)), s, [("y", (0, 0)), ("z", (1, 0))], "y")
    z = chart("z", box((-1, 1)), section("t", "t"), [("z", (0,))], "z")
    emb = dict(A=[[0], [1]], b=[1, 0], B=[[0], [1]])
    changes = [change(z, x, box((-1, 1)), **emb), change(z, y, box((-1, 1)), **emb)]
    return presentation("EX-FIG4", [x, y, z], changes, ["x", "y", "z"],
                        {("x", "z"): 1, ("y", "z"): 1, ("x", "y"): 2}, _cfg({"x": 2, "y": 2, "z": 1}))


def ex_fig8() -> KuranishiPresentation:
    cubic = "(a - 2)*(a - 3)*(2*a - 9)"
    Y = chart("Y", box((0, 4), (-2, 2)), section("a b", cubic, "b"), [("y", (2, 0)), ("z", (3, 0))], "y")
    X = chart("X", box((F(9, 4), 5), (-2, 2), (-1, 1)), section("a b c", cubic, "b", "c"),
              [("z", (3, 0, 0)), ("x", (F(9, 2), 0, 0))], "x")
    changes = [change(Y, X, box((F(5, 2), F(7, 2)), (-1, 1)), [[1, 0], [0, 1], [0, 0]], [0, 0, 0],
                      [[1, 0], [0, 1], [0, 0]])]
    return presentation("EX-FIG8", [Y, X], changes, ["y", "z", "x"],
                        {("y", "z"): 1, ("z", "x"): F(3, 2), ("y", "x"): F(5, 2)},
                        _cfg({}, kind="gcs", margin="1/4"))


def ex_jump() -> KuranishiPresentation:
    q = chart("q", box((-1, 1)), section("t", "t**2"), [("o", (0,))], "o")
    base = union(box((-1, 1), (-F(1, 2), F(1, 2))), box((-1, 1), (F(3, 2), F(5, 2))))
    p = chart("p", base, section("t u", "t**2 - u/8", "u*(2 - u)"),
              [("o", (0, 0)), ("e1", (F(1, 2), 2)), ("e2", (-F(1, 2), 2))], "e1")
    changes = [change(q, p, box((-1, 1)), [[1], [0]], [0, 0], [[1], [0]])]
    return presentation("EX-JUMP", [q, p], changes, ["o", "e1", "e2"],
                        {("o", "e1"): 1, ("o", "e2"): 1, ("e1", "e2"): 1},
                        _cfg({"o": 1, "e1": 3}, alt_radii={"o": "1/2", "e1": "5/2"}))


def ex_chain() -> KuranishiPresentation:
    cubic = "t*(t - 1)*(t - 2)"
    c1 = chart("c1", box((-1, F(1, 2))), section("t", cubic), [("p", (0,))], "p")
    c2 = chart("c2", box((-1, F(3, 2)), (-1, 1)), section("t u", cubic, "u"), [("p", (0, 0)), ("q", (1, 0))], "q")
    c3 = chart("c3", box((-1, F(5, 2)), (-1, 1), (-1, 1)), section("t u w", cubic, "u", "w"),
               [("p", (0, 0, 0)), ("q", (1, 0, 0)), ("r", (2, 0, 0))], "r")
    changes = [
        change(c1, c2, box((-1, F(1, 2))), [[1], [0]], [0, 0], [[1], [0]]),
        change(c1, c3, box((-1, F(1, 2))), [[1], [0], [0]], [0, 0, 0], [[1], [0], [0]]),
        change(c2, c3, box((-1, F(3, 2)), (-1, 1)), [[1, 0], [0, 1], [0, 0]], [0, 0, 0], [[1, 0], [0, 1], [0, 0]]),
    ]
    return presentation("EX-CHAIN", [c1, c2, c3], changes, ["p", "q", "r"],
                        {("p", "q"): 1, ("p", "r"): 2, ("q", "r"): F(5, 2)}, _cfg({"p": 1, "q": F(5, 2), "r": 6}))


GALLERY = {
    "EX-STRIP": ex_strip,
    "EX-DISKS": ex_disks,
    "EX-PUNCT": ex_punct,
    "EX-FIG3": ex_fig3,
    "EX-FIG4": ex_fig4,
    "EX-FIG8": ex_fig8,
    "EX-Z2": ex_z2,
    "EX-JUMP": ex_jump,
    "EX-SYM": ex_sym,
    "EX-CHAIN": ex_chain,
}


def get(name: str) -> KuranishiPresentation:
    try:
        return GALLERY[name]()
    except KeyError:
        raise UnknownGallery(f"unknown gallery scene {name!r}; known: {', '.join(sorted(GALLERY))}") from None


def radii_of(p: KuranishiPresentation, key: str = "radii") -> dict:
    return {k: F(v) for k, v in p.config.get(key, {}).items()}
