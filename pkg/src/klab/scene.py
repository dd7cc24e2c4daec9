"""Scene files: JSON text describing a presentation.

Rationals are written as ``"p/q"`` strings, matrices as row-major lists, boxes
as ``{"lo": [...], "hi": [...]}`` with ``"inf"``/``"-inf"`` for unbounded
sides.  Group actions are given by generators; the full group is generated on
load.
"""

from __future__ import annotations

import json
from fractions import Fraction

from . import linalg as la
from .atlas import KuranishiPresentation
from .boxes import BoxUnion
from .errors import ParseError
from .geometry import AffineMap, CoordinateChange, GroupAction, KuranishiChart, PolySection, SignedPerm

SCHEMA = 1


def _q(v) -> str:
    return str(Fraction(v))


def _pt(p) -> list:
    return [_q(v) for v in p]


def chart_to_json(c: KuranishiChart, generators=None) -> dict:
    gens = generators if generators is not None else [
        {"base": g.to_json(), "fiber": h.to_json()} for g, h in c.group.elements[1:]]
    return {
        "id": c.id,
        "center": c.center,
        "base": c.base.to_json(),
        "rank": c.rank,
        "group": gens,
        "section": c.section.to_json(),
        "footprint": [[lab, _pt(p)] for lab, p in c.footprint],
    }


def change_to_json(cc: CoordinateChange) -> dict:
    return {
        "from": cc.source,
        "to": cc.target,
        "domain": cc.domain.to_json(),
        "A": la.fmt_mat(cc.base_map.A),
        "b": [_q(v) for v in cc.base_map.b],
        "bundle": la.fmt_mat(cc.bundle_map),
    }


def presentation_to_json(p: KuranishiPresentation) -> dict:
    metric = []
    for i, a in enumerate(p.labels):
        for b in p.labels[i + 1:]:
            metric.append([a, b, _q(p.d(a, b))])
    return {
        "schema": SCHEMA,
        "name": p.name,
        "x_points": list(p.labels),
        "metric": metric,
        "charts": [chart_to_json(p.charts[k]) for k in sorted(p.charts)],
        "changes": [change_to_json(p.changes[k]) for k in sorted(p.changes)],
        "orientation": {k: list(v) for k, v in sorted(p.orientation.items())},
        "config": p.config,
    }


def dumps(p: KuranishiPresentation) -> str:
    return json.dumps(presentation_to_json(p), indent=1, sort_keys=True) + "\n"


def _locate(text: str, needle: str) -> tuple[int, int]:
    idx = text.find(needle)
    if idx < 0:
        return 0, 0
    line = text.count("\n", 0, idx) + 1
    col = idx - (text.rfind("\n", 0, idx) + 1) + 1
    return line, col


def _fail(text: str, msg: str, needle: str | None = None):
    line, col = _locate(text, needle) if needle else (0, 0)
    raise ParseError(msg, line, col)


def loads(text: str) -> KuranishiPresentation:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, e.lineno, e.colno) from e
    if not isinstance(d, dict):
        _fail(text, "scene must be a JSON object")
    if d.get("schema") != SCHEMA:
        _fail(text, f"unsupported schema {d.get('schema')!r}", '"schema"')
    for key in ("charts", "changes", "x_points", "metric"):
        if key not in d:
            _fail(text, f"missing key {key!r}")
    try:
        labels = tuple(d["x_points"])
        metric = {}
        for a, b, v in d["metric"]:
            metric[(a, b)] = metric[(b, a)] = Fraction(v)
        charts = {}
        for cj in d["charts"]:
            base = BoxUnion.from_json(cj["base"])
            rank = int(cj["rank"])
            gens = [(SignedPerm.from_matrix(g["base"]), SignedPerm.from_matrix(g["fiber"])) for g in cj.get("group", [])]
            group = GroupAction.generate(base.dim, rank, gens) if gens else GroupAction.trivial(base.dim, rank)
            section = PolySection.from_json(base.dim, cj["section"])
            if section.fiber_rank != rank:
                _fail(text, f"section of chart {cj['id']} has {section.fiber_rank} components, rank is {rank}", f'"{cj["id"]}"')
            fp = tuple((lab, tuple(Fraction(v) for v in pt)) for lab, pt in cj["footprint"])
            for lab, _ in fp:
                if lab not in labels:
                    _fail(text, f"chart {cj['id']} references unknown label {lab!r}", f'"{lab}"')
            charts[cj["id"]] = KuranishiChart(cj["id"], base, rank, group, section, fp, cj.get("center"))
        changes = {}
        for ccj in d["changes"]:
            s, t = ccj["from"], ccj["to"]
            for ref in (s, t):
                if ref not in charts:
                    _fail(text, f"change references unknown chart {ref!r}", f'"{ref}"')
            bm = AffineMap.make(ccj["A"], ccj["b"], charts[s].dim)
            changes[(s, t)] = CoordinateChange(s, t, BoxUnion.from_json(ccj["domain"]), bm, la.mat(ccj["bundle"]))
        orientation = {k: tuple(int(x) for x in v) for k, v in d.get("orientation", {}).items()}
        for k in orientation:
            if k not in charts:
                _fail(text, f"orientation references unknown chart {k!r}", f'"{k}"')
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
        raise ParseError(f"malformed scene: {e}", 0, 0) from e
    return KuranishiPresentation(charts, changes, labels, metric, orientation, d.get("config", {}), d.get("name", ""))


def load(path) -> KuranishiPresentation:
    with open(path, encoding="utf-8") as f:
        return loads(f.read())


def dump(p: KuranishiPresentation, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(p))
