"""Command-line front end: ``klab validate|count|gallery|triple|fp``.

Every command prints a deterministic report of ``#R key=value`` lines to
stdout.  Exit code 0 means every check passed, 2 means a certified failure
was found and 1 means the run stopped on an error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import gallery, scene
from .atlas import check_gcs, strong_shrinking_sequence, validate_presentation
from .degree import oracle_count
from .errors import KlabError
from .identification import TopologyProbeConfig, build_identification, hausdorff_probe, matching_samples
from .level1 import build_level1_embedding, build_level1_gcs, stabilize_gcs
from .pipeline import count_gcs, count_presentation, level1_presentation, system_of
from .report import EXIT_ERROR, Report
from . import tripling as tp

SYNTHETIC = "synthetic-662"


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _radii(text: str) -> dict:
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, sep, val = part.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected label=r, got {part!r}")
        out[key.strip()] = _fraction(val.strip())
    return out


def _default_seed() -> int:
    env = os.environ.get("KLAB_SEED")
    return int(env) if env else 0


def load_scene(ref: str):
    """A scene path when the file exists, otherwise a gallery name."""
    path = Path(ref)
    if path.is_file():
        return scene.load(path)
    return gallery.get(ref)


def _write(args, name: str, text: str, rep: Report) -> None:
    if not args.csv:
        return
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    rep.add(csv=str(path))


def _stem(ref: str) -> str:
    return Path(ref).stem if Path(ref).is_file() else ref


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args, rep: Report) -> None:
    p = load_scene(args.scene)
    grid = args.grid
    if p.config.get("kind") == "gcs":
        g = system_of(p)
        for c in check_gcs(g, grid):
            rep.check(c, stage="structure")
        cfg = TopologyProbeConfig(grid_step=grid)
        rep.check(hausdorff_probe(g, g, cfg), stage="before_shrink")
        margin = args.margin if args.margin is not None else p.config.get("margin")
        seq = strong_shrinking_sequence(g, args.shrink_k, Fraction(margin) if margin is not None else None)
        rep.check(hausdorff_probe(g, seq[-1], cfg), stage="after_shrink", k=args.shrink_k)
        return
    vr = validate_presentation(p, grid)
    for c in vr.structural:
        rep.check(c, stage="structure")
    for key in ("compatibility", "maximality", "matching"):
        rep.check(vr.checks[key], stage="axioms")
    if args.csv:
        cfg = TopologyProbeConfig(grid_step=grid)
        ident = build_identification(p, cfg, extra=matching_samples(p, cfg))
        _write(args, f"{_stem(args.scene)}-classes.csv", ident.to_csv(), rep)


def cmd_count(args, rep: Report) -> None:
    p = load_scene(args.scene)
    radii = args.radii if args.radii else None
    res = count_presentation(p, radii, args.seed, args.grid, args.fiber_scale, args.margin)
    rep.add(stages=res.stages)
    rep.check(res.hausdorff, stage="hausdorff")
    rep.add(zeros=len(res.zeros.entries), count=res.count)
    if args.oracle:
        oc = oracle_count(p, args.seed)
        rep.add(oracle=oc, oracle_match=oc == res.count)
        if oc != res.count:
            rep.failures += 1
    _write(args, f"{_stem(args.scene)}-zeros-seed{args.seed}.csv", res.zeros.to_csv(), rep)


def cmd_gallery(args, rep: Report) -> None:
    if args.list:
        rep.add(scenes=sorted(gallery.GALLERY))
        return
    p = gallery.get(args.name)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{args.name}.json"
    scene.dump(p, path)
    rep.add(scene=args.name, written=str(path), charts=sorted(p.charts), changes=len(p.changes))


def _level1(args):
    p = load_scene(args.scene)
    return level1_presentation(p, args.radii or None, args.grid, args.fiber_scale, args.margin)


def cmd_triple(args, rep: Report) -> None:
    l1g = _level1(args)
    tr = tp.build_tripling(l1g, margin=args.inset)
    idx = tr.index
    rep.add(order=l1g.order, members=idx.listing())
    rep.add(pruned=[tp.label(T) for T in idx.pruned])
    sampled = tp.sampled_family(l1g, tr.cover)
    match = sampled == list(idx.candidates)
    rep.add(oracle="sampled", oracle_match=match)
    if not match:
        rep.failures += 1
    for c in tr.checks:
        rep.check(c, stage="tripling")
    rep.check(tp.verify_nesting(l1g, idx), stage="tripling")
    rep.check(tp.probe_nesting(l1g, idx, args.probe_grid), stage="tripling")
    rep.check(tp.verify_converse(l1g, idx), stage="tripling")
    rep.add(refined_order=tr.refined.order)
    rep.add(changes=[f"{a}->{b}" for a, b in sorted(tr.refined.changes)])
    if args.csv:
        lines = ["subset,max,boxes"]
        for T in idx.members:
            lines.append(f"{tp.label(T)},{T[-1]},{len(idx.regions[T].boxes)}")
        _write(args, f"{_stem(args.scene)}-subsets.csv", "\n".join(lines) + "\n", rep)


def cmd_fp(args, rep: Report) -> None:
    if args.scene == SYNTHETIC:
        dom, targets = tp.synthetic_pair()
        l1g = build_level1_gcs(dom)
        pairs = [(k, t) for t, k in targets]
    else:
        l1g = _level1(args)
        pairs = []
        for _ in range(2):
            big, kemb = stabilize_gcs(l1g.gcs, args.stabilize)
            pairs.append((kemb, big))
    tr = tp.build_tripling(l1g, margin=args.inset)
    rep.add(members=tr.index.listing())
    embs = [build_level1_embedding(k, l1g, t, args.grid) for k, t in pairs]
    fp = tp.fiber_product(embs[0], embs[1], tr, args.grid)
    for T, fc in fp.charts.items():
        rep.add(subset=tp.label(T), **{f"dim.{k}": v for k, v in sorted(fc.dims.items())})
    rep.add(fp_order=fp.gcs.order, changes=[f"{a}->{b}" for a, b in sorted(fp.gcs.changes)])
    for c in fp.checks:
        rep.check(c, stage="fiber_product")
    if args.count:
        c, *_ = count_gcs(fp.gcs, args.seed, args.grid, args.fiber_scale)
        rep.add(fp_count=c)


COMMANDS = {"validate": cmd_validate, "count": cmd_count, "gallery": cmd_gallery, "triple": cmd_triple,
            "fp": cmd_fp}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="klab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, scene=True):
        if scene:
            sp.add_argument("scene", help="scene file path or gallery name")
        sp.add_argument("--grid", type=_fraction, default=Fraction(1, 20), help="relative sampling step")
        sp.add_argument("--seed", type=int, default=_default_seed(), help="perturbation seed (default $KLAB_SEED or 0)")
        sp.add_argument("--radii", type=_radii, default={}, help="ball radii as label=r,label=r")
        sp.add_argument("--margin", type=_fraction, default=None, help="shrinking margin")
        sp.add_argument("--fiber-scale", type=_fraction, default=Fraction(1), help="level-1 fiber radius scale")
        sp.add_argument("--out-dir", default=".", help="directory for CSV and scene files")
        sp.add_argument("--csv", action="store_true", help="write CSV exports to --out-dir")
        sp.add_argument("--timing", action="store_true", help="append a wall-clock line (breaks byte identity)")

    v = sub.add_parser("validate", help="check the presentation axioms")
    common(v)
    v.add_argument("--shrink-k", type=int, default=3, help="shrinking-sequence member for gcs scenes")
    c = sub.add_parser("count", help="run the counting pipeline")
    common(c)
    c.add_argument("--oracle", action="store_true", help="compare with the degree oracle")
    g = sub.add_parser("gallery", help="write a gallery scene file")
    g.add_argument("name", nargs="?", default=None)
    g.add_argument("--list", action="store_true", help="list the gallery")
    g.add_argument("--out-dir", default=".")
    g.add_argument("--timing", action="store_true")
    for name, helptext in (("triple", "tripling of the level-1 system"), ("fp", "fiber product of two stabilizations")):
        t = sub.add_parser(name, help=helptext)
        common(t)
        t.add_argument("--inset", type=_fraction, default=tp.DEFAULT_INSET, help="cover inset fraction")
        t.add_argument("--probe-grid", type=_fraction, default=Fraction(1, 8), help="nesting probe step")
        if name == "fp":
            t.add_argument("--stabilize", type=int, default=1, help="trivial directions added per target")
            t.add_argument("--count", action="store_true", help="count the fiber-product system")
    return ap


def _config(args) -> dict:
    keys = [k for k in vars(args) if k not in ("command", "timing")]
    return {k.replace("_", "-"): getattr(args, k) for k in sorted(keys)}


def run(argv=None) -> tuple[int, str]:
    args = build_parser().parse_args(argv)
    if args.command == "gallery" and not args.list and not args.name:
        build_parser().error("gallery needs a scene name or --list")
    rep = Report(args.command, **_config(args))
    start = time.perf_counter()
    code = None
    try:
        COMMANDS[args.command](args, rep)
    except KlabError as exc:
        rep.error(exc)
        code = EXIT_ERROR
    if code is None:
        rep.status()
        code = rep.exit_code
    if args.timing:
        rep.add(seconds=round(time.perf_counter() - start, 3))
    return code, rep.text()


def main(argv=None) -> int:
    code, text = run(argv)
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
