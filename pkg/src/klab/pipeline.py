"""End-to-end counting pipeline: extraction, strongly intersecting shrinking,
Hausdorff probe, level-1 data, perturbation, zero set and signed count."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .atlas import GoodCoordinateSystem, KuranishiPresentation, as_gcs, extract_gcs, strongly_intersecting_shrink
from .errors import KlabError
from .identification import TopologyProbeConfig, hausdorff_probe
from .level1 import Level1GCS, build_level1_gcs
from .perturbation import OrientationData, Perturbation, ZeroSet, global_perturb, orientation_data, signed_count, zero_set
from .results import Check


class HausdorffProbeFailed(KlabError):
    stage = "hausdorff"

    def __init__(self, check: Check):
        super().__init__("Hausdorff probe failed", **check.witness)
        self.check = check


@dataclass
class CountResult:
    count: Fraction
    gcs: GoodCoordinateSystem
    shrunk: GoodCoordinateSystem
    hausdorff: Check
    level1: Level1GCS
    perturbation: Perturbation
    zeros: ZeroSet
    orientation: OrientationData
    stages: list = field(default_factory=list)


class _Stage:
    def __init__(self, name: str, log: list):
        self.name = name
        self.log = log

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None:
            self.log.append(self.name)
        elif isinstance(exc, KlabError):
            exc.stage = self.name
        return False


def count_gcs(g: GoodCoordinateSystem, seed: int = 0, grid_step=Fraction(1, 20), fiber_scale=Fraction(1),
              margin=None, stages: list | None = None):
    """Level-1 data, perturbation, zero set and count for a ready GCS."""
    stages = stages if stages is not None else []
    with _Stage("level1", stages):
        l1g = build_level1_gcs(g, margin=margin, fiber_scale=fiber_scale, grid_step=grid_step)
    with _Stage("perturb", stages):
        pert = global_perturb(l1g, seed, grid_step)
    with _Stage("zeros", stages):
        zs = zero_set(l1g, pert, grid_step=grid_step)
    with _Stage("count", stages):
        ori = orientation_data(l1g, grid_step)
        c = signed_count(zs, ori)
    return c, l1g, pert, zs, ori


def system_of(p: KuranishiPresentation, radii: dict | None = None) -> GoodCoordinateSystem:
    """The good coordinate system of a scene: scenes of kind ``gcs`` already
    are one, presentations go through extraction."""
    if p.config.get("kind") == "gcs":
        return as_gcs(p.charts.values(), p.changes.values(), p.labels, p)
    if radii is None:
        radii = {k: Fraction(v) for k, v in p.config.get("radii", {}).items()}
    return extract_gcs(p, radii)


def level1_presentation(p: KuranishiPresentation, radii: dict | None = None, grid_step=Fraction(1, 20),
                        fiber_scale=Fraction(1), margin=None, stages: list | None = None) -> Level1GCS:
    """Extraction, strongly intersecting shrinking, Hausdorff probe and
    level-1 data, stopping before the perturbation."""
    stages = stages if stages is not None else []
    grid_step = Fraction(grid_step)
    with _Stage("extract", stages):
        g = system_of(p, radii)
    with _Stage("shrink", stages):
        gs = strongly_intersecting_shrink(g, grid_step, margin=margin)
    with _Stage("hausdorff", stages):
        chk = hausdorff_probe(g, gs, TopologyProbeConfig(grid_step=grid_step))
        if not chk.ok:
            raise HausdorffProbeFailed(chk)
    with _Stage("level1", stages):
        return build_level1_gcs(gs, fiber_scale=fiber_scale, grid_step=grid_step)


def count_presentation(p: KuranishiPresentation, radii: dict | None = None, seed: int = 0,
                       grid_step=Fraction(1, 20), fiber_scale=Fraction(1), margin=None) -> CountResult:
    stages: list = []
    grid_step = Fraction(grid_step)
    if radii is None:
        radii = {k: Fraction(v) for k, v in p.config.get("radii", {}).items()}
    with _Stage("extract", stages):
        g = system_of(p, radii)
    with _Stage("shrink", stages):
        gs = strongly_intersecting_shrink(g, grid_step, margin=margin)
    with _Stage("hausdorff", stages):
        chk = hausdorff_probe(g, gs, TopologyProbeConfig(grid_step=grid_step))
        if not chk.ok:
            raise HausdorffProbeFailed(chk)
    c, l1g, pert, zs, ori = count_gcs(gs, seed, grid_step, fiber_scale, None, stages)
    return CountResult(c, g, gs, chk, l1g, pert, zs, ori, stages)
