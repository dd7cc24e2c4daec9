"""Independent degree oracle.

Counts are computed from the raw presentation: every point of X contributes
the local degree of the section of one chart containing it, times the chart
orientation, divided by the order of its stabilizer.  Local degrees come from
boundary signs (dimension 1), the winding number along the boundary square
(dimension 2) or signed preimages of a small regular value (any dimension).
Nothing here uses the perturbation machinery.
"""

from __future__ import annotations

import hashlib
import math
from fractions import Fraction

import numpy as np

from .boxes import Box, BoxUnion
from .errors import RegularValueSearchExhausted, VdimNonzero
from .geometry import KuranishiChart, PolySection
from .zeros import TOL_RANK, TOL_ZERO, dedupe, newton, seed_grid

WINDING_SAMPLES = 1024


def _rng(seed: int, tag: str) -> np.random.Generator:
    h = hashlib.sha256(f"degree|{seed}|{tag}".encode()).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(h[:16], "little")))


def isolating_radius(chart: KuranishiChart, point) -> Fraction:
    """A power of two r <= 1/4 with the closed cube of radius r around
    ``point`` inside the base and at sup-distance more than 2r from every other
    footprint zero (including group translates)."""
    others = set()
    for _, p in chart.footprint:
        for q in chart.group.orbit(p):
            if q != tuple(point):
                others.add(q)
    r = Fraction(1, 4)
    for _ in range(60):
        cube = BoxUnion.of(Box.cube(point, r))
        far = all(max(abs(a - b) for a, b in zip(q, point)) > 2 * r for q in others)
        if far and cube.closure_subset_of(chart.base):
            return r
        r /= 2
    raise ValueError(f"no isolating cube around {point} in chart {chart.id}")


def degree_1d(section: PolySection, center, radius) -> int:
    lo = section.eval([center[0] - radius])[0]
    hi = section.eval([center[0] + radius])[0]
    if lo == 0 or hi == 0:
        raise ValueError("section vanishes on the boundary of the isolating interval")
    return ((hi > 0) - (hi < 0) - (lo > 0) + (lo < 0)) // 2


def _square_loop(center, radius, n: int) -> np.ndarray:
    """``n`` points walking counter-clockwise around the boundary square."""
    c = np.array([float(v) for v in center])
    r = float(radius)
    t = np.arange(n) / n * 4.0
    pts = np.zeros((n, 2))
    for k, (x0, y0, dx, dy) in enumerate([(1, -1, 0, 2), (1, 1, -2, 0), (-1, 1, 0, -2), (-1, -1, 2, 0)]):
        m = (t >= k) & (t < k + 1)
        s = t[m] - k
        pts[m, 0] = x0 + dx * s
        pts[m, 1] = y0 + dy * s
    return c + r * pts


def winding_number(section: PolySection, center, radius, samples: int = WINDING_SAMPLES) -> int:
    pts = _square_loop(center, radius, samples)
    v = section.eval_np(pts)
    if np.min(np.hypot(v[:, 0], v[:, 1])) <= TOL_ZERO:
        raise ValueError("section vanishes on the boundary loop")
    ang = np.arctan2(v[:, 1], v[:, 0])
    d = np.diff(np.concatenate([ang, ang[:1]]))
    d = (d + math.pi) % (2 * math.pi) - math.pi
    return int(round(d.sum() / (2 * math.pi)))


def _boundary_min(section: PolySection, center, radius, per_axis: int = 9) -> float:
    n = len(center)
    c = np.array([float(v) for v in center])
    r = float(radius)
    axis = np.linspace(-r, r, per_axis)
    best = math.inf
    for i in range(n):
        for side in (-r, r):
            grids = np.meshgrid(*[axis if j != i else np.array([side]) for j in range(n)], indexing="ij")
            pts = c + np.stack([g.ravel() for g in grids], axis=1)
            best = min(best, float(np.min(np.linalg.norm(section.eval_np(pts), axis=1))))
    return best


def regular_value_degree(section: PolySection, center, radius, seed: int = 0, tries: int = 50) -> int:
    """Sum of signs of preimages of a small random value inside the cube."""
    c = np.array([float(v) for v in center])
    r = float(radius)
    m = _boundary_min(section, center, radius)
    if m <= TOL_ZERO:
        raise ValueError("section vanishes on the boundary of the isolating cube")
    lo, hi = c - r, c + r
    seeds = seed_grid(lo, hi, r / 6, max_seeds=20000)
    rng = _rng(seed, f"{section.components}|{center}")
    for _ in range(tries):
        w = rng.uniform(-1.0, 1.0, section.fiber_rank)
        w *= m / 4 / max(np.linalg.norm(w), 1e-300)
        pts, res = newton(lambda X: section.eval_np(X) - w, section.jac_np, seeds)
        keep = (res < TOL_ZERO) & np.all((pts > lo) & (pts < hi), axis=1)
        zs = dedupe(pts[keep], 1e-7 * r)
        if not zs:
            return 0
        dets = [float(np.linalg.det(section.jac_np(z[None, :])[0])) for z in zs]
        if all(abs(d) > TOL_RANK for d in dets):
            return int(sum(1 if d > 0 else -1 for d in dets))
    raise RegularValueSearchExhausted(f"no regular value found near {center}")


def local_degree(section: PolySection, center, radius=None, chart: KuranishiChart | None = None, seed: int = 0) -> int:
    if section.base_dim != section.fiber_rank:
        raise VdimNonzero("local degree needs equal base and fiber dimension")
    if section.base_dim == 0:
        return 1
    if radius is None:
        radius = isolating_radius(chart, center)
    if section.base_dim == 1:
        return degree_1d(section, center, radius)
    if section.base_dim == 2:
        return winding_number(section, center, radius)
    return regular_value_degree(section, center, radius, seed)


def chart_point_contribution(chart: KuranishiChart, point, orientation=(1, 1), seed: int = 0) -> Fraction:
    deg = local_degree(chart.section, point, chart=chart, seed=seed)
    stab = len(chart.group.stabilizer(tuple(point)))
    return Fraction(deg * orientation[0] * orientation[1], stab)


def chart_count(chart: KuranishiChart, orientation=(1, 1), seed: int = 0) -> Fraction:
    """Oracle count of a single chart: one term per footprint label."""
    return sum((chart_point_contribution(chart, p, orientation, seed) for _, p in chart.footprint), Fraction(0))


def oracle_count(p, seed: int = 0) -> Fraction:
    """Oracle count of a presentation: each label is evaluated in the
    lowest-dimensional chart whose footprint contains it."""
    total = Fraction(0)
    for lab in p.labels:
        holders = sorted((c.dim, c.id) for c in p.charts.values() if lab in c.labels())
        if not holders:
            raise ValueError(f"label {lab} has no chart")
        c = p.charts[holders[0][1]]
        total += chart_point_contribution(c, c.rep(lab), p.orientation.get(c.id, (1, 1)), seed)
    return total
