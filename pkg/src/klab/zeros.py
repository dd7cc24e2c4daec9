"""Batched Newton zero finding with exact rational snapping."""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

TOL_ZERO = 1e-10
TOL_RANK = 1e-8
MAX_SEEDS = 4096


def seed_grid(lo: Sequence[float], hi: Sequence[float], step: float, max_seeds: int = MAX_SEEDS) -> np.ndarray:
    """Interior grid of a box, coarsened until it has at most ``max_seeds`` points."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    d = len(lo)
    step = float(step)
    while True:
        axes = []
        for a, b in zip(lo, hi):
            n = max(1, int(np.floor((b - a) / step)))
            axes.append(a + (np.arange(n) + 0.5) * (b - a) / n)
        count = int(np.prod([len(x) for x in axes]))
        if count <= max_seeds:
            break
        step *= 1.5
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1) if d else np.zeros((1, 0))


def newton(
    f: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], np.ndarray],
    seeds: np.ndarray,
    tol: float = TOL_ZERO,
    max_iter: int = 100,
) -> tuple[np.ndarray, np.ndarray]:
    """Run Gauss-Newton from every seed; return (points, residual norms)."""
    x = np.array(seeds, dtype=float, copy=True)
    if x.size == 0:
        return x, np.zeros(len(x))
    for _ in range(max_iter):
        fx = f(x)
        res = np.max(np.abs(fx), axis=1) if fx.shape[1] else np.zeros(len(x))
        active = res >= tol * 1e-3
        if not active.any():
            break
        J = jac(x[active])
        step = np.einsum("nij,nj->ni", np.linalg.pinv(J), fx[active])
        # damp runaway steps
        norms = np.max(np.abs(step), axis=1, keepdims=True)
        scale = np.minimum(1.0, 0.5 / np.maximum(norms, 1e-300))
        x[active] = x[active] - step * scale
        bad = ~np.isfinite(x).all(axis=1)
        x[bad] = 1e6
    fx = f(x)
    res = np.max(np.abs(fx), axis=1) if fx.shape[1] else np.zeros(len(x))
    return x, res


def dedupe(points: np.ndarray, min_sep: float) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for p in points:
        if all(np.max(np.abs(p - q)) > min_sep for q in out):
            out.append(p)
    return out


def snap_rational(x: np.ndarray, is_exact_zero: Callable[[tuple], bool]) -> tuple | None:
    """Try small-denominator rationals near ``x``; return one that is an exact zero."""
    for den in (1, 2, 4, 8, 10, 16, 100, 1000, 10**4, 10**6):
        cand = tuple(Fraction(float(v)).limit_denominator(den) for v in x)
        if max(abs(float(c) - float(v)) for c, v in zip(cand, x)) > 1e-4:
            continue
        if is_exact_zero(cand):
            return cand
    return None
