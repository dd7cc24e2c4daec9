"""Deterministic run reports: one ``#R key=value ...`` line per record."""

from __future__ import annotations

import json
from fractions import Fraction

from .results import CERTIFIED_FAIL, FAIL, Check
from .zeros import TOL_RANK, TOL_ZERO

PREFIX = "#R "

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FAIL = 2


def fmt(v) -> str:
    """Printable, whitespace-free rendering of a report value."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return "[" + ",".join(fmt(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ",".join(f"{fmt(k)}:{fmt(x)}" for k, x in sorted(v.items(), key=lambda kv: str(kv[0]))) + "}"
    s = str(v)
    if not s or any(ch.isspace() for ch in s) or "=" in s or '"' in s:
        return json.dumps(s)
    return s


class Report:
    def __init__(self, command: str, **config):
        self.lines: list[str] = []
        self.failures = 0
        self.add(command=command)
        if config:
            self.add(**config)
        self.add(tol_zero=TOL_ZERO, tol_rank=TOL_RANK)

    def add(self, **pairs) -> None:
        self.lines.append(PREFIX + " ".join(f"{k}={fmt(v)}" for k, v in pairs.items()))

    def check(self, c: Check, **context) -> None:
        pairs = dict(context)
        pairs["check"] = c.name
        pairs["verdict"] = c.verdict
        if c.resolution is not None:
            pairs["resolution"] = c.resolution
        for k in sorted(c.witness):
            pairs[f"witness.{k}"] = c.witness[k]
        for note in c.notes:
            for k in sorted(note):
                pairs[f"note.{k}"] = note[k]
        if c.verdict in (CERTIFIED_FAIL, FAIL):
            self.failures += 1
        self.add(**pairs)

    def error(self, exc: Exception) -> None:
        pairs = {"error": type(exc).__name__, "stage": getattr(exc, "stage", "unknown"), "message": str(exc)}
        details = getattr(exc, "details", None) or {}
        for k in sorted(details):
            pairs[f"detail.{k}"] = details[k]
        self.add(**pairs)

    @property
    def exit_code(self) -> int:
        return EXIT_FAIL if self.failures else EXIT_PASS

    def status(self) -> None:
        self.add(status="CERTIFIED-FAIL" if self.failures else "PASS", failures=self.failures)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"
