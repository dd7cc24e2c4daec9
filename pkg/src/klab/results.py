"""Verdict records shared by every check."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

PASS = "PASS"
PASS_AT_RESOLUTION = "PASS-AT-RESOLUTION"
CERTIFIED_FAIL = "CERTIFIED-FAIL"
FAIL = "FAIL"  # a failed check whose witness is floating-point only


@dataclass
class Check:
    """Outcome of one check.

    ``witness`` holds plain, printable values (strings, rationals, tuples) so a
    report can be emitted deterministically.
    """

    name: str
    verdict: str
    witness: dict = field(default_factory=dict)
    resolution: Fraction | None = None
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.verdict in (PASS, PASS_AT_RESOLUTION)

    def __bool__(self) -> bool:  # pragma: no cover - guard against misuse
        raise TypeError("use Check.ok")


def passed(name: str, exact: bool = True, resolution=None, **notes) -> Check:
    c = Check(name, PASS if exact else PASS_AT_RESOLUTION, resolution=resolution)
    if notes:
        c.notes.append(notes)
    return c


def failed(name: str, certified: bool = True, resolution=None, **witness) -> Check:
    return Check(name, CERTIFIED_FAIL if certified else FAIL, witness=witness, resolution=resolution)
