"""Exception hierarchy.

Every error carries a short machine-readable name (the class name) so that the
command line can report ``stage=... error=...`` lines without string parsing.
"""

from __future__ import annotations


class KlabError(Exception):
    """Base class for all toolkit errors."""

    stage = "core"

    def __init__(self, message: str = "", **details):
        super().__init__(message)
        self.details = details


# geometry-core
class PointOutsideBase(KlabError):
    stage = "geometry"


class RankDeficientEmbedding(KlabError):
    stage = "geometry"


class NotInvariant(KlabError):
    stage = "geometry"


class NotSubset(KlabError):
    stage = "geometry"


class EmptyComposite(KlabError):
    stage = "geometry"


class NonAxisMap(KlabError):
    stage = "geometry"


# atlas
class NotCovering(KlabError):
    stage = "atlas"


class BallTooLarge(KlabError):
    stage = "atlas"


class BallConfigUnrealizable(KlabError):
    stage = "atlas"


class CoverageLost(KlabError):
    stage = "atlas"


class IndexSetChanged(KlabError):
    stage = "atlas"


class MarginTooLarge(KlabError):
    stage = "atlas"


class IterationBudgetExceeded(KlabError):
    stage = "atlas"


class MixedDimensionBlock(KlabError):
    stage = "atlas"


class OrderNotInduced(KlabError):
    stage = "atlas"


# identification
class ClassNotInShrinking(KlabError):
    stage = "identification"


class PairBudgetExceeded(KlabError):
    stage = "identification"


# level1
class NoRoomToShrink(KlabError):
    stage = "level1"


class TransversalityUnachievable(KlabError):
    stage = "level1"


class EmptyCommonDomain(KlabError):
    stage = "level1"


class InductionBlocked(KlabError):
    stage = "level1"


class NotConcerted(KlabError):
    stage = "level1"


# perturbation
class RegularValueSearchExhausted(KlabError):
    stage = "perturbation"


class HypothesisViolation(KlabError):
    stage = "perturbation"


class SupportEscapesDomain(KlabError):
    stage = "perturbation"


class VdimNonconstant(KlabError):
    stage = "perturbation"


class VdimNonzero(KlabError):
    stage = "perturbation"


class OrientationInconsistent(KlabError):
    stage = "perturbation"


# tripling / fiber products
class NotAdmissible(KlabError):
    stage = "tripling"


class NotTripled(KlabError):
    stage = "tripling"


# cli
class ParseError(KlabError):
    stage = "cli"

    def __init__(self, message: str = "", line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})", line=line, column=column)
        self.line = line
        self.column = column


class UnknownGallery(KlabError):
    stage = "cli"
