"""Exception hierarchy shared by all medtri modules."""

from __future__ import annotations


class MedTriError(Exception):
    """Base class for every error raised by this package."""


# -- schema -------------------------------------------------------------------


class MalformedLine(MedTriError):
    """A normalized line does not follow ``Entity: finding; finding.``."""

    def __init__(self, line: str, reason: str, lineno: int | None = None):
        self.line = line
        self.reason = reason
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(f"{where}{reason}: {line!r}")


class EmptyOutput(MedTriError):
    """Backend output contained no non-blank line."""


class InvalidTriplet(MedTriError, ValueError):
    """A Triplet or Segment was constructed with values violating its invariants."""


# -- ontology -----------------------------------------------------------------


class OntologyError(MedTriError):
    pass


class DuplicateName(OntologyError):
    pass


class DuplicateOrderIndex(OntologyError):
    pass


class DanglingParent(OntologyError):
    pass


class LevelGap(OntologyError):
    pass


class CycleDetected(OntologyError):
    pass


# -- normalize ----------------------------------------------------------------


class EmptyAfterFiltering(MedTriError):
    """Every sentence of a report was dropped as image-irrelevant."""


class TransportError(MedTriError):
    """Remote backend could not be reached or answered with an error status."""


class BackendTimeout(TransportError):
    """Remote backend did not answer within the configured timeout."""


class FormatError(MedTriError):
    """Remote backend answered, but not in triplet format (even after a repair retry)."""

    def __init__(self, message: str, response: str | None = None):
        self.response = response
        super().__init__(message)


# -- augment ------------------------------------------------------------------


class KnowledgeError(MedTriError):
    pass


class InsufficientEligibleEntities(MedTriError):
    pass


class NoDonorAtLevel(MedTriError):
    def __init__(self, level: int | None, entity: str):
        self.level = level
        self.entity = entity
        super().__init__(f"no donor triplet at level {level} for entity {entity!r}")


# -- metrics ------------------------------------------------------------------


class EmptyCandidate(MedTriError, ValueError):
    pass


class EmptyReference(MedTriError, ValueError):
    pass


class ProviderError(MedTriError):
    pass


class DimensionMismatch(ProviderError):
    pass


class EmptyCorpus(MedTriError):
    pass


# -- corpus -------------------------------------------------------------------


class CorpusFormatError(MedTriError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(message if lineno is None else f"line {lineno}: {message}")


class TestCountExceedsCorpus(MedTriError, ValueError):
    __test__ = False  # keep pytest from collecting this as a test class


class ConfigError(MedTriError):
    pass
