"""Triplet data model and the line format ``Entity: finding; finding; finding.``

Canonical whitespace (what round-trips byte for byte): blank lines dropped,
runs of whitespace collapsed to one space, line ends trimmed, exactly one
space after the first ``:`` of a line and after every ``;``, none before.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Sequence

from ._text import collapse_ws, default_phrase_list, read_phrase_list
from .errors import EmptyOutput, InvalidTriplet, MalformedLine
from .ontology import Ontology, default_ontology


class SegmentKind(str, Enum):
    DESCRIPTION = "description"
    DIAGNOSIS = "diagnosis"
    UNSPECIFIED = "unspecified"


@dataclass(frozen=True)
class Segment:
    text: str
    kind: SegmentKind = SegmentKind.UNSPECIFIED

    def __post_init__(self):
        t = self.text
        if not t or t != t.strip():
            raise InvalidTriplet(f"segment text must be non-empty and trimmed: {t!r}")
        if ";" in t or "\n" in t or "\r" in t:
            raise InvalidTriplet(f"segment text may not contain ';' or a line break: {t!r}")


@dataclass(frozen=True)
class Triplet:
    """One anatomical anchor with its ordered finding segments."""

    entity: str
    segments: tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        e = self.entity
        if not e or e != e.strip() or ":" in e or "\n" in e:
            raise InvalidTriplet(f"invalid entity {e!r}")
        if not self.segments:
            raise InvalidTriplet(f"triplet {e!r} has no segments")

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(s.text for s in self.segments)

    def with_segments(self, segments: Iterable[Segment]) -> "Triplet":
        return Triplet(self.entity, tuple(segments))


@dataclass(frozen=True)
class NormalizedReport:
    report_id: str
    triplets: tuple[Triplet, ...]
    backend: str = "unknown"
    source_hash: str = ""

    def __post_init__(self):
        object.__setattr__(self, "triplets", tuple(self.triplets))

    @property
    def entities(self) -> list[str]:
        return [t.entity for t in self.triplets]

    def to_text(self) -> str:
        return serialize_report(self.triplets)

    def replace_triplets(self, triplets: Iterable[Triplet]) -> "NormalizedReport":
        return NormalizedReport(self.report_id, tuple(triplets), self.backend, self.source_hash)


def _phrase_regex(phrases: Iterable[str], prefix: bool) -> re.Pattern | None:
    alts = sorted({collapse_ws(p).lower() for p in phrases if p.strip()}, key=len, reverse=True)
    if not alts:
        return None
    body = "|".join(re.escape(a).replace(r"\ ", r"\s+") for a in alts)
    tail = "" if prefix else r"(?!\w)"
    # phrases are lowercased, so callers search lowercased text; much faster than re.IGNORECASE
    return re.compile(rf"(?<!\w)(?:{body}){tail}")


_MEASUREMENT = re.compile(r"\d+(?:\.\d+)?\s*(?:mm|cm|ml|cc|hu)\b")  # on lowercased text


class SegmentTagger:
    """Cue-phrase heuristic assigning a :class:`SegmentKind` to a finding clause.

    Diagnosis cues are whole phrases; description cues are word stems. A
    diagnosis cue always wins.
    """

    def __init__(self, diagnosis_cues: Iterable[str], description_cues: Iterable[str] = ()):
        self.diagnosis_cues = tuple(diagnosis_cues)
        self.description_cues = tuple(description_cues)
        self._dx = _phrase_regex(self.diagnosis_cues, prefix=False)
        self._desc = _phrase_regex(self.description_cues, prefix=True)

    @classmethod
    def from_files(cls, diagnosis_path=None, description_path=None) -> "SegmentTagger":
        dx = read_phrase_list(diagnosis_path) if diagnosis_path else default_phrase_list("diagnosis_cues.txt")
        desc = (
            read_phrase_list(description_path)
            if description_path
            else default_phrase_list("description_cues.txt")
        )
        return cls(dx, desc)

    def tag(self, text: str) -> SegmentKind:
        text = text.lower()
        if self._dx is not None and self._dx.search(text):
            return SegmentKind.DIAGNOSIS
        if _MEASUREMENT.search(text) or (self._desc is not None and self._desc.search(text)):
            return SegmentKind.DESCRIPTION
        return SegmentKind.UNSPECIFIED

    def segment(self, text: str) -> Segment:
        return Segment(text, self.tag(text))


@lru_cache(maxsize=1)
def default_tagger() -> SegmentTagger:
    return SegmentTagger.from_files()


def canonical_whitespace(text: str) -> str:
    lines = []
    for raw in text.split("\n"):
        line = collapse_ws(raw)
        if not line:
            continue
        head, sep, tail = line.partition(":")
        if sep:
            parts = [collapse_ws(p) for p in tail.split(";")]
            line = f"{collapse_ws(head)}: " + "; ".join(parts)
            line = line.rstrip()
        lines.append(line)
    return "\n".join(lines)


def _clean_clause(clause: str) -> str:
    return collapse_ws(collapse_ws(clause).rstrip("."))


def parse_triplet_line(line: str, tagger: SegmentTagger | None = None) -> Triplet:
    if "\n" in line or "\r" in line:
        raise MalformedLine(line, "line break inside a triplet line")
    head, sep, tail = line.partition(":")
    if not sep:
        raise MalformedLine(line, "missing ':' separator")
    entity = collapse_ws(head)
    if not entity:
        raise MalformedLine(line, "empty anatomical entity")
    if not collapse_ws(tail).rstrip("."):
        raise MalformedLine(line, "empty findings")
    tagger = tagger or default_tagger()
    segments = []
    for clause in tail.split(";"):
        text = _clean_clause(clause)
        if not text:
            raise MalformedLine(line, "empty finding clause")
        segments.append(tagger.segment(text))
    return Triplet(entity, tuple(segments))


def arrange_triplets(triplets: Iterable[Triplet], ontology: Ontology | None = None) -> list[Triplet]:
    """Merge triplets sharing a canonical entity and sort into reading order.

    Resolved entities come first in ontology order; unresolved ones follow in
    first-occurrence order. The first-seen spelling of a merged entity is kept.
    """
    ontology = ontology or default_ontology()
    groups: dict[str, list] = {}
    for pos, trip in enumerate(triplets):
        node = ontology.resolve(trip.entity)
        key = node.canonical.casefold() if node else collapse_ws(trip.entity).casefold()
        slot = groups.get(key)
        if slot is None:
            groups[key] = [trip.entity, list(trip.segments), node, pos]
        else:
            slot[1].extend(trip.segments)

    def order(slot):
        node, pos = slot[2], slot[3]
        return (0, node.order_index, pos) if node else (1, 0, pos)

    return [Triplet(s[0], tuple(s[1])) for s in sorted(groups.values(), key=order)]


def parse_report(
    text: str, ontology: Ontology | None = None, tagger: SegmentTagger | None = None
) -> list[Triplet]:
    triplets = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            triplets.append(parse_triplet_line(line.rstrip("\r"), tagger))
        except MalformedLine as exc:
            raise MalformedLine(exc.line, exc.reason, lineno) from None
    if not triplets:
        raise EmptyOutput("normalization output has no non-blank line")
    return arrange_triplets(triplets, ontology)


def serialize_triplet(triplet: Triplet) -> str:
    body = "; ".join(triplet.texts)
    if not body.endswith("."):
        body += "."
    return f"{triplet.entity}: {body}"


def serialize_report(triplets: Sequence[Triplet]) -> str:
    return "\n".join(serialize_triplet(t) for t in triplets)


def report_problems(text: str, ontology: Ontology | None = None) -> list[str]:
    """Every schema violation found in a normalized text (empty list when valid)."""
    ontology = ontology or default_ontology()
    problems = []
    triplets = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            triplets.append(parse_triplet_line(line.rstrip("\r")))
        except MalformedLine as exc:
            problems.append(f"line {lineno}: {exc.reason}: {line!r}")
    if not triplets and not problems:
        problems.append("no non-blank line")
    seen = {}
    for t in triplets:
        node = ontology.resolve(t.entity)
        key = node.canonical.casefold() if node else t.entity.casefold()
        if key in seen:
            problems.append(f"entity {t.entity!r} repeats {seen[key]!r}")
        else:
            seen[key] = t.entity
    if not problems and arrange_triplets(triplets, ontology) != triplets:
        problems.append("triplets are not in anatomical order")
    return problems
