"""Deterministic, model-free normalization backend.

Pipeline: split into sections (dropping non-imaging sections), strip numbered
item markers, split sentences, drop image-irrelevant sentences, anchor each
sentence to the earliest-mentioned ontology entity, emit one segment per
``;`` clause, then merge and order triplets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Iterable, Mapping

from .._text import collapse_ws, default_phrase_list, read_phrase_list, source_hash
from ..errors import EmptyAfterFiltering
from ..ontology import Ontology, default_ontology
from ..schema import NormalizedReport, SegmentTagger, Triplet, arrange_triplets, default_tagger


class Modality(str, Enum):
    XRAY = "xray"
    CT = "ct"
    MRI = "mri"
    OTHER = "other"

    @classmethod
    def parse(cls, value: str | None) -> "Modality | None":
        if value is None or value == "":
            return None
        if isinstance(value, cls):
            return value
        key = re.sub(r"[^a-z]", "", str(value).lower())
        return {"xray": cls.XRAY, "cr": cls.XRAY, "dx": cls.XRAY, "ct": cls.CT, "mri": cls.MRI, "mr": cls.MRI}.get(
            key, cls.OTHER
        )


@dataclass(frozen=True)
class RawReport:
    report_id: str
    text: str
    modality: Modality | None = None
    body_region: str | None = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError(f"report {self.report_id!r} has empty text")
        object.__setattr__(self, "modality", Modality.parse(self.modality))

    @cached_property
    def source_hash(self) -> str:
        return source_hash(self.text)


@dataclass(frozen=True)
class IrrelevanceFilters:
    """Phrases that mark a sentence as image-irrelevant, plus sections dropped wholesale."""

    phrases: tuple[str, ...]
    drop_sections: tuple[str, ...] = ()
    _regex: re.Pattern | None = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "phrases", tuple(self.phrases))
        object.__setattr__(self, "drop_sections", tuple(s.upper() for s in self.drop_sections))
        alts = sorted({collapse_ws(p).lower() for p in self.phrases if p.strip()}, key=len, reverse=True)
        # matched against lowercased sentences; cheaper than re.I on a long alternation
        rx = re.compile("|".join(re.escape(a).replace(r"\ ", r"\s+") for a in alts)) if alts else None
        object.__setattr__(self, "_regex", rx)

    @classmethod
    def from_files(cls, phrases_path=None, sections_path=None) -> "IrrelevanceFilters":
        phrases = read_phrase_list(phrases_path) if phrases_path else default_phrase_list("irrelevance_filters.txt")
        sections = read_phrase_list(sections_path) if sections_path else default_phrase_list("drop_sections.txt")
        return cls(tuple(phrases), tuple(sections))

    def drops(self, sentence: str) -> bool:
        return self._regex is not None and self._regex.search(sentence.lower()) is not None


@lru_cache(maxsize=1)
def default_filters() -> IrrelevanceFilters:
    return IrrelevanceFilters.from_files()


_HEADER = re.compile(r"(?<![^\s.;])([A-Z][A-Z /&]{1,40}[A-Z]):")
_MARKER = re.compile(r"(^|[.!?;:\n])(\s*)\d{1,2}[.)](?=\s|$)", re.M)
_BOUNDARY = re.compile(r"[.!?]+(?=\s+[A-Z]|\s*$)")
_ABBREVIATIONS = ("dr.", "e.g.", "i.e.", "vs.", "approx.", "st.")
_TRAILING = " .!?"


def split_sections(text: str) -> list[tuple[str | None, str]]:
    """``(HEADER, body)`` pairs; text before the first header has header ``None``."""
    out = []
    last_end = 0
    last_header = None
    for m in _HEADER.finditer(text):
        body = text[last_end : m.start()]
        if last_header is not None or body.strip():
            out.append((last_header, body))
        last_header = collapse_ws(m.group(1))
        last_end = m.end()
    out.append((last_header, text[last_end:]))
    return out


def strip_markers(text: str) -> str:
    return _MARKER.sub(r"\1\2", text)


def split_sentences(text: str) -> list[str]:
    """Split on ``.``/``!``/``?`` followed by whitespace+uppercase or the end.

    A period ending a protected abbreviation (``Dr.``, ``e.g.``, ...) is not a
    boundary. Unit abbreviations such as ``mm.`` split only before a capital,
    like any other word.
    """
    text = collapse_ws(text)
    out = []
    start = 0
    for m in _BOUNDARY.finditer(text):
        end = m.end()
        word_start = text.rfind(" ", start, m.start()) + 1
        word = text[word_start:end].lower()
        if word.endswith(_ABBREVIATIONS):
            continue
        piece = text[start:end].strip()
        if piece:
            out.append(piece)
        start = end
    tail = text[start:].strip()
    if tail:
        out.append(tail)
    return out


class RuleBasedNormalizer:
    """Callable backend: ``RawReport -> NormalizedReport``."""

    name = "rule-based"

    def __init__(
        self,
        ontology: Ontology | None = None,
        filters: IrrelevanceFilters | None = None,
        tagger: SegmentTagger | None = None,
        anchors: Mapping[str, str] | None = None,
        default_anchor: str = "Chest",
    ):
        self.ontology = ontology or default_ontology()
        self.filters = filters or default_filters()
        self.tagger = tagger or default_tagger()
        self.anchors = {k.casefold(): v for k, v in (anchors or {"abdomen": "Abdomen", "pelvis": "Pelvis"}).items()}
        self.default_anchor = default_anchor

    def anchor_for(self, body_region: str | None) -> str:
        if body_region:
            return self.anchors.get(body_region.strip().casefold(), self.default_anchor)
        return self.default_anchor

    def sentences(self, text: str) -> Iterable[tuple[str | None, str]]:
        """Surviving ``(section_anchor, sentence)`` pairs."""
        drop = set(self.filters.drop_sections)
        for header, body in split_sections(text):
            if header is not None and header.upper() in drop:
                continue
            section_node = self.ontology.resolve(header) if header else None
            section_anchor = section_node.canonical if section_node else None
            for sentence in split_sentences(strip_markers(body)):
                if not sentence.strip(_TRAILING) or self.filters.drops(sentence):
                    continue
                yield section_anchor, sentence

    def __call__(self, raw: RawReport) -> NormalizedReport:
        fallback = self.anchor_for(raw.body_region)
        triplets = []
        for section_anchor, sentence in self.sentences(raw.text):
            node = self.ontology.find_mention(sentence)
            entity = node.canonical if node else (section_anchor or fallback)
            segments = []
            # sentences come out of split_sentences already whitespace-collapsed
            for clause in sentence.split(";"):
                clause = clause.strip().rstrip(_TRAILING)
                if clause:
                    segments.append(self.tagger.segment(clause))
            if segments:
                triplets.append(Triplet(entity, tuple(segments)))
        if not triplets:
            raise EmptyAfterFiltering(f"report {raw.report_id!r}: no image-relevant sentence left")
        return NormalizedReport(
            raw.report_id, tuple(arrange_triplets(triplets, self.ontology)), self.name, raw.source_hash
        )


def normalize_rule_based(
    raw: RawReport, ontology: Ontology | None = None, filters: IrrelevanceFilters | None = None, **kwargs
) -> NormalizedReport:
    return RuleBasedNormalizer(ontology, filters, **kwargs)(raw)
