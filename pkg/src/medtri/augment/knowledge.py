"""Knowledge expansion: append a diagnosis' radiologic signature after the segment naming it.

Dictionary file format (JSON)::

    {"schema_version": 1,
     "entries": [{"term": "pneumonia", "synonyms": ["pneumonitis"],
                  "signature": "parenchymal consolidation ..."}]}
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

from .._text import PhraseIndex, collapse_ws, data_path
from ..errors import KnowledgeError
from ..schema import NormalizedReport, Segment, SegmentKind

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class KnowledgeEntry:
    term: str
    synonyms: tuple[str, ...]
    signature: str

    def __post_init__(self):
        object.__setattr__(self, "synonyms", tuple(self.synonyms))


class KnowledgeDictionary:
    def __init__(self, entries: Iterable[KnowledgeEntry]):
        self.entries = tuple(entries)
        self._index = PhraseIndex()
        self._signatures: set[str] = set()
        for e in self.entries:
            sig = e.signature
            if not sig or sig != collapse_ws(sig) or "\n" in sig or ";" in sig or sig.endswith("."):
                raise KnowledgeError(
                    f"signature for {e.term!r} must be one trimmed clause without ';' or a final '.'"
                )
            for surface in (e.term, *e.synonyms):
                try:
                    clash = self._index.get(surface)
                except ValueError as exc:
                    raise KnowledgeError(str(exc)) from None
                if clash is not None:
                    raise KnowledgeError(f"{surface!r} listed under both {clash.term!r} and {e.term!r}")
                self._index.add(surface, e)
            self._signatures.add(sig.casefold())

    def __len__(self) -> int:
        return len(self.entries)

    def match(self, text: str) -> KnowledgeEntry | None:
        """Whole-word, case-insensitive match; the longest term wins."""
        return self._index.longest(text)

    def is_signature(self, text: str) -> bool:
        return text.casefold() in self._signatures

    @classmethod
    def load(cls, path: str | os.PathLike | None = None) -> "KnowledgeDictionary":
        if path is None:
            return default_dictionary()
        return _load(str(path))

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "entries": [
                {"term": e.term, "synonyms": list(e.synonyms), "signature": e.signature} for e in self.entries
            ],
        }


def _load(path: str) -> KnowledgeDictionary:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise KnowledgeError(f"{path}: unsupported schema_version {obj.get('schema_version')!r}")
    try:
        entries = [KnowledgeEntry(r["term"], tuple(r.get("synonyms", ())), r["signature"]) for r in obj["entries"]]
    except (KeyError, TypeError) as exc:
        raise KnowledgeError(f"{path}: bad entry: {exc}") from exc
    return KnowledgeDictionary(entries)


@lru_cache(maxsize=1)
def default_dictionary() -> KnowledgeDictionary:
    return _load(str(data_path("knowledge.json")))


DEFAULT_KINDS = frozenset({SegmentKind.DIAGNOSIS})


def expand_knowledge(
    report: NormalizedReport,
    dictionary: KnowledgeDictionary | None = None,
    kinds: Iterable[SegmentKind] = DEFAULT_KINDS,
) -> NormalizedReport:
    """Insert signature segments; original segments are untouched and stay in order.

    A signature appears at most once per triplet, and segments that already
    are signatures are not scanned, which makes the operation idempotent.
    """
    dictionary = dictionary or default_dictionary()
    kinds = frozenset(kinds)
    out = []
    changed = False
    for trip in report.triplets:
        present = {s.text.casefold() for s in trip.segments}
        new = []
        for seg in trip.segments:
            new.append(seg)
            if seg.kind not in kinds or dictionary.is_signature(seg.text):
                continue
            entry = dictionary.match(seg.text)
            if entry is None or entry.signature.casefold() in present:
                continue
            new.append(Segment(entry.signature, SegmentKind.DESCRIPTION))
            present.add(entry.signature.casefold())
            changed = True
        out.append(trip.with_segments(new) if len(new) != len(trip.segments) else trip)
    return report.replace_triplets(out) if changed else report
