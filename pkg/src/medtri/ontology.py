"""Anatomical hierarchy: entity resolution, level comparison and reading order.

Ontology file format (JSON)::

    {
      "schema_version": 1,
      "nodes": [
        {"canonical": "Lung", "synonyms": ["lungs"], "level": 1,
         "parent": "Chest", "order_index": 10},
        ...
      ]
    }

Levels: 0 = body region, 1 = organ, 2 = sub-structure.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator

from ._text import PhraseIndex, atomic_write_text, collapse_ws, data_path
from .errors import (
    CycleDetected,
    DanglingParent,
    DuplicateName,
    DuplicateOrderIndex,
    LevelGap,
    OntologyError,
)

SCHEMA_VERSION = 1
MAX_LEVEL = 2


@dataclass(frozen=True)
class AnatomyNode:
    canonical: str
    synonyms: tuple[str, ...] = ()
    level: int = 0
    parent: str | None = None
    order_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "synonyms", tuple(self.synonyms))

    @property
    def surfaces(self) -> tuple[str, ...]:
        return (self.canonical, *self.synonyms)

    def to_json(self) -> dict:
        return {
            "canonical": self.canonical,
            "synonyms": list(self.synonyms),
            "level": self.level,
            "parent": self.parent,
            "order_index": self.order_index,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AnatomyNode":
        try:
            return cls(
                canonical=obj["canonical"],
                synonyms=tuple(obj.get("synonyms", ())),
                level=obj["level"],
                parent=obj.get("parent"),
                order_index=obj["order_index"],
            )
        except (KeyError, TypeError) as exc:
            raise OntologyError(f"bad ontology record {obj!r}: {exc}") from exc


def _fold(surface: str) -> str:
    return collapse_ws(surface).casefold()


def same_level(a: AnatomyNode, b: AnatomyNode) -> bool:
    return a.level == b.level


def compare_order(a: AnatomyNode, b: AnatomyNode) -> int:
    """-1, 0 or 1 according to reading order."""
    return (a.order_index > b.order_index) - (a.order_index < b.order_index)


@dataclass(frozen=True, eq=False)
class Ontology:
    """A validated, immutable anatomy ontology. Build with :func:`validate_ontology`."""

    nodes: tuple[AnatomyNode, ...]
    _by_surface: dict = field(repr=False)
    _mentions: PhraseIndex = field(repr=False)

    def __iter__(self) -> Iterator[AnatomyNode]:
        return iter(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def resolve(self, surface: str) -> AnatomyNode | None:
        """Case- and whitespace-insensitive exact lookup of a canonical name or synonym."""
        return self._by_surface.get(_fold(surface))

    def find_mention(self, text: str) -> AnatomyNode | None:
        """Node mentioned earliest in ``text`` (whole words); longest surface wins ties."""
        return self._mentions.first(text)

    def same_level(self, a: AnatomyNode, b: AnatomyNode) -> bool:
        return same_level(a, b)

    def compare_order(self, a: AnatomyNode, b: AnatomyNode) -> int:
        return compare_order(a, b)

    def parent_of(self, node: AnatomyNode) -> AnatomyNode | None:
        return None if node.parent is None else self.resolve(node.parent)

    @property
    def levels(self) -> list[int]:
        return sorted({n.level for n in self.nodes})

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "nodes": [n.to_json() for n in self.nodes]}


def validate_ontology(nodes: Iterable[AnatomyNode]) -> Ontology:
    nodes = list(nodes)
    by_surface: dict[str, AnatomyNode] = {}
    by_order: dict[int, AnatomyNode] = {}
    for node in nodes:
        if not isinstance(node.level, int) or isinstance(node.level, bool) or node.level < 0:
            raise OntologyError(f"{node.canonical!r}: level must be a non-negative integer")
        if node.level > MAX_LEVEL:
            raise OntologyError(f"{node.canonical!r}: level {node.level} exceeds {MAX_LEVEL}")
        if ":" in node.canonical or collapse_ws(node.canonical) != node.canonical or not node.canonical:
            raise OntologyError(f"invalid canonical name {node.canonical!r}")
        for surface in node.surfaces:
            key = _fold(surface)
            if not key:
                raise OntologyError(f"{node.canonical!r}: empty synonym")
            other = by_surface.get(key)
            if other is not None:
                raise DuplicateName(
                    f"name {surface!r} used by both {other.canonical!r} and {node.canonical!r}"
                )
            by_surface[key] = node
        other = by_order.get(node.order_index)
        if other is not None:
            raise DuplicateOrderIndex(
                f"order_index {node.order_index} shared by {other.canonical!r} and {node.canonical!r}"
            )
        by_order[node.order_index] = node

    canon = {_fold(n.canonical): n for n in nodes}

    # Cycles first: a self-parent would otherwise surface as a level mismatch.
    for node in nodes:
        seen = {_fold(node.canonical)}
        cur = node
        while cur.parent is not None:
            key = _fold(cur.parent)
            if key in seen:
                raise CycleDetected(f"parent chain of {node.canonical!r} loops at {cur.parent!r}")
            seen.add(key)
            cur = canon.get(key)
            if cur is None:
                break

    for node in nodes:
        if node.parent is None:
            if node.level > 0:
                raise DanglingParent(f"{node.canonical!r} has level {node.level} but no parent")
            continue
        parent = canon.get(_fold(node.parent))
        if parent is None:
            raise DanglingParent(f"{node.canonical!r} references unknown parent {node.parent!r}")
        if parent.level != node.level - 1:
            raise LevelGap(
                f"{node.canonical!r} (level {node.level}) has parent {parent.canonical!r} "
                f"at level {parent.level}"
            )

    mentions = PhraseIndex()
    for node in nodes:
        for surface in node.surfaces:
            other = mentions.get(surface)
            if other is not None and other is not node:
                raise DuplicateName(
                    f"{surface!r} ({node.canonical!r}) is word-equivalent to a name of {other.canonical!r}"
                )
            mentions.add(surface, node)

    ordered = tuple(sorted(nodes, key=lambda n: n.order_index))
    return Ontology(nodes=ordered, _by_surface=by_surface, _mentions=mentions)


def load_ontology(path: str | os.PathLike | None = None) -> Ontology:
    """Load and validate an ontology file; ``None`` loads the shipped default."""
    if path is None:
        return default_ontology()
    return _load(str(path))


def _load(path: str) -> Ontology:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise OntologyError(f"{path}: unsupported schema_version {version!r}")
    return validate_ontology(AnatomyNode.from_json(rec) for rec in obj["nodes"])


@lru_cache(maxsize=1)
def default_ontology() -> Ontology:
    return _load(str(data_path("ontology.json")))


def save_ontology(ontology: Ontology, path: str | os.PathLike) -> None:
    lines = ",\n".join("    " + json.dumps(n.to_json()) for n in ontology.nodes)
    atomic_write_text(path, f'{{\n  "schema_version": {SCHEMA_VERSION},\n  "nodes": [\n{lines}\n  ]\n}}\n')
