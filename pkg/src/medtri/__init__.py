"""Anatomy-anchored triplet normalization, augmentation and evaluation for radiology reports."""

__version__ = "0.1.0"

from .errors import MedTriError
from .ontology import AnatomyNode, Ontology, default_ontology, load_ontology
from .schema import (
    NormalizedReport,
    Segment,
    SegmentKind,
    Triplet,
    parse_report,
    parse_triplet_line,
    serialize_report,
    serialize_triplet,
)

__all__ = [
    "AnatomyNode",
    "MedTriError",
    "NormalizedReport",
    "Ontology",
    "Segment",
    "SegmentKind",
    "Triplet",
    "__version__",
    "default_ontology",
    "load_ontology",
    "parse_report",
    "parse_triplet_line",
    "serialize_report",
    "serialize_triplet",
]
