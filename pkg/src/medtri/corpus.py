"""Corpus ingestion, JSONL persistence, dedup, train/validation/test splits and length statistics."""

from __future__ import annotations

import json
import logging
import math
import os
import re
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from ._text import AtomicLineWriter, atomic_write_text, source_hash
from .errors import CorpusFormatError, TestCountExceedsCorpus
from .metrics.scores import tokenize
from .normalize.rule import RawReport

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
KNOWN_FIELDS = (
    "schema_version", "report_id", "raw_text", "normalized_text",
    "modality", "body_region", "source_hash",
)


@dataclass
class CorpusRecord:
    report_id: str
    raw_text: str | None = None
    normalized_text: str | None = None
    modality: str | None = None
    body_region: str | None = None
    source_hash: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.report_id, str) or not self.report_id:
            raise CorpusFormatError("report_id must be a non-empty string")
        for name in ("raw_text", "normalized_text", "modality", "body_region"):
            v = getattr(self, name)
            if v is not None and not isinstance(v, str):
                raise CorpusFormatError(f"{name} must be a string")
        if not (self.raw_text or self.normalized_text):
            raise CorpusFormatError(f"record {self.report_id!r} has neither raw_text nor normalized_text")
        if self.raw_text:
            expected = source_hash(self.raw_text)
            if self.source_hash and self.source_hash != expected:
                raise CorpusFormatError(f"record {self.report_id!r}: source_hash does not match raw_text")
            self.source_hash = expected
        elif not self.source_hash:
            self.source_hash = source_hash(self.normalized_text)
        clash = set(self.metadata) & set(KNOWN_FIELDS)
        if clash:
            raise CorpusFormatError(f"metadata keys shadow record fields: {sorted(clash)}")

    def to_json(self) -> dict:
        obj = {
            "schema_version": SCHEMA_VERSION,
            "report_id": self.report_id,
            "raw_text": self.raw_text,
            "normalized_text": self.normalized_text,
            "modality": self.modality,
            "body_region": self.body_region,
            "source_hash": self.source_hash,
        }
        obj.update(self.metadata)
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "CorpusRecord":
        if not isinstance(obj, dict):
            raise CorpusFormatError("record is not a JSON object")
        version = obj.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise CorpusFormatError(f"unsupported schema_version {version!r}")
        if "report_id" not in obj:
            raise CorpusFormatError("missing report_id")
        meta = {k: v for k, v in obj.items() if k not in KNOWN_FIELDS}
        return cls(
            report_id=obj["report_id"],
            raw_text=obj.get("raw_text"),
            normalized_text=obj.get("normalized_text"),
            modality=obj.get("modality"),
            body_region=obj.get("body_region"),
            source_hash=obj.get("source_hash") or "",
            metadata=meta,
        )

    def to_raw_report(self) -> RawReport:
        if not self.raw_text:
            raise CorpusFormatError(f"record {self.report_id!r} has no raw_text")
        return RawReport(self.report_id, self.raw_text, self.modality, self.body_region)


@dataclass(frozen=True)
class Reject:
    source: str
    lineno: int | None
    reason: str
    content: str

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **self.__dict__}


RejectSink = Callable[[Reject], None]


def _jsonl_records(fh, source: str, on_reject: RejectSink | None) -> Iterator[CorpusRecord]:
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield CorpusRecord.from_json(json.loads(line))
            except (ValueError, CorpusFormatError) as exc:
                # json.JSONDecodeError is a ValueError
                log.warning("%s:%d: rejected: %s", source, lineno, exc)
                if on_reject is not None:
                    on_reject(Reject(source, lineno, str(exc), line.rstrip("\n")))


def _dir_records(files: list[Path], on_reject: RejectSink | None) -> Iterator[CorpusRecord]:
    for path in files:
        text = path.read_text(encoding="utf-8")
        if not text.strip():
            if on_reject is not None:
                on_reject(Reject(str(path), None, "empty report file", ""))
            continue
        yield CorpusRecord(report_id=path.stem, raw_text=text)


def ingest(path: str | os.PathLike, fmt: str = "jsonl", on_reject: RejectSink | None = None) -> Iterator[CorpusRecord]:
    """Stream records from a JSONL file (``fmt="jsonl"``) or a directory of ``*.txt`` files (``"dir"``).

    The path is opened before this returns, so an unreadable path raises
    ``OSError`` immediately. Bad lines go to ``on_reject`` and are skipped.
    """
    path = Path(path)
    if fmt == "jsonl":
        fh = open(path, encoding="utf-8")
        return _jsonl_records(fh, str(path), on_reject)
    if fmt == "dir":
        if not path.is_dir():
            raise NotADirectoryError(str(path))
        return _dir_records(sorted(path.glob("*.txt")), on_reject)
    raise ValueError(f"unknown corpus format {fmt!r}")


def _dumps(obj) -> str:
    if hasattr(obj, "to_json"):
        obj = obj.to_json()
    return json.dumps(obj, ensure_ascii=False)


def write_jsonl(path: str | os.PathLike, rows: Iterable, header: dict | None = None) -> int:
    """Atomically write ``rows`` (dicts or objects with ``to_json``) as JSONL; returns row count."""
    with AtomicLineWriter(path) as out:
        if header is not None:
            out.write(_dumps(header))
        for row in rows:
            out.write(_dumps(row))
        return out.count - (header is not None)


def read_jsonl(path: str | os.PathLike) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


# -- dedup --------------------------------------------------------------------


@dataclass
class DedupStats:
    kept: int = 0
    duplicates: int = 0


def dedup(records: Iterable[CorpusRecord], stats: DedupStats | None = None) -> Iterator[CorpusRecord]:
    """Keep the first record per source hash."""
    stats = stats if stats is not None else DedupStats()
    seen: set[str] = set()
    for rec in records:
        if rec.source_hash in seen:
            stats.duplicates += 1
            continue
        seen.add(rec.source_hash)
        stats.kept += 1
        yield rec
    if stats.duplicates:
        log.info("dedup: kept %d, dropped %d duplicates", stats.kept, stats.duplicates)


# -- splits -------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    test_count: int = 500
    validation_fraction: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.test_count < 0:
            raise ValueError("test_count must be >= 0")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in [0, 1)")


@dataclass(frozen=True)
class SplitManifests:
    train: list[str]
    validation: list[str]
    test: list[str]
    spec: SplitSpec

    def write(self, outdir: str | os.PathLike) -> list[Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name in ("train", "validation", "test"):
            ids = getattr(self, name)
            payload = {
                "schema_version": SCHEMA_VERSION,
                "split": name,
                "rng_seed": self.spec.rng_seed,
                "test_count": self.spec.test_count,
                "validation_fraction": self.spec.validation_fraction,
                "count": len(ids),
                "ids": ids,
            }
            p = outdir / f"{name}.json"
            atomic_write_text(p, json.dumps(payload, indent=1) + "\n")
            paths.append(p)
        return paths


def split(corpus: Iterable, spec: SplitSpec) -> SplitManifests:
    """Seeded uniform test sample of ``test_count`` ids, the rest split by ``validation_fraction``.

    ``corpus`` may hold records or bare ids. Each manifest keeps corpus order.
    """
    ids = [c.report_id if isinstance(c, CorpusRecord) else str(c) for c in corpus]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate report ids in corpus")
    n = len(ids)
    if spec.test_count > n:
        raise TestCountExceedsCorpus(f"test_count={spec.test_count} exceeds corpus size {n}")
    rng = np.random.default_rng(spec.rng_seed)
    test_idx = rng.choice(n, size=spec.test_count, replace=False) if spec.test_count else np.array([], int)
    in_test = np.zeros(n, bool)
    in_test[test_idx] = True
    rest = np.flatnonzero(~in_test)
    n_val = int(math.floor(spec.validation_fraction * len(rest)))
    in_val = np.zeros(n, bool)
    if n_val:
        in_val[rng.permutation(rest)[:n_val]] = True
    return SplitManifests(
        train=[ids[i] for i in range(n) if not in_test[i] and not in_val[i]],
        validation=[ids[i] for i in range(n) if in_val[i]],
        test=[ids[i] for i in range(n) if in_test[i]],
        spec=spec,
    )


# -- length statistics and truncation -------------------------------------------

_CHUNK = re.compile(r"\S+")
_PUNCT = string.punctuation


def record_text(rec: CorpusRecord, text_field: str = "auto") -> str:
    if text_field == "raw":
        return rec.raw_text or ""
    if text_field == "normalized":
        return rec.normalized_text or ""
    return rec.raw_text or rec.normalized_text or ""


def truncate_text(text: str, max_tokens: int) -> str:
    """Cut ``text`` right after its ``max_tokens``-th token; tokens are never split."""
    count = 0
    for m in _CHUNK.finditer(text):
        if m.group().lower().strip(_PUNCT):
            count += 1
            if count == max_tokens:
                return text[: m.end()]
    return text


@dataclass
class LengthStats:
    count: int
    mean: float
    median: float
    p95: float
    max_tokens: int
    n_truncated: int
    truncation_rate: float
    histogram: list[tuple[int, int | None, int]]

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "count": self.count,
            "mean": self.mean,
            "median": self.median,
            "p95": self.p95,
            "max_tokens": self.max_tokens,
            "n_truncated": self.n_truncated,
            "truncation_rate": self.truncation_rate,
            "histogram": [{"lo": lo, "hi": hi, "count": c} for lo, hi, c in self.histogram],
        }


def length_stats(
    corpus: Iterable[CorpusRecord], max_tokens: int = 512, text_field: str = "auto", bin_width: int = 64
) -> LengthStats:
    """Token-count summary; ``truncation_rate`` is the fraction of records over ``max_tokens``."""
    lengths = np.array([len(tokenize(record_text(r, text_field))) for r in corpus], dtype=np.int64)
    n = len(lengths)
    edges = list(range(0, max_tokens + 1, bin_width))
    if edges[-1] != max_tokens:
        edges.append(max_tokens)
    hist = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        hist.append((lo, hi, int(((lengths >= lo) & (lengths < hi)).sum())))
    hist[-1] = (hist[-1][0], hist[-1][1], int(((lengths >= hist[-1][0]) & (lengths <= max_tokens)).sum()))
    over = int((lengths > max_tokens).sum())
    hist.append((max_tokens + 1, None, over))
    if n == 0:
        return LengthStats(0, 0.0, 0.0, 0.0, max_tokens, 0, 0.0, hist)
    return LengthStats(
        count=n,
        mean=float(lengths.mean()),
        median=float(np.median(lengths)),
        p95=float(np.percentile(lengths, 95)),
        max_tokens=max_tokens,
        n_truncated=over,
        truncation_rate=over / n,
        histogram=hist,
    )


def truncate_records(
    corpus: Iterable[CorpusRecord], max_tokens: int = 512, text_field: str = "auto"
) -> Iterator[CorpusRecord]:
    """Copies of the records with the measured text cut to ``max_tokens`` tokens.

    Truncating raw text changes its hash; the original goes to
    ``metadata["parent_source_hash"]``.
    """
    for rec in corpus:
        use_raw = text_field == "raw" or (text_field == "auto" and bool(rec.raw_text))
        if use_raw:
            cut = truncate_text(rec.raw_text or "", max_tokens)
            if cut == rec.raw_text:
                yield rec
                continue
            meta = dict(rec.metadata, parent_source_hash=rec.source_hash)
            yield CorpusRecord(rec.report_id, cut, rec.normalized_text, rec.modality, rec.body_region, "", meta)
        else:
            cut = truncate_text(rec.normalized_text or "", max_tokens)
            if cut == rec.normalized_text:
                yield rec
                continue
            yield CorpusRecord(
                rec.report_id, rec.raw_text, cut, rec.modality, rec.body_region, rec.source_hash, dict(rec.metadata)
            )
