"""Build (raw report, normalized text) training pairs by running a backend over a corpus."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .._text import atomic_write_text
from ..schema import NormalizedReport
from .rule import RawReport

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

Backend = Callable[[RawReport], NormalizedReport]


def utc_now() -> str:
    """ISO-8601 UTC timestamp; honours ``SOURCE_DATE_EPOCH`` for reproducible output."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    ts = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return ts.replace(microsecond=0).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class DistillationPair:
    raw: RawReport
    normalized_text: str
    backend: str
    created_at: str

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "report_id": self.raw.report_id,
            "source_hash": self.raw.source_hash,
            "raw_text": self.raw.text,
            "normalized_text": self.normalized_text,
            "backend": self.backend,
            "created_at": self.created_at,
            "modality": self.raw.modality.value if self.raw.modality else None,
            "body_region": self.raw.body_region,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DistillationPair":
        raw = RawReport(obj["report_id"], obj["raw_text"], obj.get("modality"), obj.get("body_region"))
        return cls(raw, obj["normalized_text"], obj["backend"], obj["created_at"])


@dataclass(frozen=True)
class Rejected:
    report_id: str
    source_hash: str
    error: str
    message: str

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **self.__dict__}


@dataclass
class DistillSummary:
    total: int = 0
    succeeded: int = 0
    rejected: int = 0
    skipped: int = 0
    rejects: list[Rejected] = field(default_factory=list)

    def line(self) -> str:
        return (
            f"total={self.total} succeeded={self.succeeded} "
            f"rejected={self.rejected} skipped={self.skipped}"
        )


class Checkpoint:
    """Set of source hashes already normalized, persisted atomically as JSON."""

    def __init__(self, path: str | os.PathLike, flush_every: int = 50):
        self.path = Path(path)
        self.flush_every = flush_every
        self._done: set[str] = set()
        self._dirty = 0
        if self.path.exists():
            obj = json.loads(self.path.read_text(encoding="utf-8"))
            self._done.update(obj.get("done", []))

    def __contains__(self, h: str) -> bool:
        return h in self._done

    def __len__(self) -> int:
        return len(self._done)

    def add(self, h: str) -> None:
        self._done.add(h)
        self._dirty += 1
        if self._dirty >= self.flush_every:
            self.flush()

    def update(self, hashes: Iterable[str]) -> None:
        for h in hashes:
            self._done.add(h)
        self.flush()

    def flush(self) -> None:
        payload = {"schema_version": SCHEMA_VERSION, "done": sorted(self._done)}
        atomic_write_text(self.path, json.dumps(payload))
        self._dirty = 0


def _run_one(backend: Backend, raw: RawReport):
    try:
        return backend(raw), None
    except Exception as exc:  # every per-report failure becomes a reject
        return None, exc


def build_distillation_set(
    reports: Iterable[RawReport],
    backend: Backend,
    *,
    checkpoint: Checkpoint | None = None,
    on_reject: Callable[[Rejected], None] | None = None,
    workers: int = 1,
    clock: Callable[[], str] = utc_now,
    summary: DistillSummary | None = None,
) -> Iterator[DistillationPair]:
    """Yield a :class:`DistillationPair` per successfully normalized report.

    Reports whose source hash is in ``checkpoint`` are skipped without calling
    the backend. Failures are recorded in ``summary`` and sent to
    ``on_reject``; they never stop the stream. With ``workers > 1`` pairs come
    out in completion order.
    """
    summary = summary if summary is not None else DistillSummary()
    name = getattr(backend, "name", type(backend).__name__)

    def settle(raw: RawReport, result, exc):
        if exc is not None:
            rej = Rejected(raw.report_id, raw.source_hash, type(exc).__name__, str(exc))
            summary.rejected += 1
            summary.rejects.append(rej)
            log.warning("reject %s: %s: %s", raw.report_id, rej.error, rej.message)
            if on_reject is not None:
                on_reject(rej)
            return None
        summary.succeeded += 1
        return DistillationPair(raw, result.to_text(), getattr(result, "backend", name) or name, clock())

    def mark(raw: RawReport):
        # only after the consumer has taken the pair, so a crash never
        # checkpoints a report whose output was not written
        if checkpoint is not None:
            checkpoint.add(raw.source_hash)

    def todo() -> Iterator[RawReport]:
        for raw in reports:
            summary.total += 1
            if checkpoint is not None and raw.source_hash in checkpoint:
                summary.skipped += 1
                continue
            yield raw

    try:
        if workers <= 1:
            for raw in todo():
                pair = settle(raw, *_run_one(backend, raw))
                if pair is not None:
                    yield pair
                    mark(raw)
            return
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pending: dict = {}
            window = 2 * workers
            source = todo()
            exhausted = False
            while True:
                while not exhausted and len(pending) < window:
                    raw = next(source, None)
                    if raw is None:
                        exhausted = True
                        break
                    pending[pool.submit(_run_one, backend, raw)] = raw
                if not pending:
                    break
                done, _ = wait(pending, return_when=FIRST_COMPLETED)
                for fut in done:
                    raw = pending.pop(fut)
                    pair = settle(raw, *fut.result())
                    if pair is not None:
                        yield pair
                        mark(raw)
    finally:
        if checkpoint is not None:
            checkpoint.flush()
        log.info("distillation: %s", summary.line())
