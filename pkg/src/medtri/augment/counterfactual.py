"""Anatomy-grounded counterfactual hard negatives.

For each report, ``n_perturb`` entities are drawn and their findings replaced
wholesale with the findings of a triplet from a *different* report whose
entity sits at the same hierarchy level and whose findings differ textually.
Entity names, triplet order and line format are kept, so only the local
anatomy-finding alignment is broken.

Randomness is per report: the generator for a report is seeded from
``(rng_seed, report_id)``, so results do not depend on processing order.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from ..errors import InsufficientEligibleEntities, NoDonorAtLevel
from ..ontology import Ontology, default_ontology
from ..schema import NormalizedReport, Triplet, serialize_report

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REJECTION_TRIES = 32


@dataclass(frozen=True)
class CounterfactualConfig:
    n_perturb: int = 2
    rng_seed: int = 0
    require_ontology_resolution: bool = True

    def __post_init__(self):
        if self.n_perturb < 1:
            raise ValueError("n_perturb must be >= 1")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class HardNegativeRecord:
    image_ref: str
    report_id: str
    original_text: str
    counterfactual_text: str
    perturbed_entities: tuple[str, ...]
    donor_report_ids: tuple[str, ...]
    donor_entities: tuple[str, ...]
    rng_seed: int
    label: str = "negative"

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "image_ref": self.image_ref,
            "report_id": self.report_id,
            "original_text": self.original_text,
            "counterfactual_text": self.counterfactual_text,
            "perturbed_entities": list(self.perturbed_entities),
            "donor_report_ids": list(self.donor_report_ids),
            "donor_entities": list(self.donor_entities),
            "rng_seed": self.rng_seed,
            "label": self.label,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "HardNegativeRecord":
        return cls(
            obj["image_ref"], obj["report_id"], obj["original_text"], obj["counterfactual_text"],
            tuple(obj["perturbed_entities"]), tuple(obj["donor_report_ids"]),
            tuple(obj["donor_entities"]), obj["rng_seed"], obj.get("label", "negative"),
        )


def report_rng(seed: int, report_id: str) -> np.random.Generator:
    """Independent PCG64 stream for one report, derived from the run seed and the id."""
    digest = hashlib.sha256(report_id.encode("utf-8")).digest()
    spawn_key = tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=spawn_key)))


@dataclass(frozen=True)
class DonorTriplet:
    report_id: str
    triplet: Triplet
    level: int | None


def _level(ontology: Ontology, entity: str) -> int | None:
    node = ontology.resolve(entity)
    return None if node is None else node.level


class DonorPool:
    """Triplets available as replacement findings, bucketed by hierarchy level.

    Unresolved entities land in the ``None`` bucket, which is only consulted
    when ontology resolution is not required.
    """

    def __init__(self, reports: Iterable[NormalizedReport], ontology: Ontology | None = None):
        self.ontology = ontology or default_ontology()
        self.by_level: dict[int | None, list[DonorTriplet]] = {}
        for rep in reports:
            for trip in rep.triplets:
                lvl = _level(self.ontology, trip.entity)
                self.by_level.setdefault(lvl, []).append(DonorTriplet(rep.report_id, trip, lvl))

    def __len__(self) -> int:
        return sum(len(v) for v in self.by_level.values())

    @staticmethod
    def _ok(d: DonorTriplet, report_id: str, texts: tuple[str, ...]) -> bool:
        return d.report_id != report_id and d.triplet.texts != texts

    def eligible(self, level: int | None, report_id: str, texts: tuple[str, ...]) -> list[DonorTriplet]:
        return [d for d in self.by_level.get(level, ()) if self._ok(d, report_id, texts)]

    def draw(self, level: int | None, report_id: str, target: Triplet, rng: np.random.Generator) -> DonorTriplet:
        """Uniform draw among eligible donors (rejection sampling, then an exact fallback)."""
        bucket = self.by_level.get(level, [])
        texts = target.texts
        if bucket:
            for _ in range(REJECTION_TRIES):
                d = bucket[int(rng.integers(len(bucket)))]
                if self._ok(d, report_id, texts):
                    return d
        pool = self.eligible(level, report_id, texts)
        if not pool:
            raise NoDonorAtLevel(level, target.entity)
        return pool[int(rng.integers(len(pool)))]


def eligible_indices(report: NormalizedReport, cfg: CounterfactualConfig, ontology: Ontology) -> list[int]:
    if not cfg.require_ontology_resolution:
        return list(range(len(report.triplets)))
    return [i for i, t in enumerate(report.triplets) if ontology.resolve(t.entity) is not None]


def generate_counterfactual(
    report: NormalizedReport,
    cfg: CounterfactualConfig,
    ontology: Ontology | None,
    donor_pool: DonorPool,
    image_ref: str | None = None,
) -> HardNegativeRecord:
    ontology = ontology or default_ontology()
    eligible = eligible_indices(report, cfg, ontology)
    if len(eligible) < cfg.n_perturb:
        raise InsufficientEligibleEntities(
            f"report {report.report_id!r}: {len(eligible)} eligible entities, n_perturb={cfg.n_perturb}"
        )
    rng = report_rng(cfg.rng_seed, report.report_id)
    picks = sorted(int(i) for i in rng.choice(len(eligible), size=cfg.n_perturb, replace=False))
    targets = [eligible[i] for i in picks]

    triplets = list(report.triplets)
    donors = []
    for idx in targets:
        target = triplets[idx]
        donor = donor_pool.draw(_level(ontology, target.entity), report.report_id, target, rng)
        triplets[idx] = target.with_segments(donor.triplet.segments)
        donors.append(donor)

    return HardNegativeRecord(
        image_ref=image_ref if image_ref is not None else report.report_id,
        report_id=report.report_id,
        original_text=serialize_report(report.triplets),
        counterfactual_text=serialize_report(triplets),
        perturbed_entities=tuple(report.triplets[i].entity for i in targets),
        donor_report_ids=tuple(d.report_id for d in donors),
        donor_entities=tuple(d.triplet.entity for d in donors),
        rng_seed=cfg.rng_seed,
    )


@dataclass
class EmitSummary:
    total: int = 0
    emitted: int = 0
    skipped: list[tuple[str, str, str]] = field(default_factory=list)

    def line(self) -> str:
        return f"total={self.total} emitted={self.emitted} skipped={len(self.skipped)}"


def emit_hard_negative_set(
    corpus: Iterable[tuple[str, NormalizedReport]],
    cfg: CounterfactualConfig,
    ontology: Ontology | None = None,
    donor_pool: DonorPool | None = None,
    summary: EmitSummary | None = None,
) -> Iterator[HardNegativeRecord]:
    """One record per report that admits a counterfactual; others are skipped and logged.

    The donor pool defaults to the corpus itself, so the corpus is read fully
    before the first record is produced.
    """
    ontology = ontology or default_ontology()
    items: Sequence[tuple[str, NormalizedReport]] = list(corpus)
    if donor_pool is None:
        donor_pool = DonorPool((rep for _, rep in items), ontology)
    summary = summary if summary is not None else EmitSummary()
    for image_ref, rep in items:
        summary.total += 1
        try:
            rec = generate_counterfactual(rep, cfg, ontology, donor_pool, image_ref)
        except (InsufficientEligibleEntities, NoDonorAtLevel) as exc:
            summary.skipped.append((rep.report_id, type(exc).__name__, str(exc)))
            log.info("skip %s: %s", rep.report_id, exc)
            continue
        summary.emitted += 1
        yield rec
    log.info("counterfactuals: %s", summary.line())
