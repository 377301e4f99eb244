"""Corpus evaluation: per-pair scores plus mean and population std per field."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..errors import EmptyCorpus
from .embedding import EmbeddingProvider, embed_greedy_f
from .scores import bleu_from_stats, corpus_bleu, encode_pairs, rouge_from_stats, tokenize
from .kernels import ngram_stats

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FIELDS = (
    "bleu",
    "rouge1_precision", "rouge1_recall", "rouge1_f1",
    "rouge2_precision", "rouge2_recall", "rouge2_f1",
)


@dataclass
class PairScores:
    pair_id: str
    bleu: float
    rouge1_precision: float
    rouge1_recall: float
    rouge1_f1: float
    rouge2_precision: float
    rouge2_recall: float
    rouge2_f1: float
    embed_f: float | None = None


@dataclass
class Aggregate:
    mean: float
    std: float


@dataclass
class MetricReport:
    bleu: float
    rouge1: dict
    rouge2: dict
    embed_f: float | None
    per_pair: list[PairScores]
    aggregate: dict[str, Aggregate]
    options: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "options": self.options,
            "bleu": self.bleu,
            "rouge1": self.rouge1,
            "rouge2": self.rouge2,
            "embed_f": self.embed_f,
            "aggregate": {k: asdict(v) for k, v in self.aggregate.items()},
            "per_pair": [asdict(p) for p in self.per_pair],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def table(self) -> str:
        rows = [f"{'metric':<18} {'mean':>8} {'std':>8}"]
        for name, agg in self.aggregate.items():
            rows.append(f"{name:<18} {agg.mean:>8.4f} {agg.std:>8.4f}")
        if self.options.get("corpus_bleu"):
            rows.append(f"{'bleu (corpus)':<18} {self.bleu:>8.4f}")
        rows.append(f"pairs: {len(self.per_pair)}")
        return "\n".join(rows)


def _aggregate(values: Sequence[float]) -> Aggregate:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return Aggregate(mean, math.sqrt(var))


def evaluate_corpus(
    pairs: Iterable[tuple[str, str]],
    *,
    ids: Sequence[str] | None = None,
    provider: EmbeddingProvider | None = None,
    max_n: int = 4,
    corpus_level_bleu: bool = False,
    backend: str = "auto",
) -> MetricReport:
    """Score (candidate, reference) text pairs.

    A pair with an empty candidate or reference scores BLEU 0 instead of
    raising, so one blank model output cannot sink a whole evaluation.
    """
    texts = list(pairs)
    if not texts:
        raise EmptyCorpus("no (candidate, reference) pairs to evaluate")
    if ids is None:
        ids = [str(i) for i in range(len(texts))]
    elif len(ids) != len(texts):
        raise ValueError("ids and pairs differ in length")

    toks = [(tokenize(c), tokenize(r)) for c, r in texts]
    encoded = encode_pairs(toks)
    stats = ngram_stats(encoded, max(max_n, 2), backend)

    cl, rl = encoded.cand_lengths, encoded.ref_lengths
    ok = (cl > 0) & (rl > 0)
    bleu = np.zeros(len(texts))
    if ok.any():
        sub = type(stats)(stats.overlap[ok], stats.cand_total[ok], stats.ref_total[ok])
        bleu[ok] = bleu_from_stats(sub, cl[ok], rl[ok], max_n)
    if not ok.all():
        log.warning("%d pair(s) with an empty side scored BLEU 0", int((~ok).sum()))
    r1 = rouge_from_stats(stats, 1)
    r2 = rouge_from_stats(stats, 2)

    per_pair = []
    for i, pid in enumerate(ids):
        ef = embed_greedy_f(toks[i][0], toks[i][1], provider) if provider is not None else None
        per_pair.append(
            PairScores(
                pid, float(bleu[i]),
                float(r1[0][i]), float(r1[1][i]), float(r1[2][i]),
                float(r2[0][i]), float(r2[1][i]), float(r2[2][i]),
                ef,
            )
        )

    aggregate = {name: _aggregate([getattr(p, name) for p in per_pair]) for name in FIELDS}
    if provider is not None:
        aggregate["embed_f"] = _aggregate([p.embed_f for p in per_pair])

    headline_bleu = aggregate["bleu"].mean
    if corpus_level_bleu:
        headline_bleu = corpus_bleu(encoded, max_n, backend) if ok.all() else 0.0
    return MetricReport(
        bleu=headline_bleu,
        rouge1={k: aggregate[f"rouge1_{k}"].mean for k in ("precision", "recall", "f1")},
        rouge2={k: aggregate[f"rouge2_{k}"].mean for k in ("precision", "recall", "f1")},
        embed_f=aggregate["embed_f"].mean if provider is not None else None,
        per_pair=per_pair,
        aggregate=aggregate,
        options={"max_n": max_n, "corpus_bleu": corpus_level_bleu, "embedding": provider is not None},
    )
