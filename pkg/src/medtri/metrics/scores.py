"""Tokenizer, sentence-level BLEU and ROUGE-N built on the n-gram kernels."""

from __future__ import annotations

import string
from typing import NamedTuple, Sequence

import numpy as np

from ..errors import EmptyCandidate, EmptyReference
from .kernels import EncodedPairs, NgramStats, ngram_stats

_PUNCT = string.punctuation


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip surrounding ASCII punctuation.

    Internal punctuation is kept, so ``"3.5"`` and ``"ground-glass"`` stay whole.
    """
    out = []
    for chunk in text.lower().split():
        tok = chunk.strip(_PUNCT)
        if tok:
            out.append(tok)
    return out


class RougeScore(NamedTuple):
    precision: float
    recall: float
    f1: float


def encode_pairs(pairs: Sequence[tuple[Sequence[str], Sequence[str]]]) -> EncodedPairs:
    """Map token strings to integer ids (one shared vocabulary) and pack as CSR."""
    vocab: dict[str, int] = {}
    get = vocab.setdefault
    cands = [[get(t, len(vocab)) for t in c] for c, _ in pairs]
    refs = [[get(t, len(vocab)) for t in r] for _, r in pairs]
    return EncodedPairs.from_sequences(cands, refs)


def bleu_from_stats(stats: NgramStats, cand_len: np.ndarray, ref_len: np.ndarray, max_n: int) -> np.ndarray:
    """Smoothed sentence BLEU for every pair.

    Orders longer than the candidate are skipped and the uniform weights
    renormalized over the remaining ones; an order with zero matches gets
    add-one smoothing, ``1 / (total + 1)``.
    """
    cand_len = np.asarray(cand_len, dtype=np.int64)
    ref_len = np.asarray(ref_len, dtype=np.int64)
    if np.any(cand_len == 0):
        raise EmptyCandidate(f"empty candidate at pair {int(np.argmax(cand_len == 0))}")
    if np.any(ref_len == 0):
        raise EmptyReference(f"empty reference at pair {int(np.argmax(ref_len == 0))}")
    m = stats.overlap[:, :max_n].astype(np.float64)
    t = stats.cand_total[:, :max_n].astype(np.float64)
    used = t > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(m > 0, m / np.where(used, t, 1.0), 1.0 / (t + 1.0))
        logp = np.where(used, np.log(p), 0.0)
    k = used.sum(axis=1)
    geo = np.exp(logp.sum(axis=1) / k)
    bp = np.exp(np.minimum(0.0, 1.0 - ref_len / cand_len))
    return bp * geo


def rouge_from_stats(stats: NgramStats, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = stats.overlap[:, n - 1].astype(np.float64)
    ct = stats.cand_total[:, n - 1].astype(np.float64)
    rt = stats.ref_total[:, n - 1].astype(np.float64)
    ok = (ct > 0) & (rt > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        prec = np.where(ok, m / np.where(ok, ct, 1.0), 0.0)
        rec = np.where(ok, m / np.where(ok, rt, 1.0), 0.0)
        denom = prec + rec
        f1 = np.where(denom > 0, 2.0 * prec * rec / np.where(denom > 0, denom, 1.0), 0.0)
    return prec, rec, f1


def bleu_scores(pairs: EncodedPairs, max_n: int = 4, backend: str = "auto") -> np.ndarray:
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    stats = ngram_stats(pairs, max_n, backend)
    return bleu_from_stats(stats, pairs.cand_lengths, pairs.ref_lengths, max_n)


def rouge_scores(pairs: EncodedPairs, n: int, backend: str = "auto"):
    """(precision, recall, f1) arrays of ROUGE-``n`` for every pair."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return rouge_from_stats(ngram_stats(pairs, n, backend), n)


def bleu(candidate: Sequence[str], reference: Sequence[str], max_n: int = 4) -> float:
    if not candidate:
        raise EmptyCandidate("candidate has no tokens")
    if not reference:
        raise EmptyReference("reference has no tokens")
    return float(bleu_scores(encode_pairs([(candidate, reference)]), max_n)[0])


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    p, r, f = rouge_scores(encode_pairs([(candidate, reference)]), n)
    return RougeScore(float(p[0]), float(r[0]), float(f[0]))


def corpus_bleu(pairs: EncodedPairs, max_n: int = 4, backend: str = "auto") -> float:
    """Corpus-level BLEU: n-gram counts and lengths summed over all pairs first."""
    if len(pairs) == 0:
        raise ValueError("no pairs")
    stats = ngram_stats(pairs, max_n, backend)
    summed = NgramStats(
        stats.overlap.sum(axis=0, keepdims=True),
        stats.cand_total.sum(axis=0, keepdims=True),
        stats.ref_total.sum(axis=0, keepdims=True),
    )
    return float(
        bleu_from_stats(summed, [pairs.cand_lengths.sum()], [pairs.ref_lengths.sum()], max_n)[0]
    )
