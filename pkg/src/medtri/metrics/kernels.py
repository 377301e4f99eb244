"""Clipped n-gram counting kernels over integer-encoded token sequences.

Pairs are stored CSR-style: ``cand_tokens[cand_offsets[p]:cand_offsets[p + 1]]``
is the candidate of pair ``p``, likewise for references. For every pair and
every order ``n = 1..max_n`` the kernels return

* ``overlap[p, n-1]``   sum over distinct n-grams g of min(count_cand(g), count_ref(g))
* ``cand_total[p, n-1]`` number of candidate n-grams, ``max(len - n + 1, 0)``
* ``ref_total[p, n-1]``  same for the reference

Two implementations exist: a per-pair numba loop and a batch-vectorized numpy
routine. :func:`ngram_stats` picks one according to ``_accel.USE_NUMBA``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from ._accel import optional_njit

# Pair sizes (len(cand) + len(ref)) up to this use the allocation-free
# quadratic scan in the numba kernel; longer pairs go through sorting.
QUADRATIC_LIMIT = 48

NUMPY_CHUNK_TOKENS = 1 << 23


@dataclass(frozen=True)
class EncodedPairs:
    cand_tokens: np.ndarray
    cand_offsets: np.ndarray
    ref_tokens: np.ndarray
    ref_offsets: np.ndarray

    def __post_init__(self):
        for name in ("cand_tokens", "cand_offsets", "ref_tokens", "ref_offsets"):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.int64))
        if len(self.cand_offsets) != len(self.ref_offsets) or len(self.cand_offsets) == 0:
            raise ValueError("offset arrays must be non-empty and of equal length")

    def __len__(self) -> int:
        return len(self.cand_offsets) - 1

    @property
    def cand_lengths(self) -> np.ndarray:
        return np.diff(self.cand_offsets)

    @property
    def ref_lengths(self) -> np.ndarray:
        return np.diff(self.ref_offsets)

    @classmethod
    def from_sequences(cls, cands, refs) -> "EncodedPairs":
        """Build from two equal-length lists of integer sequences."""
        if len(cands) != len(refs):
            raise ValueError("candidate and reference lists differ in length")

        def pack(seqs):
            lens = np.fromiter((len(s) for s in seqs), dtype=np.int64, count=len(seqs))
            offsets = np.zeros(len(seqs) + 1, dtype=np.int64)
            np.cumsum(lens, out=offsets[1:])
            flat = np.fromiter((t for s in seqs for t in s), dtype=np.int64, count=int(offsets[-1]))
            return flat, offsets

        ct, co = pack(cands)
        rt, ro = pack(refs)
        return cls(ct, co, rt, ro)

    def slice(self, start: int, stop: int) -> "EncodedPairs":
        co = self.cand_offsets[start : stop + 1]
        ro = self.ref_offsets[start : stop + 1]
        return EncodedPairs(
            self.cand_tokens[co[0] : co[-1]], co - co[0], self.ref_tokens[ro[0] : ro[-1]], ro - ro[0]
        )


@dataclass(frozen=True)
class NgramStats:
    overlap: np.ndarray
    cand_total: np.ndarray
    ref_total: np.ndarray


# -- numba path ---------------------------------------------------------------


@optional_njit(cache=True)
def _densify(keys):
    n = keys.shape[0]
    out = np.empty(n, dtype=np.int64)
    if n == 0:
        return out, 0
    order = np.argsort(keys, kind="mergesort")
    rank = -1
    prev = 0
    for k in range(n):
        v = keys[order[k]]
        if k == 0 or v != prev:
            rank += 1
            prev = v
        out[order[k]] = rank
    return out, rank + 1


@optional_njit(cache=True)
def _same_window(a, i, b, j, n):
    for k in range(n):
        if a[i + k] != b[j + k]:
            return False
    return True


@optional_njit(cache=True)
def _pair_quadratic(c, r, max_n, overlap_row):
    lc = c.shape[0]
    lr = r.shape[0]
    for n in range(1, max_n + 1):
        nc = lc - n + 1
        nr = lr - n + 1
        if nc <= 0 or nr <= 0:
            continue
        total = 0
        for i in range(nc):
            first = True
            for j in range(i):
                if _same_window(c, i, c, j, n):
                    first = False
                    break
            if not first:
                continue
            cc = 1
            for j in range(i + 1, nc):
                if _same_window(c, i, c, j, n):
                    cc += 1
            rc = 0
            for j in range(nr):
                if _same_window(c, i, r, j, n):
                    rc += 1
            total += cc if cc < rc else rc
        overlap_row[n - 1] = total


@optional_njit(cache=True)
def _pair_sorted(c, r, max_n, overlap_row):
    lc = c.shape[0]
    lr = r.shape[0]
    L = lc + lr
    both = np.empty(L, dtype=np.int64)
    both[:lc] = c
    both[lc:] = r
    uni, _ = _densify(both)
    ids = uni.copy()
    for n in range(1, max_n + 1):
        nc = lc - n + 1
        nr = lr - n + 1
        if nc <= 0 or nr <= 0:
            break
        m = nc + nr
        if n > 1:
            keys = np.empty(m, dtype=np.int64)
            for i in range(nc):
                keys[i] = ids[i] * L + uni[i + n - 1]
            for j in range(nr):
                keys[nc + j] = ids[lc + j] * L + uni[lc + j + n - 1]
            dense, ndist = _densify(keys)
            for i in range(nc):
                ids[i] = dense[i]
            for j in range(nr):
                ids[lc + j] = dense[nc + j]
        else:
            ndist = L
        ccount = np.zeros(ndist, dtype=np.int64)
        rcount = np.zeros(ndist, dtype=np.int64)
        for i in range(nc):
            ccount[ids[i]] += 1
        for j in range(nr):
            rcount[ids[lc + j]] += 1
        total = 0
        for g in range(ndist):
            total += ccount[g] if ccount[g] < rcount[g] else rcount[g]
        overlap_row[n - 1] = total


@optional_njit(cache=True)
def _stats_loop(ct, co, rt, ro, max_n, quadratic_limit, overlap):
    P = co.shape[0] - 1
    for p in range(P):
        c = ct[co[p] : co[p + 1]]
        r = rt[ro[p] : ro[p + 1]]
        if c.shape[0] == 0 or r.shape[0] == 0:
            continue
        if c.shape[0] + r.shape[0] <= quadratic_limit:
            _pair_quadratic(c, r, max_n, overlap[p])
        else:
            _pair_sorted(c, r, max_n, overlap[p])


def _totals(lengths: np.ndarray, max_n: int) -> np.ndarray:
    orders = np.arange(1, max_n + 1, dtype=np.int64)
    return np.maximum(lengths[:, None] - orders[None, :] + 1, 0)


def ngram_stats_numba(pairs: EncodedPairs, max_n: int, quadratic_limit: int = QUADRATIC_LIMIT) -> NgramStats:
    """Per-pair loop. Runs as compiled code when numba is installed, as Python otherwise."""
    overlap = np.zeros((len(pairs), max_n), dtype=np.int64)
    _stats_loop(
        pairs.cand_tokens, pairs.cand_offsets, pairs.ref_tokens, pairs.ref_offsets,
        max_n, quadratic_limit, overlap,
    )
    return NgramStats(overlap, _totals(pairs.cand_lengths, max_n), _totals(pairs.ref_lengths, max_n))


# -- numpy path ---------------------------------------------------------------


def _numpy_overlap(pairs: EncodedPairs, max_n: int) -> np.ndarray:
    P = len(pairs)
    overlap = np.zeros((P, max_n), dtype=np.int64)
    ct, rt = pairs.cand_tokens, pairs.ref_tokens
    if len(ct) == 0 or len(rt) == 0:
        return overlap
    tokens = np.concatenate([ct, rt])
    side = np.concatenate([np.zeros(len(ct), np.int8), np.ones(len(rt), np.int8)])
    pair_idx = np.concatenate(
        [np.repeat(np.arange(P), pairs.cand_lengths), np.repeat(np.arange(P), pairs.ref_lengths)]
    )
    seq_start = np.concatenate([pairs.cand_offsets[:-1], len(ct) + pairs.ref_offsets[:-1]])
    seq_len = np.concatenate([pairs.cand_lengths, pairs.ref_lengths])
    seq_of_pos = np.repeat(np.arange(2 * P), seq_len)
    remaining = seq_start[seq_of_pos] + seq_len[seq_of_pos] - np.arange(len(tokens))

    _, uni = np.unique(tokens, return_inverse=True)
    uni = uni.astype(np.int64).ravel()
    vocab = int(uni.max()) + 1
    ids = uni
    for n in range(1, max_n + 1):
        valid = remaining >= n
        if not valid.any():
            break
        pos = np.flatnonzero(valid)
        if n > 1:
            keys = ids[pos] * vocab + uni[pos + n - 1]
            _, dense = np.unique(keys, return_inverse=True)
            ids = np.full(len(tokens), -1, dtype=np.int64)
            ids[pos] = dense.ravel()
        gid = ids[pos]
        ngrams = int(gid.max()) + 1
        key2 = pair_idx[pos] * ngrams + gid
        is_cand = side[pos] == 0
        uc, cc = np.unique(key2[is_cand], return_counts=True)
        ur, rc = np.unique(key2[~is_cand], return_counts=True)
        if len(uc) == 0 or len(ur) == 0:
            continue
        at = np.searchsorted(ur, uc)
        at_clip = np.minimum(at, len(ur) - 1)
        hit = (at < len(ur)) & (ur[at_clip] == uc)
        clipped = np.minimum(cc[hit], rc[at_clip[hit]])
        overlap[:, n - 1] = np.bincount(uc[hit] // ngrams, weights=clipped, minlength=P).astype(np.int64)
    return overlap


def ngram_stats_numpy(pairs: EncodedPairs, max_n: int, chunk_tokens: int = NUMPY_CHUNK_TOKENS) -> NgramStats:
    """Batch-vectorized over all pairs; large batches are processed in chunks."""
    P = len(pairs)
    per_pair = pairs.cand_lengths + pairs.ref_lengths
    parts = []
    start = 0
    cum = np.cumsum(per_pair)
    while start < P:
        base = cum[start - 1] if start else 0
        stop = int(np.searchsorted(cum, base + chunk_tokens, side="right"))
        stop = max(stop, start + 1)
        parts.append(_numpy_overlap(pairs.slice(start, stop), max_n))
        start = stop
    overlap = np.concatenate(parts) if parts else np.zeros((0, max_n), dtype=np.int64)
    return NgramStats(overlap, _totals(pairs.cand_lengths, max_n), _totals(pairs.ref_lengths, max_n))


def ngram_stats(pairs: EncodedPairs, max_n: int, backend: str = "auto") -> NgramStats:
    """Dispatch to ``"numba"`` or ``"numpy"``; ``"auto"`` follows the env flag."""
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    if backend == "auto":
        backend = "numba" if _accel.USE_NUMBA else "numpy"
    if backend == "numba":
        return ngram_stats_numba(pairs, max_n)
    if backend == "numpy":
        return ngram_stats_numpy(pairs, max_n)
    raise ValueError(f"unknown kernel backend {backend!r}")
