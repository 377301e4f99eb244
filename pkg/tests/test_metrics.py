import math
import time
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _fixtures import exhaustive_pairs, oracle_scores
from medtri.errors import DimensionMismatch, EmptyCandidate, EmptyCorpus, EmptyReference, ProviderError
from medtri.metrics import (
    EncodedPairs,
    HashEmbeddingProvider,
    StaticEmbeddingProvider,
    bleu,
    corpus_bleu,
    embed_greedy_f,
    encode_pairs,
    evaluate_corpus,
    ngram_stats,
    rouge_n,
    tokenize,
)
from medtri.metrics import _accel
from medtri.metrics.kernels import ngram_stats_numba, ngram_stats_numpy
from medtri.metrics.scores import bleu_from_stats, rouge_from_stats

BACKENDS = ["numpy"] + (["numba"] if _accel.NUMBA_INSTALLED else [])


def test_tokenize():
    assert tokenize("Dilated; measures 39 mm.") == ["dilated", "measures", "39", "mm"]
    assert tokenize("") == []
    assert tokenize("A  a") == ["a", "a"]
    assert tokenize("(3.5 cm), R/L -- ok!") == ["3.5", "cm", "r/l", "ok"]


def test_hand_computed_bleu_and_rouge():
    assert bleu(["the", "cat"], ["the", "cat", "sat"], max_n=2) == pytest.approx(math.exp(1 - 3 / 2), abs=1e-12)
    r = rouge_n(["lung", "clear"], ["lung", "is", "clear"], 1)
    assert (r.precision, r.recall, r.f1) == (1.0, 2 / 3, 0.8)


def test_identity_and_edge_cases():
    seq = ["a", "b", "a", "c"]
    assert bleu(seq, seq) == 1.0
    assert tuple(rouge_n(seq, seq, 1)) == (1.0, 1.0, 1.0)
    assert tuple(rouge_n(seq, seq, 2)) == (1.0, 1.0, 1.0)
    assert tuple(rouge_n(["a"], ["a", "b"], 2)) == (0.0, 0.0, 0.0)
    assert tuple(rouge_n([], ["a"], 1)) == (0.0, 0.0, 0.0)
    with pytest.raises(EmptyCandidate):
        bleu([], ["a"])
    with pytest.raises(EmptyReference):
        bleu(["a"], [])


def test_disjoint_bleu_matches_smoothing_by_hand():
    # p1 = p2 = 1/(2+1), 1/(1+1); no brevity penalty
    got = bleu(["x", "y"], ["a", "b"], max_n=2)
    assert got == pytest.approx(math.sqrt((1 / 3) * (1 / 2)), abs=1e-15)
    assert got < 1 / 2


def test_orders_longer_than_candidate_are_skipped():
    # candidate of length 1: only p1 counts, even with max_n=4
    assert bleu(["lung"], ["lung"], max_n=4) == 1.0
    assert bleu(["lung"], ["lung", "clear"], max_n=4) == pytest.approx(math.exp(1 - 2), abs=1e-15)


# -- exhaustive oracle ------------------------------------------------------------------


@pytest.fixture(scope="module")
def exhaustive():
    seqs, lens, pairs = exhaustive_pairs(3, 6)
    overlap, bleu_o, rouge_o = oracle_scores(seqs, 3, 2)
    return seqs, lens, pairs, overlap, bleu_o, rouge_o


@pytest.mark.parametrize("backend", BACKENDS)
def test_exhaustive_oracle(exhaustive, backend):
    seqs, lens, pairs, overlap, bleu_o, rouge_o = exhaustive
    n = len(seqs)
    assert n == 1093
    stats = ngram_stats(pairs, 2, backend)
    for k in (1, 2):
        assert np.array_equal(stats.overlap[:, k - 1].reshape(n, n), overlap[k - 1].astype(np.int64))
        got = rouge_from_stats(stats, k)
        for g, o in zip(got, rouge_o[k]):
            assert np.max(np.abs(g.reshape(n, n) - o)) <= 1e-12
    ok = (pairs.cand_lengths > 0) & (pairs.ref_lengths > 0)
    sub = type(stats)(stats.overlap[ok], stats.cand_total[ok], stats.ref_total[ok])
    for max_n in (1, 2):
        got = bleu_from_stats(sub, pairs.cand_lengths[ok], pairs.ref_lengths[ok], max_n)
        want = bleu_o[max_n].reshape(-1)[ok]
        assert np.max(np.abs(got - want)) <= 1e-12


def test_backends_agree_on_long_sequences():
    rng = np.random.default_rng(0)
    cands = [rng.integers(0, 6, size=int(rng.integers(0, 120))) for _ in range(400)]
    refs = [rng.integers(0, 6, size=int(rng.integers(0, 120))) for _ in range(400)]
    pairs = EncodedPairs.from_sequences(cands, refs)
    a = ngram_stats_numpy(pairs, 4)
    b = ngram_stats_numpy(pairs, 4, chunk_tokens=500)
    assert np.array_equal(a.overlap, b.overlap)
    if _accel.NUMBA_INSTALLED:
        for limit in (0, 48, 10_000):
            c = ngram_stats_numba(pairs, 4, quadratic_limit=limit)
            assert np.array_equal(a.overlap, c.overlap)
            assert np.array_equal(a.cand_total, c.cand_total) and np.array_equal(a.ref_total, c.ref_total)


# -- independent Counter oracle on random inputs ----------------------------------------------


def ngrams(seq, n):
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def counter_bleu(c, r, max_n):
    logs = []
    for n in range(1, max_n + 1):
        cg, rg = ngrams(c, n), ngrams(r, n)
        total = sum(cg.values())
        if total == 0:
            continue
        match = sum(min(v, rg[g]) for g, v in cg.items())
        logs.append(math.log(match / total if match else 1 / (total + 1)))
    bp = 1.0 if len(c) >= len(r) else math.exp(1 - len(r) / len(c))
    return bp * math.exp(math.fsum(logs) / len(logs))


def counter_rouge(c, r, n):
    cg, rg = ngrams(c, n), ngrams(r, n)
    ct, rt = sum(cg.values()), sum(rg.values())
    if not ct or not rt:
        return 0.0, 0.0, 0.0
    m = sum((cg & rg).values())
    p, rc = m / ct, m / rt
    return p, rc, (2 * p * rc / (p + rc) if p + rc else 0.0)


tokens = st.lists(st.sampled_from("abcde"), max_size=25)


@settings(max_examples=400, deadline=None)
@given(tokens, tokens, st.integers(1, 4))
def test_counter_oracle(c, r, max_n):
    for n in (1, 2, 3):
        assert rouge_n(c, r, n) == pytest.approx(counter_rouge(c, r, n), abs=1e-12)
    if c and r:
        assert bleu(c, r, max_n) == pytest.approx(counter_bleu(c, r, max_n), abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(tokens, tokens)
def test_symmetry_and_bounds(a, b):
    for n in (1, 2):
        ab, ba = rouge_n(a, b, n), rouge_n(b, a, n)
        assert ab.precision == ba.recall and ab.recall == ba.precision
        assert all(0.0 <= v <= 1.0 for v in ab)
    if a and b:
        assert 0.0 <= bleu(a, b) <= 1.0


@settings(max_examples=200, deadline=None)
@given(tokens.filter(bool), st.integers(1, 10))
def test_repeating_candidate_token_never_exceeds_one(ref, reps):
    cand = [ref[0]] * reps
    assert rouge_n(cand, ref, 1).precision <= 1.0
    assert bleu(cand, ref) <= 1.0


def test_corpus_bleu():
    pairs = encode_pairs([(["a", "b"], ["a", "b"]), (["c"], ["c", "d"])])
    # summed: p1 = 3/3, p2 = 1/1 over 3 cand tokens vs 4 ref tokens
    assert corpus_bleu(pairs, 2) == pytest.approx(math.exp(1 - 4 / 3), abs=1e-15)


# -- embedding F -------------------------------------------------------------------------------


def test_embed_identity_and_orthogonal():
    prov = HashEmbeddingProvider()
    seq = ["lung", "clear", "no", "effusion"]
    assert embed_greedy_f(seq, seq, prov) == pytest.approx(1.0, abs=1e-12)
    ortho = StaticEmbeddingProvider({"a": [1, 0, 0, 0], "b": [0, 1, 0, 0], "c": [0, 0, 1, 0], "d": [0, 0, 0, -1]})
    assert embed_greedy_f(["a", "b"], ["c", "d"], ortho) == 0.0


def test_embed_two_by_two_by_hand():
    deg = math.radians
    vec = lambda a: [math.cos(deg(a)), math.sin(deg(a))]
    prov = StaticEmbeddingProvider({"a": vec(0), "b": vec(90), "c": vec(30), "d": vec(180)})
    # cos matrix rows a,b cols c,d: [[cos30, -1 -> 0], [cos60, cos90]]
    p = (math.cos(deg(30)) + math.cos(deg(60))) / 2
    r = (math.cos(deg(30)) + 0.0) / 2
    assert embed_greedy_f(["a", "b"], ["c", "d"], prov) == pytest.approx(2 * p * r / (p + r), abs=1e-12)


def test_embed_errors():
    with pytest.raises(DimensionMismatch):
        StaticEmbeddingProvider({"a": [1, 0], "b": [1, 0, 0]})

    class Bad:
        def embed(self, toks):
            return np.ones((len(toks) + 1, 3))

    with pytest.raises(ProviderError):
        embed_greedy_f(["a"], ["b"], Bad())

    class Shifty:
        def embed(self, toks):
            return np.ones((len(toks), len(toks[0])))

    with pytest.raises(DimensionMismatch):
        embed_greedy_f(["a"], ["bb"], Shifty())


def test_remote_embedding_provider():
    import httpx

    from medtri.metrics import RemoteEmbeddingProvider

    def handler(request):
        import json

        toks = json.loads(request.content)["input"]
        return httpx.Response(200, json={"data": [{"embedding": [len(t), 1.0]} for t in toks]})

    prov = RemoteEmbeddingProvider("http://emb", "m", transport=httpx.MockTransport(handler))
    out = prov.embed(["ab", "c"])
    assert out.shape == (2, 2) and np.allclose(np.linalg.norm(out, axis=1), 1)
    down = RemoteEmbeddingProvider("http://emb", "m", transport=httpx.MockTransport(lambda r: httpx.Response(500)))
    with pytest.raises(ProviderError):
        down.embed(["a"])


# -- corpus evaluation ---------------------------------------------------------------------------


def test_evaluate_identical_pair():
    rep = evaluate_corpus([("Lung: clear.", "Lung: clear.")], provider=HashEmbeddingProvider())
    for name, agg in rep.aggregate.items():
        assert agg.mean == pytest.approx(1.0, abs=1e-12) and agg.std == pytest.approx(0.0, abs=1e-12), name


def test_evaluate_two_pairs_by_hand():
    rep = evaluate_corpus([("lung clear", "lung is clear"), ("heart normal", "heart normal")], ids=["a", "b"])
    # ROUGE-1 F1: 0.8 and 1.0
    assert rep.aggregate["rouge1_f1"].mean == (0.8 + 1.0) / 2
    assert rep.aggregate["rouge1_f1"].std == pytest.approx(0.1, abs=1e-15)
    assert rep.rouge1["f1"] == rep.aggregate["rouge1_f1"].mean
    assert [p.pair_id for p in rep.per_pair] == ["a", "b"]
    for p in rep.per_pair:
        pr, rc = p.rouge1_precision, p.rouge1_recall
        assert p.rouge1_f1 == pytest.approx(2 * pr * rc / (pr + rc) if pr + rc else 0.0, abs=1e-15)
    obj = rep.to_json()
    assert obj["schema_version"] == 1 and len(obj["per_pair"]) == 2
    assert "rouge1_f1" in rep.table()


def test_evaluate_empty_side_scores_zero_bleu():
    rep = evaluate_corpus([("", "lung clear"), ("lung clear", "lung clear")])
    assert rep.per_pair[0].bleu == 0.0 and rep.per_pair[1].bleu == 1.0


def test_evaluate_empty_corpus():
    with pytest.raises(EmptyCorpus):
        evaluate_corpus([])


def test_aggregate_is_exact_mean():
    rng = np.random.default_rng(7)
    vocab = ["lung", "clear", "heart", "normal", "no", "effusion", "mild", "opacity"]
    pairs = [(" ".join(rng.choice(vocab, 12)), " ".join(rng.choice(vocab, 10))) for _ in range(200)]
    rep = evaluate_corpus(pairs)
    for name, agg in rep.aggregate.items():
        vals = [getattr(p, name) for p in rep.per_pair]
        assert abs(agg.mean - math.fsum(vals) / len(vals)) <= 1e-12


def synthetic_pairs(n, seed=0):
    rng = np.random.default_rng(seed)
    vocab = [f"w{i}" for i in range(300)]
    return [(" ".join(rng.choice(vocab, int(rng.integers(20, 80)))), " ".join(rng.choice(vocab, int(rng.integers(20, 80)))))
            for _ in range(n)]


def test_500_pairs_under_one_second():
    evaluate_corpus(synthetic_pairs(3))  # warm the compiled kernels
    pairs = synthetic_pairs(500)
    t0 = time.perf_counter()
    rep = evaluate_corpus(pairs)
    assert time.perf_counter() - t0 < 1.0
    assert len(rep.per_pair) == 500


@pytest.mark.parametrize("backend", BACKENDS)
def test_evaluate_backends_identical(backend):
    pairs = synthetic_pairs(50, 3)
    a = evaluate_corpus(pairs, backend="numpy")
    b = evaluate_corpus(pairs, backend=backend)
    assert a.to_json() == b.to_json()


def test_env_flag_selects_numpy_fallback():
    import subprocess
    import sys

    code = (
        "from medtri.metrics import _accel, bleu;"
        "print(_accel.USE_NUMBA, round(bleu(['the','cat'], ['the','cat','sat'], 2), 10))"
    )
    env_off = dict(__import__("os").environ, MEDTRI_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env_off, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "0.6065306597"]
