import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medtri._text import source_hash
from medtri.corpus import (
    CorpusRecord,
    DedupStats,
    SplitSpec,
    dedup,
    ingest,
    length_stats,
    split,
    truncate_records,
    truncate_text,
    write_jsonl,
)
from medtri.errors import CorpusFormatError, TestCountExceedsCorpus
from medtri.metrics import tokenize


def recs(n, prefix="r"):
    return [CorpusRecord(f"{prefix}{i:04d}", raw_text=f"report number {i} lungs clear") for i in range(n)]


def test_record_invariants():
    r = CorpusRecord("a", raw_text="Lungs  clear.")
    assert r.source_hash == source_hash("Lungs clear.") and len(r.source_hash) == 64
    with pytest.raises(CorpusFormatError):
        CorpusRecord("a")
    with pytest.raises(CorpusFormatError):
        CorpusRecord("a", raw_text="x", source_hash="0" * 64)
    assert CorpusRecord("b", normalized_text="Lung: clear.").source_hash


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_ingest_valid_and_corrupt(tmp_path):
    rows = [json.dumps({"report_id": f"r{i}", "raw_text": f"text {i}"}) for i in range(3)]
    assert len(list(ingest(write_lines(tmp_path / "a.jsonl", rows)))) == 3
    rejects = []
    p = write_lines(tmp_path / "b.jsonl", [rows[0], '{"report_id": "r9", "raw_', rows[2]])
    got = list(ingest(p, on_reject=rejects.append))
    assert [r.report_id for r in got] == ["r0", "r2"]
    assert len(rejects) == 1 and rejects[0].lineno == 2


def test_ingest_rejects_bad_records(tmp_path):
    rejects = []
    lines = [
        json.dumps({"raw_text": "no id"}),
        json.dumps({"report_id": "x"}),
        json.dumps({"report_id": "y", "raw_text": "a", "source_hash": "bad"}),
        json.dumps({"report_id": "z", "raw_text": "a", "schema_version": 99}),
        json.dumps([1, 2]),
    ]
    assert list(ingest(write_lines(tmp_path / "c.jsonl", lines), on_reject=rejects.append)) == []
    assert [r.lineno for r in rejects] == [1, 2, 3, 4, 5]


def test_ingest_directory(tmp_path):
    (tmp_path / "rep_a.txt").write_text("Lungs clear.")
    (tmp_path / "rep_b.txt").write_text("Heart normal.")
    (tmp_path / "notes.md").write_text("ignored")
    got = list(ingest(tmp_path, "dir"))
    assert [r.report_id for r in got] == ["rep_a", "rep_b"]


def test_ingest_missing_path_raises_immediately(tmp_path):
    with pytest.raises(OSError):
        ingest(tmp_path / "missing.jsonl")
    with pytest.raises(OSError):
        ingest(tmp_path / "missing", "dir")


def test_emit_ingest_round_trip(tmp_path):
    original = [
        CorpusRecord("a", raw_text="Lungs clear.", modality="xray", body_region="chest", metadata={"site": "x", "n": 3}),
        CorpusRecord("b", raw_text="Heart normal.", normalized_text="Heart: normal.", metadata={"nested": {"k": [1]}}),
        CorpusRecord("c", normalized_text="Lung: clear."),
    ]
    p = tmp_path / "out.jsonl"
    assert write_jsonl(p, original) == 3
    assert list(ingest(p)) == original
    for line in p.read_text().splitlines():
        assert json.loads(line)["schema_version"] == 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.text(min_size=1, max_size=30).filter(str.strip),
                          st.dictionaries(st.text("xyz", min_size=1, max_size=3), st.integers(), max_size=2)),
                max_size=8))
def test_round_trip_property(tmp_path_factory, items):
    original = [CorpusRecord(f"id{i}", raw_text=t, metadata=m) for i, (t, m) in enumerate(items)]
    p = tmp_path_factory.mktemp("rt") / "x.jsonl"
    write_jsonl(p, original)
    assert list(ingest(p)) == original


def test_write_is_atomic(tmp_path):
    p = tmp_path / "out.jsonl"
    p.write_text("old\n")

    def rows():
        yield {"a": 1}
        raise RuntimeError("boom")

    with pytest.raises(RuntimeError):
        write_jsonl(p, rows())
    assert p.read_text() == "old\n"
    assert list(tmp_path.iterdir()) == [p]


def test_dedup():
    a = CorpusRecord("a", raw_text="same text")
    b = CorpusRecord("b", raw_text="same   text")
    c = CorpusRecord("c", raw_text="other")
    stats = DedupStats()
    assert [r.report_id for r in dedup([a, b, c], stats)] == ["a", "c"]
    assert stats.duplicates == 1
    assert list(dedup([a, c])) == [a, c]
    assert list(dedup([])) == []


def test_split_contract():
    corpus = recs(1000)
    m = split(corpus, SplitSpec(500, 0.0, 7))
    assert (len(m.train), len(m.validation), len(m.test)) == (500, 0, 500)
    assert split(corpus, SplitSpec(500, 0.0, 7)) == m
    assert split(corpus, SplitSpec(500, 0.0, 8)).test != m.test
    everything = split(corpus, SplitSpec(0, 0.0, 1))
    assert len(everything.train) == 1000 and not everything.test and not everything.validation
    with pytest.raises(TestCountExceedsCorpus):
        split(corpus, SplitSpec(1001))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 120), st.integers(0, 2**32), st.floats(0, 0.99), st.data())
def test_split_partition_property(n, seed, vf, data):
    ids = [f"x{i}" for i in range(n)]
    tc = data.draw(st.integers(0, n))
    m = split(ids, SplitSpec(tc, vf, seed))
    parts = [m.train, m.validation, m.test]
    assert sorted(sum(parts, [])) == sorted(ids)
    assert len(set(m.train) | set(m.validation) | set(m.test)) == n
    assert len(m.test) == tc
    order = {x: i for i, x in enumerate(ids)}
    for part in parts:
        assert [order[x] for x in part] == sorted(order[x] for x in part)
    assert split(ids, SplitSpec(tc, vf, seed)) == m


def test_split_rejects_duplicates():
    with pytest.raises(ValueError):
        split(["a", "a"], SplitSpec(1))


def test_manifests_written(tmp_path):
    m = split(recs(10), SplitSpec(3, 0.5, 0))
    paths = m.write(tmp_path)
    loaded = {p.stem: json.loads(p.read_text()) for p in paths}
    assert set(loaded) == {"train", "validation", "test"}
    assert loaded["test"]["ids"] == m.test and loaded["test"]["schema_version"] == 1
    assert loaded["validation"]["count"] == len(m.validation) == 3


def text_of(n):
    return " ".join(f"tok{i}." for i in range(n))


def test_length_stats():
    one = length_stats([CorpusRecord("a", raw_text="three token report")])
    assert one.mean == 3 and one.truncation_rate == 0
    corpus = [CorpusRecord(f"r{i}", raw_text=text_of(600 if i % 10 == 0 else 100)) for i in range(100)]
    st_ = length_stats(corpus, 512)
    assert st_.truncation_rate == 0.10 and st_.n_truncated == 10
    assert sum(c for _, _, c in st_.histogram) == 100
    cut = list(truncate_records(corpus, 512))
    assert length_stats(cut, 512).truncation_rate == 0
    long_one = cut[0]
    assert long_one.metadata["parent_source_hash"] == corpus[0].source_hash
    assert long_one.source_hash == source_hash(long_one.raw_text)
    assert cut[1] is corpus[1]


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet=" \n\t.,;abc12-", max_size=200), st.integers(1, 40))
def test_truncation_never_splits_tokens(text, k):
    cut = truncate_text(text, k)
    toks, cut_toks = tokenize(text), tokenize(cut)
    assert cut_toks == toks[: min(k, len(toks))]
    assert text.startswith(cut)


def test_truncate_normalized_field():
    r = CorpusRecord("a", raw_text="short", normalized_text="Lung: " + text_of(20))
    (cut,) = truncate_records([r], 5, "normalized")
    assert len(tokenize(cut.normalized_text)) == 5 and cut.raw_text == "short"
