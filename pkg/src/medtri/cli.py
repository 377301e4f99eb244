"""``medtri`` command-line entry point.

Exit status: 0 success, 1 fatal config / IO error (including usage errors),
2 validation failures found. Logs go to stderr; data goes to files, and
summaries to stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

from . import __version__
from ._text import atomic_write_text
from .augment import (
    CounterfactualConfig,
    DonorPool,
    EmitSummary,
    KnowledgeDictionary,
    emit_hard_negative_set,
    expand_knowledge,
)
from .corpus import (
    SCHEMA_VERSION,
    CorpusRecord,
    Reject,
    SplitSpec,
    dedup,
    ingest,
    length_stats,
    read_jsonl,
    record_text,
    split,
    truncate_records,
    write_jsonl,
)
from .errors import ConfigError, EmptyCorpus, MedTriError
from .metrics import HashEmbeddingProvider, RemoteEmbeddingProvider, evaluate_corpus
from .normalize import (
    BackendConfig,
    Checkpoint,
    DistillSummary,
    IrrelevanceFilters,
    build_distillation_set,
    make_backend,
)
from .normalize.rule import RawReport
from .ontology import Ontology, load_ontology
from .schema import NormalizedReport, SegmentKind, SegmentTagger, parse_report, report_problems

log = logging.getLogger("medtri")

EXIT_OK, EXIT_FATAL, EXIT_INVALID = 0, 1, 2

_SECRET_KEYS = {"api_key", "token", "password", "secret", "authorization"}


# -- configuration --------------------------------------------------------------


@dataclass
class MetricOptions:
    max_n: int = 4
    corpus_bleu: bool = False
    text_field: str = "normalized"
    embedding: str = "none"  # none | hash | remote
    embedding_endpoint: str | None = None
    embedding_model: str | None = None
    embedding_api_key_env: str = "MEDTRI_EMBED_API_KEY"


@dataclass
class StatsOptions:
    max_tokens: int = 512
    text_field: str = "auto"


@dataclass
class PipelineConfig:
    ontology: str | None = None
    filters: str | None = None
    drop_sections: str | None = None
    diagnosis_cues: str | None = None
    description_cues: str | None = None
    knowledge: str | None = None
    prompt_template: str | None = None
    backend: dict = field(default_factory=dict)
    counterfactual: dict = field(default_factory=dict)
    split: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    workers: int = 1
    log_level: str = "INFO"

    @classmethod
    def load(cls, path: str | None) -> "PipelineConfig":
        if path is None:
            return cls()
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        _reject_secrets(obj)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known - {"schema_version"})
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        obj.pop("schema_version", None)
        return cls(**obj)


def _reject_secrets(obj, where="config"):
    if isinstance(obj, dict):
        for k, v in obj.items():
            if k.lower() in _SECRET_KEYS:
                raise ConfigError(f"{where}.{k}: secrets must come from environment variables, not the config file")
            _reject_secrets(v, f"{where}.{k}")


def _build(kind, values: dict, what: str):
    try:
        return kind(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {what} settings: {exc}") from exc


@dataclass
class Resources:
    """Everything loaded and validated from a config before any record is touched."""

    cfg: PipelineConfig
    ontology: Ontology
    filters: IrrelevanceFilters
    tagger: SegmentTagger
    knowledge: KnowledgeDictionary | None = None

    def backend(self):
        bcfg = dict(self.cfg.backend)
        if self.cfg.prompt_template:
            try:
                bcfg["prompt_template"] = Path(self.cfg.prompt_template).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read prompt template: {exc}") from exc
        return make_backend(_build(BackendConfig, bcfg, "backend"), self.ontology, self.filters, self.tagger)


def load_resources(cfg: PipelineConfig, need_knowledge: bool = False) -> Resources:
    def existing(p):
        if p is not None and not Path(p).is_file():
            raise ConfigError(f"file not found: {p}")
        return p

    ontology = load_ontology(existing(cfg.ontology))
    filters = IrrelevanceFilters.from_files(existing(cfg.filters), existing(cfg.drop_sections))
    tagger = SegmentTagger.from_files(existing(cfg.diagnosis_cues), existing(cfg.description_cues))
    existing(cfg.prompt_template)
    knowledge = KnowledgeDictionary.load(existing(cfg.knowledge)) if need_knowledge else None
    return Resources(cfg, ontology, filters, tagger, knowledge)


# -- shared plumbing ------------------------------------------------------------------


def parallel_map(fn: Callable, items: Iterable, workers: int) -> Iterator:
    """``map`` over a thread pool with a bounded queue; results keep input order."""
    if workers <= 1:
        yield from map(fn, items)
        return
    window = 4 * workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = []
        for item in items:
            pending.append(pool.submit(fn, item))
            if len(pending) >= window:
                yield pending.pop(0).result()
        for fut in pending:
            yield fut.result()


def _read_corpus(path: str, fmt: str, rejects: list) -> Iterator[CorpusRecord]:
    if fmt == "auto":
        fmt = "dir" if Path(path).is_dir() else "jsonl"
    return ingest(path, fmt, rejects.append)


def _reject_row(stage: str, **kw) -> dict:
    return {"schema_version": SCHEMA_VERSION, "stage": stage, **kw}


def _ingest_reject_row(r: Reject) -> dict:
    return _reject_row("ingest", source=r.source, lineno=r.lineno, error="CorpusFormatError",
                       message=r.reason, content=r.content)


def normalized_report(rec: CorpusRecord, res: Resources) -> NormalizedReport:
    if not rec.normalized_text:
        raise MedTriError(f"record {rec.report_id!r} has no normalized_text")
    triplets = parse_report(rec.normalized_text, res.ontology, res.tagger)
    return NormalizedReport(rec.report_id, tuple(triplets), rec.metadata.get("backend", "unknown"), rec.source_hash)


def _rejects_path(args, output: str) -> str:
    return args.rejects or f"{output}.rejects.jsonl"


def _summary(name: str, **counts) -> None:
    print(f"{name}: " + " ".join(f"{k}={v}" for k, v in counts.items()), file=sys.stdout)


# -- subcommands -------------------------------------------------------------------------


def normalize_records(records: Iterable[CorpusRecord], backend, workers: int = 1):
    """``(ok, rejects)``: normalized records sorted by report_id, and reject rows."""

    def one(rec: CorpusRecord):
        try:
            rep = backend(rec.to_raw_report())
        except Exception as exc:  # per-record failure, never fatal
            return rec, None, exc
        return rec, rep, None

    ok, bad = [], []
    for rec, rep, exc in parallel_map(one, records, workers):
        if exc is not None:
            log.warning("reject %s: %s: %s", rec.report_id, type(exc).__name__, exc)
            bad.append(_reject_row("normalize", report_id=rec.report_id, source_hash=rec.source_hash,
                                   error=type(exc).__name__, message=str(exc)))
            continue
        meta = dict(rec.metadata, backend=rep.backend)
        ok.append(replace(rec, normalized_text=rep.to_text(), metadata=meta))
    ok.sort(key=lambda r: r.report_id)
    bad.sort(key=lambda r: str(r.get("report_id", "")))
    return ok, bad


def cmd_normalize(args, cfg: PipelineConfig) -> int:
    res = load_resources(cfg)
    backend = res.backend()
    t0 = time.perf_counter()
    ingest_rejects: list[Reject] = []
    records = _read_corpus(args.input, args.format, ingest_rejects)
    try:
        ok, bad = normalize_records(records, backend, cfg.workers)
    finally:
        close = getattr(getattr(backend, "client", None), "close", None)
        if close:
            close()
    bad = [_ingest_reject_row(r) for r in ingest_rejects] + bad
    _write_rows(args.output, ok)
    _write_rows(_rejects_path(args, args.output), bad)
    elapsed = time.perf_counter() - t0
    total = len(ok) + len(bad)
    _summary("normalize", total=total, ok=len(ok), rejected=len(bad), seconds=f"{elapsed:.3f}",
             per_second=f"{total / elapsed if elapsed else 0:.1f}")
    if total and not ok:
        log.error("every record failed to normalize")
        return EXIT_FATAL
    return EXIT_OK


def _write_rows(path: str, rows, header: dict | None = None) -> None:
    write_jsonl(path, rows, header)


def _parse_kinds(text: str | None) -> frozenset:
    if not text:
        return frozenset({SegmentKind.DIAGNOSIS})
    try:
        return frozenset(SegmentKind(k.strip().lower()) for k in text.split(",") if k.strip())
    except ValueError as exc:
        raise ConfigError(f"--kinds: {exc}") from exc


def cmd_augment(args, cfg: PipelineConfig) -> int:
    res = load_resources(cfg, need_knowledge=args.mode == "knowledge")
    ingest_rejects: list[Reject] = []
    records = list(_read_corpus(args.input, "jsonl", ingest_rejects))
    bad = [_ingest_reject_row(r) for r in ingest_rejects]
    parsed = []
    for rec in records:
        try:
            parsed.append((rec, normalized_report(rec, res)))
        except MedTriError as exc:
            bad.append(_reject_row("augment", report_id=rec.report_id, source_hash=rec.source_hash,
                                   error=type(exc).__name__, message=str(exc)))

    if args.mode == "knowledge":
        kinds = _parse_kinds(args.kinds)
        out, changed = [], 0
        for rec, rep in parsed:
            new = expand_knowledge(rep, res.knowledge, kinds)
            if new is rep:
                out.append(rec)
            else:
                changed += 1
                out.append(replace(rec, normalized_text=new.to_text()))
        out.sort(key=lambda r: r.report_id)
        _write_rows(args.output, out)
        _write_rows(_rejects_path(args, args.output), bad)
        _summary("augment-knowledge", total=len(records) + len(ingest_rejects), expanded=changed,
                 unchanged=len(out) - changed, rejected=len(bad))
        return EXIT_OK

    cf = dict(cfg.counterfactual)
    if args.seed is not None:
        cf["rng_seed"] = args.seed
    if args.n_perturb is not None:
        cf["n_perturb"] = args.n_perturb
    if args.allow_unresolved:
        cf["require_ontology_resolution"] = False
    cf_cfg = _build(CounterfactualConfig, cf, "counterfactual")
    donor_pool = None
    if args.donors:
        donor_recs = ingest(args.donors, "jsonl")
        donor_pool = DonorPool((normalized_report(r, res) for r in donor_recs), res.ontology)
    summary = EmitSummary()
    corpus = [(rec.metadata.get("image_ref", rec.report_id), rep) for rec, rep in parsed]
    out = sorted(emit_hard_negative_set(corpus, cf_cfg, res.ontology, donor_pool, summary),
                 key=lambda r: r.report_id)
    for rid, err, msg in summary.skipped:
        bad.append(_reject_row("counterfactual", report_id=rid, error=err, message=msg))
    header = {"schema_version": SCHEMA_VERSION, "header": True, "kind": "hard_negatives",
              "rng_seed": cf_cfg.rng_seed, "n_perturb": cf_cfg.n_perturb,
              "require_ontology_resolution": cf_cfg.require_ontology_resolution}
    _write_rows(args.output, out, header)
    _write_rows(_rejects_path(args, args.output), bad)
    _summary("augment-counterfactual", seed=cf_cfg.rng_seed, total=summary.total, emitted=summary.emitted,
             skipped=len(summary.skipped), rejected=len(bad) - len(summary.skipped))
    return EXIT_OK


def _embedding_provider(opts: MetricOptions):
    if opts.embedding == "none":
        return None
    if opts.embedding == "hash":
        return HashEmbeddingProvider()
    if opts.embedding == "remote":
        if not (opts.embedding_endpoint and opts.embedding_model):
            raise ConfigError("remote embedding needs embedding_endpoint and embedding_model")
        return RemoteEmbeddingProvider(opts.embedding_endpoint, opts.embedding_model,
                                       api_key_env=opts.embedding_api_key_env)
    raise ConfigError(f"unknown embedding provider {opts.embedding!r}")


def _texts_by_id(path: str, text_field: str) -> dict[str, str]:
    out = {}
    for rec in ingest(path, "jsonl", lambda r: log.warning("%s:%s: skipped: %s", r.source, r.lineno, r.reason)):
        if rec.report_id in out:
            log.warning("%s: duplicate report_id %r, keeping the first", path, rec.report_id)
            continue
        text = record_text(rec, text_field)
        if text_field == "normalized" and not text:
            text = rec.raw_text or ""
        out[rec.report_id] = text
    return out


def cmd_metrics(args, cfg: PipelineConfig) -> int:
    m = dict(cfg.metrics)
    for key in ("max_n", "embedding", "text_field"):
        if getattr(args, key, None) is not None:
            m[key] = getattr(args, key)
    if args.corpus_bleu:
        m["corpus_bleu"] = True
    opts = _build(MetricOptions, m, "metrics")
    if opts.text_field not in ("raw", "normalized", "auto"):
        raise ConfigError(f"text_field must be raw, normalized or auto, not {opts.text_field!r}")
    provider = _embedding_provider(opts)
    cands = _texts_by_id(args.candidates, opts.text_field)
    refs = _texts_by_id(args.references, opts.text_field)
    ids = sorted(set(cands) & set(refs))
    unmatched = sorted(set(cands) ^ set(refs))
    if unmatched:
        log.warning("%d unmatched report_id(s), e.g. %s", len(unmatched), unmatched[:10])
    if not ids:
        raise EmptyCorpus(
            f"no report_id in common between {args.candidates} ({len(cands)} ids) "
            f"and {args.references} ({len(refs)} ids)"
        )
    report = evaluate_corpus([(cands[i], refs[i]) for i in ids], ids=ids, provider=provider, max_n=opts.max_n,
                             corpus_level_bleu=opts.corpus_bleu)
    report.options["unmatched_ids"] = unmatched
    atomic_write_text(args.output, report.dumps() + "\n")
    print(report.table())
    return EXIT_OK


def cmd_split(args, cfg: PipelineConfig) -> int:
    s = dict(cfg.split)
    if args.test_count is not None:
        s["test_count"] = args.test_count
    if args.validation_fraction is not None:
        s["validation_fraction"] = args.validation_fraction
    if args.seed is not None:
        s["rng_seed"] = args.seed
    spec = _build(SplitSpec, s, "split")
    records = list(_read_corpus(args.input, args.format, []))
    if args.dedup:
        records = list(dedup(records))
    try:
        manifests = split(records, spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    manifests.write(args.outdir)
    _summary("split", train=len(manifests.train), validation=len(manifests.validation),
             test=len(manifests.test), seed=spec.rng_seed)
    return EXIT_OK


def cmd_stats(args, cfg: PipelineConfig) -> int:
    s = dict(cfg.stats)
    if args.max_tokens is not None:
        s["max_tokens"] = args.max_tokens
    if args.text_field is not None:
        s["text_field"] = args.text_field
    opts = _build(StatsOptions, s, "stats")
    records = list(_read_corpus(args.input, args.format, []))
    st = length_stats(records, opts.max_tokens, opts.text_field)
    if args.output:
        atomic_write_text(args.output, json.dumps(st.to_json(), indent=1) + "\n")
    if args.truncated_output:
        _write_rows(args.truncated_output, truncate_records(records, opts.max_tokens, opts.text_field))
    _summary("stats", count=st.count, mean=f"{st.mean:.2f}", median=f"{st.median:.1f}", p95=f"{st.p95:.1f}",
             max_tokens=st.max_tokens, truncated=st.n_truncated, truncation_rate=f"{st.truncation_rate:.4f}")
    return EXIT_OK


def validate_file(path: str, ontology: Ontology, limit: int = 10) -> tuple[int, int, list[str]]:
    """``(n_records, n_failed, first_failures)`` for a normalized-corpus JSONL file."""
    failures: list[str] = []
    n = failed = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            n += 1
            try:
                rec = CorpusRecord.from_json(json.loads(line))
                problems = (
                    report_problems(rec.normalized_text, ontology) if rec.normalized_text
                    else ["missing normalized_text"]
                )
                rid = rec.report_id
            except (ValueError, MedTriError) as exc:
                problems, rid = [str(exc)], "?"
            if problems:
                failed += 1
                if len(failures) < limit:
                    failures.append(f"{path}:{lineno}: {rid}: " + "; ".join(problems))
    return n, failed, failures


def cmd_validate(args, cfg: PipelineConfig) -> int:
    res = load_resources(cfg)
    n, failed, failures = validate_file(args.input, res.ontology, args.max_failures)
    for f in failures:
        print(f)
    _summary("validate", records=n, failed=failed)
    return EXIT_INVALID if failed else EXIT_OK


def cmd_distill(args, cfg: PipelineConfig) -> int:
    res = load_resources(cfg)
    backend = res.backend()
    output = Path(args.output)
    partial = Path(f"{output}.partial")
    ckpt = Checkpoint(args.checkpoint or f"{output}.checkpoint.json")
    if output.exists() and not partial.exists():
        # resume from a finished run: its pairs count as already done
        partial.write_bytes(output.read_bytes())
    if partial.exists():
        ckpt.update(row["source_hash"] for row in read_jsonl(partial))

    seen_hashes: set[str] = set()
    ingest_rejects: list[Reject] = []

    def raws() -> Iterator[RawReport]:
        for rec in _read_corpus(args.input, args.format, ingest_rejects):
            try:
                raw = rec.to_raw_report()
            except (MedTriError, ValueError) as exc:
                ingest_rejects.append(Reject(args.input, None, f"{rec.report_id}: {exc}", ""))
                continue
            seen_hashes.add(rec.source_hash)
            yield raw

    summary = DistillSummary()
    rejects = []
    t0 = time.perf_counter()
    try:
        with open(partial, "a", encoding="utf-8") as fh:
            for pair in build_distillation_set(raws(), backend, checkpoint=ckpt, on_reject=rejects.append,
                                               workers=cfg.workers, summary=summary):
                fh.write(json.dumps(pair.to_json(), ensure_ascii=False) + "\n")
                fh.flush()
    finally:
        close = getattr(getattr(backend, "client", None), "close", None)
        if close:
            close()

    rows, have = [], set()
    for row in read_jsonl(partial):
        h = row["source_hash"]
        if h in seen_hashes and h not in have:
            have.add(h)
            rows.append(row)
    rows.sort(key=lambda r: (r["report_id"], r["source_hash"]))
    _write_rows(str(output), rows)
    bad = [_ingest_reject_row(r) for r in ingest_rejects] + sorted(
        (_reject_row("distill", **r.__dict__) for r in rejects), key=lambda r: r["report_id"]
    )
    _write_rows(_rejects_path(args, args.output), bad)
    partial.unlink()
    elapsed = time.perf_counter() - t0
    _summary("distill", **{k: getattr(summary, k) for k in ("total", "succeeded", "rejected", "skipped")},
             pairs=len(rows), seconds=f"{elapsed:.3f}")
    if summary.rejected and not summary.succeeded and not summary.skipped:
        log.error("every record was rejected")
        return EXIT_FATAL
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FATAL, f"{self.prog}: error: {message}\n")


def _add_backend_flags(p):
    p.add_argument("--backend", choices=["rule", "remote"], help="normalization backend")
    p.add_argument("--endpoint", help="chat-completions URL for the remote backend")
    p.add_argument("--model", help="model name for the remote backend")
    p.add_argument("--max-in-flight", type=int, help="concurrent remote requests")
    p.add_argument("--retry-limit", type=int)
    p.add_argument("--timeout", type=float)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON pipeline config; flags override it")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--workers", type=int, help="worker threads (default 1)")

    parser = _Parser(prog="medtri", description="Radiology report triplet normalization toolkit.")
    parser.add_argument("--version", action="version", version=f"medtri {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("normalize", parents=[common], help="raw reports -> triplet text")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--format", choices=["auto", "jsonl", "dir"], default="auto")
    p.add_argument("--rejects", help="rejects file (default OUTPUT.rejects.jsonl)")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("augment", parents=[common], help="knowledge expansion or counterfactual negatives")
    p.add_argument("mode", choices=["knowledge", "counterfactual"])
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--rejects")
    p.add_argument("--kinds", help="segment kinds to expand, comma separated (default diagnosis)")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-perturb", type=int)
    p.add_argument("--allow-unresolved", action="store_true", help="let entities outside the ontology be swapped")
    p.add_argument("--donors", help="JSONL corpus to draw donor findings from (default: the input)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("metrics", parents=[common], help="BLEU / ROUGE / embedding F of candidates vs references")
    p.add_argument("candidates")
    p.add_argument("references")
    p.add_argument("output")
    p.add_argument("--max-n", type=int)
    p.add_argument("--corpus-bleu", action="store_true")
    p.add_argument("--embedding", choices=["none", "hash", "remote"])
    p.add_argument("--text-field", choices=["normalized", "raw", "auto"])
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("split", parents=[common], help="seeded train/validation/test manifests")
    p.add_argument("input")
    p.add_argument("outdir")
    p.add_argument("--format", choices=["auto", "jsonl", "dir"], default="auto")
    p.add_argument("--test-count", type=int)
    p.add_argument("--validation-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--dedup", action="store_true", help="drop duplicate source texts first")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("stats", parents=[common], help="token-length statistics and truncation rate")
    p.add_argument("input")
    p.add_argument("--format", choices=["auto", "jsonl", "dir"], default="auto")
    p.add_argument("--max-tokens", type=int)
    p.add_argument("--text-field", choices=["auto", "raw", "normalized"])
    p.add_argument("--output", help="write the statistics as JSON")
    p.add_argument("--truncated-output", help="write a copy of the corpus cut to max tokens")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("validate", parents=[common], help="check every normalized_text against the schema")
    p.add_argument("input")
    p.add_argument("--max-failures", type=int, default=10, help="how many failures to print")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("distill", parents=[common], help="build resumable (raw, normalized) training pairs")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--format", choices=["auto", "jsonl", "dir"], default="auto")
    p.add_argument("--checkpoint", help="checkpoint file (default OUTPUT.checkpoint.json)")
    p.add_argument("--rejects")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_distill)
    return parser


def _apply_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    if args.log_level:
        cfg.log_level = args.log_level
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg.workers = args.workers
    b = dict(cfg.backend)
    for flag, key in (("backend", "kind"), ("endpoint", "endpoint"), ("model", "model_name"),
                      ("max_in_flight", "max_in_flight"), ("retry_limit", "retry_limit"), ("timeout", "timeout")):
        val = getattr(args, flag, None)
        if val is not None:
            b[key] = val
    if b.get("kind") == "rule":
        # switching to the rule backend from the command line drops remote-only settings
        b.pop("endpoint", None)
        b.pop("model_name", None)
    cfg.backend = b
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _apply_overrides(PipelineConfig.load(args.config), args)
        level = getattr(logging, str(cfg.log_level).upper(), None)
        if not isinstance(level, int):
            raise ConfigError(f"unknown log level {cfg.log_level!r}")
    except ConfigError as exc:
        print(f"medtri: config error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    logging.basicConfig(level=level, stream=sys.stderr, format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        force=True)
    try:
        return args.func(args, cfg)
    except (MedTriError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
