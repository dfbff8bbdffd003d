"""Curated and web pipelines, their JSON config, and the analysis step.

Run directory layout (``output_root``)::

    <dump-or-corpus>/<stage>/...   intermediate results, one folder per stage
    final/<corpus>.<lang>.jsonl    kept documents
    droplogs/<stage>.jsonl         one entry per removed document, sorted by docid
    counts.json                    per-language ingest/kept counts
    timings.json                   CPU seconds per stage (not deterministic)
    report/                        analytics output

Everything except timings.json and report/stage_share.csv is byte-identical
across reruns and worker counts.
"""
from __future__ import annotations

import json
import logging
import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import analytics
from .docmodel import Document, QualityWarning, docid_key, split_docid, write_jsonl
from .dedup import dedup_partition
from .ingest import ingest_text_corpus, iter_wet_file, list_wet_files, parse_dump_label
from .langid import LidModel, apply_language, classify_document
from .ngram_lm import KNModel, UnscoreableText, perplexity
from .normalize import normalize_content
from .quality import STAGES, annotate_quality, drop_entry, filter_harmful, filter_quality, format_drop_entry, prefilter

log = logging.getLogger(__name__)

RUN_SCHEMA_VERSION = 1
BATCH_SIZE = 64
TIMING_STAGES = ("conversion", "filtering", "deduplication")


class ConfigError(ValueError):
    """Bad configuration: exit code 2 at the command line."""


class InputError(ValueError):
    """Missing or unreadable inputs: exit code 1 at the command line."""


# --- config ----------------------------------------------------------------------

@dataclass
class Thresholds:
    min_chars: int = 200
    min_lang_score: float = 0.5
    harmful_ppl_threshold: float = 5.0
    harmful_filter: bool = True
    quality_policy: list[str] = field(default_factory=lambda: sorted(w.value for w in QualityWarning))


@dataclass
class DedupParams:
    num_perm: int = 128
    bands: int = 16
    rows: int = 8
    threshold: float = 0.7
    seed: int = 1
    k: int = 5
    exact_verify: bool = False
    curated: bool = False


@dataclass
class PipelineConfig:
    pipeline: str = "web"
    input_root: str = "data"
    output_root: str = "out"
    lid_model: str | None = None
    harmful_lm: str | None = None
    workers: int = 1
    dumps: list[str] | None = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    dedup: DedupParams = field(default_factory=DedupParams)

    def __post_init__(self):
        validate_config(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "PipelineConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown(obj, cls, "config")
        obj = dict(obj)
        for key, sub in (("thresholds", Thresholds), ("dedup", DedupParams)):
            if key in obj:
                if not isinstance(obj[key], dict):
                    raise ConfigError(f"{key} must be an object")
                _reject_unknown(obj[key], sub, key)
                obj[key] = sub(**obj[key])
        return cls(**obj)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        return asdict(self)


def _reject_unknown(obj: dict, cls, where: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return (_is_int(x) or isinstance(x, float)) and math.isfinite(x)


def validate_config(cfg: PipelineConfig) -> None:
    t, d = cfg.thresholds, cfg.dedup
    _check(cfg.pipeline in ("curated", "web"), f"pipeline must be 'curated' or 'web', got {cfg.pipeline!r}")
    _check(isinstance(cfg.input_root, str) and bool(cfg.input_root), "input_root must be a path")
    _check(isinstance(cfg.output_root, str) and bool(cfg.output_root), "output_root must be a path")
    _check(_is_int(cfg.workers) and 1 <= cfg.workers <= 256, "workers must be an integer in [1, 256]")
    if cfg.dumps is not None:
        _check(isinstance(cfg.dumps, list), "dumps must be a list of labels")
        for label in cfg.dumps:
            try:
                parse_dump_label(label)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"dumps: {exc}") from exc
    _check(_is_int(t.min_chars) and t.min_chars >= 0, "min_chars must be a non-negative integer")
    _check(_is_real(t.min_lang_score) and 0 <= t.min_lang_score <= 1, "min_lang_score must be in [0, 1]")
    _check(_is_real(t.harmful_ppl_threshold) and t.harmful_ppl_threshold > 0,
           "harmful_ppl_threshold must be a positive number")
    _check(isinstance(t.harmful_filter, bool), "harmful_filter must be true or false")
    valid = {w.value for w in QualityWarning}
    _check(isinstance(t.quality_policy, list) and set(t.quality_policy) <= valid,
           f"quality_policy entries must be among {sorted(valid)}")
    for name in ("num_perm", "bands", "rows", "k"):
        _check(_is_int(getattr(d, name)) and getattr(d, name) >= 1, f"dedup.{name} must be a positive integer")
    _check(d.bands * d.rows == d.num_perm,
           f"dedup: bands * rows must equal num_perm ({d.bands} * {d.rows} != {d.num_perm})")
    _check(_is_real(d.threshold) and 0 < d.threshold <= 1, "dedup.threshold must be in (0, 1]")
    _check(_is_int(d.seed) and d.seed >= 0, "dedup.seed must be a non-negative integer")
    _check(isinstance(d.exact_verify, bool) and isinstance(d.curated, bool),
           "dedup.exact_verify and dedup.curated must be true or false")


# --- workers -------------------------------------------------------------------------

_MODELS: dict = {}


def _load_models(lid_path, lm_path) -> None:
    _MODELS["lid"] = LidModel.load(lid_path) if lid_path else None
    _MODELS["lm"] = KNModel.load(lm_path) if lm_path else None


def _map(fn, items, workers, lid_path, lm_path):
    """Ordered map; the result never depends on ``workers``."""
    if workers == 1:
        _load_models(lid_path, lm_path)
        return [fn(x) for x in items]
    with ProcessPoolExecutor(workers, initializer=_load_models, initargs=(lid_path, lm_path)) as ex:
        return list(ex.map(fn, items))


def _batches(items, size=BATCH_SIZE):
    return [items[i:i + size] for i in range(0, len(items), size)]


@dataclass
class DocOutcome:
    doc: Document
    warnings: tuple[str, ...]
    harmful_ppl: float | None
    stage: str | None = None
    reason: str | None = None


def _web_batch(args):
    docs, t = args
    start = time.process_time()
    lid, lm = _MODELS["lid"], _MODELS["lm"]
    out = []
    for doc in docs:
        doc = doc.with_text(normalize_content(doc.text))
        warnings = annotate_quality(doc.text)
        ppl = None
        if lm is not None:
            try:
                ppl = perplexity(lm, doc.text).value
            except UnscoreableText:
                log.info("%s: no tokens to score; kept unscored", doc.docid)
        doc = apply_language(doc, classify_document(lid, doc))
        res = DocOutcome(doc, tuple(sorted(w.value for w in warnings)), ppl)
        verdict = prefilter(doc, t.min_chars, t.min_lang_score)
        if not verdict:
            res.stage, res.reason = "prefilter", ",".join(verdict.reasons)
        else:
            verdict = filter_quality(warnings, {QualityWarning(w) for w in t.quality_policy})
            if not verdict:
                res.stage, res.reason = "quality", ",".join(verdict.reasons)
            elif t.harmful_filter and ppl is not None:
                verdict = filter_harmful(ppl, t.harmful_ppl_threshold)
                if not verdict:
                    res.stage, res.reason = "harmful", ",".join(verdict.reasons)
        out.append(res)
    return out, time.process_time() - start


def _curated_batch(args):
    docs, t = args
    start = time.process_time()
    lid = _MODELS["lid"]
    out = []
    for doc in docs:
        doc = doc.with_text(normalize_content(doc.text))
        doc = apply_language(doc, classify_document(lid, doc))
        res = DocOutcome(doc, (), None)
        verdict = prefilter(doc, t.min_chars, t.min_lang_score)
        if not verdict:
            res.stage, res.reason = "prefilter", ",".join(verdict.reasons)
        out.append(res)
    return out, time.process_time() - start


def _dedup_task(args):
    docs, d = args
    start = time.process_time()
    res = dedup_partition(docs, d.threshold, d.num_perm, d.bands, d.seed, d.k, d.exact_verify)
    return res, time.process_time() - start


# --- outputs ------------------------------------------------------------------------

def _sorted_docs(docs):
    return sorted(docs, key=lambda d: docid_key(d.docid))


def _write_by_language(folder: Path, docs) -> None:
    folder.mkdir(parents=True, exist_ok=True)
    groups = defaultdict(list)
    for d in docs:
        groups[d.meta.language].append(d)
    for lang in sorted(groups):
        write_jsonl(folder / f"{lang}.jsonl", _sorted_docs(groups[lang]))


def _write_final(out: Path, docs) -> None:
    final = out / "final"
    final.mkdir(parents=True, exist_ok=True)
    groups = defaultdict(list)
    for d in docs:
        corpus, lang, _, _ = split_docid(d.docid)
        groups[(corpus, lang)].append(d)
    for corpus, lang in sorted(groups):
        write_jsonl(final / f"{corpus}.{lang}.jsonl", _sorted_docs(groups[(corpus, lang)]), require_language=True)


def _write_droplogs(out: Path, drops: list[dict]) -> None:
    folder = out / "droplogs"
    folder.mkdir(parents=True, exist_ok=True)
    for stage in STAGES:
        entries = sorted((e for e in drops if e["stage"] == stage), key=lambda e: docid_key(e["docid"]))
        with open(folder / f"{stage}.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for e in entries:
                fh.write(format_drop_entry(e) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _lang_counts(docs) -> dict[str, int]:
    counts = defaultdict(int)
    for d in docs:
        counts[d.meta.language] += 1
    return dict(sorted(counts.items()))


@dataclass
class RunResult:
    output_root: Path
    ingested: dict[str, int]
    kept: dict[str, int]
    drops: list[dict]
    timings: list[analytics.StageTiming]

    def drops_by_stage(self) -> dict[str, int]:
        out = {s: 0 for s in STAGES}
        for e in self.drops:
            out[e["stage"]] += 1
        return out


def _finish(cfg, out: Path, tagged, kept, drops, timings) -> RunResult:
    _write_final(out, kept)
    _write_droplogs(out, drops)
    ingested, kept_counts = _lang_counts(tagged), _lang_counts(kept)
    _write_json(out / "counts.json", {
        "schema_version": RUN_SCHEMA_VERSION,
        "pipeline": cfg.pipeline,
        "ingested": ingested,
        "kept": kept_counts,
    })
    _write_json(out / "timings.json", {t.stage: t.cpu_seconds for t in timings})
    result = RunResult(out, ingested, kept_counts, drops, timings)
    run_analyze(out)
    return result


def _require_models(cfg: PipelineConfig, need_lm: bool) -> None:
    if not cfg.lid_model:
        raise InputError("no language identification model configured (lid_model)")
    if not Path(cfg.lid_model).is_file():
        raise InputError(f"language identification model not found: {cfg.lid_model}")
    if need_lm:
        if not cfg.harmful_lm:
            raise InputError("harmful filtering is enabled but no harmful_lm is configured")
        if not Path(cfg.harmful_lm).is_file():
            raise InputError(f"harmful language model not found: {cfg.harmful_lm}")


def _append_drops(outcomes, drops):
    for o in outcomes:
        if o.stage:
            drops.append(drop_entry(o.doc.docid, o.stage, o.reason))


def _dedup_all(cfg, partitions: dict, folder_of) -> tuple[list, list, float, list]:
    keys = sorted(partitions)
    tasks = [(_sorted_docs(partitions[k]), cfg.dedup) for k in keys]
    results = _map(_dedup_task, tasks, min(cfg.workers, max(len(tasks), 1)), None, None)
    kept, drops, clusters, cpu = [], [], defaultdict(list), 0.0
    for key, (res, secs) in zip(keys, results):
        kept += res.kept
        drops += res.drops
        cpu += secs
        clusters[folder_of(key)] += [c.to_dict(f"{key[0]}/{key[1]}") for c in res.clusters]
    return kept, drops, cpu, clusters


# --- pipelines ------------------------------------------------------------------------

def _corpus_dirs(root: Path) -> list[tuple[str, Path]]:
    subdirs = sorted(p for p in root.iterdir() if p.is_dir())
    if subdirs:
        return [(p.name, p) for p in subdirs]
    return [(root.name, root)]


def run_curated(cfg: PipelineConfig) -> RunResult:
    """Ingest -> normalize -> language detection -> prefilter (-> optional dedup)."""
    _require_models(cfg, need_lm=False)
    root, out = Path(cfg.input_root), Path(cfg.output_root)
    if not root.is_dir():
        raise InputError(f"input root not found: {root}")
    out.mkdir(parents=True, exist_ok=True)

    start = time.process_time()
    raw = []
    for corpus, path in _corpus_dirs(root):
        docs = list(ingest_text_corpus(path, corpus))
        (out / corpus / "ingested").mkdir(parents=True, exist_ok=True)
        write_jsonl(out / corpus / "ingested" / "documents.jsonl", docs)
        raw += docs
    conversion = time.process_time() - start

    batches = [(b, cfg.thresholds) for b in _batches(raw)]
    results = _map(_curated_batch, batches, cfg.workers, cfg.lid_model, None)
    outcomes = [o for batch, _ in results for o in batch]
    filtering = sum(secs for _, secs in results)
    drops: list[dict] = []
    _append_drops(outcomes, drops)
    tagged = [o.doc for o in outcomes]
    survivors = [o.doc for o in outcomes if not o.stage]
    by_corpus = defaultdict(list)
    for d in tagged:
        by_corpus[split_docid(d.docid)[0]].append(d)
    for corpus, docs in by_corpus.items():
        _write_by_language(out / corpus / "tagged", docs)
        _write_by_language(out / corpus / "prefiltered", [d for d in survivors if split_docid(d.docid)[0] == corpus])

    dedup_secs = 0.0
    if cfg.dedup.curated:
        parts = defaultdict(list)
        for d in survivors:
            parts[(split_docid(d.docid)[0], d.meta.language)].append(d)
        survivors, dd, dedup_secs, clusters = _dedup_all(cfg, parts, lambda key: key[0])
        drops += dd
        for corpus, rows in clusters.items():
            _write_clusters(out / corpus / "dedup", rows)
    timings = [analytics.StageTiming("conversion", conversion), analytics.StageTiming("filtering", filtering)]
    if cfg.dedup.curated:
        timings.append(analytics.StageTiming("deduplication", dedup_secs))
    return _finish(cfg, out, tagged, survivors, drops, timings)


def _write_clusters(folder: Path, rows: list[dict]) -> None:
    folder.mkdir(parents=True, exist_ok=True)
    with open(folder / "clusters.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def web_corpus_name(label: str) -> str:
    return f"cc-{label}"


def _dump_dirs(cfg: PipelineConfig, root: Path) -> list[str]:
    if cfg.dumps is not None:
        labels = list(cfg.dumps)
    else:
        labels = [p.name for p in root.iterdir() if p.is_dir() and (p / "raw").is_dir()]
    labels = sorted(set(labels), key=lambda s: parse_dump_label(s))
    for label in labels:
        if not (root / label / "raw").is_dir():
            raise InputError(f"no raw WET directory for dump {label}: {root / label / 'raw'}")
    if not labels:
        raise InputError(f"no dumps with a raw/ directory under {root}")
    return labels


def run_web(cfg: PipelineConfig) -> RunResult:
    """WET -> normalize -> annotate + perplexity + language -> prefilter -> quality + harmful -> dedup."""
    _require_models(cfg, need_lm=cfg.thresholds.harmful_filter)
    root, out = Path(cfg.input_root), Path(cfg.output_root)
    if not root.is_dir():
        raise InputError(f"input root not found: {root}")
    labels = _dump_dirs(cfg, root)
    out.mkdir(parents=True, exist_ok=True)
    lm_path = cfg.harmful_lm if cfg.thresholds.harmful_filter else None

    conversion = filtering = 0.0
    tagged, drops, partitions = [], [], defaultdict(list)
    for label in labels:
        dump, corpus = parse_dump_label(label), web_corpus_name(label)
        start = time.process_time()
        raw = []
        (out / label / "converted").mkdir(parents=True, exist_ok=True)
        for fileno, path in enumerate(list_wet_files(root / label / "raw")):
            try:
                docs = list(iter_wet_file(path, dump, corpus, fileno))
            except (OSError, ValueError) as exc:
                raise InputError(f"{path}: {exc}") from exc
            stem = path.name.removesuffix(".gz").removesuffix(".wet")
            write_jsonl(out / label / "converted" / f"{stem}.jsonl", docs)
            raw += docs
        conversion += time.process_time() - start

        batches = [(b, cfg.thresholds) for b in _batches(raw)]
        results = _map(_web_batch, batches, cfg.workers, cfg.lid_model, lm_path)
        outcomes = [o for batch, _ in results for o in batch]
        filtering += sum(secs for _, secs in results)
        _append_drops(outcomes, drops)

        docs = [o.doc for o in outcomes]
        tagged += docs
        _write_by_language(out / label / "tagged", docs)
        annotated = out / label / "tagged" / "annotations.jsonl"
        with open(annotated, "w", encoding="utf-8", newline="\n") as fh:
            for o in sorted(outcomes, key=lambda o: docid_key(o.doc.docid)):
                fh.write(json.dumps({"docid": o.doc.docid, "warnings": list(o.warnings),
                                     "harmful_ppl": o.harmful_ppl}, allow_nan=False) + "\n")
        _write_by_language(out / label / "prefiltered", [o.doc for o in outcomes if o.stage != "prefilter"])
        survivors = [o.doc for o in outcomes if not o.stage]
        _write_by_language(out / label / "filtered", survivors)
        for d in survivors:
            partitions[(corpus, d.meta.language)].append(d)

    label_of = {web_corpus_name(lb): lb for lb in labels}
    kept, dd, dedup_secs, clusters = _dedup_all(cfg, partitions, lambda key: label_of[key[0]])
    drops += dd
    for label in labels:
        _write_clusters(out / label / "dedup", clusters.get(label, []))
    timings = [
        analytics.StageTiming("conversion", conversion),
        analytics.StageTiming("filtering", filtering),
        analytics.StageTiming("deduplication", dedup_secs),
    ]
    return _finish(cfg, out, tagged, kept, drops, timings)


def run(cfg: PipelineConfig) -> RunResult:
    return run_curated(cfg) if cfg.pipeline == "curated" else run_web(cfg)


# --- analysis -----------------------------------------------------------------------

REQUIRED_RUN_FILES = ("counts.json", *(f"droplogs/{s}.jsonl" for s in STAGES))


def read_drop_logs(run_dir) -> list[dict]:
    entries = []
    for stage in STAGES:
        with open(Path(run_dir) / "droplogs" / f"{stage}.jsonl", encoding="utf-8") as fh:
            entries += [json.loads(line) for line in fh if line.strip()]
    return entries


def _correlation(xs, ys):
    if len(xs) < 3:
        return None
    try:
        return analytics.pearson(xs, ys)
    except ValueError:
        return None


def _disparity(fn, stats):
    try:
        return fn(stats)
    except analytics.DegenerateInput as exc:
        log.info("disparity index skipped: %s", exc)
        return None


def run_analyze(run_dir, out_dir=None) -> list[Path]:
    """Recompute removal statistics and indices from a finished run's drop-logs and counts."""
    run_dir = Path(run_dir)
    missing = [name for name in REQUIRED_RUN_FILES if not (run_dir / name).is_file()]
    if missing:
        raise InputError(f"incomplete run directory {run_dir}; missing: {', '.join(missing)}")
    try:
        counts = json.loads((run_dir / "counts.json").read_text(encoding="utf-8"))
        ingested = counts["ingested"]
        drops = read_drop_logs(run_dir)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{run_dir}: unreadable run files: {exc}") from exc
    stats = analytics.compute_removal_stats(drops, ingested)
    rows = list(stats)
    disparity = {
        "filtering": _disparity(analytics.filtering_disparity, stats),
        "deduplication": _disparity(analytics.dedup_disparity, stats),
    }
    dedup_rows = [r for r in rows if r.docs_after_filtering > 0]
    correlations = {
        "filtering_vs_size": _correlation([r.docs_ingested for r in rows], [r.r_filter for r in rows]),
        "dedup_vs_filtered_size": _correlation([r.docs_after_filtering for r in dedup_rows],
                                               [r.r_dedup for r in dedup_rows]),
    }
    out = Path(out_dir) if out_dir else run_dir / "report"
    written = analytics.emit_report(stats, disparity, correlations, None, out)
    timings_path = run_dir / "timings.json"
    if timings_path.is_file():
        raw = json.loads(timings_path.read_text(encoding="utf-8"))
        timings = [analytics.StageTiming(s, float(raw[s])) for s in TIMING_STAGES if s in raw]
        if sum(t.cpu_seconds for t in timings) > 0:
            written.append(analytics.write_stage_share_csv(timings, out))
    return written
