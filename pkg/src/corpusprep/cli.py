"""Command-line entry point: ``corpusprep <subcommand> ...``.

Exit codes: 0 success, 1 input error, 2 config error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .dedup import dedup_partition, partition_key
from .docmodel import DocumentError, docid_key, read_jsonl, write_jsonl
from .ingest import IngestStats, ingest_text_corpus, iter_wet_file, list_wet_files, parse_dump_label
from .langid import LidModel, apply_language, classify_document, train_profiles
from .ngram_lm import DEFAULT_ORDER, KNModel, UnscoreableText, perplexity, train_from_texts
from .normalize import normalize_content
from .pipeline import ConfigError, InputError, PipelineConfig, run_analyze, run_curated, run_web, web_corpus_name
from .quality import format_drop_entry

log = logging.getLogger("corpusprep")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2


def _config(args, pipeline: str) -> PipelineConfig:
    obj = {}
    if args.config:
        try:
            obj = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
    obj.setdefault("pipeline", pipeline)
    if obj["pipeline"] != pipeline:
        raise ConfigError(f"config is for the {obj['pipeline']} pipeline, not {pipeline}")
    if args.input:
        obj["input_root"] = args.input
    if args.output:
        obj["output_root"] = args.output
    if args.workers is not None:
        obj["workers"] = args.workers
    if args.seed is not None:
        obj.setdefault("dedup", {})
        if isinstance(obj["dedup"], dict):
            obj["dedup"]["seed"] = args.seed
    if getattr(args, "dump", None):
        obj["dumps"] = args.dump
    return PipelineConfig.from_dict(obj)


def _summary(result) -> None:
    for stage, n in result.drops_by_stage().items():
        print(f"{stage:<10} dropped {n}")
    total_in, total_kept = sum(result.ingested.values()), sum(result.kept.values())
    print(f"ingested {total_in}, kept {total_kept} -> {result.output_root}")


def cmd_run_curated(args) -> int:
    _summary(run_curated(_config(args, "curated")))
    return EXIT_OK


def cmd_run_web(args) -> int:
    _summary(run_web(_config(args, "web")))
    return EXIT_OK


def cmd_analyze(args) -> int:
    for path in run_analyze(args.input, args.output):
        print(path)
    return EXIT_OK


def cmd_ingest(args) -> int:
    src = Path(args.input)
    if not src.is_dir():
        raise InputError(f"not a directory: {src}")
    if args.dump:
        if len(args.dump) != 1:
            raise ConfigError("ingest takes a single --dump")
        label = args.dump[0]
        dump = parse_dump_label(label)
        docs = []
        for fileno, path in enumerate(list_wet_files(src)):
            docs += iter_wet_file(path, dump, args.corpus or web_corpus_name(label), fileno)
        n = write_jsonl(args.output, docs)
        errors = []
    else:
        stats = IngestStats()
        n = write_jsonl(args.output, ingest_text_corpus(src, args.corpus or src.name, stats))
        errors = stats.errors
    for e in errors:
        print(f"skipped: {e}", file=sys.stderr)
    print(f"{n} documents -> {args.output}")
    return EXIT_OK


def cmd_lid_train(args) -> int:
    src = Path(args.input)
    files = sorted(src.glob("*.txt")) if src.is_dir() else []
    if not files:
        raise InputError(f"no <language>.txt training files in {src}")
    corpus = {p.stem: p.read_text(encoding="utf-8") for p in files}
    model = train_profiles(corpus, alpha=args.alpha, min_chars=args.min_chars)
    model.save(args.output)
    print(f"languages {', '.join(model.languages)} -> {args.output}")
    return EXIT_OK


def _load_lid(path) -> LidModel:
    try:
        return LidModel.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot load language model {path}: {exc}") from exc


def _load_lm(path) -> KNModel:
    try:
        return KNModel.load(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot load n-gram model {path}: {exc}") from exc


def cmd_lid_tag(args) -> int:
    model = _load_lid(args.model)
    docs = read_jsonl(args.input)
    out = []
    for doc in docs:
        doc = doc.with_text(normalize_content(doc.text))
        out.append(apply_language(doc, classify_document(model, doc)))
    write_jsonl(args.output, out)
    print(f"{len(out)} documents tagged -> {args.output}")
    return EXIT_OK


def cmd_lm_train(args) -> int:
    src = Path(args.input)
    paths = sorted(src.rglob("*.txt")) if src.is_dir() else [src]
    texts = []
    for p in paths:
        try:
            texts.append(p.read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read {p}: {exc}") from exc
    try:
        model = train_from_texts(texts, args.order)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    model.save(args.output)
    print(f"order {model.order}, vocabulary {len(model.vocab)} -> {args.output}")
    return EXIT_OK


def cmd_lm_score(args) -> int:
    model = _load_lm(args.model)
    out = []
    for doc in read_jsonl(args.input):
        try:
            ppl = perplexity(model, doc.text).value
        except UnscoreableText:
            log.warning("%s: no tokens to score", doc.docid)
            out.append(doc)
            continue
        out.append(doc.with_meta(extra={**doc.meta.extra, args.field: ppl}))
    write_jsonl(args.output, out)
    print(f"{len(out)} documents scored -> {args.output}")
    return EXIT_OK


def cmd_dedup(args) -> int:
    docs = read_jsonl(args.input)
    parts: dict = {}
    for d in docs:
        parts.setdefault(partition_key(d), []).append(d)
    kept, drops, clusters = [], [], []
    for key in sorted(parts):
        res = dedup_partition(parts[key], args.threshold, args.num_perm, args.bands,
                              args.seed if args.seed is not None else 1, args.k, args.exact)
        kept += res.kept
        drops += res.drops
        clusters += [c.to_dict(f"{key[0]}/{key[1]}") for c in res.clusters]
    kept.sort(key=lambda d: docid_key(d.docid))
    write_jsonl(args.output, kept)
    out = Path(args.output)
    with open(out.with_name(out.stem + ".droplog.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        for e in drops:
            fh.write(format_drop_entry(e) + "\n")
    with open(out.with_name(out.stem + ".clusters.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        for c in clusters:
            fh.write(json.dumps(c, ensure_ascii=False) + "\n")
    print(f"kept {len(kept)} of {len(docs)}; {len(clusters)} clusters")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.input)
    if path.is_dir():
        path = path / "report.json"
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read report {path}: {exc}") from exc
    print(f"{'language':<10}{'ingested':>10}{'r_filter%':>11}{'r_dedup%':>10}")
    for row in report["removal"]:
        print(f"{row['language']:<10}{row['docs_ingested']:>10}{row['r_filter']:>11.2f}{row['r_dedup']:>10.2f}")
    for name, rep in report["disparity"].items():
        if rep is None:
            print(f"{name} disparity: undefined")
            continue
        ranked = ", ".join(f"{r['language']} {r['di']:+.3f}" for r in rep["languages"])
        print(f"{name} disparity ({rep['mode']}): {ranked}")
    for name, c in report["correlations"].items():
        if c is not None:
            print(f"{name}: r={c['r']:.3f} n={c['n']} p={c['p_two_tailed']}")
    return EXIT_OK


def _add_io(p, inp="input", out=True):
    p.add_argument("--input", "--in", dest="input", required=True, help=inp)
    if out:
        p.add_argument("--output", "--out", dest="output", required=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corpusprep", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, fn, helptext in (("run-curated", cmd_run_curated, "curated pipeline"),
                               ("run-web", cmd_run_web, "web pipeline over WET dumps")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config")
        p.add_argument("--input", help="input root (overrides config)")
        p.add_argument("--output", help="output root (overrides config)")
        p.add_argument("--workers", type=int)
        p.add_argument("--seed", type=int, help="dedup seed (overrides config)")
        if name == "run-web":
            p.add_argument("--dump", action="append", help="dump label, repeatable")
        p.set_defaults(func=fn)

    p = sub.add_parser("analyze", help="report files from a finished run directory")
    p.add_argument("--input", required=True, help="run directory")
    p.add_argument("--output", help="report directory (default <run>/report)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("ingest", help="WET files (with --dump) or a text corpus to JSONL")
    _add_io(p, "directory")
    p.add_argument("--dump", action="append")
    p.add_argument("--corpus")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("lid-train", help="train the language classifier from <lang>.txt files")
    _add_io(p, "directory of <lang>.txt files")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--min-chars", type=int, default=10_000)
    p.set_defaults(func=cmd_lid_train)

    p = sub.add_parser("lid-tag", help="normalize and language-tag a JSONL file")
    p.add_argument("--model", required=True)
    _add_io(p)
    p.set_defaults(func=cmd_lid_tag)

    p = sub.add_parser("lm-train", help="train a Kneser-Ney model on text files")
    _add_io(p, "text file or directory of .txt files")
    p.add_argument("--order", type=int, default=DEFAULT_ORDER)
    p.set_defaults(func=cmd_lm_train)

    p = sub.add_parser("lm-score", help="add a perplexity field to each document")
    p.add_argument("--model", required=True)
    _add_io(p)
    p.add_argument("--field", default="harmful_ppl")
    p.set_defaults(func=cmd_lm_score)

    p = sub.add_parser("dedup", help="near-duplicate removal per (corpus, language) partition")
    _add_io(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold", type=float, default=0.7)
    p.add_argument("--num-perm", type=int, default=128)
    p.add_argument("--bands", type=int, default=16)
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--exact", action="store_true", help="verify candidates with exact Jaccard")
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("report", help="print a summary of report.json")
    p.add_argument("--input", required=True, help="report.json or its directory")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, DocumentError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
