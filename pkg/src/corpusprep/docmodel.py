"""Document and metadata records, and their JSONL wire format.

One document is one JSON line::

    {"meta": {"docid": ..., "url": ..., "title": ..., "download_date": ...,
              "language": ..., "language_score": ...}, "text": ...}

Optional fields are omitted when absent. Meta keys we do not know about are
kept in :attr:`Metadata.extra` and written back after the known keys.
"""
from __future__ import annotations

import datetime as _dt
import enum
import json
import math
import re
from dataclasses import dataclass, field, replace
from typing import Any

META_KEYS = ("docid", "url", "title", "download_date", "language", "language_score")

_LANG_RE = re.compile(r"^[a-z]{2,3}$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


class DocumentError(ValueError):
    pass


class ValidationError(DocumentError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class DocumentParseError(DocumentError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class SchemaError(DocumentError):
    pass


class QualityWarning(str, enum.Enum):
    TINY = "tiny"
    NOISY = "noisy"
    HEADER = "header"
    FOOTER = "footer"
    SHORT_SENTENCES = "short_sentences"


@dataclass(frozen=True)
class Metadata:
    docid: str
    url: str | None = None
    title: str | None = None
    download_date: str | None = None
    language: str | None = None
    language_score: float | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=True, hash=False)


@dataclass(frozen=True)
class Document:
    meta: Metadata
    text: str

    @property
    def docid(self) -> str:
        return self.meta.docid

    def with_text(self, text: str) -> "Document":
        return Document(self.meta, text)

    def with_meta(self, **changes: Any) -> "Document":
        return Document(replace(self.meta, **changes), self.text)


@dataclass(frozen=True)
class Annotations:
    warnings: frozenset[QualityWarning] = frozenset()
    harmful_ppl: float | None = None
    line_languages: tuple[tuple[str, float, int], ...] | None = None

    def __post_init__(self):
        if self.harmful_ppl is not None and not (
            math.isfinite(self.harmful_ppl) and self.harmful_ppl > 0
        ):
            raise ValueError(f"harmful_ppl must be positive and finite, got {self.harmful_ppl}")


def make_docid(corpus: str, language: str, fileno: int, docno: int) -> str:
    if not corpus or not language:
        raise ValueError("corpus and language must be non-empty")
    for name, seg in (("corpus", corpus), ("language", language)):
        if "/" in seg or "\n" in seg:
            raise ValueError(f"{name} may not contain '/' or newlines: {seg!r}")
    if fileno < 0 or docno < 0:
        raise ValueError("fileno and docno must be non-negative")
    return f"{corpus}/{language}/{int(fileno)}/{int(docno)}"


def split_docid(docid: str) -> tuple[str, str, int, int]:
    parts = docid.split("/")
    if len(parts) != 4 or not all(parts):
        raise ValueError(f"docid must have four non-empty segments: {docid!r}")
    corpus, lang, fileno, docno = parts
    if not (fileno.isdigit() and docno.isdigit()):
        raise ValueError(f"fileno/docno must be non-negative integers: {docid!r}")
    return corpus, lang, int(fileno), int(docno)


def docid_key(docid: str) -> tuple[str, str, int, int]:
    """Sort key giving (corpus, language, fileno, docno) tuple order."""
    return split_docid(docid)


def with_docid_language(docid: str, language: str) -> str:
    corpus, _, fileno, docno = split_docid(docid)
    return make_docid(corpus, language, fileno, docno)


def validate_metadata(doc: Document, require_language: bool = True) -> list[str]:
    meta = doc.meta
    out = []
    try:
        split_docid(meta.docid)
    except (ValueError, AttributeError):
        out.append("docid: must be corpus/language/fileno/docno with integer fileno and docno")
    for name in ("url", "title"):
        value = getattr(meta, name)
        if value is not None and not isinstance(value, str):
            out.append(f"{name}: must be text")
    if meta.download_date is not None:
        ok = isinstance(meta.download_date, str) and _DATE_RE.match(meta.download_date)
        if ok:
            try:
                _dt.date.fromisoformat(meta.download_date)
            except ValueError:
                ok = False
        if not ok:
            out.append("download_date: must be a valid YYYY-MM-DD date")
    if meta.language is None:
        if require_language:
            out.append("language: missing")
    elif not (isinstance(meta.language, str) and _LANG_RE.match(meta.language)):
        out.append("language: must be a 2-3 letter ISO 639 code")
    score = meta.language_score
    if score is None:
        if require_language:
            out.append("language_score: missing")
    elif (
        isinstance(score, bool)
        or not isinstance(score, (int, float))
        or not math.isfinite(score)
        or not 0.0 <= score <= 1.0
    ):
        out.append("language_score: must be a real number in [0, 1]")
    if not isinstance(doc.text, str):
        out.append("text: must be text")
    return out


def document_to_dict(doc: Document) -> dict[str, Any]:
    meta = doc.meta
    m: dict[str, Any] = {}
    for key in META_KEYS:
        value = getattr(meta, key)
        if value is not None:
            m[key] = value
    for key, value in meta.extra.items():
        if key not in m:
            m[key] = value
    return {"meta": m, "text": doc.text}


def serialize_document(doc: Document, require_language: bool = False) -> str:
    """Render ``doc`` as one JSON line, without the trailing newline.

    Language fields are optional here because intermediate stages write
    documents before language detection has run.
    """
    violations = validate_metadata(doc, require_language=require_language)
    if violations:
        raise ValidationError(violations)
    return json.dumps(document_to_dict(doc), ensure_ascii=False, allow_nan=False)


def _byte_offset(line: str, char_pos: int) -> int:
    return len(line[:char_pos].encode("utf-8", "surrogatepass"))


def _encodable(obj) -> bool:
    if isinstance(obj, str):
        try:
            obj.encode("utf-8")
        except UnicodeEncodeError:
            return False
        return True
    if isinstance(obj, dict):
        return all(_encodable(k) and _encodable(v) for k, v in obj.items())
    if isinstance(obj, list):
        return all(_encodable(v) for v in obj)
    return True


def parse_document(line: str | bytes) -> Document:
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DocumentParseError("invalid UTF-8", exc.start) from exc
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DocumentParseError(exc.msg, _byte_offset(line, exc.pos)) from exc
    # lone surrogates from \ud800-style escapes are not encodable text
    if not _encodable(obj):
        raise DocumentParseError("escape decodes to invalid UTF-8 (lone surrogate)")

    if not isinstance(obj, dict):
        raise SchemaError("record must be a JSON object")
    if "text" not in obj or not isinstance(obj["text"], str):
        raise SchemaError("missing or non-text 'text'")
    meta = obj.get("meta")
    if not isinstance(meta, dict) or "docid" not in meta:
        raise SchemaError("missing meta.docid")
    known = {k: meta[k] for k in META_KEYS if k in meta}
    extra = {k: v for k, v in meta.items() if k not in META_KEYS}
    score = known.get("language_score")
    if isinstance(score, int) and not isinstance(score, bool):
        known["language_score"] = float(score)
    return Document(Metadata(**known, extra=extra), obj["text"])


def read_jsonl(path) -> list[Document]:
    with open(path, encoding="utf-8", newline="\n") as fh:
        return [parse_document(line) for line in fh if line.strip()]


def write_jsonl(path, docs, require_language: bool = False) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(serialize_document(doc, require_language=require_language))
            fh.write("\n")
            n += 1
    return n
