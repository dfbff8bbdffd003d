"""Reading WET crawl files and plain-text corpora into documents."""
from __future__ import annotations

import gzip
import io
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterator

from .docmodel import (
    Document,
    DocumentError,
    Metadata,
    make_docid,
    parse_document,
)

log = logging.getLogger(__name__)

UNTAGGED = "und"

_LABEL_RE = re.compile(r"^(\d{4})-(\d{1,2})$")


class DumpLabelError(ValueError):
    pass


class MalformedRecordError(ValueError):
    def __init__(self, message: str, index: int):
        self.index = index
        super().__init__(f"record {index}: {message}")


class TruncatedRecordError(MalformedRecordError):
    pass


@dataclass(frozen=True, order=True)
class DumpRef:
    year: int
    week: int

    def __post_init__(self):
        if self.year < 2008:
            raise DumpLabelError(f"year must be >= 2008, got {self.year}")
        if not 1 <= self.week <= 53:
            raise DumpLabelError(f"week must be in [1, 53], got {self.week}")

    @property
    def label(self) -> str:
        return f"{self.year}-{self.week}"

    def __str__(self) -> str:
        return self.label


def parse_dump_label(label: str) -> DumpRef:
    m = _LABEL_RE.match(label.strip())
    if not m:
        raise DumpLabelError(f"dump label must look like YYYY-WW: {label!r}")
    return DumpRef(int(m.group(1)), int(m.group(2)))


@dataclass
class WetRecord:
    headers: dict[str, str]
    body: bytes

    @property
    def warc_type(self) -> str | None:
        return self.headers.get("WARC-Type")


def _read_line(stream: BinaryIO) -> bytes:
    return stream.readline()


def parse_wet_stream(stream: BinaryIO) -> Iterator[WetRecord]:
    """Yield the records of an uncompressed WARC/WET stream in file order.

    Blank lines between records are skipped, so both the CRLF CRLF record
    separator and the looser LF-only variant seen in hand-made files parse.
    """
    index = 0
    while True:
        line = _read_line(stream)
        while line in (b"\r\n", b"\n"):
            line = _read_line(stream)
        if not line:
            return
        if not line.startswith(b"WARC/"):
            raise MalformedRecordError(f"expected WARC version line, got {line[:40]!r}", index)
        headers: dict[str, str] = {}
        while True:
            line = _read_line(stream)
            if not line:
                raise TruncatedRecordError("stream ended inside header block", index)
            if line in (b"\r\n", b"\n"):
                break
            name, sep, value = line.decode("utf-8", "replace").partition(":")
            if not sep:
                raise MalformedRecordError(f"bad header line {line[:40]!r}", index)
            headers[name.strip()] = value.strip()
        if "WARC-Type" not in headers:
            raise MalformedRecordError("missing WARC-Type header", index)
        length = headers.get("Content-Length")
        if length is None:
            raise MalformedRecordError("missing Content-Length header", index)
        try:
            n = int(length)
        except ValueError:
            raise MalformedRecordError(f"bad Content-Length {length!r}", index) from None
        if n < 0:
            raise MalformedRecordError(f"negative Content-Length {n}", index)
        body = stream.read(n)
        if len(body) != n:
            raise TruncatedRecordError(f"body has {len(body)} of {n} bytes", index)
        yield WetRecord(headers, body)
        index += 1


def open_wet(path: str | os.PathLike) -> BinaryIO:
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def wet_to_document(
    record: WetRecord, dump: DumpRef, corpus: str, fileno: int, docno: int
) -> Document | None:
    """Turn a ``conversion`` record into an untagged document, else None.

    The docid carries the placeholder language ``und`` until language
    detection rewrites it.
    """
    if record.warc_type != "conversion":
        return None
    date = record.headers.get("WARC-Date")
    download_date = date[:10] if date else None
    meta = Metadata(
        docid=make_docid(corpus, UNTAGGED, fileno, docno),
        url=record.headers.get("WARC-Target-URI") or None,
        download_date=download_date,
    )
    return Document(meta, record.body.decode("utf-8", errors="replace"))


def iter_wet_file(path, dump: DumpRef, corpus: str, fileno: int) -> Iterator[Document]:
    with open_wet(path) as fh:
        docno = 0
        for record in parse_wet_stream(fh):
            doc = wet_to_document(record, dump, corpus, fileno, docno)
            if doc is not None:
                yield doc
                docno += 1


def list_wet_files(raw_dir) -> list[Path]:
    raw_dir = Path(raw_dir)
    return sorted(
        p for p in raw_dir.iterdir()
        if p.is_file() and (p.name.endswith(".wet") or p.name.endswith(".wet.gz"))
    )


@dataclass
class IngestStats:
    files: int = 0
    documents: int = 0
    errors: list[str] = field(default_factory=list)


def ingest_text_corpus(
    directory, corpus: str, stats: IngestStats | None = None
) -> Iterator[Document]:
    """Walk ``directory`` for ``.txt`` and ``.jsonl`` files in sorted path order.

    A ``.txt`` file is one document. A ``.jsonl`` file holds documents already
    in schema; their docids are reassigned (fileno = file ordinal, docno =
    record ordinal) and the other metadata is kept. Bad files or lines are
    recorded in ``stats.errors`` and skipped.
    """
    stats = stats if stats is not None else IngestStats()
    root = Path(directory)
    paths = sorted(
        (p for p in root.rglob("*") if p.is_file() and p.suffix in (".txt", ".jsonl")),
        key=lambda p: p.relative_to(root).as_posix(),
    )
    for fileno, path in enumerate(paths):
        stats.files += 1
        try:
            raw = path.read_bytes()
        except OSError as exc:
            stats.errors.append(f"{path}: {exc}")
            log.warning("cannot read %s: %s", path, exc)
            continue
        if path.suffix == ".txt":
            text = raw.decode("utf-8", errors="replace")
            yield Document(Metadata(docid=make_docid(corpus, UNTAGGED, fileno, 0)), text)
            stats.documents += 1
            continue
        docno = 0
        for lineno, line in enumerate(io.BytesIO(raw), start=1):
            if not line.strip():
                continue
            try:
                doc = parse_document(line)
            except DocumentError as exc:
                stats.errors.append(f"{path}:{lineno}: {exc}")
                log.warning("skipping %s:%d: %s", path, lineno, exc)
                continue
            lang = doc.meta.language or UNTAGGED
            try:
                docid = make_docid(corpus, lang, fileno, docno)
            except ValueError as exc:
                stats.errors.append(f"{path}:{lineno}: {exc}")
                continue
            yield doc.with_meta(docid=docid)
            stats.documents += 1
            docno += 1
