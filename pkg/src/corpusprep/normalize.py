"""Content normalization, and the lowercase/digit/accent folding used before LM scoring."""
from __future__ import annotations

import re
import unicodedata

_TAG_RE = re.compile(r"<[^<>]+>")
_ENTITY_RE = re.compile(r"&(amp|lt|gt|quot);|&#(\d{1,7});|&#[xX]([0-9a-fA-F]{1,6});")
_NAMED = {"amp": "&", "lt": "<", "gt": ">", "quot": '"'}
_HSPACE_RE = re.compile(r"[^\S\n]+")
_TRAILING_RE = re.compile(r" +\n")
_BLANKS_RE = re.compile(r"\n{3,}")

_MAX_PASSES = 16


def _decode_entity(m: re.Match) -> str:
    if m.group(1):
        return _NAMED[m.group(1)]
    code = int(m.group(2)) if m.group(2) else int(m.group(3), 16)
    if code > 0x10FFFF or 0xD800 <= code <= 0xDFFF:
        return ""
    ch = chr(code)
    # a decoded &#10; must not add a line
    if ch.isspace():
        return " "
    if unicodedata.category(ch) == "Cc":
        return ""
    return ch


def _normalize_once(text: str) -> str:
    text = unicodedata.normalize("NFKC", text)
    text = _TAG_RE.sub("", text)
    text = _ENTITY_RE.sub(_decode_entity, text)
    text = unicodedata.normalize("NFKC", text)
    text = _HSPACE_RE.sub(" ", text)
    text = _TRAILING_RE.sub("\n", text)
    text = _BLANKS_RE.sub("\n\n", text)
    return text.strip()


def normalize_content(text: str) -> str:
    """NFKC, strip tags and common entities, and tidy whitespace.

    Entity decoding can expose new tags or entities (``&amp;lt;b&amp;gt;``),
    so the steps are repeated until the text stops changing. That makes the
    function idempotent.
    """
    for _ in range(_MAX_PASSES):
        out = _normalize_once(text)
        if out == text:
            return out
        text = out
    return text


def is_idempotent_check(text: str) -> bool:
    once = normalize_content(text)
    return normalize_content(once) == once


def _lm_char(ch: str) -> str:
    cat = unicodedata.category(ch)
    if cat == "Nd" or ch.isdigit():
        return "0"
    if cat[0] in ("P", "M"):
        return ""
    return ch


def _fold_upper(ch: str) -> str:
    # a few capitals (e.g. U+03D2) have no lowercase mapping of their own
    folded = unicodedata.normalize("NFKD", ch).lower()
    return "".join(c for c in map(_lm_char, folded) if not c.isupper())


def normalize_for_lm(text: str) -> list[str]:
    text = unicodedata.normalize("NFD", text.lower())
    text = "".join(_lm_char(ch) for ch in text)
    if any(ch.isupper() for ch in text):
        text = "".join(_fold_upper(ch) if ch.isupper() else ch for ch in text)
    return text.split()
