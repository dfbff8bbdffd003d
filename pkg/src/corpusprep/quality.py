"""Quality warnings, prefiltering and the quality/harmful filter stages."""
from __future__ import annotations

import json
import math
import unicodedata
from dataclasses import dataclass

from .docmodel import Document, QualityWarning

TINY_MIN_LINES = 5
NOISY_MAX_RATIO = 0.5
SHORT_LINE_CHARS = 100
EDGE_FRACTION_DENOM = 5  # first/last 20% of lines
SHORT_SENTENCES_RATIO = 0.5

MIN_CHARS = 200
MIN_LANG_SCORE = 0.5
HARMFUL_PPL_THRESHOLD = 5.0

ALL_WARNINGS = frozenset(QualityWarning)

STAGES = ("prefilter", "quality", "harmful", "dedup")


@dataclass(frozen=True)
class Verdict:
    keep: bool
    reasons: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.keep


KEEP = Verdict(True)


def _is_letter(ch: str) -> bool:
    return unicodedata.category(ch).startswith("L")


def _mostly_short(lines: list[str]) -> bool:
    short = sum(len(line) < SHORT_LINE_CHARS for line in lines)
    return 2 * short > len(lines)


def annotate_quality(text: str, count_whitespace: bool = True) -> frozenset[QualityWarning]:
    """Compute the five line-based quality warnings for normalized ``text``.

    With ``count_whitespace=False`` whitespace is left out of the noisy
    ratio entirely instead of counting as a non-letter.
    """
    lines = text.split("\n")
    n = len(lines)
    out = set()
    if n < TINY_MIN_LINES:
        out.add(QualityWarning.TINY)

    chars = text if count_whitespace else "".join(text.split())
    if chars:
        non_letters = sum(not _is_letter(ch) for ch in chars)
        if non_letters / len(chars) > NOISY_MAX_RATIO:
            out.add(QualityWarning.NOISY)

    window = max(1, -(-n // EDGE_FRACTION_DENOM))
    if _mostly_short(lines[:window]):
        out.add(QualityWarning.HEADER)
    if _mostly_short(lines[-window:]):
        out.add(QualityWarning.FOOTER)

    short = sum(len(line) < SHORT_LINE_CHARS for line in lines)
    if short >= SHORT_SENTENCES_RATIO * n:
        out.add(QualityWarning.SHORT_SENTENCES)
    return frozenset(out)


def prefilter(
    doc: Document, min_chars: int = MIN_CHARS, min_lang_score: float = MIN_LANG_SCORE
) -> Verdict:
    if len(doc.text) < min_chars:
        return Verdict(False, ("too_short",))
    score = doc.meta.language_score
    if score is None or score < min_lang_score:
        return Verdict(False, ("low_lang_score",))
    return KEEP


def filter_quality(warnings, policy=ALL_WARNINGS) -> Verdict:
    hit = set(warnings) & set(policy)
    if hit:
        return Verdict(False, tuple(sorted(w.value for w in hit)))
    return KEEP


def filter_harmful(harmful_ppl: float, threshold: float = HARMFUL_PPL_THRESHOLD) -> Verdict:
    if not math.isfinite(harmful_ppl):
        raise ValueError(f"perplexity must be finite, got {harmful_ppl}")
    if harmful_ppl < threshold:
        return Verdict(False, ("harmful_ppl",))
    return KEEP


def drop_entry(docid: str, stage: str, reason: str) -> dict:
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    return {"docid": docid, "stage": stage, "reason": reason}


def format_drop_entry(entry: dict) -> str:
    return json.dumps(
        {"docid": entry["docid"], "stage": entry["stage"], "reason": entry["reason"]},
        ensure_ascii=False,
    )
