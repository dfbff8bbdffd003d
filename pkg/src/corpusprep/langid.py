"""Character n-gram language identification with OSCAR-style document aggregation.

Lines are classified by a multinomial naive Bayes model over hashed
character 1-3 grams. A document's verdict is then built from byte-weighted
line labels: multilingual when the language mix is balanced enough, otherwise
the language with the highest weighted confidence.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .docmodel import Document, with_docid_language

UNKNOWN = "unknown"
UNDETERMINED = "und"

LINE_THRESHOLD = 0.8
DOC_THRESHOLD = 0.6
MIN_LINES_MULTI = 5
MAX_LANGS_MULTI = 5

NGRAM_ORDERS = (1, 2, 3)
FORMAT = "corpusprep-lid"
VERSION = 1


def _hash64(s: str) -> int:
    return int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "little")


def char_ngrams(line: str, orders=NGRAM_ORDERS) -> Counter:
    padded = f" {line.lower().strip()} "
    grams: Counter = Counter()
    for n in orders:
        for i in range(len(padded) - n + 1):
            grams[_hash64(padded[i:i + n])] += 1
    return grams


@dataclass
class LangProfile:
    language: str
    logprobs: dict[int, float]
    unseen_logprob: float
    prior: float


@dataclass
class LidModel:
    profiles: dict[str, LangProfile]
    alpha: float

    @property
    def languages(self) -> list[str]:
        return sorted(self.profiles)

    def log_scores(self, line: str) -> dict[str, float]:
        grams = char_ngrams(line)
        scores = {}
        for lang in self.languages:
            prof = self.profiles[lang]
            table, unseen = prof.logprobs, prof.unseen_logprob
            scores[lang] = prof.prior + sum(c * table.get(g, unseen) for g, c in grams.items())
        return scores

    def posteriors(self, line: str) -> dict[str, float]:
        scores = self.log_scores(line)
        top = max(scores.values())
        weights = {k: math.exp(v - top) for k, v in scores.items()}
        z = sum(weights.values())
        return {k: w / z for k, w in weights.items()}

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "alpha": self.alpha,
            "ngram_orders": list(NGRAM_ORDERS),
            "languages": self.languages,
            "profiles": {
                lang: {
                    "prior": p.prior,
                    "unseen": p.unseen_logprob,
                    "table": {f"{g:016x}": lp for g, lp in sorted(p.logprobs.items())},
                }
                for lang, p in sorted(self.profiles.items())
            },
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True), encoding="utf-8")

    @classmethod
    def from_dict(cls, obj: dict) -> "LidModel":
        if obj.get("format") != FORMAT or obj.get("version") != VERSION:
            raise ValueError("not a corpusprep language-id model")
        profiles = {
            lang: LangProfile(
                lang,
                {int(g, 16): lp for g, lp in p["table"].items()},
                p["unseen"],
                p["prior"],
            )
            for lang, p in obj["profiles"].items()
        }
        return cls(profiles, obj["alpha"])

    @classmethod
    def load(cls, path) -> "LidModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train_profiles(
    corpus: dict[str, str], alpha: float = 0.5, min_chars: int = 10_000
) -> LidModel:
    """Fit one add-``alpha`` smoothed n-gram profile per language; priors are uniform."""
    if len(corpus) < 2:
        raise ValueError("need at least two languages to train a classifier")
    for lang, text in corpus.items():
        if len(text) < min_chars:
            raise ValueError(f"{lang}: {len(text)} training characters, need {min_chars}")
    counts = {}
    for lang, text in sorted(corpus.items()):
        c: Counter = Counter()
        for line in text.split("\n"):
            if line.strip():
                c.update(char_ngrams(line))
        counts[lang] = c
    vocab = set()
    for c in counts.values():
        vocab.update(c)
    v = len(vocab) + 1
    prior = -math.log(len(corpus))
    profiles = {}
    for lang, c in counts.items():
        denom = math.log(sum(c.values()) + alpha * v)
        table = {g: math.log(n + alpha) - denom for g, n in c.items()}
        profiles[lang] = LangProfile(lang, table, math.log(alpha) - denom, prior)
    return LidModel(profiles, alpha)


@dataclass(frozen=True)
class LineLabel:
    language: str
    confidence: float
    byte_len: int


def classify_line(model: LidModel, line: str) -> LineLabel:
    # whitespace-only lines carry no language and no bytes
    if not line.strip():
        return LineLabel(UNKNOWN, 0.0, 0)
    nbytes = len(line.encode("utf-8"))
    post = model.posteriors(line)
    best = min(post, key=lambda k: (-post[k], k))
    conf = post[best]
    if conf < LINE_THRESHOLD:
        return LineLabel(UNKNOWN, conf, nbytes)
    return LineLabel(best, conf, nbytes)


class LangKind(str, enum.Enum):
    MONOLINGUAL = "monolingual"
    MULTILINGUAL = "multilingual"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class DocLangDecision:
    kind: LangKind
    languages: tuple[tuple[str, float], ...]
    weighted_confidence: float | None
    unknown_proportion: float = 0.0


def line_proportions(labels: list[LineLabel]) -> tuple[dict[str, float], float]:
    """Byte share of each language and of unknown lines; empty lines carry no bytes."""
    total = sum(lb.byte_len for lb in labels)
    if total == 0:
        return {}, 0.0
    lang_bytes: Counter = Counter()
    unknown_bytes = 0
    for lb in labels:
        if lb.language == UNKNOWN:
            unknown_bytes += lb.byte_len
        else:
            lang_bytes[lb.language] += lb.byte_len
    return {lang: b / total for lang, b in sorted(lang_bytes.items())}, unknown_bytes / total


def aggregate_line_labels(labels: list[LineLabel]) -> DocLangDecision:
    labels = [lb for lb in labels if lb.byte_len > 0]
    total = sum(lb.byte_len for lb in labels)
    if total == 0:
        return DocLangDecision(LangKind.UNKNOWN, (), 0.0, 0.0)
    weighted: Counter = Counter()
    for lb in labels:
        if lb.language != UNKNOWN:
            weighted[lb.language] += lb.byte_len * lb.confidence
    props, unknown_prop = line_proportions(labels)
    m = len(props)
    if len(labels) >= MIN_LINES_MULTI and 2 <= m <= MAX_LANGS_MULTI:
        floor = 1.0 / (m + 1)
        if all(p >= floor for p in props.values()) and unknown_prop <= floor:
            langs = tuple(sorted(props.items(), key=lambda kv: (-kv[1], kv[0])))
            return DocLangDecision(LangKind.MULTILINGUAL, langs, None, unknown_prop)
    if not props:
        return DocLangDecision(LangKind.UNKNOWN, (), 0.0, unknown_prop)
    conf = {lang: w / total for lang, w in weighted.items()}
    best = min(conf, key=lambda k: (-conf[k], k))
    kind = LangKind.MONOLINGUAL if conf[best] >= DOC_THRESHOLD else LangKind.UNKNOWN
    return DocLangDecision(kind, ((best, props[best]),), conf[best], unknown_prop)


def classify_document(model: LidModel, doc: Document) -> DocLangDecision:
    return aggregate_line_labels([classify_line(model, line) for line in doc.text.split("\n")])


def apply_language(doc: Document, decision: DocLangDecision) -> Document:
    """Write the verdict into the metadata and the docid's language segment."""
    if decision.kind is LangKind.MONOLINGUAL:
        lang, score = decision.languages[0][0], decision.weighted_confidence
    elif decision.kind is LangKind.MULTILINGUAL:
        lang, score = decision.languages[0]
    else:
        lang, score = UNDETERMINED, 0.0
    return doc.with_meta(
        language=lang,
        language_score=float(score),
        docid=with_docid_language(doc.meta.docid, lang),
    )


def line_accuracy(model: LidModel, labeled_lines: list[tuple[str, str]]) -> float:
    if not labeled_lines:
        raise ValueError("no lines to evaluate")
    hits = sum(classify_line(model, line).language == lang for lang, line in labeled_lines)
    return hits / len(labeled_lines)
