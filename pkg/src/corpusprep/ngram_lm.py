"""Interpolated modified Kneser-Ney n-gram language model.

Counting follows the usual recipe: the highest order keeps raw counts, lower
orders use continuation counts (number of distinct left extensions), except
for n-grams that start with ``<s>`` which have no left context and keep raw
counts. Each order gets three discounts estimated from its count-of-counts.

All logs are natural logs. Perplexity does not depend on the base.
"""
from __future__ import annotations

import json
import logging
import math
import struct
import zlib
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .normalize import normalize_for_lm

log = logging.getLogger(__name__)

BOS, EOS, UNK = "<s>", "</s>", "<unk>"
RESERVED = (UNK, BOS, EOS)
DEFAULT_ORDER = 5
FALLBACK_DISCOUNT = 0.75

MAGIC = b"CPKNLM\x00"
VERSION = 1


class UnscoreableText(ValueError):
    """Raised when a text normalizes to zero tokens."""


@dataclass
class NGramCounts:
    order: int
    counts: list[Counter]  # counts[n - 1][ngram tuple] for n = 1..order

    def __getitem__(self, ngram: tuple[str, ...]) -> int:
        return self.counts[len(ngram) - 1].get(tuple(ngram), 0)

    @property
    def num_tokens(self) -> int:
        # every token plus </s>, not <s>
        return sum(c for g, c in self.counts[0].items() if g != (BOS,))


def _as_sentences(stream) -> list[list[str]]:
    stream = list(stream)
    if stream and isinstance(stream[0], str):
        return [stream]
    return [list(s) for s in stream]


def count_ngrams(sentences: Iterable[Sequence[str]], order: int = DEFAULT_ORDER) -> NGramCounts:
    """Count all 1..``order``-grams of ``<s>``/``</s>``-padded sentences.

    A flat list of tokens is taken as a single sentence.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    sents = _as_sentences(sentences)
    if not any(sents):
        raise ValueError("cannot count n-grams of an empty token stream")
    counts = [Counter() for _ in range(order)]
    for sent in sents:
        if not sent:
            continue
        for tok in sent:
            if tok in RESERVED:
                raise ValueError(f"reserved token {tok!r} in input")
        padded = (BOS, *sent, EOS)
        for n in range(1, order + 1):
            c = counts[n - 1]
            for i in range(len(padded) - n + 1):
                c[padded[i:i + n]] += 1
    return NGramCounts(order, counts)


def _discounts(adjusted: dict) -> tuple[tuple[float, float, float], bool]:
    coc = Counter(v for v in adjusted.values() if v <= 4)
    t1, t2, t3, t4 = (coc.get(j, 0) for j in (1, 2, 3, 4))
    # t4 == 0 only pushes D3 to its clamp; t1..t3 are divisors
    if min(t1, t2, t3) == 0:
        return (FALLBACK_DISCOUNT,) * 3, True
    y = t1 / (t1 + 2 * t2)
    ds = []
    for j, tj, tnext in ((1, t1, t2), (2, t2, t3), (3, t3, t4)):
        d = j - (j + 1) * y * tnext / tj
        ds.append(min(max(d, 0.0), j - 1e-6))
    return tuple(ds), False


@dataclass
class _Context:
    total: int
    gamma_num: float


@dataclass
class KNModel:
    order: int
    vocab: dict[str, int]
    adjusted: list[dict[tuple[str, ...], int]]
    discounts: list[tuple[float, float, float]]
    fallback_orders: list[int] = field(default_factory=list)

    def __post_init__(self):
        # words we can predict: everything but <s>
        self._n_predictable = len(self.vocab) - 1
        self._contexts: list[dict[tuple[str, ...], _Context]] = []
        for n in range(1, self.order + 1):
            d1, d2, d3 = self.discounts[n - 1]
            # integer tallies keep gamma independent of table iteration order
            acc: dict = defaultdict(lambda: [0, 0, 0, 0])
            for gram, a in self.adjusted[n - 1].items():
                slot = acc[gram[:-1]]
                slot[0] += a
                slot[min(a, 3)] += 1
            self._contexts.append({
                h: _Context(t, d1 * n1 + d2 * n2 + d3 * n3) for h, (t, n1, n2, n3) in acc.items()
            })

    def _discount(self, n: int, a: int) -> float:
        if a == 0:
            return 0.0
        d1, d2, d3 = self.discounts[n - 1]
        return d1 if a == 1 else d2 if a == 2 else d3

    def _map(self, tok: str) -> str:
        return tok if tok in self.vocab else UNK

    def prob(self, context: Sequence[str], word: str) -> float:
        word = self._map(word)
        if word == BOS:
            return 0.0
        ctx = tuple(self._map(t) for t in context)[-(self.order - 1):] if self.order > 1 else ()
        uni = self._contexts[0][()]
        a = self.adjusted[0].get((word,), 0)
        p = (max(a - self._discount(1, a), 0.0) + uni.gamma_num / self._n_predictable) / uni.total
        for k in range(1, len(ctx) + 1):
            h = ctx[-k:]
            stats = self._contexts[k].get(h)
            if stats is None:
                break
            a = self.adjusted[k].get(h + (word,), 0)
            p = (max(a - self._discount(k + 1, a), 0.0) + stats.gamma_num * p) / stats.total
        return p

    def log_prob(self, context: Sequence[str], word: str) -> float:
        return math.log(self.prob(context, word))

    def backoff_weight(self, context: Sequence[str]) -> float:
        """Interpolation weight of the lower order for ``context`` (1.0 if unseen)."""
        ctx = tuple(self._map(t) for t in context)[-(self.order - 1):]
        if not ctx:
            uni = self._contexts[0][()]
            return uni.gamma_num / uni.total
        stats = self._contexts[len(ctx)].get(ctx)
        if stats is None:
            return 1.0
        return stats.gamma_num / stats.total

    def predictable_vocab(self) -> list[str]:
        return sorted(t for t in self.vocab if t != BOS)

    def contexts(self, n: int) -> list[tuple[str, ...]]:
        """Contexts stored for order ``n`` (length ``n - 1``), sorted."""
        return sorted(self._contexts[n - 1])

    def to_bytes(self) -> bytes:
        ids = self.vocab
        tables = [
            sorted([*(ids[t] for t in g), a] for g, a in table.items())
            for table in self.adjusted
        ]
        payload = {
            "order": self.order,
            "vocab": sorted(ids, key=ids.get),
            "discounts": [list(d) for d in self.discounts],
            "fallback_orders": self.fallback_orders,
            "adjusted": tables,
        }
        body = zlib.compress(json.dumps(payload, separators=(",", ":")).encode("utf-8"), 6)
        return MAGIC + struct.pack("<HB", VERSION, self.order) + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "KNModel":
        if not data.startswith(MAGIC):
            raise ValueError("not a corpusprep Kneser-Ney model file")
        version, order = struct.unpack_from("<HB", data, len(MAGIC))
        if version != VERSION:
            raise ValueError(f"unsupported model version {version}")
        payload = json.loads(zlib.decompress(data[len(MAGIC) + 3:]).decode("utf-8"))
        words = payload["vocab"]
        adjusted = [
            {tuple(words[i] for i in row[:-1]): row[-1] for row in table}
            for table in payload["adjusted"]
        ]
        return cls(
            order=order,
            vocab={w: i for i, w in enumerate(words)},
            adjusted=adjusted,
            discounts=[tuple(d) for d in payload["discounts"]],
            fallback_orders=payload["fallback_orders"],
        )

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "KNModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def train_kneser_ney(counts: NGramCounts) -> KNModel:
    order = counts.order
    raw = counts.counts
    adjusted: list[dict] = []
    for n in range(1, order + 1):
        if n == order:
            table = dict(raw[n - 1])
        else:
            left = Counter(g[1:] for g in raw[n])
            table = {}
            for g, c in raw[n - 1].items():
                table[g] = c if g[0] == BOS else left[g]
        if n == 1:
            table.pop((BOS,), None)
        adjusted.append(table)

    discounts, fallback = [], []
    for n, table in enumerate(adjusted, start=1):
        d, degenerate = _discounts(table)
        if degenerate:
            fallback.append(n)
            log.info("order %d: degenerate count-of-counts, using discount %.2f", n, FALLBACK_DISCOUNT)
        discounts.append(d)

    words = sorted({g[0] for g in raw[0]} - set(RESERVED))
    vocab = {w: i for i, w in enumerate([*RESERVED, *words])}
    return KNModel(order, vocab, adjusted, discounts, fallback)


def log_prob(model: KNModel, context: Sequence[str], word: str) -> float:
    return model.log_prob(context, word)


def text_to_sentences(text: str) -> list[list[str]]:
    out = []
    for line in text.split("\n"):
        toks = normalize_for_lm(line)
        if toks:
            out.append(toks)
    return out


def train_from_texts(texts: Iterable[str], order: int = DEFAULT_ORDER) -> KNModel:
    sents = [s for t in texts for s in text_to_sentences(t)]
    return train_kneser_ney(count_ngrams(sents, order))


@dataclass(frozen=True)
class PerplexityScore:
    value: float
    token_count: int


def perplexity(model, text: str, base: float = math.e) -> PerplexityScore:
    """Per-token perplexity of ``text``, counting ``</s>`` but not ``<s>``.

    ``model`` only needs ``order`` and ``log_prob(context, word)``.
    """
    sents = text_to_sentences(text)
    if not sents:
        raise UnscoreableText("text has no tokens after normalization")
    to_base = 1.0 / math.log(base)
    total = 0.0
    n = 0
    keep = max(model.order - 1, 0)
    for sent in sents:
        ctx = [BOS]
        for tok in (*sent, EOS):
            total += model.log_prob(ctx, tok) * to_base
            n += 1
            ctx.append(tok)
            if len(ctx) > keep:
                ctx = ctx[len(ctx) - keep:] if keep else []
    return PerplexityScore(base ** (-total / n), n)
