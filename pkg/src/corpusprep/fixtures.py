"""Seeded synthetic data and exact oracles for auditing the pipeline.

Everything here is deterministic given its seed and free of locale or
platform dependence, so fixture bytes are reproducible.
"""
from __future__ import annotations

import json
import random
import re
import uuid
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations

import numpy as np

from .docmodel import Document, Metadata, make_docid

LID_LANGUAGES = ("de", "en", "fr")
_WORD_RE = re.compile(r"[^\W\d_]+(?:'[^\W\d_]+)?")


# --- oracles -------------------------------------------------------------------

def shingle_set(text: str, k: int = 5) -> set[tuple[str, ...]]:
    toks = text.lower().split()
    if not toks:
        return set()
    if len(toks) < k:
        return {tuple(toks)}
    return {tuple(toks[i:i + k]) for i in range(len(toks) - k + 1)}


def exact_jaccard_oracle(text_a: str, text_b: str, k: int = 5) -> float:
    """Exact Jaccard similarity of the k-word shingle sets (no hashing involved)."""
    a, b = shingle_set(text_a, k), shingle_set(text_b, k)
    if not a and not b:
        return 1.0 if text_a.split() == text_b.split() else 0.0
    return len(a & b) / len(a | b)


def similar_pairs_oracle(docs: list[Document], min_jaccard: float, k: int = 5) -> dict:
    """All pairs with exact Jaccard >= ``min_jaccard`` (> 0), found by brute force.

    Pairs that share no shingle have similarity 0, so only pairs meeting in
    an inverted index need to be scored.
    """
    if min_jaccard <= 0:
        raise ValueError("min_jaccard must be positive")
    sets = {d.docid: shingle_set(d.text, k) for d in docs}
    index = defaultdict(list)
    for docid, s in sets.items():
        for sh in s:
            index[sh].append(docid)
    seen = set()
    for ids in index.values():
        for x, y in combinations(sorted(set(ids)), 2):
            seen.add((x, y))
    out = {}
    for x, y in seen:
        a, b = sets[x], sets[y]
        j = len(a & b) / len(a | b)
        if j >= min_jaccard:
            out[(x, y)] = j
    return out


def planted_jaccard_sets(rng: random.Random, jaccard: float, union: int = 100) -> tuple[set, set]:
    """Two integer sets of exactly ``round(jaccard * union) / union`` Jaccard."""
    shared = round(jaccard * union)
    rest = union - shared
    universe = rng.sample(range(1, 1 << 62), union)
    a = set(universe[:shared]) | set(universe[shared:shared + rest // 2])
    b = set(universe[:shared]) | set(universe[shared + rest // 2:])
    return a, b


# --- corpora ---------------------------------------------------------------------

def lid_lines(language: str) -> list[str]:
    data = resources.files("corpusprep") / "data" / "lid" / f"{language}.txt"
    return [ln for ln in data.read_text(encoding="utf-8").split("\n") if ln.strip()]


def lid_split(languages=LID_LANGUAGES, holdout_every: int = 5):
    """Train text per language, and held-out (language, line) pairs (every 5th line)."""
    train, held = {}, []
    for lang in languages:
        lines = lid_lines(lang)
        train[lang] = "\n".join(ln for i, ln in enumerate(lines) if i % holdout_every != holdout_every - 1)
        held += [(lang, ln) for i, ln in enumerate(lines) if i % holdout_every == holdout_every - 1]
    return train, held


def lid_vocabulary(language: str) -> list[str]:
    words = {w.lower() for ln in lid_lines(language) for w in _WORD_RE.findall(ln) if len(w) > 1}
    return sorted(words)


_SPAM = {
    "open": ["Claim your", "Get your", "Grab your", "Unlock your", "Collect your", "Activate your"],
    "offer": [
        "free casino bonus", "exclusive jackpot spins", "cheap replica watches",
        "discount pills online", "guaranteed crypto profits", "instant payday loan",
        "secret weight loss formula", "vip betting credits",
    ],
    "urgency": [
        "right now before the offer expires", "today with no questions asked",
        "in the next ten minutes only", "while stocks last tonight",
        "before everyone else finds out", "without any credit check",
    ],
    "cta": [
        "click the link below and register instantly", "sign up now and double your deposit",
        "call our hotline and win big money", "visit our site and start winning cash",
        "enter your card details to confirm the prize", "reply to this message and get paid fast",
    ],
    "tail": [
        "thousands of happy winners already trust us", "this deal is one hundred percent legit",
        "limited places left so act fast", "no risk and huge rewards every single day",
        "best prices guaranteed on every order", "your account has been selected as a winner",
    ],
}


_SYLLABLES = ["lu", "ka", "bet", "zo", "mi", "win", "pro", "ra", "tex", "vo", "ny", "dex"]


def harmful_corpus(seed: int = 0, n_lines: int = 3000) -> list[str]:
    """Template spam standing in for a harmful-content training sample."""
    rng = random.Random(seed)
    out = []
    for _ in range(n_lines):
        # made-up site names give the sample a long tail of rare words
        site = "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 3)))
        out.append(
            f"{rng.choice(_SPAM['open'])} {rng.choice(_SPAM['offer'])} {rng.choice(_SPAM['urgency'])}, "
            f"{rng.choice(_SPAM['cta'])} at {site} because {rng.choice(_SPAM['tail'])}."
        )
    return out


def token_word(i: int) -> str:
    """Letters-only word for index ``i`` ("wa", "wb", ..., "wba"); LM normalization leaves it as is."""
    letters = ""
    while True:
        i, r = divmod(i, 26)
        letters = chr(ord("a") + r) + letters
        if i == 0:
            return "w" + letters


def gen_token_corpus(seed: int, n_tokens: int = 100_000, vocab_size: int = 800) -> list[list[str]]:
    """Sentences from a seeded Zipf-weighted bigram chain; at least ``n_tokens`` word tokens."""
    rng = np.random.Generator(np.random.PCG64(seed))
    words = [token_word(i) for i in range(vocab_size)]
    zipf = 1.0 / np.arange(1, vocab_size + 1)
    succ = []
    for _ in range(vocab_size):
        p = zipf[rng.permutation(vocab_size)] ** 1.5
        succ.append(p / p.sum())
    start = zipf / zipf.sum()
    sents, total = [], 0
    while total < n_tokens:
        length = int(rng.integers(4, 30))
        w = int(rng.choice(vocab_size, p=start))
        sent = [words[w]]
        for _ in range(length - 1):
            w = int(rng.choice(vocab_size, p=succ[w]))
            sent.append(words[w])
        sents.append(sent)
        total += length
    return sents


# --- synthetic WET dumps ------------------------------------------------------

@dataclass
class SyntheticDump:
    dump: str
    corpus: str
    wet: bytes
    documents: list[Document]
    manifest: list[dict] = field(default_factory=list)

    def manifest_jsonl(self) -> str:
        return "".join(json.dumps(m, ensure_ascii=False) + "\n" for m in self.manifest)

    def pairs(self, kind: str) -> list[tuple[str, str, float]]:
        return [(m["a"], m["b"], m["jaccard"]) for m in self.manifest if m["kind"] == kind]


def _line(rng: random.Random, vocab: list[str], min_chars: int = 110) -> str:
    words = []
    while len(" ".join(words)) < min_chars:
        words.append(rng.choice(vocab))
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def _clean_doc(rng, vocab, n_lines=None) -> list[str]:
    return [_line(rng, vocab) for _ in range(n_lines or rng.randint(8, 10))]


def _near_copy(rng, lines: list[str], vocab: list[str], k: int, floor: float):
    text = "\n".join(lines)
    for _ in range(50):
        new = list(lines)
        i = rng.randrange(1, len(new) - 1)
        toks = new[i].split(" ")
        j = rng.randrange(1, len(toks) - 1)
        toks[j] = rng.choice(vocab)
        new[i] = " ".join(toks)
        cand = "\n".join(new)
        jac = exact_jaccard_oracle(text, cand, k)
        if floor <= jac < 1.0:
            return new, jac
    raise RuntimeError("could not plant a near duplicate above the Jaccard floor")


def _low_copy(rng, lines, vocab, k, lo=0.12, hi=0.3):
    text = "\n".join(lines)
    for _ in range(200):
        keep = rng.randint(1, len(lines) - 1)
        new = lines[:keep] + [_line(rng, vocab) for _ in range(len(lines) - keep)]
        jac = exact_jaccard_oracle(text, "\n".join(new), k)
        if lo <= jac <= hi:
            return new, jac
    raise RuntimeError("could not plant a low-similarity pair")


def _noisy_doc(rng) -> list[str]:
    sym = "0123456789#%$&*+=-/|@~^"
    return [" ".join("".join(rng.choice(sym) for _ in range(rng.randint(3, 8))) for _ in range(20))
            for _ in range(6)]


def _wet_record(headers: list[tuple[str, str]], body: bytes) -> bytes:
    head = "WARC/1.0\r\n" + "".join(f"{k}: {v}\r\n" for k, v in headers)
    head += f"Content-Length: {len(body)}\r\n\r\n"
    return head.encode("utf-8") + body + b"\r\n\r\n"


def gen_synthetic_dump(
    seed: int,
    n_docs: int,
    dup_pairs: int,
    languages=("en",),
    *,
    exact_pairs: int = 0,
    low_pairs: int = 0,
    harmful_docs: int = 0,
    noisy_docs: int = 0,
    short_docs: int = 0,
    dump: str = "2023-5",
    jaccard_floor: float = 0.9,
    k: int = 5,
) -> SyntheticDump:
    """Build a WET file with planted duplicates and known per-language documents.

    Each near-duplicate pair differs by a single word so its exact shingle
    Jaccard stays at or above ``jaccard_floor``; low pairs share a prefix and
    sit in [0.12, 0.3]. The manifest records every planted relationship.
    """
    planted = 2 * (dup_pairs + exact_pairs + low_pairs) + harmful_docs + noisy_docs + short_docs
    if n_docs < planted or n_docs < 2 * dup_pairs:
        raise ValueError(f"{n_docs} documents cannot hold {planted} planted documents")
    if not languages:
        raise ValueError("need at least one language")
    rng = random.Random(seed)
    vocabs = {lang: lid_vocabulary(lang) for lang in languages}
    spam = harmful_corpus(seed=0)

    # (language, category, lines, partner slot, kind, jaccard)
    slots: list[dict] = []

    def add(lang, category, lines):
        slots.append({"lang": lang, "category": category, "lines": lines})
        return len(slots) - 1

    relations = []
    for kind, count in (("dup_pair", dup_pairs), ("exact_pair", exact_pairs), ("low_pair", low_pairs)):
        for _ in range(count):
            lang = rng.choice(languages)
            vocab = vocabs[lang]
            base = _clean_doc(rng, vocab)
            if kind == "dup_pair":
                other, jac = _near_copy(rng, base, vocab, k, jaccard_floor)
            elif kind == "exact_pair":
                other, jac = list(base), 1.0
            else:
                other, jac = _low_copy(rng, base, vocab, k)
            a, b = add(lang, "clean", base), add(lang, "clean", other)
            relations.append((kind, a, b, jac))
    for _ in range(harmful_docs):
        add("en", "harmful", [f"{rng.choice(spam)} {rng.choice(spam)}" for _ in range(6)])
    for _ in range(noisy_docs):
        add("xx", "noisy", _noisy_doc(rng))
    for _ in range(short_docs):
        lang = rng.choice(languages)
        add(lang, "short", [" ".join(rng.choice(vocabs[lang]) for _ in range(8)) + "."])
    while len(slots) < n_docs:
        lang = rng.choice(languages)
        add(lang, "clean", _clean_doc(rng, vocabs[lang]))

    order = list(range(len(slots)))
    rng.shuffle(order)

    corpus = f"cc-{dump}"
    stream = [_wet_record(
        [("WARC-Type", "warcinfo"), ("WARC-Date", "2023-02-01T00:00:00Z"),
         ("WARC-Record-ID", f"<urn:uuid:{uuid.UUID(int=rng.getrandbits(128))}>"),
         ("Content-Type", "application/warc-fields")],
        f"software: corpusprep-fixtures\r\nisPartOf: CC-MAIN-{dump}\r\n".encode("utf-8"),
    )]
    documents, manifest = [], []
    docids = {}
    for pos, slot_id in enumerate(order):
        slot = slots[slot_id]
        text = "\n".join(slot["lines"])
        day = 1 + rng.randrange(28)
        url = f"https://example-{rng.randrange(10**6):06d}.test/{slot['category']}/{pos}"
        stream.append(_wet_record(
            [("WARC-Type", "conversion"), ("WARC-Target-URI", url),
             ("WARC-Date", f"2023-01-{day:02d}T12:00:00Z"),
             ("WARC-Record-ID", f"<urn:uuid:{uuid.UUID(int=rng.getrandbits(128))}>"),
             ("Content-Type", "text/plain")],
            text.encode("utf-8"),
        ))
        docid = make_docid(corpus, slot["lang"], 0, pos)
        docids[slot_id] = docid
        documents.append(Document(
            Metadata(docid=docid, url=url, download_date=f"2023-01-{day:02d}",
                     language=slot["lang"], language_score=1.0),
            text,
        ))
        manifest.append({"kind": "doc", "docid": docid, "language": slot["lang"],
                         "category": slot["category"]})
    for kind, a, b, jac in relations:
        x, y = sorted((docids[a], docids[b]), key=lambda d: int(d.rsplit("/", 1)[1]))
        manifest.append({"kind": kind, "a": x, "b": y, "jaccard": jac})
    return SyntheticDump(dump, corpus, b"".join(stream), documents, manifest)


def write_synthetic_dump(root, fixture: SyntheticDump, filename: str = "part-00000.wet") -> None:
    """Lay out ``fixture`` as ``<root>/<dump>/raw/<filename>`` plus its manifest."""
    from pathlib import Path

    raw = Path(root) / fixture.dump / "raw"
    raw.mkdir(parents=True, exist_ok=True)
    (raw / filename).write_bytes(fixture.wet)
    (Path(root) / fixture.dump / "manifest.jsonl").write_text(fixture.manifest_jsonl(), encoding="utf-8")
