"""MinHash + LSH near-duplicate removal, run independently per (dump, language) partition."""
from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .docmodel import Document, docid_key, split_docid
from .quality import drop_entry

MERSENNE_61 = (1 << 61) - 1
_MASK32 = np.uint64(0xFFFFFFFF)
_P = np.uint64(MERSENNE_61)

DEFAULT_K = 5
DEFAULT_NUM_PERM = 128
DEFAULT_BANDS = 16
DEFAULT_THRESHOLD = 0.7
DEFAULT_SEED = 1


def hash64(data: str) -> int:
    return int.from_bytes(hashlib.blake2b(data.encode("utf-8"), digest_size=8).digest(), "little")


def shingle_tokens(text: str) -> list[str]:
    return text.lower().split()


def shingle(text: str, k: int = DEFAULT_K) -> set[int]:
    """64-bit hashes of every k-word window; short texts give one whole-text shingle."""
    toks = shingle_tokens(text)
    if not toks:
        return set()
    if len(toks) < k:
        return {hash64(" ".join(toks))}
    return {hash64(" ".join(toks[i:i + k])) for i in range(len(toks) - k + 1)}


def _mod61(v: np.ndarray) -> np.ndarray:
    v = (v & _P) + (v >> np.uint64(61))
    return np.where(v >= _P, v - _P, v)


def mulmod61(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """(a * x) mod 2**61 - 1 for uint64 arrays with a, x < 2**61, without overflow."""
    a_hi, a_lo = a >> np.uint64(32), a & _MASK32
    x_hi, x_lo = x >> np.uint64(32), x & _MASK32
    # 2**64 == 8 (mod p)
    hi = _mod61((a_hi * x_hi) << np.uint64(3))
    mid = a_hi * x_lo + a_lo * x_hi
    # mid * 2**32 with mid = mh * 2**29 + ml  ==  mh + ml * 2**32  (mod p)
    mid = _mod61((mid >> np.uint64(29)) + ((mid & np.uint64((1 << 29) - 1)) << np.uint64(32)))
    lo = _mod61(a_lo * x_lo)
    return _mod61(_mod61(hi + mid) + lo)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """Bijective 64-bit mixer; breaks up structured inputs such as small integers."""
    with np.errstate(over="ignore"):
        x = x + np.uint64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))


def permutation_params(num_perm: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.PCG64(seed))
    a = rng.integers(1, MERSENNE_61, size=num_perm, dtype=np.uint64)
    b = rng.integers(0, MERSENNE_61, size=num_perm, dtype=np.uint64)
    return a, b


class IncompatibleSignatures(ValueError):
    pass


@dataclass(frozen=True)
class MinHashSignature:
    values: np.ndarray
    seed: int

    @property
    def num_perm(self) -> int:
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, MinHashSignature):
            return NotImplemented
        return self.seed == other.seed and np.array_equal(self.values, other.values)

    __hash__ = None


def minhash_signature(shingles, num_perm: int = DEFAULT_NUM_PERM, seed: int = DEFAULT_SEED,
                      params=None) -> MinHashSignature:
    if not shingles:
        raise ValueError("cannot sign an empty shingle set")
    a, b = params if params is not None else permutation_params(num_perm, seed)
    x = np.fromiter(shingles, dtype=np.uint64, count=len(shingles))
    # linear hashes alone are far from min-wise independent on structured keys
    x = _mod61(splitmix64(x))
    hv = _mod61(mulmod61(a[:, None], x[None, :]) + b[:, None])
    return MinHashSignature(hv.min(axis=1), seed)


def estimate_jaccard(sig_a: MinHashSignature, sig_b: MinHashSignature) -> float:
    if sig_a.num_perm != sig_b.num_perm or sig_a.seed != sig_b.seed:
        raise IncompatibleSignatures("signatures differ in length or seed")
    return float(np.count_nonzero(sig_a.values == sig_b.values)) / sig_a.num_perm


class LshIndex:
    def __init__(self, num_perm: int = DEFAULT_NUM_PERM, bands: int = DEFAULT_BANDS):
        if num_perm % bands:
            raise ValueError(f"bands ({bands}) must divide num_perm ({num_perm})")
        self.num_perm = num_perm
        self.bands = bands
        self.rows = num_perm // bands
        self.buckets: dict[tuple[int, int], list[str]] = defaultdict(list)

    def band_keys(self, sig: MinHashSignature) -> list[tuple[int, int]]:
        if sig.num_perm != self.num_perm:
            raise IncompatibleSignatures("signature length does not match index")
        r = self.rows
        return [
            (i, int.from_bytes(hashlib.blake2b(sig.values[i * r:(i + 1) * r].tobytes(),
                                               digest_size=8).digest(), "little"))
            for i in range(self.bands)
        ]

    def insert(self, docid: str, sig: MinHashSignature) -> None:
        for key in self.band_keys(sig):
            self.buckets[key].append(docid)

    def candidate_pairs(self) -> set[tuple[str, str]]:
        pairs = set()
        for members in self.buckets.values():
            if len(members) < 2:
                continue
            ms = sorted(set(members), key=docid_key)
            for i, x in enumerate(ms):
                for y in ms[i + 1:]:
                    pairs.add((x, y))
        return pairs


class UnionFind:
    """Union-find whose root is always the smallest member under ``key``."""

    def __init__(self, key=lambda x: x):
        self.parent: dict = {}
        self.key = key

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self.key(ry) < self.key(rx):
            rx, ry = ry, rx
        self.parent[ry] = rx

    def groups(self) -> dict:
        out = defaultdict(set)
        for x in list(self.parent):
            out[self.find(x)].add(x)
        return out


@dataclass(frozen=True)
class DupCluster:
    representative: str
    members: frozenset[str]

    def to_dict(self, partition: str) -> dict:
        return {
            "representative": self.representative,
            "members": sorted(self.members, key=docid_key),
            "partition": partition,
        }


@dataclass
class DedupResult:
    kept: list[Document]
    clusters: list[DupCluster]
    drops: list[dict] = field(default_factory=list)


def partition_key(doc: Document) -> tuple[str, str]:
    corpus, lang, _, _ = split_docid(doc.meta.docid)
    return corpus, doc.meta.language or lang


def exact_jaccard_sets(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def dedup_partition(
    docs: list[Document],
    threshold: float = DEFAULT_THRESHOLD,
    num_perm: int = DEFAULT_NUM_PERM,
    bands: int = DEFAULT_BANDS,
    seed: int = DEFAULT_SEED,
    k: int = DEFAULT_K,
    exact_verify: bool = False,
) -> DedupResult:
    """Remove near duplicates inside one partition.

    LSH candidates are verified with the signature estimate (or exact shingle
    Jaccard when ``exact_verify``); verified pairs are merged with union-find
    and every cluster keeps only its smallest docid. Output is sorted by docid
    so it does not depend on input order.
    """
    if not docs:
        return DedupResult([], [])
    keys = {partition_key(d) for d in docs}
    if len(keys) > 1:
        raise ValueError(f"documents span several partitions: {sorted(keys)}")
    by_id = {}
    for d in docs:
        if d.meta.docid in by_id:
            raise ValueError(f"duplicate docid {d.meta.docid}")
        by_id[d.meta.docid] = d

    params = permutation_params(num_perm, seed)
    index = LshIndex(num_perm, bands)
    shingles, sigs = {}, {}
    for docid in sorted(by_id, key=docid_key):
        sh = shingle(by_id[docid].text, k)
        if not sh:
            raise ValueError(f"{docid}: no tokens to shingle")
        shingles[docid] = sh
        sigs[docid] = minhash_signature(sh, num_perm, seed, params)
        index.insert(docid, sigs[docid])

    uf = UnionFind(key=docid_key)
    for x, y in sorted(index.candidate_pairs(), key=lambda p: (docid_key(p[0]), docid_key(p[1]))):
        if exact_verify:
            sim = exact_jaccard_sets(shingles[x], shingles[y])
        else:
            sim = estimate_jaccard(sigs[x], sigs[y])
        if sim >= threshold:
            uf.union(x, y)

    clusters, dropped, drops = [], set(), []
    for root, members in uf.groups().items():
        if len(members) < 2:
            continue
        clusters.append(DupCluster(root, frozenset(members)))
        for m in members:
            if m != root:
                dropped.add(m)
                drops.append(drop_entry(m, "dedup", f"duplicate_of:{root}"))
    clusters.sort(key=lambda c: docid_key(c.representative))
    drops.sort(key=lambda e: docid_key(e["docid"]))
    kept = [by_id[i] for i in sorted(by_id, key=docid_key) if i not in dropped]
    return DedupResult(kept, clusters, drops)
