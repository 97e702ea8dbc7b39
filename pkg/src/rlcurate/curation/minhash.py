"""Character-shingle MinHash with LSH banding."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import kernels
from ..core import make_rng

NGRAM = 13
PERMUTATIONS = 256
BANDS = 32


@dataclass(frozen=True)
class ShingleSignature:
    minhash: np.ndarray
    band_keys: tuple

    @property
    def rows(self) -> int:
        return len(self.minhash) // len(self.band_keys)


def shingles(text: str, ngram: int = NGRAM) -> set:
    if len(text) < ngram:
        return {text}
    return {text[i:i + ngram] for i in range(len(text) - ngram + 1)}


def exact_jaccard(a: str, b: str, ngram: int = NGRAM) -> float:
    sa, sb = shingles(a, ngram), shingles(b, ngram)
    return len(sa & sb) / len(sa | sb)


def _hash32(s: str) -> int:
    return int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=4).digest(), "little")


@lru_cache(maxsize=16)
def permutation_params(seed: int, permutations: int) -> tuple:
    """Coefficients of h(x) = (a*x + b) mod (2**61 - 1), drawn uniformly below the prime.

    Drawing a from the full range matters: with a < 2**32 the product wraps
    the modulus only a few times and the permutations become correlated.
    """
    rng = make_rng(seed, 13)
    p = (1 << 61) - 1
    a = rng.integers(1, p, size=permutations, dtype=np.uint64)
    b = rng.integers(0, p, size=permutations, dtype=np.uint64)
    a.setflags(write=False)
    b.setflags(write=False)
    return a, b


def minhash_signature(text: str, ngram: int = NGRAM, permutations: int = PERMUTATIONS,
                      seed: int = 0, bands: int = BANDS) -> ShingleSignature:
    if permutations % bands:
        raise ValueError(f"{permutations} permutations do not split into {bands} bands")
    a, b = permutation_params(int(seed), int(permutations))
    hashes = np.fromiter((_hash32(s) for s in shingles(text, ngram)), dtype=np.uint64)
    sig = kernels.minhash(hashes, a, b)
    rows = permutations // bands
    keys = tuple(hashlib.blake2b(sig[i * rows:(i + 1) * rows].tobytes(), digest_size=8).hexdigest()
                 for i in range(bands))
    return ShingleSignature(sig, keys)


def estimated_jaccard(s1: ShingleSignature, s2: ShingleSignature) -> float:
    return float(np.mean(s1.minhash == s2.minhash))


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            # smaller index becomes the root so the earliest record survives
            lo, hi = min(ri, rj), max(ri, rj)
            self.parent[hi] = lo


def duplicate_clusters(signatures, threshold: float = 0.8) -> list:
    """Root index (earliest member) of each signature's duplicate cluster."""
    n = len(signatures)
    uf = _UnionFind(n)
    buckets = {}
    checked = set()
    for i, sig in enumerate(signatures):
        for band, key in enumerate(sig.band_keys):
            members = buckets.setdefault((band, key), [])
            for j in members:
                if (j, i) in checked:
                    continue
                checked.add((j, i))
                if estimated_jaccard(signatures[j], sig) >= threshold:
                    uf.union(j, i)
            members.append(i)
    return [uf.find(i) for i in range(n)]
