"""Structural novelty scoring with character shingles and MinHash.

Candidate source is normalized, cut into overlapping character 10-grams,
and compressed into a 256-value MinHash signature.  Similarity between two
signatures is the fraction of matching positions, an unbiased estimate of
the Jaccard similarity of the underlying shingle sets; novelty against a
corpus is one minus the best similarity over its entries.

The permutation family is 256 independent maps x -> (a*x + b) mod P over a
64-bit base hash of each shingle, with P = 2^61 - 1 and (a, b) drawn from a
seeded generator.  The modular products are computed exactly (no wraparound
shortcuts), vectorized with numpy via 32-bit limb splitting, so signatures
are reproducible everywhere.

Corpora here stay small (hundreds of entries), so lookup is a linear scan.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import PatchLoopError

SHINGLE_WIDTH = 10
SIGNATURE_LEN = 256
_MERSENNE_P = (1 << 61) - 1
_LOW32 = (1 << 32) - 1


class NoveltyError(PatchLoopError):
    """Base class for novelty-module failures."""


class EmptySet(NoveltyError):
    """A signature was requested for an empty shingle set."""


class FamilyMismatch(NoveltyError):
    """Signatures from different permutation families were compared."""


class BothEmpty(NoveltyError):
    """Exact Jaccard of two empty sets is undefined."""


class DuplicateEntry(NoveltyError):
    """An entry_id was added to a corpus twice."""


def normalize(text: str) -> str:
    """Collapse whitespace runs and strip line edges; drop blank lines."""
    lines = []
    for line in text.split("\n"):
        collapsed = " ".join(line.split())
        if collapsed:
            lines.append(collapsed)
    return "\n".join(lines)


@dataclass(frozen=True, slots=True)
class ShingleSet:
    """Deduplicated overlapping character n-grams of one text."""

    shingles: frozenset[str]
    n: int = SHINGLE_WIDTH
    too_short: bool = False

    def __len__(self) -> int:
        return len(self.shingles)


@dataclass(frozen=True, slots=True)
class MinHashSignature:
    """256 per-permutation minima, tagged with the family seed."""

    values: tuple[int, ...]
    permutation_seed: int

    def __post_init__(self):
        if len(self.values) != SIGNATURE_LEN:
            raise ValueError(f"signature must have {SIGNATURE_LEN} values")


def shingle(text: str, n: int = SHINGLE_WIDTH, normalized: bool = True) -> ShingleSet:
    """Cut ``text`` into overlapping character ``n``-grams.

    Normalization is on by default and can be disabled to shingle the raw
    text.  Text shorter than ``n`` after normalization yields an empty set
    with ``too_short`` set instead of an error.
    """
    base = normalize(text) if normalized else text
    if len(base) < n:
        return ShingleSet(frozenset(), n=n, too_short=True)
    grams = frozenset(base[i : i + n] for i in range(len(base) - n + 1))
    return ShingleSet(grams, n=n)


def _base_hashes(shingles: Iterable[str]) -> np.ndarray:
    digests = [
        int.from_bytes(
            hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "big"
        )
        for s in sorted(shingles)
    ]
    return np.asarray(digests, dtype=np.uint64)


def _permutation_params(seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = random.Random(seed)
    a = np.asarray(
        [rng.randrange(1, _MERSENNE_P) for _ in range(SIGNATURE_LEN)], dtype=np.uint64
    )
    b = np.asarray(
        [rng.randrange(0, _MERSENNE_P) for _ in range(SIGNATURE_LEN)], dtype=np.uint64
    )
    return a, b


def _mulmod_mersenne(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Exact (a * x) mod 2^61-1 for uint64 operands below the modulus.

    Splits both operands into 32-bit limbs so every partial product fits in
    uint64, then folds the high parts back with 2^64 ≡ 8 and the identity
    (m * 2^32) mod P = ((m mod 2^29) * 2^32 + m div 2^29) mod P.
    """
    p = np.uint64(_MERSENNE_P)
    a_hi = a >> np.uint64(32)
    a_lo = a & np.uint64(_LOW32)
    x_hi = x >> np.uint64(32)
    x_lo = x & np.uint64(_LOW32)

    top = (a_hi * x_hi) % p
    term_top = (top * np.uint64(8)) % p

    mid = (a_hi * x_lo + a_lo * x_hi) % p
    term_mid = (((mid & np.uint64((1 << 29) - 1)) << np.uint64(32)) + (mid >> np.uint64(29))) % p

    term_low = (a_lo * x_lo) % p
    return (term_top + term_mid + term_low) % p


def signature(s: ShingleSet, seed: int) -> MinHashSignature:
    """MinHash signature of ``s`` under the permutation family for ``seed``."""
    if not s.shingles:
        raise EmptySet("cannot sign an empty shingle set")
    hashes = _base_hashes(s.shingles) % np.uint64(_MERSENNE_P)
    a, b = _permutation_params(seed)
    products = _mulmod_mersenne(a[:, None], hashes[None, :])
    hashed = (products + b[:, None]) % np.uint64(_MERSENNE_P)
    minima = hashed.min(axis=1)
    return MinHashSignature(tuple(int(v) for v in minima), permutation_seed=seed)


def jaccard_estimate(a: MinHashSignature, b: MinHashSignature) -> float:
    """Fraction of matching signature positions."""
    if a.permutation_seed != b.permutation_seed:
        raise FamilyMismatch(
            f"signatures built with different permutation seeds: "
            f"{a.permutation_seed} vs {b.permutation_seed}"
        )
    matches = sum(1 for va, vb in zip(a.values, b.values) if va == vb)
    return matches / SIGNATURE_LEN


def exact_jaccard(a: ShingleSet, b: ShingleSet) -> float:
    """|a ∩ b| / |a ∪ b| over the raw shingle sets."""
    union = len(a.shingles | b.shingles)
    if union == 0:
        raise BothEmpty("Jaccard of two empty sets is undefined")
    return len(a.shingles & b.shingles) / union


class CorpusIndex:
    """Signatures of every admitted corpus entry, under one permutation family.

    Reads are safe from any thread; admission writes are serialized by the
    orchestrator, which is the single writer.
    """

    def __init__(self, permutation_seed: int):
        self.permutation_seed = permutation_seed
        self.entries: list[tuple[str, MinHashSignature]] = []
        self._ids: set[str] = set()

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, entry_id: str, sig: MinHashSignature) -> None:
        if sig.permutation_seed != self.permutation_seed:
            raise FamilyMismatch(
                f"corpus uses seed {self.permutation_seed}, "
                f"signature uses {sig.permutation_seed}"
            )
        if entry_id in self._ids:
            raise DuplicateEntry(f"entry_id {entry_id!r} already in corpus")
        self.entries.append((entry_id, sig))
        self._ids.add(entry_id)

    def add_text(self, entry_id: str, text: str) -> MinHashSignature:
        sig = signature(shingle(text), self.permutation_seed)
        self.add(entry_id, sig)
        return sig

    def best_match(self, sig: MinHashSignature) -> tuple[str | None, float]:
        """Most similar entry and its similarity; (None, 0.0) when empty."""
        best_id: str | None = None
        best = 0.0
        for entry_id, other in self.entries:
            est = jaccard_estimate(sig, other)
            if est > best or best_id is None:
                best_id, best = entry_id, est
        return best_id, best

    def dump_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry_id, sig in self.entries:
                fh.write(
                    json.dumps(
                        {
                            "entry_id": entry_id,
                            "permutation_seed": self.permutation_seed,
                            "values": list(sig.values),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    @classmethod
    def load_jsonl(cls, path, permutation_seed: int | None = None) -> "CorpusIndex":
        index: CorpusIndex | None = None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                seed = int(record["permutation_seed"])
                if index is None:
                    if permutation_seed is not None and seed != permutation_seed:
                        raise FamilyMismatch(
                            f"corpus file uses seed {seed}, expected {permutation_seed}"
                        )
                    index = cls(seed)
                sig = MinHashSignature(
                    tuple(int(v) for v in record["values"]), permutation_seed=seed
                )
                index.add(str(record["entry_id"]), sig)
        if index is None:
            index = cls(permutation_seed if permutation_seed is not None else 0)
        return index


def novelty_score(
    candidate: ShingleSet | MinHashSignature, corpus: CorpusIndex
) -> float:
    """1 minus the best corpus similarity; 1.0 against an empty corpus."""
    if len(corpus) == 0:
        return 1.0
    sig = (
        candidate
        if isinstance(candidate, MinHashSignature)
        else signature(candidate, corpus.permutation_seed)
    )
    _, best = corpus.best_match(sig)
    return 1.0 - best


def admit_novel(score: float, tau_nov: float = 0.90) -> bool:
    """Inclusive novelty gate."""
    return score >= tau_nov
