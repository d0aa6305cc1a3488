"""Bloom-filter pair that records internally initiated flows.

Two filters with independent hash family members are ANDed on membership
queries, which squares the false-positive rate at the cost of one extra bit
per flow. Hash constants are frozen by the conformance fixture
(tests/fixtures/bloom_hash_vectors.json); changing them is a format break.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .packet import FlowKey

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_SEED_MULT = 0x9E3779B97F4A7C15

DEFAULT_M = 4096


def bloom_hash(key: FlowKey, hash_id: int, m: int) -> int:
    """Index in [0, m) for a flow key; m must be a power of two.

    Seeded FNV-1a/64 over the 12-byte key with a splitmix64 finalizer; the
    seed folds in hash_id so distinct ids act as independent family members.
    """
    if m <= 0 or m & (m - 1):
        raise ValueError(f"m must be a power of two, got {m}")
    h = _FNV_OFFSET ^ ((hash_id * _SEED_MULT) & _MASK64)
    for b in key.to_bytes():
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    h ^= h >> 30
    h = (h * 0xBF58476D1CE4E5B9) & _MASK64
    h ^= h >> 27
    h = (h * 0x94D049BB133111EB) & _MASK64
    h ^= h >> 31
    return h & (m - 1)


@dataclass
class BloomFilter:
    m: int = DEFAULT_M
    hash_id: int = 1
    bits: int = 0            # bitmask of length m
    inserted_count: int = 0

    def __post_init__(self):
        if self.m <= 0 or self.m & (self.m - 1):
            raise ValueError(f"m must be a power of two, got {self.m}")

    def insert(self, key: FlowKey) -> None:
        self.bits |= 1 << bloom_hash(key, self.hash_id, self.m)
        self.inserted_count += 1

    def contains(self, key: FlowKey) -> bool:
        return bool(self.bits >> bloom_hash(key, self.hash_id, self.m) & 1)

    def popcount(self) -> int:
        return self.bits.bit_count()

    def clear(self) -> None:
        self.bits = 0
        self.inserted_count = 0


@dataclass
class BloomPair:
    f1: BloomFilter = field(default_factory=lambda: BloomFilter(hash_id=1))
    f2: BloomFilter = field(default_factory=lambda: BloomFilter(hash_id=2))

    def __post_init__(self):
        if self.f1.hash_id == self.f2.hash_id:
            raise ValueError("filters must use distinct hash ids")
        if self.f1.m != self.f2.m:
            raise ValueError("filters must share one size")

    @classmethod
    def sized(cls, m: int) -> "BloomPair":
        return cls(BloomFilter(m=m, hash_id=1), BloomFilter(m=m, hash_id=2))

    def insert(self, key: FlowKey) -> None:
        self.f1.insert(key)
        self.f2.insert(key)

    def contains(self, key: FlowKey) -> bool:
        """Membership requires BOTH filters to agree (AND semantics)."""
        return self.f1.contains(key) and self.f2.contains(key)

    def clear(self) -> None:
        self.f1.clear()
        self.f2.clear()
