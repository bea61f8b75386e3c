"""Classic static Bloom filter over 64-bit element digests.

Used by the fixed-rate baselines; a slice of the rateless stream is the
k=1 special case of this structure (see :mod:`recon.rbf`).
"""

from __future__ import annotations

import math
import struct

import numpy as np

from recon.hashing import indexed_hash_many

_LN2 = math.log(2.0)

HEADER_BYTES = 12  # m as u64 LE + k as u32 LE


def sbf_params(n: int, epsilon: float) -> tuple[int, int]:
    """Standard optimal (m, k) for n elements at target false-positive rate.

    m = ceil(-n ln(eps) / ln(2)^2), k = round((m/n) ln 2), clamped to >= 1.
    """
    if n < 1:
        raise ValueError(f"set cardinality must be >= 1, got {n}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"target FPR must be in (0, 1), got {epsilon}")
    m = math.ceil(-n * math.log(epsilon) / (_LN2 * _LN2))
    k = max(1, round(m / n * _LN2))
    return m, k


class BloomFilter:
    """Bit-array membership sketch with ``k`` indexed hash probes.

    Probe ``j`` of digest ``d`` is ``indexed_hash(d, j) mod m``; inserted
    digests always query True, non-members query True with probability
    roughly ``(1 - e^(-k n / m))^k``.
    """

    def __init__(self, m: int, k: int):
        if m < 1 or k < 1:
            raise ValueError(f"need m >= 1 and k >= 1, got m={m} k={k}")
        self.m = m
        self.k = k
        self.bits = np.zeros(m, dtype=bool)
        self.n_inserted = 0

    @classmethod
    def for_set(cls, n: int, epsilon: float) -> "BloomFilter":
        return cls(*sbf_params(n, epsilon))

    def insert(self, d: int) -> None:
        self.insert_many(np.asarray([d], dtype=np.uint64))

    def insert_many(self, digests: np.ndarray) -> None:
        m = np.uint64(self.m)
        for j in range(self.k):
            self.bits[indexed_hash_many(digests, j) % m] = True
        self.n_inserted += len(digests)

    def query(self, d: int) -> bool:
        return bool(self.query_many(np.asarray([d], dtype=np.uint64))[0])

    def query_many(self, digests: np.ndarray) -> np.ndarray:
        m = np.uint64(self.m)
        out = np.ones(len(digests), dtype=bool)
        for j in range(self.k):
            out &= self.bits[indexed_hash_many(digests, j) % m]
        return out

    @property
    def fill_fraction(self) -> float:
        return float(self.bits.sum()) / self.m

    def serialized_size(self) -> int:
        """Wire size in bytes: 12-byte header + LSB-first packed bit array."""
        return HEADER_BYTES + (self.m + 7) // 8

    def to_bytes(self) -> bytes:
        header = struct.pack("<QI", self.m, self.k)
        return header + np.packbits(self.bits, bitorder="little").tobytes()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "BloomFilter":
        m, k = struct.unpack_from("<QI", raw)
        f = cls(m, k)
        packed = np.frombuffer(raw, dtype=np.uint8, offset=HEADER_BYTES)
        f.bits = np.unpackbits(packed, count=m, bitorder="little").astype(bool)
        return f
