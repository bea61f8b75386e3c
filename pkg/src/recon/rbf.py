"""Rateless Bloom filter: an unbounded stream of single-hash slices.

The sender derives an effectively infinite sequence of Bloom filter
partitions ("slices") from its digest set; slice ``i`` sets bit
``indexed_hash(d, i) mod m`` for each digest ``d``.  Consuming slices
``0..k-1`` is equivalent to querying a partitioned Bloom filter with ``k``
partitions of ``m`` bits.  The receiver partitions its candidate set against
each slice and stops the stream when the marginal information gain no longer
pays for the slice, measured in bits per reconciled element.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from recon.errors import ProtocolError
from recon.hashing import indexed_hash_many

MIN_SLICE_BITS = 8

SLICE_TAG = 0x01
SLICE_HEADER_BYTES = 14  # tag u8, stream id u8, index u32 LE, m u64 LE


def slice_bits(n: int) -> int:
    """Slice width for a set of ``n`` digests: ceil(n / ln 2), floored at 8.

    The width is frozen from the set cardinality at stream start and stays
    constant across the stream.
    """
    return max(MIN_SLICE_BITS, math.ceil(n / math.log(2.0)))


def should_stop(new_tn_count: int, m: int, c_elem: float) -> bool:
    """Cost-based stopping rule, evaluated by the receiver after each slice.

    Stop once the newly revealed true negatives are worth fewer bits than the
    slice that revealed them: strictly ``new_tn_count < m / c_elem``
    (real-valued; an exact tie keeps streaming).
    """
    if m < 1:
        raise ValueError(f"slice width must be >= 1, got {m}")
    if c_elem <= 0:
        raise ValueError(f"per-element cost must be positive, got {c_elem}")
    return new_tn_count < m / c_elem


@dataclass
class BloomSlice:
    """One single-hash filter partition: stream index, width, bit array."""

    index: int
    m: int
    bits: np.ndarray

    def serialized_size(self) -> int:
        return SLICE_HEADER_BYTES + (self.m + 7) // 8

    def to_bytes(self, stream_id: int = 1) -> bytes:
        header = struct.pack("<BBIQ", SLICE_TAG, stream_id, self.index, self.m)
        return header + np.packbits(self.bits, bitorder="little").tobytes()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "BloomSlice":
        tag, _stream_id, index, m = struct.unpack_from("<BBIQ", raw)
        if tag != SLICE_TAG:
            raise ProtocolError(f"expected slice tag 0x01, got {tag:#x}")
        packed = np.frombuffer(raw, dtype=np.uint8, offset=SLICE_HEADER_BYTES)
        bits = np.unpackbits(packed, count=m, bitorder="little").astype(bool)
        return cls(index=index, m=m, bits=bits)


def generate_slice(digests: np.ndarray, i: int, m: int) -> BloomSlice:
    """Slice ``i`` of the stream encoding ``digests`` at width ``m``."""
    if m < 1:
        raise ValueError(f"slice width must be >= 1, got {m}")
    bits = np.zeros(m, dtype=bool)
    if len(digests):
        bits[indexed_hash_many(digests, i) % np.uint64(m)] = True
    return BloomSlice(index=i, m=m, bits=bits)


class SlicePartitioner:
    """Receiver-side partition state over a candidate digest set.

    Tracks the split of the candidates into suspected-common (passed every
    slice so far) and true negatives (failed at least one slice).  Candidates
    that are members of the encoded set can never move: a slice has no false
    negatives.
    """

    def __init__(self, candidates: np.ndarray):
        self.suspected_common = np.asarray(candidates, dtype=np.uint64)
        self.true_negatives = np.zeros(0, dtype=np.uint64)
        self.slices_consumed = 0
        self.new_tn_history: list[int] = []

    def consume(self, s: BloomSlice) -> np.ndarray:
        """Partition the surviving candidates against one slice.

        Returns the digests newly revealed as true negatives.  Slices must
        arrive in stream order; anything else is protocol corruption.
        """
        if s.index != self.slices_consumed:
            raise ProtocolError(
                f"out-of-order slice: expected index {self.slices_consumed}, got {s.index}"
            )
        pos = indexed_hash_many(self.suspected_common, s.index) % np.uint64(s.m)
        passed = s.bits[pos]
        new_tn = self.suspected_common[~passed]
        self.suspected_common = self.suspected_common[passed]
        self.true_negatives = np.concatenate([self.true_negatives, new_tn])
        self.slices_consumed += 1
        self.new_tn_history.append(len(new_tn))
        return new_tn
