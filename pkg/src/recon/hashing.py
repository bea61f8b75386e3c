"""Shared 64-bit hashing primitives.

Both replicas of a sync run must hash identically, so everything here is
seeded with fixed constants and uses no process-level randomization.  The
family is a splitmix-style block mixer over 8-byte little-endian words with
a final length fold; it is fast, uniform, and trivially vectorizable, which
is all the protocol needs (adversarial inputs are out of scope).

Three fixed seeds derive three independent hash functions:

* ``digest``       -- 64-bit identifier of an element's raw bytes
* ``indexed_hash`` -- hash of (digest, stream index), used as the per-slice
                      bit position selector
* ``check_hash``   -- per-digest checksum folded into coded-cell hash sums
"""

from __future__ import annotations

import numpy as np

U64_MASK = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15

SEED_DIGEST = 0xA0761D6478BD642F
SEED_INDEXED = 0xE7037ED1A0B428DB
SEED_CHECK = 0x8EBC6AF09C88C6E3

_U = np.uint64
_GOLDEN = _U(GOLDEN)
_M1 = _U(0xBF58476D1CE4E5B9)
_M2 = _U(0x94D049BB133111EB)


def _mix(z: int) -> int:
    """splitmix64 finalizer on a Python int."""
    z &= U64_MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & U64_MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & U64_MASK
    return z ^ (z >> 31)


def mix64(z: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer over a uint64 array."""
    z = z.astype(_U, copy=True)
    z ^= z >> _U(30)
    z *= _M1
    z ^= z >> _U(27)
    z *= _M2
    z ^= z >> _U(31)
    return z


def hash_bytes(data: bytes, seed: int) -> int:
    """Hash arbitrary bytes to 64 bits under the given seed."""
    h = seed & U64_MASK
    n = len(data)
    for off in range(0, n & ~7, 8):
        h = _mix(h ^ int.from_bytes(data[off : off + 8], "little"))
    tail = n & 7
    if tail:
        h = _mix(h ^ int.from_bytes(data[n - tail :].ljust(8, b"\0"), "little"))
    return _mix(h ^ ((n * GOLDEN) & U64_MASK))


def digest(element: bytes) -> int:
    """64-bit identifier of an element; stable across processes and replicas."""
    return hash_bytes(element, SEED_DIGEST)


def indexed_hash(d: int, i: int) -> int:
    """Hash of digest ``d`` concatenated with stream index ``i``.

    Equivalent to hashing the 16-byte little-endian concatenation d||i under
    the indexed seed; the index acts as a hash-function selector, so distinct
    indices behave as independent hash functions.
    """
    h = _mix(SEED_INDEXED ^ (d & U64_MASK))
    h = _mix(h ^ (i & U64_MASK))
    return _mix(h ^ ((16 * GOLDEN) & U64_MASK))


def check_hash(d: int) -> int:
    """Checksum hash of a digest, independent of ``digest`` and ``indexed_hash``."""
    h = _mix(SEED_CHECK ^ (d & U64_MASK))
    return _mix(h ^ ((8 * GOLDEN) & U64_MASK))


_LEN16_FOLD = _U((16 * GOLDEN) & U64_MASK)
_LEN8_FOLD = _U((8 * GOLDEN) & U64_MASK)
_SEED_INDEXED_U = _U(SEED_INDEXED)
_SEED_CHECK_U = _U(SEED_CHECK)
_SEED_DIGEST_U = _U(SEED_DIGEST)


def indexed_hash_many(digests: np.ndarray, i: int) -> np.ndarray:
    """Vectorized :func:`indexed_hash` for one index over a digest array."""
    h = mix64(digests.astype(_U, copy=False) ^ _SEED_INDEXED_U)
    h = mix64(h ^ _U(i & U64_MASK))
    return mix64(h ^ _LEN16_FOLD)


def check_hash_many(digests: np.ndarray) -> np.ndarray:
    """Vectorized :func:`check_hash` over a digest array."""
    h = mix64(digests.astype(_U, copy=False) ^ _SEED_CHECK_U)
    return mix64(h ^ _LEN8_FOLD)


def digest_many(elements: list[bytes]) -> np.ndarray:
    """Vectorized :func:`digest` over a list of byte strings.

    Elements are packed into a zero-padded word matrix and mixed column by
    column, applying each column only to the rows long enough to own it.
    Matches the scalar function bit for bit.
    """
    n = len(elements)
    if n == 0:
        return np.zeros(0, dtype=_U)
    lengths = np.fromiter((len(e) for e in elements), dtype=np.int64, count=n)
    return digest_packed(_pack_rows(elements, lengths), lengths)


def _pack_rows(elements: list[bytes], lengths: np.ndarray) -> np.ndarray:
    """Zero-padded (n, words) uint64 matrix holding each element's bytes."""
    n = len(elements)
    max_words = int((lengths.max() + 7) >> 3) if n else 0
    width = max_words * 8
    flat = np.frombuffer(b"".join(elements), dtype=np.uint8)
    padded = np.zeros(n * width, dtype=np.uint8)
    row_starts = np.arange(n, dtype=np.int64) * width
    dst = np.repeat(row_starts, lengths) + _ragged_offsets(lengths)
    padded[dst] = flat
    return padded.view(np.uint64).reshape(n, max_words)


def _ragged_offsets(lengths: np.ndarray) -> np.ndarray:
    total = int(lengths.sum())
    ends = np.cumsum(lengths)
    return np.arange(total, dtype=np.int64) - np.repeat(ends - lengths, lengths)


def digest_packed(words: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Digest rows already packed into a word matrix (see ``_pack_rows``)."""
    n = len(lengths)
    nwords = (lengths + 7) >> 3
    h = np.full(n, _SEED_DIGEST_U, dtype=_U)
    for col in range(words.shape[1]):
        live = nwords > col
        h[live] = mix64(h[live] ^ words[live, col])
    return mix64(h ^ (lengths.astype(_U) * _GOLDEN))
