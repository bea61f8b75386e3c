import numpy as np
import pytest

from recon import hashing
from recon.hashing import (
    GOLDEN,
    SEED_CHECK,
    SEED_DIGEST,
    SEED_INDEXED,
    U64_MASK,
    check_hash,
    check_hash_many,
    digest,
    digest_many,
    hash_bytes,
    indexed_hash,
    indexed_hash_many,
)

# Pinned golden values; the reference below recomputes them independently.
GOLDEN_EMPTY_DIGEST = 0x7DE53DE772EA694C
GOLDEN_CHECK_ZERO = 0x0B3FA603DFB9EF32


def _ref_mix(z: int) -> int:
    """Independent splitmix64 finalizer, written out step by step."""
    z &= U64_MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & U64_MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & U64_MASK
    return z ^ (z >> 31)


def _ref_hash(data: bytes, seed: int) -> int:
    h = seed
    blocks = [data[i : i + 8] for i in range(0, len(data), 8)]
    for b in blocks:
        h = _ref_mix(h ^ int.from_bytes(b.ljust(8, b"\0"), "little"))
    return _ref_mix(h ^ ((len(data) * GOLDEN) & U64_MASK))


def test_digest_empty_matches_reference_and_pin():
    assert _ref_hash(b"", SEED_DIGEST) == GOLDEN_EMPTY_DIGEST
    assert digest(b"") == GOLDEN_EMPTY_DIGEST


def test_check_hash_zero_matches_reference_and_pin():
    assert _ref_hash((0).to_bytes(8, "little"), SEED_CHECK) == GOLDEN_CHECK_ZERO
    assert check_hash(0) == GOLDEN_CHECK_ZERO


@pytest.mark.parametrize("data", [b"", b"a", b"abcdefgh", b"abcdefghi", bytes(range(80))])
def test_hash_bytes_matches_reference(data):
    for seed in (SEED_DIGEST, SEED_INDEXED, SEED_CHECK, 12345):
        assert hash_bytes(data, seed) == _ref_hash(data, seed)


def test_digest_deterministic():
    x = b"some element content"
    assert digest(x) == digest(x)


def test_indexed_hash_is_hash_of_concatenation():
    # contract: the 16-byte little-endian concatenation digest||index under
    # the indexed seed
    for d, i in [(0, 0), (1, 2), (2**64 - 1, 7), (0xDEADBEEF, 2**32)]:
        cat = (d & U64_MASK).to_bytes(8, "little") + (i & U64_MASK).to_bytes(8, "little")
        assert indexed_hash(d, i) == hash_bytes(cat, SEED_INDEXED) == _ref_hash(cat, SEED_INDEXED)


def test_indexed_hash_distinct_indices():
    d = digest(b"x")
    assert indexed_hash(d, 0) != indexed_hash(d, 1)


def test_cross_replica_determinism():
    # two independently constructed "replicas" agree on every family member
    for d, i in [(3, 0), (digest(b"payload"), 5)]:
        assert indexed_hash(d, i) == indexed_hash(d, i)
        assert check_hash(d) == check_hash(d)


def test_no_collisions_100k(rng):
    lengths = rng.integers(5, 81, size=100_000)
    buf = rng.bytes(int(lengths.sum()))
    off = np.concatenate([[0], np.cumsum(lengths)])
    elements = [buf[off[i] : off[i + 1]] for i in range(100_000)]
    digs = digest_many(elements)
    # duplicates of the *byte strings* would legitimately collide
    n_distinct = len(set(elements))
    assert len(np.unique(digs)) == n_distinct


def test_vectorized_matches_scalar(rng):
    elements = [rng.bytes(int(rng.integers(0, 81))) for _ in range(500)]
    assert digest_many(elements).tolist() == [digest(e) for e in elements]
    digs = rng.integers(0, 1 << 64, size=300, dtype=np.uint64)
    for i in (0, 1, 97):
        assert indexed_hash_many(digs, i).tolist() == [indexed_hash(int(d), i) for d in digs]
    assert check_hash_many(digs).tolist() == [check_hash(int(d)) for d in digs]


def _chi_square_pvalue(counts: np.ndarray, expected: float) -> float:
    try:
        from scipy import stats

        return float(stats.chisquare(counts).pvalue)
    except ImportError:  # Wilson-Hilferty approximation
        k = len(counts) - 1
        x = float(((counts - expected) ** 2 / expected).sum())
        z = ((x / k) ** (1 / 3) - (1 - 2 / (9 * k))) / np.sqrt(2 / (9 * k))
        return float(0.5 * np.exp(-0.717 * z - 0.416 * z * z)) if z > 0 else 1.0


@pytest.mark.parametrize("m,samples", [(64, 100_000), (1024, 100_000), (144_270, 2_000_000)])
def test_indexed_hash_uniform_mod_m(m, samples, rng):
    digs = rng.integers(0, 1 << 64, size=samples, dtype=np.uint64)
    pos = indexed_hash_many(digs, 3) % np.uint64(m)
    counts = np.bincount(pos.astype(np.int64), minlength=m)
    assert _chi_square_pvalue(counts, samples / m) > 0.001


def test_check_hash_rarely_identity(rng):
    digs = rng.integers(0, 1 << 64, size=1_000_000, dtype=np.uint64)
    frac = float(np.mean(check_hash_many(digs) == digs))
    assert frac < 1e-5
