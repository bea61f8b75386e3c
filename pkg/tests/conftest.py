import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


def make_elements(rng: np.random.Generator, count: int, lo: int = 5, hi: int = 80) -> list[bytes]:
    """Distinct random byte strings with lengths uniform in [lo, hi]."""
    out: set[bytes] = set()
    while len(out) < count:
        ln = int(rng.integers(lo, hi + 1))
        out.add(rng.bytes(ln))
    return sorted(out)[:count]


def random_digests(rng: np.random.Generator, count: int) -> np.ndarray:
    return np.unique(rng.integers(1, 1 << 63, size=count + count // 4 + 8, dtype=np.uint64))[:count]
