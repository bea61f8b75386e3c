"""Synthetic replica-pair workloads with controlled Jaccard similarity.

Two sets of ``n`` distinct variable-sized byte strings share ``n - d/2``
elements and differ in ``d/2`` per side, where ``d`` solves the Jaccard
equation ``J = (n - d/2) / (n + d/2)`` with the per-side count rounded to
the nearest integer.  Element content is seed-derived random bytes with
lengths uniform over a configured range; generation is deterministic per
seed and regenerates on the (rare) duplicate draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from recon.hashing import digest_packed


@dataclass
class WorkloadSpec:
    n: int
    jaccard: float
    size_range: tuple[int, int] = (5, 80)
    seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.size_range
        if self.n < 1:
            raise ValueError(f"per-replica cardinality must be >= 1, got {self.n}")
        if not 0.0 <= self.jaccard <= 1.0:
            raise ValueError(f"jaccard must be in [0, 1], got {self.jaccard}")
        if lo < 1 or hi < lo:
            raise ValueError(f"need 1 <= lo <= hi in size range, got {self.size_range}")


@dataclass
class Workload:
    elements_a: list[bytes]
    elements_b: list[bytes]
    d: int
    min_bytes: int  # content bytes of the symmetric difference
    digests_a: np.ndarray = field(repr=False, default=None)
    digests_b: np.ndarray = field(repr=False, default=None)


def side_difference(n: int, jaccard: float) -> int:
    """Per-side difference count d/2 = round(n (1-s) / (1+s))."""
    half = round(n * (1.0 - jaccard) / (1.0 + jaccard))
    if half > n:
        raise ValueError(f"jaccard {jaccard} needs {half} differing elements per side, set holds {n}")
    return half


def _draw_distinct(
    rng: np.random.Generator, count: int, lo: int, hi: int
) -> tuple[list[bytes], np.ndarray]:
    """Draw ``count`` distinct elements with their digests, redrawing dupes.

    Distinctness is enforced on the 64-bit digests, which subsumes byte
    equality; a digest collision between unequal elements only costs a redraw.
    """
    elements: list[bytes] = []
    parts: list[np.ndarray] = []
    have = np.zeros(0, dtype=np.uint64)
    while len(elements) < count:
        want = count - len(elements)
        lengths = rng.integers(lo, hi + 1, size=want)
        buf = rng.bytes(int(lengths.sum()))
        digs = digest_packed(*_pack_from_buffer(buf, lengths))
        _, first = np.unique(digs, return_index=True)
        keep = np.sort(first)
        if len(have):
            keep = keep[~np.isin(digs[keep], have)]
        ends = np.cumsum(lengths)
        for i in keep.tolist():
            elements.append(buf[ends[i] - lengths[i] : ends[i]])
        parts.append(digs[keep])
        have = np.concatenate([have] + parts[-1:])
    return elements, np.concatenate(parts)


def _pack_from_buffer(buf: bytes, lengths: np.ndarray):
    n = len(lengths)
    max_words = int((lengths.max() + 7) >> 3) if n else 0
    width = max_words * 8
    padded = np.zeros(n * width, dtype=np.uint8)
    ends = np.cumsum(lengths)
    dst = np.repeat(np.arange(n, dtype=np.int64) * width, lengths) + (
        np.arange(int(ends[-1]), dtype=np.int64) - np.repeat(ends - lengths, lengths)
    )
    padded[dst] = np.frombuffer(buf, dtype=np.uint8)
    return padded.view(np.uint64).reshape(n, max_words), lengths.astype(np.int64)


def generate_workload(spec: WorkloadSpec) -> Workload:
    """Build (S_A, S_B) for a spec; returns sets, d, and the minimum cost."""
    half = side_difference(spec.n, spec.jaccard)
    lo, hi = spec.size_range
    rng = np.random.default_rng(spec.seed)
    n_common = spec.n - half
    elements, digests = _draw_distinct(rng, spec.n + half, lo, hi)
    common, a_only, b_only = (
        elements[:n_common],
        elements[n_common : spec.n],
        elements[spec.n :],
    )
    min_bytes = sum(len(e) for e in a_only) + sum(len(e) for e in b_only)
    return Workload(
        elements_a=common + a_only,
        elements_b=common + b_only,
        d=2 * half,
        min_bytes=min_bytes,
        digests_a=np.concatenate([digests[:n_common], digests[n_common : spec.n]]),
        digests_b=np.concatenate([digests[:n_common], digests[spec.n :]]),
    )
