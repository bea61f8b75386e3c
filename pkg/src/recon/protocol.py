"""Three-phase hybrid sync between two simulated replicas.

Phase 1 streams Bloom slices of A's set to B until B's cost rule fires;
phase 2 streams slices of B's surviving suspected-common set back to A;
phase 3 streams coded cells of A's suspected-common digests to B, which
combines them with its own encoding, peels out the surviving false
positives, and triggers the final element exchange.  Both replicas end
holding the union.

The channel is a zero-latency duplex pipe: stop signals arrive instantly,
so no overshoot slices are metered unless explicitly configured.  Every
message is metered byte-exactly, split into metadata (framing, filters,
cells, digests, length prefixes) and state (raw element content only).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from recon.errors import ProtocolError
from recon.hashing import digest_many
from recon.rbf import SLICE_HEADER_BYTES, generate_slice, should_stop, slice_bits, SlicePartitioner
from recon.riblt import C_ELEM_BITS, CELL_BYTES, CellEncoder, min_decodable_prefix

MSG_TAG_BYTES = 1
STOP_BYTES = 2  # tag + stream id
DIGEST_BYTES = 8


def varint_len(value: int) -> int:
    """Bytes a LEB128 varint needs for ``value``."""
    if value < 0:
        raise ValueError("varint is unsigned")
    n = 1
    while value >= 0x80:
        value >>= 7
        n += 1
    return n


def element_list_size(elements: list[bytes]) -> tuple[int, int]:
    """(metadata, state) bytes of an element list: count + per-element
    varint length prefixes are metadata, content is state."""
    meta = varint_len(len(elements)) + sum(varint_len(len(e)) for e in elements)
    return meta, sum(len(e) for e in elements)


def varint_len_many(values: np.ndarray) -> np.ndarray:
    out = np.ones(len(values), dtype=np.int64)
    threshold = 0x80
    while np.any(values >= threshold):
        out += values >= threshold
        threshold <<= 7
    return out


def digest_list_size(count: int) -> int:
    return varint_len(count) + DIGEST_BYTES * count


@dataclass
class Message:
    """One metered protocol message."""

    kind: str
    metadata_bytes: int
    state_bytes: int = 0
    count: int = 1  # identical back-to-back messages may be folded into one entry

    @property
    def byte_size(self) -> int:
        return self.metadata_bytes + self.state_bytes


@dataclass
class Transcript:
    """Ordered, byte-exact log of a protocol run."""

    messages: list[Message] = field(default_factory=list)
    metadata_bytes: int = 0
    state_bytes: int = 0
    phase_metadata: dict[str, int] = field(default_factory=dict)
    encode_seconds: dict[str, float] = field(default_factory=lambda: {"A": 0.0, "B": 0.0})
    decode_seconds: dict[str, float] = field(default_factory=lambda: {"A": 0.0, "B": 0.0})

    def log(self, kind: str, metadata: int, state: int = 0, phase: str = "", count: int = 1) -> None:
        self.messages.append(Message(kind, metadata, state, count))
        self.metadata_bytes += metadata * count
        self.state_bytes += state * count
        if phase:
            self.phase_metadata[phase] = self.phase_metadata.get(phase, 0) + metadata * count

    @property
    def total_bytes(self) -> int:
        return self.metadata_bytes + self.state_bytes

    @property
    def encode_seconds_total(self) -> float:
        return sum(self.encode_seconds.values())

    @property
    def decode_seconds_total(self) -> float:
        return sum(self.decode_seconds.values())

    def message_rows(self):
        """One dict per logical message (bulk entries expanded)."""
        for m in self.messages:
            for _ in range(m.count):
                yield {
                    "kind": m.kind,
                    "byte_size": m.metadata_bytes + m.state_bytes,
                    "metadata_bytes": m.metadata_bytes,
                    "state_bytes": m.state_bytes,
                }


@dataclass
class SyncConfig:
    """Tunables for one protocol run."""

    c_elem_bits: float = C_ELEM_BITS
    overshoot_slices: int = 0  # wasted slices per stream, modeling stop-signal latency
    slice_cap: int = 1_000_000
    cell_cap: int = 0  # 0 means 64 * (|S_A| + |S_B|), floored at 1024
    build_outputs: bool = True
    collect_messages: bool = True
    measure_time: bool = True

    def effective_cell_cap(self, n_total: int) -> int:
        return self.cell_cap if self.cell_cap > 0 else max(1024, 64 * n_total)


@dataclass
class ReplicaState:
    """One replica's view: element store plus the partition bookkeeping.

    The store maps digest to element bytes and is treated as read-only by a
    run; reconciled outputs are fresh dicts, so one store can back many runs.
    """

    elements: dict[int, bytes]
    digests: np.ndarray
    sorted_digests: np.ndarray
    sorted_lengths: np.ndarray
    com: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint64))
    tn: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint64))
    fp: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint64))

    @classmethod
    def from_elements(
        cls,
        elements: list[bytes],
        digests: np.ndarray | None = None,
        store: dict[int, bytes] | None = None,
    ) -> "ReplicaState":
        if digests is None:
            digests = digest_many(elements)
        if store is None:
            store = dict(zip(digests.tolist(), elements))
        if len(store) != len(elements):
            raise ValueError("duplicate elements (or a 64-bit digest collision) in input set")
        order = np.argsort(digests)
        lengths = np.fromiter((len(e) for e in elements), dtype=np.int64, count=len(elements))
        return cls(
            elements=store,
            digests=digests,
            sorted_digests=digests[order],
            sorted_lengths=lengths[order],
        )

    def take(self, digests: np.ndarray) -> list[bytes]:
        return [self.elements[d] for d in digests.tolist()]

    def list_size(self, digests: np.ndarray) -> tuple[int, int]:
        """(metadata, state) wire bytes of shipping these member elements."""
        lens = self.sorted_lengths[np.searchsorted(self.sorted_digests, digests)]
        meta = varint_len(len(digests)) + (int(varint_len_many(lens).sum()) if len(lens) else 0)
        return meta, int(lens.sum())


@dataclass
class SyncResult:
    """Outputs of one hybrid run."""

    elements_a: dict[int, bytes]
    elements_b: dict[int, bytes]
    transcript: Transcript
    phase1_slices: int = 0
    phase2_slices: int = 0
    phase3_cells: int = 0
    phase1_new_tn: list[int] = field(default_factory=list)
    phase2_new_tn: list[int] = field(default_factory=list)
    a_state: "ReplicaState | None" = None
    b_state: "ReplicaState | None" = None


class _Timer:
    """Accumulates wall-clock spans into a transcript bucket."""

    def __init__(self, transcript: Transcript, enabled: bool):
        self.t = transcript
        self.enabled = enabled

    class _Span:
        def __init__(self, bucket: dict, key: str, enabled: bool):
            self.bucket, self.key, self.enabled = bucket, key, enabled

        def __enter__(self):
            if self.enabled:
                self.t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            if self.enabled:
                self.bucket[self.key] += time.perf_counter() - self.t0
            return False

    def encode(self, replica: str) -> "_Timer._Span":
        return self._Span(self.t.encode_seconds, replica, self.enabled)

    def decode(self, replica: str) -> "_Timer._Span":
        return self._Span(self.t.decode_seconds, replica, self.enabled)


def stream_slices(
    sender_digests: np.ndarray,
    partitioner: SlicePartitioner,
    *,
    transcript: Transcript,
    timer: _Timer,
    kind: str,
    phase: str,
    stream_id: int,
    sender: str,
    receiver: str,
    config: SyncConfig,
) -> int:
    """Run one slice stream until the receiver's stopping rule fires.

    Returns the number of useful slices sent.  The sender keeps producing
    until the stop signal; with a zero-latency channel that is exactly the
    slice whose marginal gain drops below the cost threshold.
    """
    m = slice_bits(len(sender_digests))
    slice_msg_bytes = SLICE_HEADER_BYTES + (m + 7) // 8
    sent = 0
    while True:
        if sent >= config.slice_cap:
            raise ProtocolError(f"slice stream exceeded the {config.slice_cap}-slice guard")
        with timer.encode(sender):
            s = generate_slice(sender_digests, sent, m)
        transcript.log(kind, slice_msg_bytes, phase=phase)
        with timer.decode(receiver):
            new_tn = partitioner.consume(s)
        sent += 1
        if should_stop(len(new_tn), m, config.c_elem_bits):
            break
    if config.overshoot_slices:
        transcript.log(kind, slice_msg_bytes, phase=phase, count=config.overshoot_slices)
    transcript.log(f"Stop{stream_id}", STOP_BYTES, phase=phase)
    return sent


def setup_run(
    elements_a: list[bytes],
    elements_b: list[bytes],
    config: SyncConfig,
    digests: tuple[np.ndarray, np.ndarray] | None = None,
    stores: tuple[dict[int, bytes], dict[int, bytes]] | None = None,
) -> tuple[ReplicaState, ReplicaState, Transcript, _Timer, SyncResult]:
    """Shared run scaffolding: replica states, transcript, timer, result.

    Precomputed digests and element stores may be passed through so sweeps
    do not re-hash the same workload for every algorithm configuration.
    """
    a = ReplicaState.from_elements(
        elements_a,
        digests[0] if digests else None,
        stores[0] if stores else None,
    )
    b = ReplicaState.from_elements(
        elements_b,
        digests[1] if digests else None,
        stores[1] if stores else None,
    )
    transcript = Transcript()
    if not config.collect_messages:
        transcript.messages = _NullMessageLog()
    timer = _Timer(transcript, config.measure_time)
    result = SyncResult(
        elements_a={}, elements_b={}, transcript=transcript, a_state=a, b_state=b
    )
    return a, b, transcript, timer, result


def run_hybrid(
    elements_a: list[bytes],
    elements_b: list[bytes],
    config: SyncConfig | None = None,
    **kw,
) -> SyncResult:
    """Reconcile two element sets; both outputs equal their union."""
    config = config or SyncConfig()
    a, b, transcript, timer, result = setup_run(elements_a, elements_b, config, **kw)

    # Phase 1: A streams slices over S_A; B partitions S_B.
    part_b = SlicePartitioner(b.digests)
    result.phase1_slices = stream_slices(
        a.digests, part_b,
        transcript=transcript, timer=timer, kind="RBFStream", phase="phase1",
        stream_id=1, sender="A", receiver="B", config=config,
    )
    result.phase1_new_tn = part_b.new_tn_history
    b.com, b.tn = part_b.suspected_common, part_b.true_negatives

    # Phase 2: B streams slices over its suspected-common set; A partitions S_A.
    part_a = SlicePartitioner(a.digests)
    result.phase2_slices = stream_slices(
        b.com, part_a,
        transcript=transcript, timer=timer, kind="RBFStream2", phase="phase2",
        stream_id=2, sender="B", receiver="A", config=config,
    )
    result.phase2_new_tn = part_a.new_tn_history
    a.com, a.tn = part_a.suspected_common, part_a.true_negatives

    # Phase 3: coded-cell stream over the suspected-common digest sets.
    cells, b_fp, a_fp = run_cell_stream(
        a.com, b.com, transcript=transcript, timer=timer, config=config,
        sender="A", receiver="B",
    )
    result.phase3_cells = cells
    a.fp, b.fp = a_fp, b_fp

    final_update(a, b, transcript=transcript, timer=timer, result=result, config=config)
    return result


def run_cell_stream(
    sender_com: np.ndarray,
    receiver_com: np.ndarray,
    *,
    transcript: Transcript,
    timer: _Timer,
    config: SyncConfig,
    sender: str,
    receiver: str,
) -> tuple[int, np.ndarray, np.ndarray]:
    """Phase 3: stream sender cells until the receiver's combined decode lands.

    Returns (cells sent, receiver-only digests, sender-only digests); the
    receiver-only ones are the receiver's false positives, the sender-only
    ones the digests it must request.
    """
    cap = config.effective_cell_cap(len(sender_com) + len(receiver_com))
    with timer.encode(sender):
        enc_sender = CellEncoder(sender_com)
    with timer.encode(receiver):
        enc_receiver = CellEncoder(receiver_com)
    t0 = time.perf_counter()
    cells, receiver_only, sender_only = min_decodable_prefix(
        enc_receiver, enc_sender, cell_cap=cap
    )
    if config.measure_time:
        # cell materialization is encoding work at its producer; the
        # remainder of the search (combination and peeling) is decoding
        elapsed = time.perf_counter() - t0
        transcript.encode_seconds[sender] += enc_sender.encode_seconds
        transcript.encode_seconds[receiver] += enc_receiver.encode_seconds
        transcript.decode_seconds[receiver] += max(
            0.0, elapsed - enc_sender.encode_seconds - enc_receiver.encode_seconds
        )
    transcript.log("IBLTStream", CELL_BYTES, phase="phase3", count=cells)
    transcript.log("StopIBLT", STOP_BYTES, phase="phase3")
    return cells, receiver_only, sender_only


def final_update(
    a: ReplicaState,
    b: ReplicaState,
    *,
    transcript: Transcript,
    timer: _Timer,
    result: SyncResult,
    config: SyncConfig,
) -> None:
    """FinalUpdate exchange.

    B ships its true-negative and false-positive elements plus the digests it
    decoded as sender-only; A resolves those digests to its own elements,
    applies B's payload, and replies with its true negatives and resolved
    false positives.  Element content meters as state, everything else
    (tags, counts, length prefixes, digests) as metadata.
    """
    # B -> A
    with timer.encode("B"):
        meta_tn, state_tn = b.list_size(b.tn)
        meta_fp, state_fp = b.list_size(b.fp)
        meta_digests = digest_list_size(len(a.fp))
    transcript.log(
        "FinalUpdateB",
        MSG_TAG_BYTES + meta_tn + meta_fp + meta_digests,
        state_tn + state_fp,
        phase="final",
    )
    with timer.decode("A"):
        if config.build_outputs:
            out_a = dict(a.elements)
            out_a.update(zip(b.tn.tolist(), b.take(b.tn)))
            out_a.update(zip(b.fp.tolist(), b.take(b.fp)))
            result.elements_a = out_a

    # A -> B
    with timer.encode("A"):
        meta_tn2, state_tn2 = a.list_size(a.tn)
        meta_fp2, state_fp2 = a.list_size(a.fp)
    transcript.log(
        "FinalUpdateA",
        MSG_TAG_BYTES + meta_tn2 + meta_fp2,
        state_tn2 + state_fp2,
        phase="final",
    )
    with timer.decode("B"):
        if config.build_outputs:
            out_b = dict(b.elements)
            out_b.update(zip(a.tn.tolist(), a.take(a.tn)))
            out_b.update(zip(a.fp.tolist(), a.take(a.fp)))
            result.elements_b = out_b


class _NullMessageLog(list):
    """Message sink that keeps totals in the transcript but drops entries."""

    def append(self, item) -> None:  # noqa: D102 - list override
        pass
