import numpy as np
import pytest

from recon.errors import DecodeCorruptionError, ProtocolError
from recon.hashing import check_hash
from recon.riblt import (
    C_ELEM_BITS,
    CELL_BYTES,
    CellEncoder,
    CodedCell,
    PeelDecoder,
    combine,
    encode_cell,
    expected_cells,
    mapping_below,
    mapping_iter,
    min_decodable_prefix,
    min_prefix_for_difference,
    peel_cells,
)
from tests.conftest import random_digests


def test_c_elem_constant():
    assert C_ELEM_BITS == pytest.approx(1.35 * 192) == pytest.approx(259.2)
    assert CELL_BYTES == 25


# --- mapping ---------------------------------------------------------------


def test_mapping_starts_at_zero_strictly_increasing(rng):
    for d in random_digests(rng, 50).tolist():
        seq = mapping_below(d, 5000)
        assert seq[0] == 0
        assert all(b > a for a, b in zip(seq, seq[1:]))


def test_mapping_deterministic_across_replicas():
    it1 = mapping_iter(0xABCDEF)
    it2 = mapping_iter(0xABCDEF)
    assert [next(it1) for _ in range(20)] == [next(it2) for _ in range(20)]


def test_mapping_density_at_8(rng):
    # inclusion probability of cell i is 1/(1 + i/2); spot-check i=8
    n = 200_000
    digs = rng.integers(1, 1 << 64, size=n, dtype=np.uint64)
    enc = CellEncoder(np.unique(digs))
    enc.extend_to(9)
    freq = enc.counts[8] / len(enc.digests)
    assert freq == pytest.approx(0.2, rel=0.05)


def test_mapping_expected_count_below_1024(rng):
    # sum of 2/(i+2) for i < 1024 is about 13.0
    digs = random_digests(rng, 20_000)
    enc = CellEncoder(digs)
    enc.extend_to(1024)
    mean_mapped = float(enc.counts.sum()) / len(digs)
    assert 11.8 <= mean_mapped <= 13.2


# --- encoding --------------------------------------------------------------


def test_encode_cell_empty_set():
    for k in (0, 1, 17):
        assert encode_cell(np.zeros(0, dtype=np.uint64), k).is_empty()


def test_encode_cell_single_element(rng):
    d = int(random_digests(rng, 1)[0])
    c = encode_cell(np.asarray([d], dtype=np.uint64), 0)
    assert (c.id_sum, c.hash_sum, c.count) == (d, check_hash(d), 1)


def test_encode_cell_zero_has_full_count(rng):
    digs = random_digests(rng, 777)
    assert encode_cell(digs, 0).count == 777


def test_encode_cell_rejects_negative_index(rng):
    with pytest.raises(ValueError):
        encode_cell(random_digests(rng, 3), -1)


def test_encoder_rejects_duplicates():
    with pytest.raises(ValueError):
        CellEncoder(np.asarray([5, 5], dtype=np.uint64))


def test_cell_18_count_band():
    # expected cell count n * 1/(1 + i/2): 1000 elements at i=18 -> 100
    counts = []
    for seed in range(30):
        digs = random_digests(np.random.default_rng(seed), 1000)
        counts.append(encode_cell(digs, 18).count)
    assert 90 <= np.mean(counts) <= 110


def test_encoder_matches_scalar_mapping(rng):
    digs = random_digests(rng, 300)
    enc = CellEncoder(digs)
    enc.extend_to(96)
    ids = np.zeros(96, dtype=np.uint64)
    cnt = np.zeros(96, dtype=np.int64)
    for d in digs.tolist():
        for i in mapping_below(d, 96):
            ids[i] ^= np.uint64(d)
            cnt[i] += 1
    assert np.array_equal(ids, enc.id_sums)
    assert np.array_equal(cnt, enc.counts)


def test_encoder_insert_remove_maintenance(rng):
    digs = random_digests(rng, 200)
    full = CellEncoder(digs)
    full.extend_to(64)
    grow = CellEncoder(digs[:150])
    grow.extend_to(64)
    for d in digs[150:].tolist():
        grow.insert(d)
    assert np.array_equal(grow.id_sums, full.id_sums)
    assert np.array_equal(grow.hash_sums, full.hash_sums)
    assert np.array_equal(grow.counts, full.counts)
    for d in digs[150:].tolist():
        grow.remove(d)
    base = CellEncoder(digs[:150])
    base.extend_to(64)
    assert np.array_equal(grow.id_sums, base.id_sums)
    # extension after maintenance stays consistent
    grow2 = CellEncoder(digs[:150])
    grow2.extend_to(8)
    for d in digs[150:].tolist():
        grow2.insert(d)
    grow2.extend_to(64)
    assert np.array_equal(grow2.id_sums, full.id_sums)


# --- combination -----------------------------------------------------------


def test_combine_identical_cells_cancel(rng):
    digs = random_digests(rng, 50)
    c = encode_cell(digs, 0)
    assert combine(c, c).is_empty()


def test_combine_single_difference(rng):
    d = int(random_digests(rng, 1)[0])
    local = encode_cell(np.asarray([d], dtype=np.uint64), 0)
    remote = encode_cell(np.zeros(0, dtype=np.uint64), 0)
    got = combine(local, remote)
    assert (got.id_sum, got.hash_sum, got.count) == (d, check_hash(d), 1)


def test_large_overlap_small_difference_decodes():
    # sets A = {1..100001}, B = {3..100003}, the integers used directly as
    # digests: only {1,2} and {100002,100003} survive combination
    a = np.arange(1, 100_002, dtype=np.uint64)
    b = np.arange(3, 100_004, dtype=np.uint64)
    enc_b = CellEncoder(b)
    enc_a = CellEncoder(a)
    cells, local, remote = min_decodable_prefix(enc_b, enc_a, cell_cap=1 << 16)
    assert sorted(local.tolist()) == [100_002, 100_003]
    assert sorted(remote.tolist()) == [1, 2]
    assert cells >= 4


# --- decoding --------------------------------------------------------------


def test_decode_identical_sets_one_cell(rng):
    digs = random_digests(rng, 500)
    enc_local, enc_remote = CellEncoder(digs), CellEncoder(digs.copy())
    dec = PeelDecoder()
    status = dec.decode_step(enc_local.cell(0).combine(enc_remote.cell(0)))
    assert status == "decoded"
    assert not dec.decoded_local and not dec.decoded_remote


def test_one_sided_single_difference_always_one_cell(rng):
    for seed in range(200):
        d = random_digests(np.random.default_rng(seed), 1)
        cells = min_prefix_for_difference(d, cell_cap=1 << 12)
        assert cells == 1


def test_two_sided_single_difference_band(rng):
    # one element each way: a few cells on average, never fewer than two
    totals = []
    for seed in range(300):
        digs = random_digests(np.random.default_rng(seed), 2)
        enc_local = CellEncoder(digs[:1])
        enc_remote = CellEncoder(digs[1:])
        cells, _, _ = min_decodable_prefix(enc_local, enc_remote, cell_cap=1 << 14)
        totals.append(cells)
    assert min(totals) >= 2
    assert 2.2 <= np.mean(totals) <= 4.2


def test_roundtrip_random_differences():
    for trial in range(120):
        r = np.random.default_rng(9000 + trial)
        d = int(r.integers(0, 40))
        digs = random_digests(r, d + 60)
        r.shuffle(digs)
        nb = int(r.integers(0, d + 1))
        b_only, a_only, common = digs[:nb], digs[nb:d], digs[d:]
        enc_b = CellEncoder(np.concatenate([common, b_only]))
        enc_a = CellEncoder(np.concatenate([common, a_only]))
        cells, local, remote = min_decodable_prefix(enc_b, enc_a, cell_cap=1 << 18)
        assert sorted(local.tolist()) == sorted(b_only.tolist())
        assert sorted(remote.tolist()) == sorted(a_only.tolist())
        # re-encoding the decoded difference reproduces the combined prefix
        la, lb, lc = enc_b.prefix(cells)
        ra, rb, rc = enc_a.prefix(cells)
        re_b = CellEncoder(local)
        re_a = CellEncoder(remote)
        xa, xb, xc = re_b.prefix(cells)
        ya, yb, yc = re_a.prefix(cells)
        assert np.array_equal(la ^ ra, xa ^ ya)
        assert np.array_equal(lb ^ rb, xb ^ yb)
        assert np.array_equal(lc - rc, xc - yc)


def test_incremental_equals_batch():
    for trial in range(60):
        r = np.random.default_rng(4000 + trial)
        d = int(r.integers(0, 28))
        digs = random_digests(r, d + 40)
        r.shuffle(digs)
        nb = int(r.integers(0, d + 1))
        b_only, a_only, common = digs[:nb], digs[nb:d], digs[d:]
        enc_b = CellEncoder(np.concatenate([common, b_only]))
        enc_a = CellEncoder(np.concatenate([common, a_only]))
        cells, _, _ = min_decodable_prefix(enc_b, enc_a, cell_cap=1 << 18)
        assert cells == min_prefix_for_difference(
            np.concatenate([b_only, a_only]), 1 << 18
        )
        dec = PeelDecoder()
        k = 0
        while True:
            k += 1
            if dec.decode_step(enc_b.cell(k - 1).combine(enc_a.cell(k - 1))) == "decoded":
                break
            assert k < 10_000
        assert k == cells
        assert dec.decoded_local == set(b_only.tolist())
        assert dec.decoded_remote == set(a_only.tolist())


def test_decode_sign_convention(rng):
    local_only = random_digests(rng, 5)
    enc_local = CellEncoder(local_only)
    enc_remote = CellEncoder(np.zeros(0, dtype=np.uint64))
    _, local, remote = min_decodable_prefix(enc_local, enc_remote, cell_cap=1 << 12)
    assert sorted(local.tolist()) == sorted(local_only.tolist())
    assert len(remote) == 0


def _find_digest_not_mapping_to(idx: int) -> int:
    d = 12345
    while True:
        if idx not in mapping_below(d, idx + 1):
            return d
        d += 1


def test_incremental_decoder_sign_corruption():
    d = _find_digest_not_mapping_to(1)
    dec = PeelDecoder()
    assert dec.decode_step(CodedCell(d, check_hash(d), 1)) == "decoded"
    with pytest.raises(DecodeCorruptionError):
        dec.decode_step(CodedCell(d, check_hash(d), -1))


def test_batch_peel_sign_corruption():
    d = _find_digest_not_mapping_to(1)
    ids = np.asarray([d, d], dtype=np.uint64)
    hss = np.asarray([check_hash(d)] * 2, dtype=np.uint64)
    cnt = np.asarray([1, -1], dtype=np.int64)
    with pytest.raises(DecodeCorruptionError):
        peel_cells(ids, hss, cnt)


def test_stream_guard_cap(rng):
    digs = random_digests(rng, 64)
    enc_local = CellEncoder(digs)
    enc_remote = CellEncoder(np.zeros(0, dtype=np.uint64))
    with pytest.raises(ProtocolError):
        min_decodable_prefix(enc_local, enc_remote, cell_cap=16)


def test_cell_wire_format(rng):
    d = int(random_digests(rng, 1)[0])
    c = CodedCell(d, check_hash(d), -3)
    raw = c.to_bytes()
    assert len(raw) == CELL_BYTES
    assert raw[0] == 0x02
    back = CodedCell.from_bytes(raw)
    assert (back.id_sum, back.hash_sum, back.count) == (d, check_hash(d), -3)
    with pytest.raises(ProtocolError):
        CodedCell.from_bytes(b"\x01" + raw[1:])


def test_expected_cells_estimator_tracks_reality():
    # estimator is a ranking aid; hold it to ~10% of measured means
    for d, trials in [(8, 200), (64, 100), (512, 40)]:
        tot = 0
        for seed in range(trials):
            digs = random_digests(np.random.default_rng(7000 + seed), d)
            tot += min_prefix_for_difference(digs, 1 << 16)
        assert expected_cells(d) == pytest.approx(tot / trials, rel=0.10)


def test_overhead_ratio_smoke(rng):
    trials, d = 100, 64
    tot = 0
    for seed in range(trials):
        digs = random_digests(np.random.default_rng(seed), d)
        half = d // 2
        enc_local = CellEncoder(digs[:half])
        enc_remote = CellEncoder(digs[half:])
        cells, _, _ = min_decodable_prefix(enc_local, enc_remote, cell_cap=1 << 14)
        tot += cells
    assert 1.3 <= tot / trials / d <= 1.8
