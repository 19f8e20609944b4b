import itertools
import random

import pytest

from pimmap.pe import (EMPTY_KEY, TOMBSTONE_KEY, CapacityError,
                       InvalidKeyError, PeConfig, RowImage, SlotState,
                       area_scan, bitslice_decode, bitslice_encode,
                       decode_row, encode_row, perf_scan)

AREA = PeConfig(variant="area")
PERF = PeConfig(variant="perf")
PERF_CAM = PeConfig(variant="perf", cam_mode=True)


def random_pairs(rng, n, key_bound=EMPTY_KEY):
    keys = rng.sample(range(key_bound), n)
    return [(k, rng.randrange(1 << 32)) for k in keys]


class TestRowImage:
    def test_empty_row(self):
        row = encode_row([], 4)
        assert [s.state for s in row.slots()] == [SlotState.EMPTY] * 4
        assert decode_row(row) == []

    def test_direct_placement(self):
        row = encode_row([(5, 50), (7, 70)], 4)
        states = [s.state for s in row.slots()]
        assert states == [SlotState.OCCUPIED, SlotState.OCCUPIED,
                          SlotState.EMPTY, SlotState.EMPTY]
        assert decode_row(row) == [(5, 50), (7, 70)]

    def test_sentinel_key_rejected(self):
        with pytest.raises(InvalidKeyError):
            encode_row([(EMPTY_KEY, 1)], 4)
        with pytest.raises(InvalidKeyError):
            encode_row([(TOMBSTONE_KEY, 1)], 4)

    def test_overflow_rejected(self):
        with pytest.raises(CapacityError):
            encode_row([(1, 1), (2, 2)], 1)

    def test_roundtrip_random_full_page(self):
        rng = random.Random(42)
        pairs = random_pairs(rng, 1024)
        row = encode_row(pairs, 1024)
        assert decode_row(row) == pairs

    def test_bytes_roundtrip(self):
        rng = random.Random(7)
        row = encode_row(random_pairs(rng, 100), 128)
        row.set_tombstone(99)
        data = row.to_bytes()
        assert len(data) == 128 * 8
        assert RowImage.from_bytes(data) == row

    def test_version_bumps_on_mutation(self):
        row = RowImage(4)
        v0 = row.version
        row.set_pair(0, 1, 2)
        row.set_tombstone(0)
        assert row.version == v0 + 2


class TestBitSlice:
    def test_toy_planes(self):
        row = encode_row([(0b01, 0), (0b10, 0)], 2)
        region = bitslice_encode(row, key_bits=8, value_bits=8)
        assert region.key_planes[0] == 0b01  # bit 0 of keys, column-major
        assert region.key_planes[1] == 0b10
        assert region.occupancy == 0b11

    def test_all_empty_occupancy_zero(self):
        region = bitslice_encode(RowImage(16))
        assert region.occupancy == 0
        assert all(p == 0 for p in region.key_planes)

    def test_roundtrip_with_states(self):
        rng = random.Random(3)
        row = encode_row(random_pairs(rng, 900), 1024)
        for i in rng.sample(range(900), 50):
            row.set_tombstone(i)
        back = bitslice_decode(bitslice_encode(row))
        assert back == row

    def test_key_too_wide_for_planes(self):
        row = encode_row([(300, 1)], 4)
        with pytest.raises(CapacityError):
            bitslice_encode(row, key_bits=8)


class TestAreaScan:
    def test_match_second_slot(self):
        row = encode_row([(5, 50), (7, 70)], 8)
        res = area_scan(row, 7)
        assert (res.found, res.value, res.column_index, res.pe_ticks) == (True, 70, 1, 2)

    def test_miss_counts_terminating_empty(self):
        row = encode_row([(5, 50), (7, 70)], 8)
        res = area_scan(row, 9)
        assert (res.found, res.pe_ticks) == (False, 3)

    def test_tombstone_examined_not_matched(self):
        row = encode_row([(1, 10), (7, 70)], 8)
        row.set_tombstone(0)
        res = area_scan(row, 7)
        assert (res.found, res.value, res.pe_ticks) == (True, 70, 2)

    def test_miss_on_full_range_scans_everything(self):
        row = encode_row([(i, i) for i in range(8)], 8)
        assert area_scan(row, 100).pe_ticks == 8

    def test_range_limited(self):
        row = encode_row([(5, 50), (7, 70), (9, 90)], 8)
        res = area_scan(row, 9, start=2, end=3)
        assert (res.found, res.column_index, res.pe_ticks) == (True, 2, 1)
        assert not area_scan(row, 5, start=1, end=3).found

    def test_empty_range(self):
        row = RowImage(4)
        assert area_scan(row, 1, start=2, end=2).pe_ticks == 0

    def test_bad_range(self):
        with pytest.raises(IndexError):
            area_scan(RowImage(4), 1, start=0, end=5)

    def test_sentinel_probe_rejected(self):
        with pytest.raises(InvalidKeyError):
            area_scan(RowImage(4), EMPTY_KEY)


class TestPerfScan:
    @pytest.mark.parametrize("occupancy", [1, 64, 256, 1024])
    def test_ticks_constant_across_occupancy(self, occupancy):
        # Bit-serial over 32 key planes plus 32 value-readout planes.
        rng = random.Random(occupancy)
        row = encode_row(random_pairs(rng, occupancy), 1024)
        region = bitslice_encode(row)
        present = row.keys[0]
        for key in (present, 123456789):
            assert perf_scan(region, key, PERF).pe_ticks == 64

    def test_cam_mode_two_ticks(self):
        rng = random.Random(9)
        region = bitslice_encode(encode_row(random_pairs(rng, 100), 1024))
        assert perf_scan(region, 42, PERF_CAM).pe_ticks == 2

    def test_no_value_readout_ticks(self):
        cfg = PeConfig(variant="perf", include_value_readout_ticks=False)
        region = bitslice_encode(RowImage(16))
        assert perf_scan(region, 42, cfg).pe_ticks == 32

    def test_direct_match(self):
        region = bitslice_encode(encode_row([(5, 50), (7, 70)], 8))
        res = perf_scan(region, 7, PERF)
        assert (res.found, res.value, res.column_index) == (True, 70, 1)

    def test_miss(self):
        region = bitslice_encode(encode_row([(5, 50)], 8))
        assert not perf_scan(region, 6, PERF).found

    def test_range_masking(self):
        region = bitslice_encode(encode_row([(5, 50), (7, 70)], 8))
        assert not perf_scan(region, 5, PERF, start=1, end=2).found
        assert perf_scan(region, 7, PERF, start=1, end=2).found

    def test_lowest_column_wins_on_corrupt_duplicates(self):
        row = RowImage(8)
        row.set_pair(2, 9, 92)
        row.set_pair(5, 9, 95)
        res = perf_scan(bitslice_encode(row), 9, PERF)
        assert (res.column_index, res.value) == (2, 92)


class TestScanEquivalence:
    """area_scan and perf_scan agree on (found, value) for every row."""

    def test_exhaustive_small_rows(self):
        # Every row of 3 slots over {empty, tombstone, keys 0..2} x all keys.
        alphabet = ["empty", "tomb", 0, 1, 2]
        for combo in itertools.product(alphabet, repeat=3):
            row = RowImage(3)
            pos = 0
            for item in combo:
                if item == "empty":
                    continue
                if item == "tomb":
                    row.set_pair(pos, 99, 0)
                    row.set_tombstone(pos)
                else:
                    row.set_pair(pos, item, item * 10 + pos)
                pos += 1
            region = bitslice_encode(row)
            for key in range(4):
                a = area_scan(row, key)
                p = perf_scan(region, key, PERF)
                assert (a.found, a.value if a.found else None) == \
                       (p.found, p.value if p.found else None), (combo, key)

    def test_randomized_full_scale(self):
        rng = random.Random(2024)
        for trial in range(20):
            n = rng.randrange(0, 1024)
            pairs = random_pairs(rng, n)
            row = encode_row(pairs, 1024)
            for i in rng.sample(range(n), min(n, 30)):
                row.set_tombstone(i)
            region = bitslice_encode(row)
            probes = [k for k, _ in rng.sample(pairs, min(n, 20))]
            probes += [rng.randrange(EMPTY_KEY) for _ in range(20)]
            for key in probes:
                a = area_scan(row, key)
                p = perf_scan(region, key, PERF)
                assert a.found == p.found
                if a.found:
                    assert a.value == p.value

    def test_area_ticks_monotone_in_position(self):
        row = encode_row([(i + 1, i) for i in range(64)], 64)
        ticks = [area_scan(row, i + 1).pe_ticks for i in range(64)]
        assert ticks == sorted(ticks)
        assert ticks[0] == 1 and ticks[-1] == 64


class TestPeConfig:
    def test_cam_requires_perf(self):
        with pytest.raises(ValueError):
            PeConfig(variant="area", cam_mode=True)

    def test_bits_restricted(self):
        with pytest.raises(ValueError):
            PeConfig(key_bits=12)
