import random

import numpy as np
import pytest

from pimmap.config import default_config
from pimmap.dram import DramGeometry
from pimmap.pe import EMPTY_KEY, InvalidKeyError, area_scan
from pimmap.pagedmap import (DeleteStatus, HashConfig, InsertStatus,
                             PagedHashMap, default_bucket_count, hash_key,
                             load_map, save_map)
from pimmap.rlu import ProbeResult, ProbeStatus, pad_to_cache_line


def tiny_geometry(capacity=4, pages=16):
    # capacity slots per page, `pages` pages spread over 2 banks.
    assert pages % 2 == 0
    return DramGeometry(channels=1, ranks_per_channel=1, banks_per_rank=2,
                        subarrays_per_bank=1, rows_per_subarray=pages // 2,
                        row_size_bytes=capacity * 8)


def soft_prober(m):
    """Functional prober: area-scan semantics with zero cost."""
    def run(cmd):
        res = area_scan(m.pages[cmd.page_id], cmd.key, cmd.start, cmd.end)
        status = ProbeStatus.FOUND if res.found else ProbeStatus.NOT_FOUND
        return ProbeResult(status, res.value, pad_to_cache_line(None), 0.0,
                           [], res.pe_ticks, cmd.page_id)
    return run


def probe_value(m, key):
    out = m.probe(key, soft_prober(m))
    return out.value if out.status is ProbeStatus.FOUND else None


class TestHashKey:
    def test_single_bucket_degenerate(self):
        cfg = HashConfig(bucket_count=1)
        assert all(hash_key(k, cfg) == 0 for k in (0, 1, 12345, 0xFFFFFFFD))

    def test_formula_oracle(self):
        # Straight re-evaluation of the stated formula for three keys.
        cfg = HashConfig(bucket_count=16, multiplier=0x9E3779B97F4A7C15, seed=77)
        for key in (7, 123456, 0xDEADBEEF):
            product = (key * 0x9E3779B97F4A7C15) % (1 << 64)
            expected = ((product ^ 77) >> 32) % 16
            assert hash_key(key, cfg) == expected

    def test_deterministic_across_instances(self):
        a = HashConfig(bucket_count=1024, seed=5)
        b = HashConfig(bucket_count=1024, seed=5)
        rng = random.Random(1)
        for _ in range(100):
            k = rng.randrange(EMPTY_KEY)
            assert hash_key(k, a) == hash_key(k, b)

    def test_distribution_uniform_keys(self):
        # 10^6 uniform keys into 1024 buckets: max/mean <= 1.3.
        rng = np.random.default_rng(1234)
        keys = rng.integers(0, EMPTY_KEY, size=1_000_000, dtype=np.uint64)
        mult = 0x9E3779B97F4A7C15
        h = (keys * np.uint64(mult)) >> np.uint64(32)
        counts = np.bincount((h % np.uint64(1024)).astype(np.int64), minlength=1024)
        assert counts.max() / counts.mean() <= 1.3

    def test_sentinel_rejected(self):
        with pytest.raises(InvalidKeyError):
            hash_key(EMPTY_KEY, HashConfig(bucket_count=4))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            HashConfig(bucket_count=0)
        with pytest.raises(ValueError):
            HashConfig(bucket_count=4, multiplier=2)


class TestInsertProbeDelete:
    def one_bucket_map(self, capacity=4, pages=16):
        return PagedHashMap(HashConfig(bucket_count=1), tiny_geometry(capacity, pages))

    def test_update_in_place(self):
        m = self.one_bucket_map()
        assert m.insert(5, 50) is InsertStatus.OK
        assert m.insert(5, 99) is InsertStatus.OK
        assert probe_value(m, 5) == 99
        assert m.live_count == 1

    def test_chain_growth_is_ceil(self):
        m = self.one_bucket_map(capacity=4)
        for k in range(5):
            assert m.insert(k, k) is InsertStatus.OK
        assert len(m.chains[0]) == 2
        assert all(probe_value(m, k) == k for k in range(5))

    def test_probe_missing_in_empty_map(self):
        m = self.one_bucket_map()
        out = m.probe(123, soft_prober(m))
        assert out.status is ProbeStatus.NOT_FOUND
        assert out.pages_probed == 0

    def test_key_on_second_page_probes_two_pages(self):
        m = self.one_bucket_map(capacity=4)
        for k in range(5):
            m.insert(k, k * 10)
        out = m.probe(4, soft_prober(m))
        assert out.status is ProbeStatus.FOUND
        assert out.pages_probed == 2

    def test_allocation_failure_when_memory_full(self):
        m = self.one_bucket_map(capacity=4, pages=2)
        for k in range(8):
            assert m.insert(k, k) is InsertStatus.OK
        assert m.insert(100, 1) is InsertStatus.ALLOC_FAILED
        assert probe_value(m, 7) == 7  # map intact

    def test_delete_then_probe_not_found(self):
        m = self.one_bucket_map()
        m.insert(5, 50)
        assert m.delete(5) is DeleteStatus.REMOVED
        assert probe_value(m, 5) is None

    def test_delete_absent_is_noop(self):
        m = self.one_bucket_map()
        m.insert(5, 50)
        before = m.count_slot_states()
        assert m.delete(6) is DeleteStatus.NOT_FOUND
        assert m.count_slot_states() == before

    def test_tombstone_reused_by_reinsert(self):
        m = self.one_bucket_map(capacity=8)
        m.insert(1, 10)
        m.insert(2, 20)
        occupied_before = m.count_slot_states()[0]
        m.delete(1)
        m.insert(3, 30)  # same bucket by construction
        occupied, tombstones, _ = m.count_slot_states()
        assert occupied == occupied_before
        assert tombstones == 0
        assert m.chains[0][0].fill == 2

    def test_earliest_tombstone_in_chain_order_reused(self):
        m = self.one_bucket_map(capacity=4)
        for k in range(8):
            m.insert(k, k)
        m.delete(6)
        m.delete(1)
        m.insert(50, 500)  # must land in slot 1 of the first page
        assert m._key_loc[50] % m.page_capacity == 1
        assert m.chains[0][0].page_id == m._key_loc[50] // m.page_capacity

    def test_random_log_matches_dict_oracle(self):
        rng = random.Random(99)
        sim = default_config()
        m = PagedHashMap(HashConfig(bucket_count=64), sim.geometry)
        oracle = {}
        prober = soft_prober(m)
        for _ in range(30_000):
            op = rng.random()
            key = rng.randrange(2000)
            if op < 0.5:
                value = rng.randrange(1 << 32)
                assert m.insert(key, value) is InsertStatus.OK
                oracle[key] = value
            elif op < 0.8:
                out = m.probe(key, prober)
                if key in oracle:
                    assert (out.status, out.value) == (ProbeStatus.FOUND, oracle[key])
                else:
                    assert out.status is ProbeStatus.NOT_FOUND
            else:
                expect = DeleteStatus.REMOVED if key in oracle else DeleteStatus.NOT_FOUND
                assert m.delete(key) is expect
                oracle.pop(key, None)
        assert m.live_count == len(oracle)
        occupied, tombstones, _ = m.count_slot_states()
        assert occupied == m.live_count
        assert tombstones == m.tombstone_count
        for key, value in oracle.items():
            assert probe_value(m, key) == value

    def test_chain_length_invariant(self):
        rng = random.Random(5)
        m = self.one_bucket_map(capacity=4, pages=16)
        used = 0
        for k in rng.sample(range(100), 30):
            if m.insert(k, k) is InsertStatus.ALLOC_FAILED:
                break
            used += 1
        # All used slots (live + tombstones) are packed: ceil over capacity.
        assert len(m.chains[0]) == -(-used // 4)


class TestHistogram:
    def test_empty_map(self):
        m = PagedHashMap(HashConfig(bucket_count=8), tiny_geometry())
        lengths, summary = m.bucket_histogram()
        assert lengths == [0] * 8
        assert (summary.mean, summary.max, summary.coefficient_of_variation) == (0.0, 0, 0.0)

    def test_single_bucket(self):
        m = PagedHashMap(HashConfig(bucket_count=1), tiny_geometry(capacity=8))
        for k in range(4):
            m.insert(k, k)
        lengths, summary = m.bucket_histogram()
        assert lengths == [4]
        assert summary.mean == 4.0 and summary.max == 4

    def test_tombstones_not_counted(self):
        m = PagedHashMap(HashConfig(bucket_count=1), tiny_geometry(capacity=8))
        for k in range(4):
            m.insert(k, k)
        m.delete(0)
        lengths, _ = m.bucket_histogram()
        assert lengths == [3]


class TestCoLocate:
    def test_two_small_buckets_share_a_page(self):
        sim = default_config()
        m = PagedHashMap(HashConfig(bucket_count=4096), sim.geometry)
        keys = []
        rng = random.Random(0)
        while len(keys) < 2:
            k = rng.randrange(EMPTY_KEY)
            if all(m.bucket_of(k) != m.bucket_of(j) for j in keys):
                keys.append(k)
        for k in keys:
            m.insert(k, k + 1)
        assert m.allocated_pages == 2
        report = m.co_locate_buckets()
        assert len(report.relocations) == 1
        assert report.pages_freed == 1
        assert m.allocated_pages == 1
        reloc = report.relocations[0]
        assert (reloc.range_a, reloc.range_b) == ((0, 1), (1, 2))
        for k in keys:
            assert probe_value(m, k) == k + 1

    def test_full_bucket_never_colocated(self):
        m = PagedHashMap(HashConfig(bucket_count=1), tiny_geometry(capacity=4))
        for k in range(4):
            m.insert(k, k)
        report = m.co_locate_buckets(threshold=4)
        assert report.relocations == []

    def test_random_map_probes_unchanged(self):
        rng = random.Random(31)
        sim = default_config()
        m = PagedHashMap(HashConfig(bucket_count=512), sim.geometry)
        inserted = {}
        for _ in range(3000):
            k = rng.randrange(EMPTY_KEY)
            v = rng.randrange(1 << 32)
            m.insert(k, v)
            inserted[k] = v
        for k in rng.sample(list(inserted), 500):
            m.delete(k)
            del inserted[k]
        pages_before = m.allocated_pages
        before = {k: probe_value(m, k) for k in inserted}
        report = m.co_locate_buckets()
        assert report.pages_freed > 0
        assert m.allocated_pages <= pages_before
        assert {k: probe_value(m, k) for k in inserted} == before
        # absent keys stay absent
        for _ in range(200):
            k = rng.randrange(EMPTY_KEY)
            if k not in inserted:
                assert probe_value(m, k) is None
        self.check_page_invariants(m)

    def check_page_invariants(self, m):
        per_page = {}
        for chain in m.chains.values():
            for entry in chain:
                per_page.setdefault(entry.page_id, []).append((entry.start, entry.end))
        for page_id, ranges in per_page.items():
            ranges.sort()
            total = 0
            prev_end = 0
            for start, end in ranges:
                assert start >= prev_end, f"overlap on page {page_id}"
                total += end - start
                prev_end = end
            assert total <= m.page_capacity

    def test_insert_after_colocate_overflows_to_new_page(self):
        sim = default_config()
        m = PagedHashMap(HashConfig(bucket_count=4096), sim.geometry)
        rng = random.Random(2)
        keys = []
        while len(keys) < 2:
            k = rng.randrange(EMPTY_KEY)
            if all(m.bucket_of(k) != m.bucket_of(j) for j in keys):
                keys.append(k)
        for k in keys:
            m.insert(k, 1)
        m.co_locate_buckets()
        # The co-located range is exactly full; same-bucket keys overflow.
        bucket = m.bucket_of(keys[0])
        extra = next(k for k in range(10**6)
                     if k not in keys and m.bucket_of(k) == bucket)
        m.insert(extra, 2)
        assert len(m.chains[bucket]) == 2
        assert probe_value(m, extra) == 2
        assert probe_value(m, keys[0]) == 1


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        rng = random.Random(8)
        sim = default_config()
        cfg = HashConfig(bucket_count=256)
        m = PagedHashMap(cfg, sim.geometry)
        inserted = {}
        for _ in range(5000):
            k = rng.randrange(EMPTY_KEY)
            v = rng.randrange(1 << 32)
            m.insert(k, v)
            inserted[k] = v
        for k in rng.sample(list(inserted), 800):
            m.delete(k)
            del inserted[k]
        data = tmp_path / "map.hmkv"
        sidecar = tmp_path / "map.chains"
        save_map(m, str(data), str(sidecar))
        loaded = load_map(str(data), str(sidecar), cfg, sim.geometry)
        assert loaded.live_count == len(inserted)
        for k, v in inserted.items():
            assert probe_value(loaded, k) == v
        assert probe_value(loaded, next(iter(set(range(10000)) - set(inserted)))) in (None,)

    def test_sidecar_format(self, tmp_path):
        m = PagedHashMap(HashConfig(bucket_count=1), tiny_geometry(capacity=4))
        for k in range(5):
            m.insert(k, k)
        sidecar = tmp_path / "chains.txt"
        data = tmp_path / "pairs.hmkv"
        save_map(m, str(data), str(sidecar))
        text = sidecar.read_text()
        assert text == "0: 0[0,4) 1[0,4)\n"

    def test_colocated_roundtrip(self, tmp_path):
        sim = default_config()
        cfg = HashConfig(bucket_count=4096)
        m = PagedHashMap(cfg, sim.geometry)
        rng = random.Random(12)
        inserted = {}
        for _ in range(300):
            k = rng.randrange(EMPTY_KEY)
            m.insert(k, k ^ 0xFFFF)
            inserted[k] = k ^ 0xFFFF
        m.co_locate_buckets()
        data, sidecar = tmp_path / "d.hmkv", tmp_path / "d.chains"
        save_map(m, str(data), str(sidecar))
        loaded = load_map(str(data), str(sidecar), cfg, sim.geometry)
        for k, v in inserted.items():
            assert probe_value(loaded, k) == v


def test_default_bucket_count_targets_half_pages():
    assert default_bucket_count(1_000_000, 1024) == -(-1_000_000 // 512)
    assert default_bucket_count(0, 1024) == 1
    assert default_bucket_count(10, 1) == 10
