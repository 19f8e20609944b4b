"""Hashmap front-end over page-granularity buckets.

Each bucket maps to one subarray-row-sized page and grows by chaining
overflow pages through a bookkeeping structure. Deletion tombstones slots
in place; inserts reuse the earliest tombstone in chain order before
appending. Under-utilized buckets can be co-located two to a page, each
keeping one contiguous slot range.
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dram import DramGeometry
from .pe import EMPTY_KEY, RowImage, _require_key
from .rlu import ProbeCommand, ProbeResult, ProbeStatus


@dataclass(frozen=True)
class HashConfig:
    """Multiplicative hashing: bucket = high 32 bits of (key * multiplier)
    xor seed, reduced mod bucket_count."""

    bucket_count: int
    multiplier: int = 0x9E3779B97F4A7C15
    seed: int = 0

    def __post_init__(self) -> None:
        if self.bucket_count < 1:
            raise ValueError(f"bucket_count must be >= 1, got {self.bucket_count}")
        if self.multiplier % 2 == 0:
            raise ValueError("multiplier must be odd")
        if not (0 <= self.seed < 1 << 64):
            raise ValueError("seed must be a 64-bit value")


def hash_key(key: int, config: HashConfig) -> int:
    _require_key(key)
    h = ((key * config.multiplier) & 0xFFFFFFFFFFFFFFFF) ^ config.seed
    return (h >> 32) % config.bucket_count


def default_bucket_count(n_pairs: int, page_capacity: int) -> int:
    """Sized for ~50% average page utilization."""
    half = max(1, page_capacity // 2)
    return max(1, math.ceil(n_pairs / half))


class InsertStatus(Enum):
    OK = "ok"
    ALLOC_FAILED = "alloc_failed"


class DeleteStatus(Enum):
    REMOVED = "removed"
    NOT_FOUND = "not_found"


@dataclass
class ChainEntry:
    """One page's share of a bucket: slots [start, end), of which the first
    `fill` are used (occupied or tombstoned)."""

    page_id: int
    start: int
    end: int
    fill: int = 0

    @property
    def capacity(self) -> int:
        return self.end - self.start


class PageAllocator:
    """Deterministic allocator over [0, total_pages): freed pages are reused
    lowest-id first, otherwise ids are handed out sequentially."""

    def __init__(self, total_pages: int):
        self.total_pages = total_pages
        self._allocated: set = set()
        self._freed: List[int] = []
        self._next = 0

    def alloc(self) -> Optional[int]:
        while self._freed:
            pid = heapq.heappop(self._freed)
            if pid not in self._allocated:
                self._allocated.add(pid)
                return pid
        while self._next < self.total_pages and self._next in self._allocated:
            self._next += 1
        if self._next >= self.total_pages:
            return None
        pid = self._next
        self._next += 1
        self._allocated.add(pid)
        return pid

    def reserve(self, page_id: int) -> None:
        if page_id < 0 or page_id >= self.total_pages:
            raise IndexError(f"page {page_id} out of range [0, {self.total_pages})")
        if page_id in self._allocated:
            raise ValueError(f"page {page_id} already allocated")
        self._allocated.add(page_id)

    def free(self, page_id: int) -> None:
        self._allocated.remove(page_id)
        heapq.heappush(self._freed, page_id)

    @property
    def allocated_count(self) -> int:
        return len(self._allocated)


@dataclass
class MapProbe:
    status: ProbeStatus
    value: int
    latency_ns: float
    pages_probed: int


@dataclass
class Relocation:
    bucket_a: int
    bucket_b: int
    page_id: int
    range_a: Tuple[int, int]
    range_b: Tuple[int, int]


@dataclass
class CoLocateReport:
    relocations: List[Relocation]
    pages_freed: int


@dataclass
class HistogramSummary:
    mean: float
    max: int
    coefficient_of_variation: float


class PagedHashMap:
    """Bucketed key-value store backed by simulated pages.

    Inserts go to the earliest tombstone in the chain, else append to the
    last page; a full chain grows by allocating and linking a new page.
    Probing walks the chain in order and stops at the first match.
    """

    def __init__(self, hash_config: HashConfig, geometry: DramGeometry):
        self.hash_config = hash_config
        self.geometry = geometry
        self.page_capacity = geometry.page_capacity
        self.pages: Dict[int, RowImage] = {}
        self.chains: Dict[int, List[ChainEntry]] = {}
        self.allocator = PageAllocator(geometry.total_pages)
        # key -> page_id * page_capacity + slot (simulator-side accelerator;
        # timing always comes from the scans, never from this index)
        self._key_loc: Dict[int, int] = {}
        # bucket -> heap of (entry_idx, slot, page_id), earliest chain slot first
        self._tombs: Dict[int, List[Tuple[int, int, int]]] = {}
        # page -> number of buckets sharing it (co-location bookkeeping)
        self._page_buckets: Dict[int, int] = {}
        self._live = 0
        self._tombstones = 0

    # -- core operations ---------------------------------------------------

    def bucket_of(self, key: int) -> int:
        return hash_key(key, self.hash_config)

    def insert(self, key: int, value: int) -> InsertStatus:
        _require_key(key)
        loc = self._key_loc.get(key)
        if loc is not None:
            page_id, slot = divmod(loc, self.page_capacity)
            self.pages[page_id].set_pair(slot, key, value)
            return InsertStatus.OK
        bucket = self.bucket_of(key)
        heap = self._tombs.get(bucket)
        if heap:
            entry_idx, slot, page_id = heapq.heappop(heap)
            self.pages[page_id].set_pair(slot, key, value)
            self._key_loc[key] = page_id * self.page_capacity + slot
            self._live += 1
            self._tombstones -= 1
            return InsertStatus.OK
        chain = self.chains.get(bucket)
        if chain is None:
            page_id = self._alloc_page(bucket)
            if page_id is None:
                return InsertStatus.ALLOC_FAILED
            chain = [ChainEntry(page_id, 0, self.page_capacity)]
            self.chains[bucket] = chain
        entry = chain[-1]
        if entry.fill == entry.capacity:
            page_id = self._alloc_page(bucket)
            if page_id is None:
                return InsertStatus.ALLOC_FAILED
            entry = ChainEntry(page_id, 0, self.page_capacity)
            chain.append(entry)
        slot = entry.start + entry.fill
        self.pages[entry.page_id].set_pair(slot, key, value)
        entry.fill += 1
        self._key_loc[key] = entry.page_id * self.page_capacity + slot
        self._live += 1
        return InsertStatus.OK

    def _alloc_page(self, bucket: int) -> Optional[int]:
        page_id = self.allocator.alloc()
        if page_id is None:
            return None
        self.pages[page_id] = RowImage(self.page_capacity)
        self._page_buckets[page_id] = 1
        return page_id

    def delete(self, key: int) -> DeleteStatus:
        _require_key(key)
        loc = self._key_loc.pop(key, None)
        if loc is None:
            return DeleteStatus.NOT_FOUND
        page_id, slot = divmod(loc, self.page_capacity)
        self.pages[page_id].set_tombstone(slot)
        bucket = self.bucket_of(key)
        entry_idx = next(i for i, e in enumerate(self.chains[bucket])
                         if e.page_id == page_id and e.start <= slot < e.end)
        heapq.heappush(self._tombs.setdefault(bucket, []),
                       (entry_idx, slot, page_id))
        self._live -= 1
        self._tombstones += 1
        return DeleteStatus.REMOVED

    def lookup(self, key: int) -> Optional[int]:
        """Functional lookup via the location index (no simulated cost)."""
        _require_key(key)
        loc = self._key_loc.get(key)
        if loc is None:
            return None
        page_id, slot = divmod(loc, self.page_capacity)
        return self.pages[page_id].values[slot]

    def probe_commands(self, key: int) -> List[ProbeCommand]:
        """One command per chain entry, in walk order."""
        _require_key(key)
        chain = self.chains.get(self.bucket_of(key), [])
        return [ProbeCommand(key, e.page_id, e.start, e.end) for e in chain]

    def probe(self, key: int, prober: Callable[[ProbeCommand], ProbeResult]) -> MapProbe:
        """Walk the chain issuing one command per entry until found;
        latency aggregates over the pages actually probed."""
        latency = 0.0
        pages = 0
        for cmd in self.probe_commands(key):
            result = prober(cmd)
            pages += 1
            latency += result.latency_ns
            if result.status is ProbeStatus.FOUND:
                return MapProbe(ProbeStatus.FOUND, result.value, latency, pages)
        return MapProbe(ProbeStatus.NOT_FOUND, 0, latency, pages)

    # -- accounting ----------------------------------------------------------

    @property
    def live_count(self) -> int:
        return self._live

    @property
    def tombstone_count(self) -> int:
        return self._tombstones

    @property
    def allocated_pages(self) -> int:
        return self.allocator.allocated_count

    def count_slot_states(self) -> Tuple[int, int, int]:
        """(occupied, tombstone, empty) by scanning every allocated page."""
        occupied = tombstone = empty = 0
        for row in self.pages.values():
            occupied += row.occupied_count()
            tombstone += row.tombstone_count()
            empty += row.capacity - row.occupied_count() - row.tombstone_count()
        return occupied, tombstone, empty

    def _entry_live_len(self, entry: ChainEntry) -> int:
        keys = np.frombuffer(self.pages[entry.page_id].keys, dtype=np.uint32)
        return int(np.count_nonzero(keys[entry.start:entry.end] < EMPTY_KEY))

    def bucket_lengths(self) -> List[int]:
        """Occupied (non-tombstone) slot count per bucket."""
        lengths = [0] * self.hash_config.bucket_count
        for bucket, chain in self.chains.items():
            lengths[bucket] = sum(self._entry_live_len(e) for e in chain)
        return lengths

    def bucket_histogram(self) -> Tuple[List[int], HistogramSummary]:
        lengths = self.bucket_lengths()
        if not lengths or self._live == 0:
            return lengths, HistogramSummary(0.0, 0, 0.0)
        arr = np.asarray(lengths, dtype=np.float64)
        mean = float(arr.mean())
        cv = float(arr.std() / mean) if mean > 0 else 0.0
        return lengths, HistogramSummary(mean, int(arr.max()), cv)

    # -- co-location of under-utilized buckets -------------------------------

    def co_locate_buckets(self, threshold: Optional[int] = None) -> CoLocateReport:
        """Pair under-utilized buckets (live length <= threshold) two to a
        page. Each relocated bucket keeps one contiguous range; tombstones
        are compacted away. Probe results are unchanged.
        """
        if threshold is None:
            threshold = self.page_capacity // 2
        cap = self.page_capacity
        candidates = []
        for bucket, chain in self.chains.items():
            if len(chain) != 1:
                continue
            entry = chain[0]
            if self._page_buckets.get(entry.page_id, 0) != 1:
                continue
            live = self._entry_live_len(entry)
            if 1 <= live <= min(threshold, cap - 1):
                candidates.append((live, bucket))
        candidates.sort(key=lambda t: (-t[0], t[1]))
        relocations: List[Relocation] = []
        freed = 0
        i, j = 0, len(candidates) - 1
        while i < j:
            len_a, bucket_a = candidates[i]
            len_b, bucket_b = candidates[j]
            if len_a + len_b > cap:
                i += 1
                continue
            self._merge_pair(bucket_a, bucket_b, len_a, len_b)
            entry = self.chains[bucket_a][0]
            relocations.append(Relocation(
                bucket_a, bucket_b, entry.page_id,
                (entry.start, entry.end),
                (self.chains[bucket_b][0].start, self.chains[bucket_b][0].end)))
            freed += 1
            i += 1
            j -= 1
        return CoLocateReport(relocations, freed)

    def _merge_pair(self, bucket_a: int, bucket_b: int,
                    len_a: int, len_b: int) -> None:
        entry_a = self.chains[bucket_a][0]
        entry_b = self.chains[bucket_b][0]
        target = entry_a.page_id
        pairs_a = self._live_pairs(entry_a)
        pairs_b = self._live_pairs(entry_b)
        assert len(pairs_a) == len_a and len(pairs_b) == len_b
        self._rewrite_page(target, pairs_a + pairs_b)
        for offset, (key, _) in enumerate(pairs_a + pairs_b):
            self._key_loc[key] = target * self.page_capacity + offset
        removed_tombs = ((entry_a.fill - len_a) + (entry_b.fill - len_b))
        self._tombstones -= removed_tombs
        self._tombs.pop(bucket_a, None)
        self._tombs.pop(bucket_b, None)
        del self.pages[entry_b.page_id]
        del self._page_buckets[entry_b.page_id]
        self.allocator.free(entry_b.page_id)
        self.chains[bucket_a] = [ChainEntry(target, 0, len_a, len_a)]
        self.chains[bucket_b] = [ChainEntry(target, len_a, len_a + len_b, len_b)]
        self._page_buckets[target] = 2

    def _live_pairs(self, entry: ChainEntry) -> List[Tuple[int, int]]:
        row = self.pages[entry.page_id]
        return [(row.keys[i], row.values[i])
                for i in range(entry.start, entry.end)
                if row.keys[i] < EMPTY_KEY]

    def _rewrite_page(self, page_id: int, pairs: Sequence[Tuple[int, int]]) -> None:
        row = self.pages[page_id]
        fresh = RowImage(row.capacity)
        for i, (key, value) in enumerate(pairs):
            fresh.keys[i] = key
            fresh.values[i] = value
        row.keys = fresh.keys
        row.values = fresh.values
        row.version += 1

    # -- iteration -----------------------------------------------------------

    def items(self):
        """Live pairs, bucket by bucket in id order, chain order within."""
        for bucket in sorted(self.chains):
            for entry in self.chains[bucket]:
                row = self.pages[entry.page_id]
                for i in range(entry.start, entry.end):
                    if row.keys[i] < EMPTY_KEY:
                        yield row.keys[i], row.values[i]


# -- persistence --------------------------------------------------------------

_SIDECAR_ENTRY = re.compile(r"^(\d+)\[(\d+),(\d+)\)$")


def write_sidecar(m: PagedHashMap, path: str) -> None:
    """Bookkeeping sidecar: `bucket_id: page_id[start,end) ...` per bucket."""
    with open(path, "w", encoding="utf-8") as fh:
        for bucket in sorted(m.chains):
            parts = " ".join(f"{e.page_id}[{e.start},{e.end})"
                             for e in m.chains[bucket])
            fh.write(f"{bucket}: {parts}\n")


def read_sidecar(path: str) -> Dict[int, List[Tuple[int, int, int]]]:
    chains: Dict[int, List[Tuple[int, int, int]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            head, _, rest = line.partition(":")
            entries = []
            for token in rest.split():
                match = _SIDECAR_ENTRY.match(token)
                if match is None:
                    raise ValueError(f"{path}:{lineno}: bad chain entry {token!r}")
                entries.append((int(match.group(1)), int(match.group(2)),
                                int(match.group(3))))
            if not entries:
                raise ValueError(f"{path}:{lineno}: empty chain")
            chains[int(head)] = entries
    return chains


def save_map(m: PagedHashMap, data_path: str, sidecar_path: str) -> None:
    """Dump live pairs in the binary dataset format plus the sidecar."""
    from .workload import write_dataset
    ks, vs = [], []
    for key, value in m.items():
        ks.append(key)
        vs.append(value)
    write_dataset(data_path, np.asarray(ks, dtype=np.uint32),
                  np.asarray(vs, dtype=np.uint32))
    write_sidecar(m, sidecar_path)


def load_map(data_path: str, sidecar_path: str, hash_config: HashConfig,
             geometry: DramGeometry) -> PagedHashMap:
    """Rebuild a map from a dataset plus sidecar.

    Pairs are refilled compactly into each bucket's recorded entries, in
    file order; entries left unused after compaction are dropped. Probe
    results match the exported map.
    """
    from .workload import read_dataset
    keys, values = read_dataset(data_path)
    chains = read_sidecar(sidecar_path)
    m = PagedHashMap(hash_config, geometry)
    for entries in chains.values():
        for page_id, start, end in entries:
            if not (0 <= start < end <= m.page_capacity):
                raise ValueError(f"sidecar range [{start},{end}) invalid for "
                                 f"page capacity {m.page_capacity}")
            if page_id not in m.pages:
                m.allocator.reserve(page_id)
                m.pages[page_id] = RowImage(m.page_capacity)
                m._page_buckets[page_id] = 0
            m._page_buckets[page_id] += 1
    grouped: Dict[int, List[Tuple[int, int]]] = {}
    for key, value in zip(keys.tolist(), values.tolist()):
        grouped.setdefault(m.bucket_of(key), []).append((key, value))
    unmatched = set(grouped) - set(chains)
    if unmatched:
        raise ValueError(f"dataset has keys for buckets missing from the "
                         f"sidecar: {sorted(unmatched)[:5]}")
    for bucket, entries in chains.items():
        pairs = grouped.get(bucket, [])
        chain: List[ChainEntry] = []
        cursor = 0
        for page_id, start, end in entries:
            if cursor >= len(pairs):
                remaining = m._page_buckets[page_id] - 1
                if remaining == 0:
                    del m.pages[page_id]
                    del m._page_buckets[page_id]
                    m.allocator.free(page_id)
                else:
                    m._page_buckets[page_id] = remaining
                continue
            take = min(end - start, len(pairs) - cursor)
            row = m.pages[page_id]
            for offset in range(take):
                key, value = pairs[cursor + offset]
                row.set_pair(start + offset, key, value)
                m._key_loc[key] = page_id * m.page_capacity + start + offset
            chain.append(ChainEntry(page_id, start, end, take))
            cursor += take
        if cursor < len(pairs):
            raise ValueError(f"bucket {bucket}: {len(pairs)} pairs exceed the "
                             f"sidecar chain capacity")
        if chain:
            m.chains[bucket] = chain
        m._live += len(pairs)
    return m
