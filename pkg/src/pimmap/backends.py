"""Uniform backend interface over the six execution models.

Three report simulated nanoseconds: the two subarray-PE variants and a
conventional-DRAM model that streams the whole bucket over the bus for a
CPU-side scan. Three are in-process software baselines measured in wall
clock: a chained hashmap, a balanced-tree map, and a hopscotch map. All six
produce identical (status, value) streams for any operation log.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from .avl import AvlMap
from .config import SimConfig
from .dram import CACHE_LINE_BYTES, DramTiming, column_access, map_page_to_row
from .hopscotch import HopscotchTable
from .pagedmap import (DeleteStatus, HashConfig, InsertStatus, PagedHashMap,
                       hash_key)
from .pe import PeConfig, _require_key
from .rlu import ProbeStatus, RankLevelUnit, RluStats


class BackendKind(Enum):
    PIM_AREA = "pim-area"
    PIM_PERF = "pim-perf"
    CONVENTIONAL = "conventional"
    SOFT_CHAINED = "chained"
    SOFT_TREE = "tree"
    SOFT_HOPSCOTCH = "hopscotch"

    @property
    def time_domain(self) -> str:
        if self in (BackendKind.PIM_AREA, BackendKind.PIM_PERF,
                    BackendKind.CONVENTIONAL):
            return "sim"
        return "wall"


def conventional_probe_cost(bucket_bytes: int, timing: DramTiming,
                            cpu_scan_ns_per_line: float = 1.0) -> float:
    """Cost of streaming one bucket to the CPU and scanning it.

    A row conflict is assumed (tRP + tRCD), the full bucket crosses the bus,
    and the CPU pays a per-line handling cost on top of the transfer.
    """
    if bucket_bytes < 0:
        raise ValueError(f"bucket_bytes must be >= 0, got {bucket_bytes}")
    lines = -(-bucket_bytes // CACHE_LINE_BYTES)
    return ((timing.tRP_cycles + timing.tRCD_cycles) * timing.tCK_ns
            + column_access(bucket_bytes, timing)
            + cpu_scan_ns_per_line * lines)


@dataclass
class ProbeOutcome:
    """Per-probe record from a simulated backend."""

    status: ProbeStatus
    value: int
    latency_ns: float
    commands: List[Tuple[tuple, float, list]]  # (bank key, latency, trace)


class PimBackend:
    """Paged hashmap probed in place by subarray PEs through the RLU."""

    def __init__(self, kind: BackendKind, sim: SimConfig, hash_config: HashConfig,
                 pe_config: PeConfig, open_page: bool = False):
        self.kind = kind
        self.sim = sim
        self.map = PagedHashMap(hash_config, sim.geometry)
        self.rlu = RankLevelUnit(sim.geometry, sim.timing, self.map.pages,
                                 pe_config, open_page=open_page)

    @property
    def stats(self) -> RluStats:
        return self.rlu.stats

    def insert(self, key: int, value: int) -> InsertStatus:
        return self.map.insert(key, value)

    def delete(self, key: int) -> DeleteStatus:
        return self.map.delete(key)

    def probe(self, key: int) -> Tuple[ProbeStatus, Optional[int]]:
        outcome = self.map.probe(key, self.rlu.execute_probe)
        value = outcome.value if outcome.status is ProbeStatus.FOUND else None
        return outcome.status, value

    def probe_detailed(self, key: int, start_ns: float = 0.0,
                       bank_cursor: Optional[Dict[tuple, float]] = None) -> ProbeOutcome:
        """Probe with scheduling: commands of one probe run back to back;
        under bank-parallel scheduling each command starts no earlier than
        its bank's cursor."""
        commands: List[Tuple[tuple, float, list]] = []
        t = start_ns

        def prober(cmd):
            nonlocal t
            bank = map_page_to_row(cmd.page_id, self.sim.geometry).bank_key()
            begin = t if bank_cursor is None else max(t, bank_cursor.get(bank, 0.0))
            result = self.rlu.execute_probe(cmd, start_ns=begin)
            t = begin + result.latency_ns
            if bank_cursor is not None:
                bank_cursor[bank] = t
            commands.append((bank, result.latency_ns, result.trace))
            return result

        outcome = self.map.probe(key, prober)
        return ProbeOutcome(outcome.status, outcome.value, outcome.latency_ns,
                            commands)


class ConventionalBackend:
    """Same paged hashmap, probed by a CPU that streams each bucket page
    over the bus and scans it line by line."""

    def __init__(self, sim: SimConfig, hash_config: HashConfig):
        self.kind = BackendKind.CONVENTIONAL
        self.sim = sim
        self.map = PagedHashMap(hash_config, sim.geometry)
        self.stats = RluStats()

    def insert(self, key: int, value: int) -> InsertStatus:
        return self.map.insert(key, value)

    def delete(self, key: int) -> DeleteStatus:
        return self.map.delete(key)

    def probe(self, key: int) -> Tuple[ProbeStatus, Optional[int]]:
        value = self.map.lookup(key)
        if value is None:
            return ProbeStatus.NOT_FOUND, None
        return ProbeStatus.FOUND, value

    def probe_detailed(self, key: int, start_ns: float = 0.0,
                       bank_cursor: Optional[Dict[tuple, float]] = None) -> ProbeOutcome:
        latency = 0.0
        commands: List[Tuple[tuple, float, list]] = []
        chain = self.map.chains.get(self.map.bucket_of(key), [])
        for entry in chain:
            # The scanner traverses the used prefix; trailing empties are
            # never written and never stream.
            bucket_bytes = entry.fill * 8
            cost = conventional_probe_cost(bucket_bytes, self.sim.timing,
                                           self.sim.cpu_scan_ns_per_line)
            bank = map_page_to_row(entry.page_id, self.sim.geometry).bank_key()
            commands.append((bank, cost, []))
            latency += cost
            self.stats.activations += 1
            self.stats.row_conflicts += 1
            lines = -(-bucket_bytes // CACHE_LINE_BYTES)
            self.stats.bytes_on_bus += lines * CACHE_LINE_BYTES
        status, value = self.probe(key)
        return ProbeOutcome(status, value if value is not None else 0,
                            latency, commands)


class ChainedBackend:
    """Fixed-bucket chained hashmap; the functional reference."""

    def __init__(self, bucket_count: int = 65536,
                 hash_config: Optional[HashConfig] = None):
        self.kind = BackendKind.SOFT_CHAINED
        self.hash_config = hash_config or HashConfig(bucket_count=bucket_count)
        self.buckets: List[List[List[int]]] = [[] for _ in range(self.hash_config.bucket_count)]

    def insert(self, key: int, value: int) -> InsertStatus:
        bucket = self.buckets[hash_key(key, self.hash_config)]
        for pair in bucket:
            if pair[0] == key:
                pair[1] = value
                return InsertStatus.OK
        bucket.append([key, value])
        return InsertStatus.OK

    def probe(self, key: int) -> Tuple[ProbeStatus, Optional[int]]:
        _require_key(key)
        for pair in self.buckets[hash_key(key, self.hash_config)]:
            if pair[0] == key:
                return ProbeStatus.FOUND, pair[1]
        return ProbeStatus.NOT_FOUND, None

    def delete(self, key: int) -> DeleteStatus:
        bucket = self.buckets[hash_key(key, self.hash_config)]
        for i, pair in enumerate(bucket):
            if pair[0] == key:
                bucket.pop(i)
                return DeleteStatus.REMOVED
        return DeleteStatus.NOT_FOUND


class TreeBackend:
    def __init__(self):
        self.kind = BackendKind.SOFT_TREE
        self.tree = AvlMap()

    def insert(self, key: int, value: int) -> InsertStatus:
        _require_key(key)
        self.tree.insert(key, value)
        return InsertStatus.OK

    def probe(self, key: int) -> Tuple[ProbeStatus, Optional[int]]:
        _require_key(key)
        value = self.tree.get(key)
        if value is None:
            return ProbeStatus.NOT_FOUND, None
        return ProbeStatus.FOUND, value

    def delete(self, key: int) -> DeleteStatus:
        _require_key(key)
        return DeleteStatus.REMOVED if self.tree.remove(key) else DeleteStatus.NOT_FOUND


class HopscotchBackend:
    """Hopscotch table that doubles and rehashes when an insert reports the
    table full."""

    def __init__(self, initial_size: int = 1024, neighborhood: int = 32):
        self.kind = BackendKind.SOFT_HOPSCOTCH
        self.table = HopscotchTable(initial_size, neighborhood)

    def insert(self, key: int, value: int) -> InsertStatus:
        _require_key(key)
        while not self.table.insert(key, value):
            self._grow()
        return InsertStatus.OK

    def _grow(self) -> None:
        old = self.table
        while True:
            bigger = HopscotchTable(old.size * 2, old.H, old.seed)
            if all(bigger.insert(k, v) for k, v in old.items()):
                self.table = bigger
                return
            old = bigger  # extremely unlucky layout; double again

    def probe(self, key: int) -> Tuple[ProbeStatus, Optional[int]]:
        _require_key(key)
        value = self.table.lookup(key)
        if value is None:
            return ProbeStatus.NOT_FOUND, None
        return ProbeStatus.FOUND, value

    def delete(self, key: int) -> DeleteStatus:
        _require_key(key)
        return DeleteStatus.REMOVED if self.table.remove(key) else DeleteStatus.NOT_FOUND


def make_backend(kind: BackendKind, sim: SimConfig, bucket_count: int,
                 cam_mode: bool = False, open_page: bool = False,
                 include_value_readout_ticks: bool = True):
    """Construct a backend; bucket_count applies to the bucketed models."""
    hash_config = HashConfig(bucket_count=bucket_count)
    if kind is BackendKind.PIM_AREA:
        return PimBackend(kind, sim, hash_config, PeConfig(variant="area"),
                          open_page=open_page)
    if kind is BackendKind.PIM_PERF:
        pe = PeConfig(variant="perf", cam_mode=cam_mode,
                      include_value_readout_ticks=include_value_readout_ticks)
        return PimBackend(kind, sim, hash_config, pe, open_page=open_page)
    if kind is BackendKind.CONVENTIONAL:
        return ConventionalBackend(sim, hash_config)
    if kind is BackendKind.SOFT_CHAINED:
        return ChainedBackend()
    if kind is BackendKind.SOFT_TREE:
        return TreeBackend()
    if kind is BackendKind.SOFT_HOPSCOTCH:
        return HopscotchBackend()
    raise ValueError(f"unknown backend kind {kind!r}")


# -- cross-backend oracle -------------------------------------------------------

Op = Tuple  # ("insert", key, value) | ("probe", key) | ("delete", key)


@dataclass
class Divergence:
    op_index: int
    op: Op
    outcomes: Dict[str, tuple]


@dataclass
class EquivalenceReport:
    agreed: bool
    ops_replayed: int
    divergence: Optional[Divergence] = None


def _apply(backend, op: Op) -> tuple:
    if op[0] == "insert":
        return ("insert", backend.insert(op[1], op[2]).value)
    if op[0] == "probe":
        status, value = backend.probe(op[1])
        return ("probe", status.value, value)
    if op[0] == "delete":
        return ("delete", backend.delete(op[1]).value)
    raise ValueError(f"unknown op {op!r}")


def equivalence_check(op_log: Sequence[Op], backends: Dict[str, object]) -> EquivalenceReport:
    """Replay the log on every backend; report the first divergence in
    (status, value) or certify agreement."""
    names = list(backends)
    for index, op in enumerate(op_log):
        outcomes = {name: _apply(backends[name], op) for name in names}
        first = outcomes[names[0]]
        if any(out != first for out in outcomes.values()):
            return EquivalenceReport(False, index + 1,
                                     Divergence(index, op, outcomes))
    return EquivalenceReport(True, len(op_log))
