"""Rank-level unit: turns probe commands into timed DRAM and PE events.

The unit activates the target subarray row, runs the configured PE scan,
reads the padded result line back over the bus, and (under the closed-page
policy) precharges the row. Every probe yields a 64-byte cache line and an
event trace that satisfies the DRAM protocol invariants, including the
tRAS floor on precharge.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .dram import (CACHE_LINE_BYTES, DramGeometry, DramTiming, RowAddress,
                   SubarrayState, TraceEvent, column_access, map_page_to_row)
from .pe import (BitSlicedRegion, MatchResult, PeConfig, RowImage, area_scan,
                 bitslice_encode, perf_scan)


class ProbeStatus(Enum):
    FOUND = "found"
    NOT_FOUND = "not_found"


@dataclass(frozen=True)
class ProbeCommand:
    """One unit of RLU work: look for key in slots [start, end) of a page."""

    key: int
    page_id: int
    start: int
    end: int


@dataclass
class ProbeResult:
    status: ProbeStatus
    value: int
    cache_line: bytes
    latency_ns: float
    trace: List[TraceEvent]
    pe_ticks: int
    page_id: int


@dataclass
class RluStats:
    activations: int = 0
    row_hits: int = 0
    row_conflicts: int = 0
    pe_ticks_total: int = 0
    bytes_on_bus: int = 0

    def snapshot(self) -> "RluStats":
        return replace(self)

    def as_dict(self) -> Dict[str, int]:
        return {"activations": self.activations, "row_hits": self.row_hits,
                "row_conflicts": self.row_conflicts,
                "pe_ticks_total": self.pe_ticks_total,
                "bytes_on_bus": self.bytes_on_bus}


def pad_to_cache_line(value: Optional[int]) -> bytes:
    """A 64-byte line: the value little-endian in bytes [0, 4), zeros after;
    all zeros when there is no value."""
    if value is None:
        return bytes(CACHE_LINE_BYTES)
    if value < 0 or value > 0xFFFFFFFF:
        raise ValueError(f"value {value} is not a 32-bit unsigned value")
    return value.to_bytes(4, "little") + bytes(CACHE_LINE_BYTES - 4)


class RankLevelUnit:
    """Per-rank command processor brokering between host and subarray PEs.

    Owns the row-buffer state of every subarray it touches, a cache of
    bit-sliced regions for the performance-optimized PE, and cumulative
    statistics. Deterministic: equal command sequences against equal state
    produce identical results and traces.
    """

    def __init__(self, geometry: DramGeometry, timing: DramTiming,
                 pages: Mapping[int, RowImage], pe_config: PeConfig,
                 open_page: bool = False, record_trace: bool = True):
        self.geometry = geometry
        self.timing = timing
        self.pages = pages
        self.pe_config = pe_config
        self.open_page = open_page
        self.record_trace = record_trace
        self.stats = RluStats()
        self._states: Dict[tuple, SubarrayState] = {}
        self._regions: Dict[int, Tuple[int, BitSlicedRegion]] = {}

    def _state(self, addr: RowAddress) -> SubarrayState:
        key = addr.subarray_key()
        state = self._states.get(key)
        if state is None:
            state = SubarrayState()
            self._states[key] = state
        return state

    def _region(self, page_id: int, row: RowImage) -> BitSlicedRegion:
        cached = self._regions.get(page_id)
        if cached is not None and cached[0] == row.version:
            return cached[1]
        region = bitslice_encode(row, self.pe_config.key_bits,
                                 self.pe_config.value_bits)
        self._regions[page_id] = (row.version, region)
        return region

    def _scan(self, page_id: int, row: RowImage, cmd: ProbeCommand) -> MatchResult:
        if self.pe_config.variant == "area":
            return area_scan(row, cmd.key, cmd.start, cmd.end)
        return perf_scan(self._region(page_id, row), cmd.key, self.pe_config,
                         cmd.start, cmd.end)

    def execute_probe(self, cmd: ProbeCommand, start_ns: float = 0.0) -> ProbeResult:
        row_img = self.pages.get(cmd.page_id)
        if row_img is None:
            raise IndexError(f"page {cmd.page_id} is not allocated")
        if not (0 <= cmd.start <= cmd.end <= row_img.capacity):
            raise IndexError(
                f"command range [{cmd.start}, {cmd.end}) outside page of "
                f"{row_img.capacity} slots")
        addr = map_page_to_row(cmd.page_id, self.geometry)
        state = self._state(addr)
        timing = self.timing
        events: List[TraceEvent] = []
        t = start_ns

        def emit(t_ns: float, unit: str, event: str, row: int) -> None:
            if self.record_trace:
                events.append(TraceEvent(t_ns, unit, event, addr.channel,
                                         addr.rank, addr.bank, addr.subarray, row))

        if state.open_row == addr.row:
            self.stats.row_hits += 1
            # Row already open; still respect tRCD relative to its ACT.
            ready = max(t, state.last_act_ns + timing.trcd_ns)
        else:
            if state.open_row is not None:
                # Conflict: close the old row first, honoring the tRAS floor.
                self.stats.row_conflicts += 1
                pre_ns = max(t, state.last_act_ns + timing.tras_ns)
                emit(pre_ns, "dram", "PRE", state.open_row)
                act_ns = pre_ns + timing.trp_ns
            else:
                act_ns = t
            emit(act_ns, "dram", "ACT", addr.row)
            self.stats.activations += 1
            state.last_act_ns = act_ns
            state.open_row = addr.row
            ready = act_ns + timing.trcd_ns

        match = self._scan(cmd.page_id, row_img, cmd)
        self.stats.pe_ticks_total += match.pe_ticks
        emit(ready, "pe", "PE", addr.row)
        pe_end = ready + match.pe_ticks * timing.pe_tick_ns
        emit(pe_end, "bus", "READ", addr.row)
        read_end = pe_end + column_access(CACHE_LINE_BYTES, timing)
        self.stats.bytes_on_bus += CACHE_LINE_BYTES

        if self.open_page:
            end = read_end
        else:
            pre_ns = max(read_end, state.last_act_ns + timing.tras_ns)
            emit(pre_ns, "dram", "PRE", addr.row)
            state.open_row = None
            end = pre_ns + timing.trp_ns

        if match.found:
            status, value = ProbeStatus.FOUND, match.value
            line = pad_to_cache_line(match.value)
        else:
            status, value = ProbeStatus.NOT_FOUND, 0
            line = pad_to_cache_line(None)
        return ProbeResult(status=status, value=value, cache_line=line,
                           latency_ns=end - start_ns, trace=events,
                           pe_ticks=match.pe_ticks, page_id=cmd.page_id)

    def execute_batch(self, cmds: Sequence[ProbeCommand],
                      policy: str = "serial") -> Tuple[List[ProbeResult], float]:
        """Execute commands under a parallelism policy; returns (results,
        makespan_ns).

        serial: one command at a time, makespan = sum of latencies.
        bank-parallel: commands to distinct (channel, rank, bank) overlap;
        same-bank commands serialize in submission order. Per-command
        results are identical across policies.
        """
        if policy not in ("serial", "bank-parallel"):
            raise ValueError(f"unknown policy {policy!r}")
        results: List[ProbeResult] = []
        cursor = 0.0
        bank_cursor: Dict[tuple, float] = {}
        for cmd in cmds:
            if policy == "serial":
                start = cursor
            else:
                bank = map_page_to_row(cmd.page_id, self.geometry).bank_key()
                start = bank_cursor.get(bank, 0.0)
            res = self.execute_probe(cmd, start_ns=start)
            end = start + res.latency_ns
            if policy == "serial":
                cursor = end
            else:
                bank_cursor[bank] = end
            results.append(res)
        makespan = cursor if policy == "serial" else max(bank_cursor.values(), default=0.0)
        return results, makespan
