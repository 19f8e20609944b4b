"""DRAM geometry, row-buffer state, and command timing.

Pages map onto subarray rows in a bank-interleaved order, activations are
classified against per-subarray row-buffer state, and every simulated action
is converted into nanoseconds from the cycle-level timing parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Optional, TextIO

KV_PAIR_BYTES = 8
CACHE_LINE_BYTES = 64

# Comparison slack for protocol checking when timings are not exactly
# representable in binary floating point (the defaults are).
_EPS_NS = 1e-9


@dataclass(frozen=True)
class DramGeometry:
    """Physical hierarchy of the simulated memory.

    One page is one subarray row; a page holds row_size_bytes / 8 key-value
    pairs. All counts must be >= 1 and row_size_bytes a multiple of 8.
    """

    channels: int
    ranks_per_channel: int
    banks_per_rank: int
    subarrays_per_bank: int
    rows_per_subarray: int
    row_size_bytes: int

    def __post_init__(self) -> None:
        for name in ("channels", "ranks_per_channel", "banks_per_rank",
                     "subarrays_per_bank", "rows_per_subarray", "row_size_bytes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.row_size_bytes % KV_PAIR_BYTES != 0:
            raise ValueError(
                f"row_size_bytes must be a multiple of {KV_PAIR_BYTES}, "
                f"got {self.row_size_bytes}")

    @property
    def page_capacity(self) -> int:
        """Key-value pairs per page."""
        return self.row_size_bytes // KV_PAIR_BYTES

    @property
    def total_pages(self) -> int:
        return (self.channels * self.ranks_per_channel * self.banks_per_rank
                * self.subarrays_per_bank * self.rows_per_subarray)


@dataclass(frozen=True)
class DramTiming:
    """Command timing parameters.

    Cycle counts are bus-clock cycles; tCK_ns converts them to nanoseconds.
    pe_tick_ns is the period of the in-subarray processing elements, which
    run on their own (slower) clock.
    """

    tCK_ns: float
    tRCD_cycles: int
    tRP_cycles: int
    tCL_cycles: int
    tRAS_cycles: int
    burst_cycles_per_line: int
    pe_tick_ns: float

    def __post_init__(self) -> None:
        for name in ("tCK_ns", "tRCD_cycles", "tRP_cycles", "tCL_cycles",
                     "tRAS_cycles", "burst_cycles_per_line", "pe_tick_ns"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.tRAS_cycles < self.tRCD_cycles:
            raise ValueError("tRAS_cycles must be >= tRCD_cycles")

    @property
    def trcd_ns(self) -> float:
        return self.tRCD_cycles * self.tCK_ns

    @property
    def trp_ns(self) -> float:
        return self.tRP_cycles * self.tCK_ns

    @property
    def tras_ns(self) -> float:
        return self.tRAS_cycles * self.tCK_ns


class RowAddress(NamedTuple):
    channel: int
    rank: int
    bank: int
    subarray: int
    row: int

    def subarray_key(self) -> tuple:
        return (self.channel, self.rank, self.bank, self.subarray)

    def bank_key(self) -> tuple:
        return (self.channel, self.rank, self.bank)


@dataclass
class SubarrayState:
    """Row-buffer state of one subarray: at most one open row at a time."""

    open_row: Optional[int] = None
    last_act_ns: float = float("-inf")


def map_page_to_row(page_id: int, geometry: DramGeometry) -> RowAddress:
    """Translate a page id into its physical row.

    Bank-interleaved: bank varies fastest, then subarray, then row, then
    rank, then channel, so consecutive pages land in different banks.
    """
    if page_id < 0 or page_id >= geometry.total_pages:
        raise IndexError(
            f"page_id {page_id} out of range [0, {geometry.total_pages})")
    bank = page_id % geometry.banks_per_rank
    rest = page_id // geometry.banks_per_rank
    subarray = rest % geometry.subarrays_per_bank
    rest //= geometry.subarrays_per_bank
    row = rest % geometry.rows_per_subarray
    rest //= geometry.rows_per_subarray
    rank = rest % geometry.ranks_per_channel
    channel = rest // geometry.ranks_per_channel
    return RowAddress(channel, rank, bank, subarray, row)


def row_to_page(addr: RowAddress, geometry: DramGeometry) -> int:
    """Inverse of map_page_to_row."""
    for value, bound in ((addr.channel, geometry.channels),
                         (addr.rank, geometry.ranks_per_channel),
                         (addr.bank, geometry.banks_per_rank),
                         (addr.subarray, geometry.subarrays_per_bank),
                         (addr.row, geometry.rows_per_subarray)):
        if value < 0 or value >= bound:
            raise IndexError(f"address component {value} out of range [0, {bound})")
    page = addr.channel
    page = page * geometry.ranks_per_channel + addr.rank
    page = page * geometry.rows_per_subarray + addr.row
    page = page * geometry.subarrays_per_bank + addr.subarray
    page = page * geometry.banks_per_rank + addr.bank
    return page


def activate(addr: RowAddress, state: SubarrayState, timing: DramTiming) -> float:
    """Open addr.row in the subarray and return the latency in ns.

    Row hit: 0. Idle subarray: tRCD. Different row open: tRP + tRCD (the
    old row is closed first). state.open_row is updated.
    """
    if state.open_row == addr.row:
        return 0.0
    if state.open_row is None:
        latency = timing.trcd_ns
    else:
        latency = timing.trp_ns + timing.trcd_ns
    state.open_row = addr.row
    return latency


def column_access(n_bytes: int, timing: DramTiming) -> float:
    """Bus transfer cost in ns for reading n_bytes from an open row."""
    if n_bytes < 0:
        raise ValueError(f"n_bytes must be >= 0, got {n_bytes}")
    if n_bytes == 0:
        return 0.0
    lines = -(-n_bytes // CACHE_LINE_BYTES)
    return (timing.tCL_cycles + lines * timing.burst_cycles_per_line) * timing.tCK_ns


class TraceEvent(NamedTuple):
    """One timed command in a probe trace."""

    t_ns: float
    unit: str     # "dram" (ACT/PRE), "pe" (PE), "bus" (READ)
    event: str    # ACT | PE | READ | PRE
    channel: int
    rank: int
    bank: int
    subarray: int
    row: int

    def subarray_key(self) -> tuple:
        return (self.channel, self.rank, self.bank, self.subarray)


TRACE_HEADER = "timestamp_ns,unit,event,bank,subarray,row"


def dump_trace(events: Iterable[TraceEvent], fh: TextIO) -> None:
    """Write events as CSV, one per line."""
    fh.write(TRACE_HEADER + "\n")
    for ev in events:
        fh.write(f"{ev.t_ns:.6f},{ev.unit},{ev.event},{ev.bank},{ev.subarray},{ev.row}\n")


class ProtocolChecker:
    """Stateful checker of DRAM command ordering over an event stream.

    Enforces, per subarray:
      - no READ or PE start before tRCD has elapsed since the ACT;
      - no ACT while a row is open (a PRE must intervene);
      - no PRE before tRAS has elapsed since the ACT;
      - READ/PE only against the currently open row;
      - per-subarray timestamps never go backward.
    Violations are collected as strings; an empty list means the stream is
    legal so far.
    """

    def __init__(self, timing: DramTiming):
        self.timing = timing
        self.violations: List[str] = []
        self._open: dict = {}      # subarray key -> open row
        self._act_ns: dict = {}    # subarray key -> last ACT timestamp
        self._last_ns: dict = {}   # subarray key -> last event timestamp

    def feed(self, events: Iterable[TraceEvent]) -> None:
        for ev in events:
            key = ev.subarray_key()
            last = self._last_ns.get(key)
            if last is not None and ev.t_ns < last - _EPS_NS:
                self.violations.append(
                    f"t={ev.t_ns}: {ev.event} timestamp precedes previous event on {key}")
            self._last_ns[key] = ev.t_ns

            if ev.event == "ACT":
                if key in self._open:
                    self.violations.append(
                        f"t={ev.t_ns}: ACT on {key} while row {self._open[key]} is open")
                self._open[key] = ev.row
                self._act_ns[key] = ev.t_ns
            elif ev.event in ("PE", "READ"):
                if self._open.get(key) != ev.row:
                    self.violations.append(
                        f"t={ev.t_ns}: {ev.event} on {key} row {ev.row} which is not open")
                elif ev.t_ns + _EPS_NS < self._act_ns[key] + self.timing.trcd_ns:
                    self.violations.append(
                        f"t={ev.t_ns}: {ev.event} on {key} before tRCD after ACT")
            elif ev.event == "PRE":
                if key not in self._open:
                    self.violations.append(f"t={ev.t_ns}: PRE on idle subarray {key}")
                else:
                    if ev.t_ns + _EPS_NS < self._act_ns[key] + self.timing.tras_ns:
                        self.violations.append(
                            f"t={ev.t_ns}: PRE on {key} before tRAS after ACT")
                    del self._open[key]
            else:
                self.violations.append(f"t={ev.t_ns}: unknown event {ev.event!r}")

    @property
    def ok(self) -> bool:
        return not self.violations


def check_protocol(events: Iterable[TraceEvent], timing: DramTiming) -> List[str]:
    """Check one self-contained event list; returns the violations found."""
    checker = ProtocolChecker(timing)
    checker.feed(events)
    return checker.violations
