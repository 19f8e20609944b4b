"""Subarray processing elements: row layouts, match semantics, tick costs.

Two PE variants are modeled. The area-optimized PE walks the row one
key-value pair per tick (element-serial, bit-parallel). The
performance-optimized PE holds the row bit-sliced and compares every column
at once, one bit plane per tick (element-parallel, bit-serial), or in a
single tick when configured as a content-addressable match.

Slot state is encoded in the key itself: two reserved sentinels mark empty
and tombstoned slots, so the row content is self-describing under both
layouts. Keys equal to a sentinel are rejected everywhere.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

EMPTY_KEY = 0xFFFFFFFE
TOMBSTONE_KEY = 0xFFFFFFFF
MAX_KEY = 0xFFFFFFFD

_ALLOWED_BITS = (8, 16, 32, 64)


class InvalidKeyError(ValueError):
    """A key collides with a reserved sentinel."""


class CapacityError(ValueError):
    """More content than the target layout can hold."""


def is_sentinel(key: int) -> bool:
    return key == EMPTY_KEY or key == TOMBSTONE_KEY


def _require_key(key: int) -> None:
    if key < 0 or key > 0xFFFFFFFF:
        raise InvalidKeyError(f"key {key:#x} is not a 32-bit unsigned value")
    if is_sentinel(key):
        raise InvalidKeyError(f"key {key:#x} is a reserved sentinel")


class SlotState(Enum):
    EMPTY = "empty"
    OCCUPIED = "occupied"
    TOMBSTONE = "tombstone"


class Slot(NamedTuple):
    key: int
    value: int
    state: SlotState


class RowImage:
    """Element-oriented image of one subarray row.

    Fixed capacity; keys and values are stored as packed 32-bit arrays so a
    full row serializes to exactly capacity * 8 bytes. Empty slots hold
    (EMPTY_KEY, 0) and tombstones (TOMBSTONE_KEY, 0). `version` increments
    on every mutation so derived layouts can be cached.
    """

    __slots__ = ("capacity", "keys", "values", "version")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.keys = array("I", bytes(4 * capacity))
        self.values = array("I", bytes(4 * capacity))
        for i in range(capacity):
            self.keys[i] = EMPTY_KEY
        self.version = 0

    def slot(self, i: int) -> Slot:
        k = self.keys[i]
        if k == EMPTY_KEY:
            return Slot(k, self.values[i], SlotState.EMPTY)
        if k == TOMBSTONE_KEY:
            return Slot(k, self.values[i], SlotState.TOMBSTONE)
        return Slot(k, self.values[i], SlotState.OCCUPIED)

    def slots(self) -> List[Slot]:
        return [self.slot(i) for i in range(self.capacity)]

    def set_pair(self, i: int, key: int, value: int) -> None:
        _require_key(key)
        self.keys[i] = key
        self.values[i] = value
        self.version += 1

    def set_tombstone(self, i: int) -> None:
        self.keys[i] = TOMBSTONE_KEY
        self.values[i] = 0
        self.version += 1

    def occupied_count(self) -> int:
        keys = np.frombuffer(self.keys, dtype=np.uint32)
        return int(np.count_nonzero(keys < EMPTY_KEY))

    def tombstone_count(self) -> int:
        keys = np.frombuffer(self.keys, dtype=np.uint32)
        return int(np.count_nonzero(keys == TOMBSTONE_KEY))

    def to_bytes(self) -> bytes:
        out = np.empty(2 * self.capacity, dtype="<u4")
        out[0::2] = np.frombuffer(self.keys, dtype=np.uint32)
        out[1::2] = np.frombuffer(self.values, dtype=np.uint32)
        return out.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "RowImage":
        if len(data) % 8 != 0 or len(data) == 0:
            raise ValueError(f"row image must be a nonzero multiple of 8 bytes, got {len(data)}")
        flat = np.frombuffer(data, dtype="<u4")
        row = cls(len(data) // 8)
        row.keys = array("I", flat[0::2].tobytes())
        row.values = array("I", flat[1::2].tobytes())
        return row

    def __eq__(self, other) -> bool:
        return (isinstance(other, RowImage) and self.capacity == other.capacity
                and self.keys == other.keys and self.values == other.values)


def encode_row(pairs: Sequence[Tuple[int, int]], capacity: int) -> RowImage:
    """Pack (key, value) pairs into a fresh row: occupied slots first, in
    insertion order, remainder empty."""
    if len(pairs) > capacity:
        raise CapacityError(f"{len(pairs)} pairs exceed capacity {capacity}")
    row = RowImage(capacity)
    for i, (key, value) in enumerate(pairs):
        row.set_pair(i, key, value)
    row.version = 0
    return row


def decode_row(row: RowImage) -> List[Tuple[int, int]]:
    """Occupied (key, value) pairs in slot order; empties and tombstones skipped."""
    keys = row.keys
    return [(keys[i], row.values[i]) for i in range(row.capacity)
            if keys[i] < EMPTY_KEY]


@dataclass(frozen=True)
class PeConfig:
    """Which PE variant runs a scan and how its ticks are counted."""

    variant: str = "area"            # "area" | "perf"
    key_bits: int = 32
    value_bits: int = 32
    cam_mode: bool = False
    include_value_readout_ticks: bool = True

    def __post_init__(self) -> None:
        if self.variant not in ("area", "perf"):
            raise ValueError(f"variant must be 'area' or 'perf', got {self.variant!r}")
        if self.key_bits not in _ALLOWED_BITS or self.value_bits not in _ALLOWED_BITS:
            raise ValueError(f"key_bits/value_bits must be one of {_ALLOWED_BITS}")
        if self.cam_mode and self.variant != "perf":
            raise ValueError("cam_mode requires the performance-optimized variant")


@dataclass
class MatchResult:
    found: bool
    value: int
    column_index: Optional[int]
    pe_ticks: int


@dataclass
class BitSlicedRegion:
    """Bit-plane-oriented image of a row.

    Plane i holds bit i of every column's key (plane 0 least significant);
    each plane is an int bitmask with bit c = column c. The occupancy and
    tombstone masks carry slot state, which the planes alone cannot express
    when key_bits < 32 (the sentinels do not fit).
    """

    n_slots: int
    key_bits: int
    value_bits: int
    key_planes: List[int]
    value_planes: List[int]
    occupancy: int
    tombstones: int

    @property
    def full_mask(self) -> int:
        return (1 << self.n_slots) - 1


def _pack_mask(bits: np.ndarray) -> int:
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def _unpack_mask(mask: int, n: int) -> np.ndarray:
    raw = np.frombuffer(mask.to_bytes((n + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


def bitslice_encode(row: RowImage, key_bits: int = 32, value_bits: int = 32) -> BitSlicedRegion:
    """Transpose a row into bit planes."""
    keys = np.frombuffer(row.keys, dtype=np.uint32)
    values = np.frombuffer(row.values, dtype=np.uint32)
    occ = keys < EMPTY_KEY
    tomb = keys == TOMBSTONE_KEY
    if key_bits < 32 and np.any(keys[occ] >> key_bits):
        raise CapacityError(f"occupied key does not fit in {key_bits} bit planes")
    if value_bits < 32 and np.any(values[occ] >> value_bits):
        raise CapacityError(f"value does not fit in {value_bits} bit planes")
    key_planes = [_pack_mask(((keys >> i) & 1).astype(bool) & occ)
                  for i in range(key_bits)]
    value_planes = [_pack_mask(((values >> i) & 1).astype(bool) & occ)
                    for i in range(value_bits)]
    return BitSlicedRegion(
        n_slots=row.capacity, key_bits=key_bits, value_bits=value_bits,
        key_planes=key_planes, value_planes=value_planes,
        occupancy=_pack_mask(occ), tombstones=_pack_mask(tomb))


def bitslice_decode(region: BitSlicedRegion) -> RowImage:
    """Inverse of bitslice_encode (lossless, including slot states)."""
    n = region.n_slots
    occ = _unpack_mask(region.occupancy, n)
    tomb = _unpack_mask(region.tombstones, n)
    keys = np.zeros(n, dtype=np.uint32)
    values = np.zeros(n, dtype=np.uint32)
    for i, plane in enumerate(region.key_planes):
        keys |= _unpack_mask(plane, n).astype(np.uint32) << np.uint32(i)
    for i, plane in enumerate(region.value_planes):
        values |= _unpack_mask(plane, n).astype(np.uint32) << np.uint32(i)
    keys[~occ] = EMPTY_KEY
    values[~occ] = 0
    keys[tomb] = TOMBSTONE_KEY
    row = RowImage(n)
    row.keys = array("I", keys.tobytes())
    row.values = array("I", values.tobytes())
    return row


def area_scan(row: RowImage, key: int, start: int = 0,
              end: Optional[int] = None) -> MatchResult:
    """Element-serial scan of slots [start, end).

    One slot is examined per tick, first occupied slot with an equal key
    wins. Insertion packs occupied/tombstone slots before empties, so a
    miss stops at the first empty slot (counted); with no empty slot the
    whole range is examined. Tombstones are examined but never match.
    """
    if end is None:
        end = row.capacity
    if not (0 <= start <= end <= row.capacity):
        raise IndexError(f"scan range [{start}, {end}) outside row of {row.capacity} slots")
    _require_key(key)
    keys = row.keys
    try:
        hit = keys.index(key, start, end)
    except ValueError:
        hit = -1
    if hit >= 0:
        return MatchResult(True, row.values[hit], hit, hit - start + 1)
    try:
        first_empty = keys.index(EMPTY_KEY, start, end)
        ticks = first_empty - start + 1
    except ValueError:
        ticks = end - start
    return MatchResult(False, 0, None, ticks)


def perf_scan(region: BitSlicedRegion, key: int, config: PeConfig,
              start: int = 0, end: Optional[int] = None) -> MatchResult:
    """Element-parallel scan of a bit-sliced region.

    Per-column match flags start from occupancy (restricted to [start, end)
    when a range is given) and are ANDed against one key bit plane per tick.
    Ties break to the lowest column index. Tick cost is layout-independent:
    key_bits (+ value_bits for the value readout stage) bit-serial, or
    1 (+1) in cam_mode.
    """
    _require_key(key)
    if config.key_bits < 32 and key >> config.key_bits:
        raise CapacityError(f"probe key {key:#x} does not fit in {config.key_bits} bit planes")
    if end is None:
        end = region.n_slots
    if not (0 <= start <= end <= region.n_slots):
        raise IndexError(f"scan range [{start}, {end}) outside region of {region.n_slots} slots")
    full = region.full_mask
    match = region.occupancy & (((1 << (end - start)) - 1) << start)
    for i in range(config.key_bits):
        plane = region.key_planes[i] if i < len(region.key_planes) else 0
        if (key >> i) & 1:
            match &= plane
        else:
            match &= plane ^ full
    if config.cam_mode:
        ticks = 1 + (1 if config.include_value_readout_ticks else 0)
    else:
        ticks = config.key_bits + (config.value_bits
                                   if config.include_value_readout_ticks else 0)
    if match == 0:
        return MatchResult(False, 0, None, ticks)
    column = (match & -match).bit_length() - 1
    value = 0
    for i, plane in enumerate(region.value_planes):
        value |= ((plane >> column) & 1) << i
    return MatchResult(True, value, column, ticks)
