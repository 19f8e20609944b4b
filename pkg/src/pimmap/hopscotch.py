"""Open-addressing hash table with hopscotch displacement.

Every key lives within H-1 slots of its home bucket; bit j of the home
bucket's hop word is set iff slot (home + j) holds one of its keys, so a
lookup inspects at most H slots. Insertion linear-probes to a free slot and
walks it backward by displacing keys from earlier neighborhoods until it
lands inside the home neighborhood. The table reports failure instead of
resizing; callers grow it by doubling and rehashing.
"""

from __future__ import annotations

from typing import List, Optional

_MULT64 = 0x9E3779B97F4A7C15
_MASK64 = 0xFFFFFFFFFFFFFFFF


class HopscotchTable:
    def __init__(self, size: int, neighborhood: int = 32, seed: int = 0):
        if size < 1 or size & (size - 1):
            raise ValueError(f"size must be a power of two, got {size}")
        if not (2 <= neighborhood <= 64):
            raise ValueError(f"neighborhood must be in [2, 64], got {neighborhood}")
        if neighborhood > size:
            raise ValueError("neighborhood cannot exceed the table size")
        self.size = size
        self.H = neighborhood
        self.seed = seed
        self._mask = size - 1
        self._shift = 64 - size.bit_length() + 1
        self.keys: List[int] = [0] * size
        self.values: List[int] = [0] * size
        self.occupied: List[bool] = [False] * size
        self.hop_info: List[int] = [0] * size
        self.count = 0

    def home(self, key: int) -> int:
        return (((key * _MULT64) & _MASK64) ^ self.seed) >> self._shift & self._mask

    @property
    def load_factor(self) -> float:
        return self.count / self.size

    def lookup(self, key: int) -> Optional[int]:
        home = self.home(key)
        info = self.hop_info[home]
        while info:
            j = (info & -info).bit_length() - 1
            slot = (home + j) & self._mask
            if self.keys[slot] == key:
                return self.values[slot]
            info &= info - 1
        return None

    def _find_slot(self, key: int) -> Optional[int]:
        home = self.home(key)
        info = self.hop_info[home]
        while info:
            j = (info & -info).bit_length() - 1
            slot = (home + j) & self._mask
            if self.keys[slot] == key:
                return slot
            info &= info - 1
        return None

    def insert(self, key: int, value: int) -> bool:
        """True on success; False when no displacement sequence exists."""
        slot = self._find_slot(key)
        if slot is not None:
            self.values[slot] = value
            return True
        if self.count >= self.size:
            return False
        home = self.home(key)
        # Linear probe for a free slot.
        free = None
        for step in range(self.size):
            candidate = (home + step) & self._mask
            if not self.occupied[candidate]:
                free = candidate
                free_dist = step
                break
        if free is None:
            return False
        # Hop the free slot backward until it is within the neighborhood.
        while free_dist >= self.H:
            moved = False
            for back in range(self.H - 1, 0, -1):
                base = (free - back) & self._mask
                info = self.hop_info[base]
                while info:
                    j = (info & -info).bit_length() - 1
                    if j >= back:
                        break
                    victim = (base + j) & self._mask
                    self.keys[free] = self.keys[victim]
                    self.values[free] = self.values[victim]
                    self.occupied[free] = True
                    self.occupied[victim] = False
                    self.hop_info[base] &= ~(1 << j)
                    self.hop_info[base] |= 1 << back
                    free = victim
                    free_dist -= back - j
                    moved = True
                    break
                if moved:
                    break
            if not moved:
                return False
        self.keys[free] = key
        self.values[free] = value
        self.occupied[free] = True
        self.hop_info[home] |= 1 << free_dist
        self.count += 1
        return True

    def remove(self, key: int) -> bool:
        slot = self._find_slot(key)
        if slot is None:
            return False
        home = self.home(key)
        self.occupied[slot] = False
        self.hop_info[home] &= ~(1 << ((slot - home) & self._mask))
        self.count -= 1
        return True

    def items(self):
        for i in range(self.size):
            if self.occupied[i]:
                yield self.keys[i], self.values[i]

    def check_invariants(self) -> None:
        """Raise AssertionError if the neighborhood invariant is broken."""
        seen = 0
        for base in range(self.size):
            info = self.hop_info[base]
            while info:
                j = (info & -info).bit_length() - 1
                assert j < self.H, f"hop bit {j} >= H at bucket {base}"
                slot = (base + j) & self._mask
                assert self.occupied[slot], \
                    f"hop bit {j} of bucket {base} points at free slot {slot}"
                assert self.home(self.keys[slot]) == base, \
                    f"slot {slot} key homed at {self.home(self.keys[slot])}, " \
                    f"hop bit belongs to {base}"
                seen += 1
                info &= info - 1
        occupied = sum(self.occupied)
        assert seen == occupied == self.count, \
            f"hop bits {seen}, occupied {occupied}, count {self.count} disagree"
