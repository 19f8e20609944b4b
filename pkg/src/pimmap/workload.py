"""Dataset generation, probe selection, and the binary pair-file format.

Keys are unique uniform 32-bit values that never collide with the slot
sentinels; everything is deterministic for a given seed. The pair file is
little-endian: a 16-byte header (magic "HMKV", version u32, n_pairs u64)
followed by n_pairs records of key u32, value u32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import List, Set, Tuple

import numpy as np

from .pe import EMPTY_KEY

MAGIC = b"HMKV"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")

KEY_SPACE = EMPTY_KEY  # legal keys are [0, 0xFFFFFFFE)


@dataclass(frozen=True)
class DatasetSpec:
    n_pairs: int
    probe_fraction: float = 0.1
    seed: int = 1

    def __post_init__(self) -> None:
        if self.n_pairs < 0:
            raise ValueError(f"n_pairs must be >= 0, got {self.n_pairs}")
        if not (0 < self.probe_fraction <= 1):
            raise ValueError(f"probe_fraction must be in (0, 1], got {self.probe_fraction}")


def generate_dataset(n_pairs: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """n_pairs unique sentinel-free keys plus arbitrary 32-bit values."""
    if n_pairs > KEY_SPACE:
        raise ValueError(f"n_pairs {n_pairs} exceeds the key space {KEY_SPACE}")
    rng = np.random.default_rng(seed)
    if n_pairs == 0:
        return (np.empty(0, dtype=np.uint32), np.empty(0, dtype=np.uint32))
    unique = np.empty(0, dtype=np.uint64)
    want = n_pairs
    while unique.size < n_pairs:
        draw = rng.integers(0, KEY_SPACE, size=max(want + 16, int(want * 1.05)),
                            dtype=np.uint64)
        unique = np.unique(np.concatenate([unique, draw]))
        want = n_pairs - unique.size
    keys = unique[rng.permutation(unique.size)[:n_pairs]].astype(np.uint32)
    values = rng.integers(0, 1 << 32, size=n_pairs, dtype=np.uint64).astype(np.uint32)
    return keys, values


def select_probes(keys: np.ndarray, fraction: float, seed: int) -> np.ndarray:
    """floor(fraction * n) keys sampled without replacement (shuffled)."""
    if not (0 < fraction <= 1):
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    n = len(keys)
    count = int(fraction * n)
    rng = np.random.default_rng(seed)
    picks = rng.permutation(n)[:count]
    return np.asarray(keys)[picks]


def generate_miss_keys(n: int, seed: int, present: Set[int]) -> np.ndarray:
    """n keys guaranteed absent from `present` (for miss-rate studies)."""
    rng = np.random.default_rng(seed)
    present = set(present)
    out: List[int] = []
    while len(out) < n:
        for candidate in rng.integers(0, KEY_SPACE, size=max(16, n), dtype=np.uint64).tolist():
            if candidate not in present:
                present.add(candidate)
                out.append(candidate)
                if len(out) == n:
                    break
    return np.asarray(out, dtype=np.uint32)


def write_dataset(path: str, keys: np.ndarray, values: np.ndarray) -> None:
    if len(keys) != len(values):
        raise ValueError("keys and values differ in length")
    flat = np.empty(2 * len(keys), dtype="<u4")
    flat[0::2] = keys
    flat[1::2] = values
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(keys)))
        fh.write(flat.tobytes())


def read_dataset(path: str) -> Tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, n_pairs = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        payload = fh.read(8 * n_pairs)
    if len(payload) != 8 * n_pairs:
        raise ValueError(f"{path}: truncated payload "
                         f"({len(payload)} of {8 * n_pairs} bytes)")
    flat = np.frombuffer(payload, dtype="<u4")
    return flat[0::2].copy(), flat[1::2].copy()


# -- dictionary encoding --------------------------------------------------------

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def ingest_wordlist(path: str, n_words: int = 350_000) -> List[int]:
    """Encode the first n_words lines of a word file as distinct 32-bit keys.

    Each distinct word hashes to a folded 64-bit hash; fold collisions (and
    sentinel hits) are resolved by sequential renumbering from 0 upward.
    """
    words: List[str] = []
    seen: Set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            if lineno >= n_words:
                break
            word = line.strip()
            if not word or word in seen:
                continue
            seen.add(word)
            words.append(word)
    keys: List[int] = []
    used: Set[int] = set()
    renumber = 0
    for word in words:
        h = fnv1a64(word.encode("utf-8"))
        candidate = ((h >> 32) ^ h) & 0xFFFFFFFF
        if candidate >= EMPTY_KEY or candidate in used:
            while renumber in used or renumber >= EMPTY_KEY:
                renumber += 1
            candidate = renumber
        used.add(candidate)
        keys.append(candidate)
    return keys
