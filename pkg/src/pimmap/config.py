"""Flat key=value config files for geometry, timing, and cost-model knobs.

One `name = number` per line, `#` starts a comment. All geometry and timing
keys are required in any user-supplied file; the packaged default file is
the single source of the default values.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Dict, Optional, Union

from .dram import DramGeometry, DramTiming

GEOMETRY_KEYS = ("channels", "ranks_per_channel", "banks_per_rank",
                 "subarrays_per_bank", "rows_per_subarray", "row_size_bytes")
TIMING_KEYS = ("tCK_ns", "tRCD_cycles", "tRP_cycles", "tCL_cycles",
               "tRAS_cycles", "burst_cycles_per_line", "pe_tick_ns")
OPTIONAL_KEYS = ("cpu_scan_ns_per_line",)

DEFAULT_CONFIG_NAME = "ddr4_3200.cfg"


@dataclass(frozen=True)
class SimConfig:
    geometry: DramGeometry
    timing: DramTiming
    cpu_scan_ns_per_line: float


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Union[int, float]]:
    values: Dict[str, Union[int, float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'name = value', got {raw!r}")
        name, _, value = line.partition("=")
        name = name.strip()
        value = value.strip()
        if not name or not value:
            raise ValueError(f"{source}:{lineno}: expected 'name = value', got {raw!r}")
        if name in values:
            raise ValueError(f"{source}:{lineno}: duplicate key {name!r}")
        try:
            values[name] = int(value)
        except ValueError:
            try:
                values[name] = float(value)
            except ValueError:
                raise ValueError(f"{source}:{lineno}: {value!r} is not a number") from None
    return values


def _default_text() -> str:
    return resources.files("pimmap").joinpath(
        f"configs/{DEFAULT_CONFIG_NAME}").read_text(encoding="utf-8")


def _build(values: Dict[str, Union[int, float]], source: str) -> SimConfig:
    known = set(GEOMETRY_KEYS) | set(TIMING_KEYS) | set(OPTIONAL_KEYS)
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValueError(f"{source}: unknown keys: {', '.join(unknown)}")
    missing = sorted(k for k in GEOMETRY_KEYS + TIMING_KEYS if k not in values)
    if missing:
        raise ValueError(f"{source}: missing required keys: {', '.join(missing)}")
    geometry = DramGeometry(**{k: int(values[k]) for k in GEOMETRY_KEYS})
    timing_args = {k: (float(values[k]) if k.endswith("_ns") else int(values[k]))
                   for k in TIMING_KEYS}
    timing = DramTiming(**timing_args)
    defaults = parse_config_text(_default_text(), DEFAULT_CONFIG_NAME)
    cpu_scan = float(values.get("cpu_scan_ns_per_line",
                                defaults["cpu_scan_ns_per_line"]))
    if cpu_scan < 0:
        raise ValueError(f"{source}: cpu_scan_ns_per_line must be >= 0")
    return SimConfig(geometry=geometry, timing=timing, cpu_scan_ns_per_line=cpu_scan)


def load_config(path: Optional[str] = None) -> SimConfig:
    """Load a simulator config; with no path, the packaged defaults."""
    if path is None:
        return _build(parse_config_text(_default_text(), DEFAULT_CONFIG_NAME),
                      DEFAULT_CONFIG_NAME)
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return _build(parse_config_text(text, path), path)


def default_config() -> SimConfig:
    return load_config(None)
