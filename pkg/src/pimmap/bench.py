"""Benchmark execution, speedup computation, and CSV/JSON reports.

Simulated backends aggregate per-probe nanoseconds deterministically;
software baselines are timed with a monotonic clock around the probe loop
only (median of the repetitions). The two time domains are never compared
silently.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .backends import BackendKind
from .rlu import ProbeStatus, RluStats

CSV_FIELDS = ("backend", "n_probes", "mean_ns", "median_ns", "p99_ns",
              "total_ns", "activations", "bytes_on_bus")

DEFAULT_WALL_REPS = 5


class DomainMismatchError(ValueError):
    """Comparing simulated nanoseconds against wall-clock without opting in."""


@dataclass
class BenchReport:
    backend: str
    n_probes: int
    mean_ns: float
    median_ns: float
    p99_ns: float
    total_ns: float
    activations: int
    bytes_on_bus: int
    time_domain: str = "sim"
    n_found: int = 0
    reps: int = 1
    rlu: Optional[RluStats] = None

    def csv_row(self) -> Dict[str, object]:
        return {"backend": self.backend, "n_probes": self.n_probes,
                "mean_ns": f"{self.mean_ns:.6f}",
                "median_ns": f"{self.median_ns:.6f}",
                "p99_ns": f"{self.p99_ns:.6f}",
                "total_ns": f"{self.total_ns:.6f}",
                "activations": self.activations,
                "bytes_on_bus": self.bytes_on_bus}


def run_benchmark(backend, keys: Sequence[int], values: Sequence[int],
                  probe_keys: Sequence[int], policy: str = "serial",
                  reps: Optional[int] = None,
                  trace_hook=None, expect_all_found: bool = True) -> BenchReport:
    """Insert all pairs, run all probes, aggregate per-probe latencies.

    policy picks the makespan model for simulated backends ("serial" sums
    latencies, "bank-parallel" overlaps distinct banks). trace_hook, if
    given, receives every per-command event list as it is emitted.
    """
    if policy not in ("serial", "bank-parallel"):
        raise ValueError(f"unknown policy {policy!r}")
    kind: BackendKind = backend.kind
    for key, value in zip(keys, values):
        status = backend.insert(key, value)
        if getattr(status, "name", "OK") != "OK":
            raise RuntimeError(f"insert of key {key} failed: {status}")

    if kind.time_domain == "sim":
        report = _run_sim(backend, probe_keys, policy, trace_hook)
    else:
        report = _run_wall(backend, probe_keys, reps or DEFAULT_WALL_REPS)
    if expect_all_found and report.n_found != report.n_probes:
        raise RuntimeError(
            f"{report.n_probes - report.n_found} probed keys were not found")
    return report


def _run_sim(backend, probe_keys: Sequence[int], policy: str,
             trace_hook) -> BenchReport:
    latencies: List[float] = []
    found = 0
    bank_cursor: Optional[Dict[tuple, float]] = (
        {} if policy == "bank-parallel" else None)
    serial_cursor = 0.0
    makespan = 0.0
    for key in probe_keys:
        start = serial_cursor if bank_cursor is None else 0.0
        outcome = backend.probe_detailed(int(key), start_ns=start,
                                         bank_cursor=bank_cursor)
        if trace_hook is not None:
            for _, _, trace in outcome.commands:
                trace_hook(trace)
        latencies.append(outcome.latency_ns)
        if outcome.status is ProbeStatus.FOUND:
            found += 1
        if bank_cursor is None:
            serial_cursor += outcome.latency_ns
            makespan = serial_cursor
    if bank_cursor is not None:
        makespan = max(bank_cursor.values(), default=0.0)
    if latencies:
        arr = np.asarray(latencies)
        mean = float(arr.mean())
        median = float(np.percentile(arr, 50))
        p99 = float(np.percentile(arr, 99))
    else:
        mean = median = p99 = 0.0
    stats = backend.stats
    return BenchReport(
        backend=backend.kind.value, n_probes=len(probe_keys), mean_ns=mean,
        median_ns=median, p99_ns=p99, total_ns=makespan,
        activations=stats.activations, bytes_on_bus=stats.bytes_on_bus,
        time_domain="sim", n_found=found, reps=1, rlu=stats.snapshot())


def _run_wall(backend, probe_keys: Sequence[int], reps: int) -> BenchReport:
    probe = backend.probe
    keys = [int(k) for k in probe_keys]
    walls: List[float] = []
    found = 0
    for rep in range(max(1, reps)):
        found = 0
        t0 = time.perf_counter_ns()
        for key in keys:
            status, _ = probe(key)
            if status is ProbeStatus.FOUND:
                found += 1
        walls.append(time.perf_counter_ns() - t0)
    total = float(statistics.median(walls))
    mean = total / len(keys) if keys else 0.0
    # Loop-level timing yields no per-probe distribution; the mean stands in.
    return BenchReport(
        backend=backend.kind.value, n_probes=len(keys), mean_ns=mean,
        median_ns=mean, p99_ns=mean, total_ns=total, activations=0,
        bytes_on_bus=0, time_domain="wall", n_found=found, reps=max(1, reps))


@dataclass
class SpeedupResult:
    ratio: float
    baseline: str
    subject: str
    baseline_domain: str
    subject_domain: str
    indicative_only: bool


def compute_speedup(baseline: BenchReport, subject: BenchReport,
                    allow_cross_domain: bool = False) -> SpeedupResult:
    """baseline mean per-probe latency / subject mean per-probe latency."""
    cross = baseline.time_domain != subject.time_domain
    if cross and not allow_cross_domain:
        raise DomainMismatchError(
            f"{baseline.backend} reports {baseline.time_domain} time, "
            f"{subject.backend} reports {subject.time_domain} time; "
            f"pass allow_cross_domain to compare anyway")
    if subject.mean_ns == 0:
        raise ValueError("subject mean latency is zero")
    return SpeedupResult(ratio=baseline.mean_ns / subject.mean_ns,
                         baseline=baseline.backend, subject=subject.backend,
                         baseline_domain=baseline.time_domain,
                         subject_domain=subject.time_domain,
                         indicative_only=cross)


# -- report files ---------------------------------------------------------------

def write_report_csv(report: BenchReport, fh) -> None:
    writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerow(report.csv_row())


def write_report_json(report: BenchReport, fh) -> None:
    row = report.csv_row()
    row["n_probes"] = report.n_probes
    row["mean_ns"] = report.mean_ns
    row["median_ns"] = report.median_ns
    row["p99_ns"] = report.p99_ns
    row["total_ns"] = report.total_ns
    json.dump(row, fh, indent=2)
    fh.write("\n")


def _domain_for(backend_name: str) -> str:
    return BackendKind(backend_name).time_domain


def read_report(path: str) -> BenchReport:
    """Read a report written by write_report_csv or write_report_json."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        row = json.loads(stripped)
    else:
        rows = list(csv.DictReader(io.StringIO(text)))
        if len(rows) != 1:
            raise ValueError(f"{path}: expected exactly one report row, got {len(rows)}")
        row = rows[0]
    try:
        backend = str(row["backend"])
        report = BenchReport(
            backend=backend, n_probes=int(row["n_probes"]),
            mean_ns=float(row["mean_ns"]), median_ns=float(row["median_ns"]),
            p99_ns=float(row["p99_ns"]), total_ns=float(row["total_ns"]),
            activations=int(row["activations"]),
            bytes_on_bus=int(row["bytes_on_bus"]),
            time_domain=_domain_for(backend))
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: not a benchmark report: {exc}") from exc
    return report
