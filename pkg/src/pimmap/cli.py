"""Command-line interface: generate, run, bench, analyze-buckets, compare."""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
from typing import List, Optional

import numpy as np

from .backends import BackendKind, make_backend
from .bench import (DEFAULT_WALL_REPS, DomainMismatchError, compute_speedup,
                    read_report, run_benchmark, write_report_csv,
                    write_report_json)
from .config import load_config
from .dram import TRACE_HEADER, ProtocolChecker
from .pagedmap import HashConfig, PagedHashMap, default_bucket_count
from .workload import (generate_dataset, generate_miss_keys, ingest_wordlist,
                       read_dataset, select_probes, write_dataset)

BACKEND_CHOICES = [kind.value for kind in BackendKind]


def _add_run_args(parser: argparse.ArgumentParser, with_reps: bool) -> None:
    parser.add_argument("--backend", required=True, choices=BACKEND_CHOICES)
    parser.add_argument("--dataset", required=True, help="pair file from `generate`")
    parser.add_argument("--probe-fraction", type=float, default=0.1)
    parser.add_argument("--probe-seed", type=int, default=1)
    parser.add_argument("--miss-fraction", type=float, default=0.0,
                        help="extra absent keys probed, as a fraction of the probe set")
    parser.add_argument("--config", default=None, help="geometry/timing config file")
    parser.add_argument("--buckets", type=int, default=None,
                        help="bucket count override (default: ~50%% page utilization)")
    parser.add_argument("--report", choices=["csv", "json"], default="csv")
    parser.add_argument("--out", default="-", help="report destination ('-' = stdout)")
    parser.add_argument("--policy", choices=["serial", "bank-parallel"],
                        default="serial")
    parser.add_argument("--cam-mode", action="store_true",
                        help="single-tick content-addressable match (pim-perf only)")
    parser.add_argument("--open-page", action="store_true",
                        help="leave rows open between probes (pim backends only)")
    parser.add_argument("--trace", default=None, help="dump the event trace CSV here")
    parser.add_argument("--check-protocol", action="store_true",
                        help="validate every emitted trace against the DRAM protocol")
    if with_reps:
        parser.add_argument("--reps", type=int, default=DEFAULT_WALL_REPS,
                            help="probe-loop repetitions for wall-clock backends")


def _cmd_generate(args) -> int:
    keys, values = generate_dataset(args.n, args.seed)
    write_dataset(args.out, keys, values)
    print(f"wrote {len(keys)} pairs to {args.out}")
    return 0


def _cmd_run(args, reps: Optional[int] = None) -> int:
    sim = load_config(args.config)
    kind = BackendKind(args.backend)
    if args.cam_mode and kind is not BackendKind.PIM_PERF:
        print("error: --cam-mode requires --backend pim-perf", file=sys.stderr)
        return 2
    if args.open_page and kind not in (BackendKind.PIM_AREA, BackendKind.PIM_PERF):
        print("error: --open-page requires a pim backend", file=sys.stderr)
        return 2

    keys, values = read_dataset(args.dataset)
    bucket_count = args.buckets or default_bucket_count(
        len(keys), sim.geometry.page_capacity)
    backend = make_backend(kind, sim, bucket_count, cam_mode=args.cam_mode,
                           open_page=args.open_page)

    probes = select_probes(keys, args.probe_fraction, args.probe_seed)
    expect_all_found = True
    if args.miss_fraction > 0:
        misses = generate_miss_keys(int(args.miss_fraction * len(probes)),
                                    args.probe_seed + 1, set(keys.tolist()))
        probes = np.concatenate([probes, misses])
        probes = probes[np.random.default_rng(args.probe_seed + 2)
                        .permutation(len(probes))]
        expect_all_found = False

    with contextlib.ExitStack() as stack:
        hooks = []
        if args.trace is not None:
            trace_fh = stack.enter_context(open(args.trace, "w", encoding="utf-8"))
            trace_fh.write(TRACE_HEADER + "\n")

            def dump_hook(events, fh=trace_fh):
                for ev in events:
                    fh.write(f"{ev.t_ns:.6f},{ev.unit},{ev.event},"
                             f"{ev.bank},{ev.subarray},{ev.row}\n")
            hooks.append(dump_hook)
        checker = None
        if args.check_protocol:
            checker = ProtocolChecker(sim.timing)
            hooks.append(checker.feed)
        trace_hook = None
        if hooks:
            def trace_hook(events):
                for hook in hooks:
                    hook(events)

        report = run_benchmark(backend, keys.tolist(), values.tolist(),
                               probes.tolist(), policy=args.policy, reps=reps,
                               trace_hook=trace_hook,
                               expect_all_found=expect_all_found)

    if checker is not None and not checker.ok:
        for violation in checker.violations[:10]:
            print(f"protocol violation: {violation}", file=sys.stderr)
        print(f"error: {len(checker.violations)} protocol violations", file=sys.stderr)
        return 1

    writer = write_report_csv if args.report == "csv" else write_report_json
    if args.out == "-":
        writer(report, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            writer(report, fh)
    return 0


def _cmd_bench(args) -> int:
    return _cmd_run(args, reps=args.reps)


def _cmd_analyze_buckets(args) -> int:
    sim = load_config(args.config)
    keys = ingest_wordlist(args.wordlist, args.n_words)
    hashmap = PagedHashMap(HashConfig(bucket_count=args.buckets), sim.geometry)
    for i, key in enumerate(keys):
        status = hashmap.insert(key, i & 0xFFFFFFFF)
        if status.name != "OK":
            print(f"error: insert failed: {status}", file=sys.stderr)
            return 1
    lengths, summary = hashmap.bucket_histogram()
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("bucket_id,length\n")
        for bucket, length in enumerate(lengths):
            fh.write(f"{bucket},{length}\n")
    print(json.dumps({
        "n_words": len(keys), "buckets": args.buckets,
        "mean": summary.mean, "max": summary.max,
        "coefficient_of_variation": summary.coefficient_of_variation,
    }))
    return 0


def _cmd_compare(args) -> int:
    baseline = read_report(args.baseline)
    subject = read_report(args.subject)
    try:
        result = compute_speedup(baseline, subject,
                                 allow_cross_domain=args.allow_cross_domain)
    except DomainMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = {"baseline": result.baseline, "subject": result.subject,
           "speedup": result.ratio,
           "baseline_domain": result.baseline_domain,
           "subject_domain": result.subject_domain}
    if result.indicative_only:
        out["indicative_only"] = True
    print(json.dumps(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pimmap",
        description="Simulated in-memory hashmap probing, software baselines, "
                    "and a benchmark harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write a random pair file")
    p_gen.add_argument("--n", type=int, default=1_000_000)
    p_gen.add_argument("--seed", type=int, default=1)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_generate)

    p_run = sub.add_parser("run", help="single benchmark pass over a dataset")
    _add_run_args(p_run, with_reps=False)
    p_run.set_defaults(func=lambda args: _cmd_run(args, reps=None))

    p_bench = sub.add_parser("bench", help="benchmark with repeated probe loops")
    _add_run_args(p_bench, with_reps=True)
    p_bench.set_defaults(func=_cmd_bench)

    p_hist = sub.add_parser("analyze-buckets",
                            help="bucket-length histogram of a word list")
    p_hist.add_argument("--wordlist", required=True)
    p_hist.add_argument("--n-words", type=int, default=350_000)
    p_hist.add_argument("--buckets", type=int, default=4096)
    p_hist.add_argument("--config", default=None)
    p_hist.add_argument("--out", required=True)
    p_hist.set_defaults(func=_cmd_analyze_buckets)

    p_cmp = sub.add_parser("compare", help="speedup of subject over baseline")
    p_cmp.add_argument("--baseline", required=True)
    p_cmp.add_argument("--subject", required=True)
    p_cmp.add_argument("--allow-cross-domain", action="store_true")
    p_cmp.set_defaults(func=_cmd_compare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
