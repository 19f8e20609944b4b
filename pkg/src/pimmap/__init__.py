"""Deterministic simulator of hashmap probing inside DRAM subarrays,
software hashmap baselines, and a benchmark harness."""

from .backends import (BackendKind, ChainedBackend, ConventionalBackend,
                       HopscotchBackend, PimBackend, TreeBackend,
                       conventional_probe_cost, equivalence_check, make_backend)
from .bench import (BenchReport, DomainMismatchError, compute_speedup,
                    read_report, run_benchmark, write_report_csv,
                    write_report_json)
from .config import SimConfig, default_config, load_config
from .dram import (DramGeometry, DramTiming, ProtocolChecker, RowAddress,
                   SubarrayState, TraceEvent, activate, check_protocol,
                   column_access, dump_trace, map_page_to_row, row_to_page)
from .hopscotch import HopscotchTable
from .pagedmap import (ChainEntry, CoLocateReport, DeleteStatus, HashConfig,
                       InsertStatus, PagedHashMap, default_bucket_count,
                       hash_key, load_map, save_map)
from .pe import (EMPTY_KEY, TOMBSTONE_KEY, BitSlicedRegion, CapacityError,
                 InvalidKeyError, MatchResult, PeConfig, RowImage, SlotState,
                 area_scan, bitslice_decode, bitslice_encode, decode_row,
                 encode_row, perf_scan)
from .rlu import (ProbeCommand, ProbeResult, ProbeStatus, RankLevelUnit,
                  RluStats, pad_to_cache_line)
from .workload import (DatasetSpec, generate_dataset, generate_miss_keys,
                       ingest_wordlist, read_dataset, select_probes,
                       write_dataset)

__version__ = "0.1.0"
