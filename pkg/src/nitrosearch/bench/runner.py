"""Timed lookup loops and the fixed result-row schema."""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..core import SortedColumn, Workload, generate_queries
from ..estimators import STRUCTURES, make_index
from ..trace import trace_medians
from ..validation import MAX_SENTINEL, check_positive_int

log = logging.getLogger(__name__)

PAIR_BYTES = 8
DEFAULT_REPETITIONS = 5
DEFAULT_WARMUP = 1
DEFAULT_TRACE_QUERIES = 2000

BENCH_COLUMNS = (
    "structure", "params", "n", "data_bytes", "workload", "seed", "queries",
    "repetitions", "warmup", "threads", "ns_median", "ns_p99", "samples_ns",
    "throughput_qps", "build_ns", "median_lines", "median_pages", "median_cmps",
    "checksum", "reference_note",
)
"""Columns of every benchmark CSV, in order."""

TIMING_COLUMNS = frozenset({"ns_median", "ns_p99", "samples_ns", "throughput_qps", "build_ns"})


@dataclass
class BenchSpec:
    structure: str
    params: dict = field(default_factory=dict)
    n: int | None = None
    data_size_bytes: int | None = None
    workload: Workload = field(default_factory=Workload)
    repetitions: int = DEFAULT_REPETITIONS
    warmup_rounds: int = DEFAULT_WARMUP
    threads: int = 0
    trace_queries: int = DEFAULT_TRACE_QUERIES
    data_seed: int | None = None
    reference_note: str = ""

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}; choose from {sorted(STRUCTURES)}")
        if (self.n is None) == (self.data_size_bytes is None):
            raise ValueError("give exactly one of n and data_size_bytes")
        if self.n is not None:
            check_positive_int(self.n, "n", minimum=0)
        else:
            check_positive_int(self.data_size_bytes, "data_size_bytes", minimum=0)
        check_positive_int(self.repetitions, "repetitions")
        check_positive_int(self.warmup_rounds, "warmup_rounds", minimum=0)
        check_positive_int(self.threads, "threads", minimum=0)
        check_positive_int(self.trace_queries, "trace_queries", minimum=0)
        # fail early on parameters the structure does not take
        make_index(self.structure, **self.params)

    @property
    def key_count(self):
        """Pairs in the dataset; a data size counts 8 bytes per key-value pair."""
        return self.n if self.n is not None else self.data_size_bytes // PAIR_BYTES

    @property
    def params_label(self):
        return ";".join(f"{k}={v}" for k, v in sorted(self.params.items()))


def make_dataset(n, seed=0):
    """``n`` distinct random keys (values are their ranks), reproducible per seed."""
    n = check_positive_int(n, "n", minimum=0)
    rng = np.random.default_rng([seed, 0])
    keys = np.unique(rng.integers(0, MAX_SENTINEL, size=n + n // 8 + 16, dtype=np.uint32))
    while keys.shape[0] < n:
        more = rng.integers(0, MAX_SENTINEL, size=n, dtype=np.uint32)
        keys = np.unique(np.concatenate([keys, more]))
    keys = np.sort(rng.choice(keys, size=n, replace=False))
    return SortedColumn(keys, np.arange(n, dtype=np.uint32))


def timed_loop(search, queries):
    """Dependency-chained lookups; returns (elapsed ns, checksum).

    The next query index depends on the previous result, so lookups cannot
    overlap: ``i <- (i + 1 + (value & 1)) mod count``.
    """
    count = len(queries)
    checksum = 0
    i = 0
    t0 = time.perf_counter_ns()
    for _ in range(count):
        v = search(queries[i]).value
        checksum ^= v
        i = (i + 1 + (v & 1)) % count
    return time.perf_counter_ns() - t0, checksum


def _threaded(search, queries, threads):
    chunks = [queries[t::threads] for t in range(threads)]
    t0 = time.perf_counter_ns()
    with ThreadPoolExecutor(threads) as pool:
        results = list(pool.map(lambda qs: timed_loop(search, qs), chunks))
    elapsed = time.perf_counter_ns() - t0
    checksum = 0
    for _, c in results:
        checksum ^= c
    return elapsed, checksum


def run_bench(spec, col=None):
    """Build, warm up, time and trace one configuration; returns one row dict.

    ``col`` may be passed to reuse a dataset across configurations.
    """
    n = spec.key_count
    if col is None:
        col = make_dataset(n, spec.workload.seed if spec.data_seed is None else spec.data_seed)
    elif col.n != n:
        raise ValueError(f"dataset has {col.n} keys, spec wants {n}")
    est = make_index(spec.structure, **spec.params)
    est.fit(col.keys, col.values)
    queries = [int(q) for q in generate_queries(col, spec.workload)]
    if not queries:
        raise ValueError("workload has no queries")
    search = est.lookup_function()

    for _ in range(spec.warmup_rounds):
        timed_loop(search, queries)
    samples = []
    checksum = 0
    throughput = ""
    for _ in range(spec.repetitions):
        if spec.threads:
            elapsed, checksum = _threaded(search, queries, spec.threads)
        else:
            elapsed, checksum = timed_loop(search, queries)
        samples.append(elapsed / len(queries))
    if spec.threads:
        throughput = round(1e9 / float(np.median(samples)), 1)
    log.info("%s %s checksum=%d", spec.structure, spec.params_label, checksum)

    stats = trace_medians(est, queries[:spec.trace_queries])
    return {
        "structure": spec.structure,
        "params": spec.params_label,
        "n": n,
        "data_bytes": n * PAIR_BYTES,
        "workload": spec.workload.label,
        "seed": spec.workload.seed,
        "queries": len(queries),
        "repetitions": spec.repetitions,
        "warmup": spec.warmup_rounds,
        "threads": spec.threads,
        "ns_median": round(float(np.median(samples)), 2),
        "ns_p99": round(float(np.percentile(samples, 99)), 2),
        "samples_ns": ";".join(f"{s:.2f}" for s in samples),
        "throughput_qps": throughput,
        "build_ns": est.build_ns_,
        "median_lines": stats["median_lines"],
        "median_pages": stats["median_pages"],
        "median_cmps": stats["median_cmps"],
        "checksum": checksum,
        "reference_note": spec.reference_note,
    }


def write_rows(rows, fh=None, columns=BENCH_COLUMNS):
    """CSV with a header row; returns the text when ``fh`` is None."""
    out = fh if fh is not None else io.StringIO()
    writer = csv.DictWriter(out, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return out.getvalue() if fh is None else None
