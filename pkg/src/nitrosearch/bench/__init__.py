"""Benchmark harness: timed runs, preset sweeps and oracle verification."""
from .experiments import EXPERIMENTS, run_experiment
from .runner import BENCH_COLUMNS, BenchSpec, make_dataset, run_bench, write_rows
from .verify import VerifyReport, verify

__all__ = ["BENCH_COLUMNS", "BenchSpec", "EXPERIMENTS", "VerifyReport", "make_dataset",
           "run_bench", "run_experiment", "verify", "write_rows"]
