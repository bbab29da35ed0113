"""``bench`` command line: run one configuration, run a preset, verify, compile."""
from __future__ import annotations

import argparse
import logging
import sys
from contextlib import nullcontext
from pathlib import Path

from ..core import Workload
from ..estimators import STRUCTURES, make_index
from ..nitrogen import dump, emit_native
from ..nitrogen.native import write_size_report
from .experiments import EXPERIMENTS, MB, run_experiment
from .runner import DEFAULT_REPETITIONS, DEFAULT_WARMUP, BenchSpec, make_dataset, run_bench, write_rows
from .verify import verify

# CLI flag -> (estimator parameter, structures that take it)
STRUCTURE_FLAGS = {
    "f": ("f", {"css", "bplus", "csb", "ng_css"}),
    "lc": ("leaf_size", {"css", "bplus", "csb", "fast", "ng_css"}),
    "k": ("k", {"kary"}),
    "ds": ("dS", {"fast"}),
    "dc": ("dC", {"fast"}),
    "dp": ("dP", {"fast"}),
    "levels": ("levels", {"ng_binary", "ng_css"}),
    "cutoff": ("linear_cutoff", {"binary", "ng_binary"}),
    "backend": ("backend", {"ng_binary", "ng_css"}),
}


def _levels(text):
    return text if text == "full" else int(text)


def _add_structure_args(p):
    p.add_argument("--structure", required=True, choices=sorted(STRUCTURES))
    p.add_argument("--f", type=int, help="fanout (keys per node + 1)")
    p.add_argument("--lc", type=int, help="leaf capacity in key-value pairs")
    p.add_argument("--k", type=int, help="keys per k-ary node")
    p.add_argument("--ds", type=int)
    p.add_argument("--dc", type=int)
    p.add_argument("--dp", type=int)
    p.add_argument("--levels", type=_levels, help="compiled levels, an integer or 'full'")
    p.add_argument("--cutoff", type=int, help="binary search linear-scan cutoff")
    p.add_argument("--backend", choices=("interpret", "python", "native"))
    size = p.add_mutually_exclusive_group(required=True)
    size.add_argument("--n", type=int, help="number of keys")
    size.add_argument("--size-mb", type=float, help="data size in MiB (8 bytes per pair)")
    p.add_argument("--seed", type=int, default=42)


def _structure_params(parser, args):
    params = {}
    for flag, (name, allowed) in STRUCTURE_FLAGS.items():
        value = getattr(args, flag)
        if value is None:
            continue
        if args.structure not in allowed:
            parser.error(f"--{flag} does not apply to structure {args.structure}")
        params[name] = value
    return params


def _key_count(args):
    return args.n if args.n is not None else int(args.size_mb * MB) // 8


def _open_out(path):
    return open(path, "w", newline="", encoding="utf-8") if path else nullcontext(sys.stdout)


def build_parser():
    parser = argparse.ArgumentParser(prog="bench", description="Index search benchmarks and checks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="time one index configuration")
    _add_structure_args(run)
    run.add_argument("--workload", choices=("uniform", "zipf"), default="uniform")
    run.add_argument("--s", type=float, default=1.0, help="Zipf exponent")
    run.add_argument("--hit-fraction", type=float, default=1.0)
    run.add_argument("--queries", type=int, default=100_000)
    run.add_argument("--reps", type=int, default=DEFAULT_REPETITIONS)
    run.add_argument("--warmup", type=int, default=DEFAULT_WARMUP)
    run.add_argument("--threads", type=int, default=0, help="throughput mode with Q query threads")
    run.add_argument("--trace-queries", type=int, default=2000)
    run.add_argument("--out")

    exp = sub.add_parser("experiment", help="run a preset sweep")
    exp.add_argument("name", choices=sorted(EXPERIMENTS))
    exp.add_argument("--queries", type=int)
    exp.add_argument("--reps", type=int)
    exp.add_argument("--seed", type=int, default=42)
    exp.add_argument("--sizes-mb", type=float, nargs="+", help="data sizes (fig5.1) or the single size (fig5.2)")
    exp.add_argument("--n", type=int, help="key count for fig5.3")
    exp.add_argument("--with-compiled", action="store_true", help="fig5.2: also sweep compiled CSS")
    exp.add_argument("--out")

    ver = sub.add_parser("verify", help="oracle-equivalence suite")
    target = ver.add_mutually_exclusive_group(required=True)
    target.add_argument("--all", action="store_true")
    target.add_argument("--structure", action="append", choices=sorted(STRUCTURES))
    ver.add_argument("--random-sizes", type=int, default=3)
    ver.add_argument("--random-params", action="store_true")
    ver.add_argument("--seed", type=int, default=0)

    comp = sub.add_parser("compile", help="compile an index and write its program, assembly and size report")
    _add_structure_args(comp)
    comp.add_argument("--ir", help="IR text dump path")
    comp.add_argument("--asm", help="assembly output path")
    comp.add_argument("--size-report", help="size report CSV path (stdout if no outputs given)")
    return parser


def _cmd_run(parser, args):
    params = _structure_params(parser, args)
    try:
        workload = Workload(distribution=args.workload, query_count=args.queries,
                            hit_fraction=args.hit_fraction, zipf_s=args.s, seed=args.seed)
        spec = BenchSpec(args.structure, params=params, n=_key_count(args), workload=workload,
                         repetitions=args.reps, warmup_rounds=args.warmup, threads=args.threads,
                         trace_queries=args.trace_queries)
    except (TypeError, ValueError) as exc:
        parser.error(str(exc))
    row = run_bench(spec)
    print(f"checksum {row['checksum']}", file=sys.stderr)
    with _open_out(args.out) as fh:
        write_rows([row], fh)
    return 0


def _cmd_experiment(parser, args):
    overrides = {"seed": args.seed}
    if args.queries is not None:
        overrides["queries"] = args.queries
    if args.reps is not None:
        if args.name == "fig5.3":
            parser.error("--reps does not apply to fig5.3")
        overrides["repetitions"] = args.reps
    if args.sizes_mb:
        sizes = [int(s * MB) for s in args.sizes_mb]
        if args.name == "fig5.1":
            overrides["sizes"] = sizes
        elif args.name == "fig5.2" and len(sizes) == 1:
            overrides["size"] = sizes[0]
        else:
            parser.error("--sizes-mb takes several sizes for fig5.1 and one for fig5.2")
    if args.n is not None:
        if args.name != "fig5.3":
            parser.error("--n applies to fig5.3 only")
        overrides["n"] = args.n
    if args.with_compiled:
        if args.name != "fig5.2":
            parser.error("--with-compiled applies to fig5.2 only")
        overrides["include_compiled"] = True
    rows, columns = run_experiment(args.name, **overrides)
    with _open_out(args.out) as fh:
        write_rows(rows, fh, columns)
    return 0


def _cmd_verify(parser, args):
    structures = None if args.all else args.structure
    report = verify(structures, random_sizes=args.random_sizes, seed=args.seed,
                    randomize_params=args.random_params)
    for line in report.lines():
        print(line)
    return 0 if report.ok else 1


def _cmd_compile(parser, args):
    if args.structure not in ("ng_binary", "ng_css"):
        parser.error("compile needs --structure ng_binary or ng_css")
    params = _structure_params(parser, args)
    params.pop("backend", None)
    try:
        est = make_index(args.structure, **params).fit(*_dataset(_key_count(args), args.seed))
    except (TypeError, ValueError) as exc:
        parser.error(str(exc))
    program = est.compiled_.program
    code = emit_native(program)
    if args.ir:
        Path(args.ir).write_text(dump(program))
    if args.asm:
        code.write(args.asm)
    if args.size_report or not (args.ir or args.asm):
        with _open_out(args.size_report) as fh:
            write_size_report(code.report, fh)
    print(f"levels {est.compiled_.levels}, {len(program)} instructions, {code.search_bytes} bytes",
          file=sys.stderr)
    return 0


def _dataset(n, seed):
    col = make_dataset(n, seed)
    return col.keys, col.values


COMMANDS = {"run": _cmd_run, "experiment": _cmd_experiment, "verify": _cmd_verify, "compile": _cmd_compile}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](parser, args)


if __name__ == "__main__":
    sys.exit(main())
