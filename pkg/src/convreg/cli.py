"""Command line interface: run experiments, verify oracles, inspect matrices, plot traces.

`run` minimizes a chosen penalty from a seeded or file-loaded kernel and
writes a trace CSV, the final kernel, a JSON summary, and optionally a
figure and a Matrix Market export of the final matrix.  `verify` runs
the independent oracle suite and exits nonzero on any failure.
`inspect` reports the structured matrix induced by a kernel.  Flags may
also be supplied through `--config <file>` as `key = value` lines (same
keys as the flags); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .descent import (
    GdConfig,
    RunStatus,
    init_kernel,
    read_trace_csv,
    run,
    write_trace_csv,
)
from .penalties import PenaltyKind
from .spectral import GAP_THRESHOLD, extreme_singular_pairs, sigma_max_iterative, simplicity_check
from .structured import build_multi, frobenius_norm_sq, write_matrix_market
from .tensors import write_kernel
from .validate import run_verification

__all__ = ["main", "entry"]

_RUN_DEFAULTS = {
    "kernel_shape": "3,3,1,1",
    "input_size": 20,
    "reg": "frob",
    "lr": 1e-5,
    "iters": 100,
    "seed": 1,
    "init": "uniform01",
    "kernel_file": None,
    "out_trace": None,
    "out_kernel": None,
    "out_summary": None,
    "svd": "dense",
    "gap_threshold": GAP_THRESHOLD,
    "trace_every": 1,
    "export_mm": None,
    "plot": None,
}

_RUN_TYPES = {
    "kernel_shape": str,
    "input_size": int,
    "reg": str,
    "lr": float,
    "iters": int,
    "seed": int,
    "init": str,
    "kernel_file": str,
    "out_trace": str,
    "out_kernel": str,
    "out_summary": str,
    "svd": str,
    "gap_threshold": float,
    "trace_every": int,
    "export_mm": str,
    "plot": str,
}

_CHOICES = {
    "reg": ("frob", "sigma-min", "combined"),
    "init": ("uniform01", "file"),
    "svd": ("dense", "iterative"),
}


def _add_kernel_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kernel-shape", default=None, help="k,k,g,h (default 3,3,1,1)")
    parser.add_argument("--input-size", type=int, default=None, help="spatial side length N (default 20)")
    parser.add_argument("--seed", type=int, default=None, help="seed for uniform01 init (default 1)")
    parser.add_argument("--init", choices=_CHOICES["init"], default=None, help="kernel source (default uniform01)")
    parser.add_argument("--kernel-file", default=None, help="kernel tensor file for --init file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convreg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="gradient descent on a spectral penalty")
    _add_kernel_flags(p_run)
    p_run.add_argument("--reg", choices=_CHOICES["reg"], default=None, help="penalty kind (default frob)")
    p_run.add_argument("--lr", type=float, default=None, help="step size (default 1e-5)")
    p_run.add_argument("--iters", type=int, default=None, help="iteration budget (default 100)")
    p_run.add_argument("--svd", choices=_CHOICES["svd"], default=None, help="sigma_max backend for the trace (default dense)")
    p_run.add_argument("--gap-threshold", type=float, default=None, help="simplicity gate for sigma_min gradients (default 1e-8)")
    p_run.add_argument("--trace-every", type=int, default=None, help="record every this many iterations (default 1)")
    p_run.add_argument("--out-trace", default=None, help="trace CSV path")
    p_run.add_argument("--out-kernel", default=None, help="final kernel tensor file path")
    p_run.add_argument("--out-summary", default=None, help="JSON summary path")
    p_run.add_argument("--export-mm", default=None, help="Matrix Market export of the final matrix")
    p_run.add_argument("--plot", default=None, help="figure path for the sigma trace")
    p_run.add_argument("--config", default=None, help="key = value file with the same keys as the flags")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="run the independent oracle suite")
    p_verify.add_argument("--grid-max-n", type=int, default=8, help="largest N in the grid (default 8)")
    p_verify.add_argument("--trials", type=int, default=20, help="random inputs per grid point (default 20)")
    p_verify.add_argument("--seed", type=int, default=0, help="seed for the oracle suite (default 0)")
    p_verify.set_defaults(func=cmd_verify)

    p_inspect = sub.add_parser("inspect", help="report the structured matrix of a kernel")
    _add_kernel_flags(p_inspect)
    p_inspect.add_argument("--svd", choices=_CHOICES["svd"], default=None, help="sigma_max backend (default dense)")
    p_inspect.add_argument("--gap-threshold", type=float, default=None, help="simplicity threshold for the sigma_min report (default 1e-8)")
    p_inspect.add_argument("--export-mm", default=None, help="Matrix Market export path")
    p_inspect.set_defaults(func=cmd_inspect)

    p_plot = sub.add_parser("plot", help="render a trace CSV to a figure file")
    p_plot.add_argument("--trace", required=True, help="trace CSV path")
    p_plot.add_argument("--out", required=True, help="figure path (extension picks the format)")
    p_plot.add_argument("--title", default=None)
    p_plot.set_defaults(func=cmd_plot)

    return parser


def _load_config(path: str) -> dict[str, str]:
    options: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        options[key.strip().replace("-", "_")] = value.strip()
    return options


def _resolve_run_options(
    args: argparse.Namespace, parser: argparse.ArgumentParser
) -> tuple[dict, set[str]]:
    """Merge flags over config over defaults; also report which keys were set explicitly."""
    config: dict[str, str] = {}
    if args.config:
        try:
            config = _load_config(args.config)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        unknown = set(config) - set(_RUN_DEFAULTS)
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
    resolved = {}
    explicit: set[str] = set()
    for dest, default in _RUN_DEFAULTS.items():
        value = getattr(args, dest, None)
        if value is None and dest in config:
            try:
                value = _RUN_TYPES[dest](config[dest])
            except ValueError:
                parser.error(f"config key {dest.replace('_', '-')}: bad value {config[dest]!r}")
        if value is None:
            value = default
        else:
            explicit.add(dest)
        resolved[dest] = value
    for dest, choices in _CHOICES.items():
        if resolved[dest] not in choices:
            parser.error(f"--{dest}: invalid choice {resolved[dest]!r} (choose from {choices})")
    return resolved, explicit


def _parse_shape(text: str, parser: argparse.ArgumentParser) -> tuple[int, int, int]:
    parts = text.split(",")
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        nums = []
    if len(nums) != 4 or any(n < 1 for n in nums) or nums[0] != nums[1]:
        parser.error(f"--kernel-shape must be k,k,g,h with equal first entries, got {text!r}")
    return nums[0], nums[2], nums[3]


def _make_kernel(opts: dict, parser: argparse.ArgumentParser, shape_explicit: bool):
    if opts["init"] == "file":
        if not opts["kernel_file"]:
            parser.error("--init file requires --kernel-file")
        expect = (None, None, None)
        if shape_explicit:
            expect = _parse_shape(opts["kernel_shape"], parser)
        return init_kernel(*expect, scheme="file", path=opts["kernel_file"])
    k, g, h = _parse_shape(opts["kernel_shape"], parser)
    return init_kernel(k, g, h, seed=opts["seed"], scheme="uniform01")


def cmd_run(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    opts, explicit = _resolve_run_options(args, parser)
    try:
        kernel0 = _make_kernel(opts, parser, "kernel_shape" in explicit)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    dims = kernel0.dims(opts["input_size"])
    cfg = GdConfig(
        kind=PenaltyKind(opts["reg"]),
        lr=opts["lr"],
        max_iters=opts["iters"],
        trace_every=opts["trace_every"],
        seed=opts["seed"],
        gap_threshold=opts["gap_threshold"],
        svd=opts["svd"],
    )
    kernel_final, trace, status = run(kernel0, dims, cfg)

    first, last = trace.first, trace.last
    summary = {
        "initial_sigma_max": first.sigma_max,
        "initial_sigma_min": first.sigma_min,
        "final_sigma_max": last.sigma_max,
        "final_sigma_min": last.sigma_min,
        "initial_penalty": first.penalty,
        "final_penalty": last.penalty,
        "iters": last.iter,
        "status": status.value,
    }
    try:
        if opts["out_trace"]:
            write_trace_csv(trace, opts["out_trace"])
        if opts["out_kernel"]:
            write_kernel(kernel_final, opts["out_kernel"])
        if opts["out_summary"]:
            Path(opts["out_summary"]).write_text(json.dumps(summary, indent=2) + "\n")
        if opts["export_mm"]:
            write_matrix_market(build_multi(kernel_final, dims.N), opts["export_mm"])
        if opts["plot"]:
            from .plots import plot_trace

            plot_trace(trace, opts["plot"], title=f"reg={opts['reg']} N={dims.N}")
    except OSError as exc:
        print(f"error writing {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 1

    print(
        f"run reg={opts['reg']} shape={dims.k},{dims.k},{dims.g},{dims.h} N={dims.N} "
        f"lr={opts['lr']:g} iters={opts['iters']} seed={opts['seed']}"
    )
    print(
        f"  initial: sigma_max={first.sigma_max:.12g} sigma_min={first.sigma_min:.12g} "
        f"penalty={first.penalty:.12g}"
    )
    print(
        f"  final:   sigma_max={last.sigma_max:.12g} sigma_min={last.sigma_min:.12g} "
        f"penalty={last.penalty:.12g} status={status.value}"
    )
    return 0 if status in (RunStatus.CONVERGED, RunStatus.MAX_ITERS) else 1


def cmd_verify(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    results = run_verification(grid_max_n=args.grid_max_n, trials=args.trials, seed=args.seed)
    for result in results:
        print(result.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if not failed else 1


def cmd_inspect(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    opts = {
        "init": args.init or "uniform01",
        "kernel_file": args.kernel_file,
        "kernel_shape": args.kernel_shape if args.kernel_shape is not None else "3,3,1,1",
        "seed": args.seed if args.seed is not None else 1,
    }
    try:
        kernel = _make_kernel(opts, parser, args.kernel_shape is not None)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    n = args.input_size if args.input_size is not None else 20
    dims = kernel.dims(n)
    matrix = build_multi(kernel, n)
    pair_max, pair_min = extreme_singular_pairs(matrix)
    sigma_max = pair_max.sigma
    if (args.svd or "dense") == "iterative":
        sigma_max = sigma_max_iterative(kernel, dims).sigma
    nonzero = int(np.count_nonzero(matrix.vals))
    print(f"matrix: {matrix.n_rows} x {matrix.n_cols}  nnz={nonzero}  stored={matrix.nnz}")
    print(
        f"blocks: {dims.h} x {dims.g} of size {n * n} x {n * n}, "
        f"bandwidth {dims.m - 1} below / {dims.k - dims.m} above (outer and inner)"
    )
    threshold = args.gap_threshold if args.gap_threshold is not None else GAP_THRESHOLD
    simple = simplicity_check(pair_min, threshold=threshold, scale=pair_max.sigma)
    print(f"sigma_max = {sigma_max:.12g}  (gap {pair_max.gap:.6g})")
    print(
        f"sigma_min = {pair_min.sigma:.12g}  (gap {pair_min.gap:.6g}, "
        f"{'simple' if simple else 'degenerate'} at threshold {threshold:g})"
    )
    print(f"frobenius_norm_sq = {frobenius_norm_sq(matrix):.12g}")
    if args.export_mm:
        try:
            write_matrix_market(matrix, args.export_mm)
        except OSError as exc:
            print(f"error writing {exc.filename}: {exc.strerror}", file=sys.stderr)
            return 1
        print(f"wrote {args.export_mm}")
    return 0


def cmd_plot(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    from .plots import plot_trace

    try:
        trace = read_trace_csv(args.trace)
        plot_trace(trace, args.out, title=args.title)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args, parser)


def entry() -> None:
    sys.exit(main())
