"""Fixed-step gradient descent on a spectral penalty, with per-iteration tracing.

Each iteration rebuilds the structured matrix and takes a fresh dense
SVD; at desk scale that is the whole cost of a run and it avoids any
staleness questions about warm-started spectral estimates.  The step
size is fixed (no line search).  For the Frobenius penalty the descent
map is the entrywise contraction K <- (1 - lr*count) * K, so any
lr <= 1/(2*max(count)) = 1/(2*N^2) guarantees a monotone penalty.

A run stops on its stopping rule ("converged"), on the iteration budget
("max-iters"), or when a sigma_min-dependent gradient is refused at a
degenerate spectrum ("degenerate-sigma").  The degenerate case records
one terminal trace row whose grad_norm is NaN, because no gradient
exists there and fabricating a number would be worse; every other
recorded value is finite.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .penalties import (
    PenaltyKind,
    combined_gradient,
    combined_scale,
    frob_gradient,
    frob_penalty,
    sigma_min_gradient,
)
from .spectral import (
    GAP_THRESHOLD,
    DegenerateSpectrumError,
    sigma_max_iterative,
    extreme_singular_pairs,
)
from .structured import build_multi
from .tensors import KernelTensor, ProblemDims, read_kernel

__all__ = [
    "SigmaBand",
    "GradNormStop",
    "GdConfig",
    "RunStatus",
    "TraceRecord",
    "Trace",
    "TRACE_HEADER",
    "run",
    "init_kernel",
    "write_trace_csv",
    "read_trace_csv",
]


@dataclass(frozen=True)
class SigmaBand:
    """Stop once sigma_max <= hi and sigma_min >= lo."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"sigma band needs lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class GradNormStop:
    """Stop once the gradient's Frobenius norm falls to the threshold."""

    threshold: float

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError("grad-norm threshold must be positive")


@dataclass(frozen=True)
class GdConfig:
    """Configuration of one descent run.

    seed is bookkeeping for the kernel initialization (the run itself is
    deterministic); svd selects where the traced sigma_max comes from
    ("dense" or the certified matrix-free "iterative" path; sigma_min
    always comes from the dense spectrum).
    """

    kind: PenaltyKind
    lr: float
    max_iters: int
    stop: SigmaBand | GradNormStop | None = None
    trace_every: int = 1
    seed: int = 1
    gap_threshold: float = GAP_THRESHOLD
    svd: str = "dense"

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")
        if self.svd not in ("dense", "iterative"):
            raise ValueError(f"svd must be 'dense' or 'iterative', got {self.svd!r}")


class RunStatus(Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max-iters"
    DEGENERATE_SIGMA = "degenerate-sigma"


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    penalty: float
    sigma_max: float
    sigma_min: float
    grad_norm: float
    wall_ms: float


class Trace:
    """Recorded iterations of one run, in strictly increasing iter order."""

    def __init__(self, records: list[TraceRecord]):
        self.records = list(records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def first(self) -> TraceRecord:
        return self.records[0]

    @property
    def last(self) -> TraceRecord:
        return self.records[-1]


TRACE_HEADER = "iter,penalty,sigma_max,sigma_min,grad_norm,wall_ms"


def write_trace_csv(trace: Trace, path) -> None:
    """One row per recorded iteration, 17 significant digits."""
    lines = [TRACE_HEADER]
    for r in trace.records:
        lines.append(
            f"{r.iter},{r.penalty:.17g},{r.sigma_max:.17g},{r.sigma_min:.17g},"
            f"{r.grad_norm:.17g},{r.wall_ms:.17g}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path) -> Trace:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError(f"trace file {path}: missing header {TRACE_HEADER!r}")
    records = []
    for line in lines[1:]:
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 6:
            raise ValueError(f"trace file {path}: bad row {line!r}")
        records.append(
            TraceRecord(
                int(fields[0]),
                *(float(f) for f in fields[1:]),
            )
        )
    return Trace(records)


def init_kernel(
    k: int | None,
    g: int | None,
    h: int | None,
    seed: int = 1,
    scheme: str = "uniform01",
    path=None,
) -> KernelTensor:
    """Seeded uniform [0, 1) kernel, or a kernel loaded from a tensor file.

    With scheme "file" the shape arguments act as an optional expectation
    check against the file header (pass None to skip).
    """
    if scheme == "uniform01":
        if k is None or g is None or h is None:
            raise ValueError("uniform01 init needs explicit k, g, h")
        rng = np.random.default_rng(seed)
        return KernelTensor(rng.random((k, k, g, h)))
    if scheme == "file":
        if path is None:
            raise ValueError("file init needs a kernel file path")
        kernel = read_kernel(path)
        for want, got, name in ((k, kernel.k, "k"), (g, kernel.g, "g"), (h, kernel.h, "h")):
            if want is not None and want != got:
                raise ValueError(f"kernel file has {name}={got}, expected {want}")
        return kernel
    raise ValueError(f"unknown init scheme: {scheme!r}")


def _penalty_from_parts(kind: PenaltyKind, frob: float, sigma_min: float, scale_n: int) -> float:
    if kind is PenaltyKind.FROBENIUS:
        return frob
    if kind is PenaltyKind.NEG_SIGMA_MIN:
        return -sigma_min
    return frob - scale_n * sigma_min


def run(
    kernel0: KernelTensor, dims: ProblemDims, cfg: GdConfig
) -> tuple[KernelTensor, Trace, RunStatus]:
    """Iterate K <- K - lr * grad and trace (penalty, sigma_max, sigma_min, grad norm).

    Rows are recorded every cfg.trace_every iterations plus the first and
    final state.  Iteration t's row describes the kernel before update
    t+1, so the final row (iter == max_iters on a full run) is the
    returned kernel.
    """
    t_start = time.perf_counter()
    kernel = kernel0
    scale_n = combined_scale(dims)
    needs_sigma = cfg.kind is not PenaltyKind.FROBENIUS
    records: list[TraceRecord] = []
    status = RunStatus.MAX_ITERS

    for it in range(cfg.max_iters + 1):
        matrix = build_multi(kernel, dims.N)
        pair_max, pair_min = extreme_singular_pairs(matrix)
        sigma_max_traced = pair_max.sigma
        if cfg.svd == "iterative":
            sigma_max_traced = sigma_max_iterative(kernel, dims).sigma
        penalty = _penalty_from_parts(cfg.kind, frob_penalty(kernel, dims), pair_min.sigma, scale_n)
        wall_ms = (time.perf_counter() - t_start) * 1e3

        if needs_sigma:
            try:
                if cfg.kind is PenaltyKind.NEG_SIGMA_MIN:
                    grad = -sigma_min_gradient(
                        kernel, dims, pair_min, cfg.gap_threshold, scale=pair_max.sigma
                    )
                else:
                    grad = combined_gradient(
                        kernel, dims, pair_min, cfg.gap_threshold, scale=pair_max.sigma
                    )
            except DegenerateSpectrumError:
                records.append(
                    TraceRecord(
                        it, penalty, sigma_max_traced, pair_min.sigma, float("nan"), wall_ms
                    )
                )
                status = RunStatus.DEGENERATE_SIGMA
                break
        else:
            grad = frob_gradient(kernel, dims)

        grad_norm = float(np.sqrt(np.sum(grad * grad)))
        record = TraceRecord(it, penalty, sigma_max_traced, pair_min.sigma, grad_norm, wall_ms)
        if it % cfg.trace_every == 0 or it == cfg.max_iters:
            records.append(record)
        if it == cfg.max_iters:
            break

        stop = cfg.stop
        stopped = False
        if isinstance(stop, SigmaBand):
            stopped = sigma_max_traced <= stop.hi and pair_min.sigma >= stop.lo
        elif isinstance(stop, GradNormStop):
            stopped = grad_norm <= stop.threshold
        if stopped:
            if not records or records[-1].iter != it:
                records.append(record)
            status = RunStatus.CONVERGED
            break

        kernel = KernelTensor(kernel.values - cfg.lr * grad)

    return kernel, Trace(records), status
