"""Independent oracles: finite differences, one-hot index scanning, path cross-checks.

Everything here deliberately avoids the code paths it is checking.
fd_gradient recomputes penalties through whatever callable it is given;
omega_scan derives index sets by building a one-hot matrix and scanning
its nonzeros instead of doing offset arithmetic; the matvec report pits
the matrix-free operator against the explicit sparse matrix.  These
oracles back both the test suite and the `convreg verify` subcommand,
which makes the repository self-auditing in CI.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import conv, penalties, spectral, structured
from .structured import OmegaIndexSet
from .tensors import KernelTensor, ProblemDims

__all__ = [
    "fd_gradient",
    "omega_scan",
    "MatvecReport",
    "matvec_equivalence_report",
    "CheckResult",
    "run_verification",
    "DEFAULT_GRID",
]

#: k values, channel counts, and N range exercised by the built-in verification grid
DEFAULT_GRID = {"ks": (1, 3, 5), "channels": (1, 2, 3), "n_lo": 3, "n_hi": 8}


def fd_gradient(
    penalty: Callable[[KernelTensor], float], kernel: KernelTensor, eps: float = 1e-6
) -> np.ndarray:
    """Central differences (penalty(K + eps*e) - penalty(K - eps*e)) / (2 eps) per entry."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = kernel.values
    grad = np.zeros(base.shape)
    for idx in np.ndindex(base.shape):
        up = base.copy()
        up[idx] += eps
        down = base.copy()
        down[idx] -= eps
        grad[idx] = (penalty(KernelTensor(up)) - penalty(KernelTensor(down))) / (2.0 * eps)
    return grad


def omega_scan(dims: ProblemDims, p: int, q: int, z: int, y: int) -> OmegaIndexSet:
    """Index set by brute force: build the one-hot matrix, return its nonzero positions."""
    hot = np.zeros((dims.k, dims.k, dims.g, dims.h))
    hot[p - 1, q - 1, z - 1, y - 1] = 1.0
    matrix = structured.build_multi(KernelTensor(hot), dims.N)
    keep = matrix.vals != 0.0
    positions = np.stack([matrix.rows[keep], matrix.cols[keep]], axis=1)
    return OmegaIndexSet(p, q, z, y, positions)


@dataclass
class MatvecReport:
    trials: int
    max_rel_discrepancy: float
    passed: bool


def matvec_equivalence_report(
    kernel: KernelTensor, dims: ProblemDims, trials: int = 20, seed: int = 0, tol: float = 1e-12
) -> MatvecReport:
    """Worst relative gap between explicit matvec and matrix-free convolution."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    matrix = structured.build_multi(kernel, dims.N)
    worst = 0.0
    for _ in range(trials):
        v = rng.standard_normal(dims.n_in)
        via_conv = conv.apply_operator(kernel, v)
        via_matrix = matrix.matvec(v)
        scale = np.linalg.norm(via_conv)
        gap = np.linalg.norm(via_matrix - via_conv)
        worst = max(worst, gap / scale if scale > 0 else gap)
    return MatvecReport(trials, worst, worst <= tol)


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{tag}  {self.name}  worst={self.worst:.3e}{extra}"


def _grid(n_hi: int):
    for k in DEFAULT_GRID["ks"]:
        for n in range(DEFAULT_GRID["n_lo"], n_hi + 1):
            for g in DEFAULT_GRID["channels"]:
                for h in DEFAULT_GRID["channels"]:
                    yield k, n, g, h


def run_verification(grid_max_n: int = 8, trials: int = 20, seed: int = 0) -> list[CheckResult]:
    """Run the oracle suite over the built-in grid; one result per check."""
    rng = np.random.default_rng(seed)
    results: list[CheckResult] = []

    worst_matvec = 0.0
    worst_adjoint = 0.0
    for k, n, g, h in _grid(grid_max_n):
        kernel = KernelTensor(rng.uniform(-1.0, 1.0, (k, k, g, h)))
        dims = kernel.dims(n)
        report = matvec_equivalence_report(
            kernel, dims, trials=trials, seed=int(rng.integers(2**31))
        )
        worst_matvec = max(worst_matvec, report.max_rel_discrepancy)
        for _ in range(3):
            v = rng.standard_normal(dims.n_in)
            w = rng.standard_normal(dims.n_out)
            forward = float(conv.apply_operator(kernel, v) @ w)
            backward = float(v @ conv.apply_adjoint(kernel, w))
            scale = max(
                np.linalg.norm(conv.apply_operator(kernel, v)) * np.linalg.norm(w), 1e-300
            )
            worst_adjoint = max(worst_adjoint, abs(forward - backward) / scale)
    results.append(CheckResult("matvec-equivalence", worst_matvec <= 1e-12, worst_matvec))
    results.append(CheckResult("adjoint-identity", worst_adjoint <= 1e-12, worst_adjoint))

    omega_mismatches = 0
    cardinality_mismatches = 0
    checked = 0
    for k, n, g, h in _grid(grid_max_n):
        dims = ProblemDims(n, k, g, h)
        for p in range(1, k + 1):
            for q in range(1, k + 1):
                for z in range(1, g + 1):
                    for y in range(1, h + 1):
                        analytic = structured.omega(dims, p, q, z, y)
                        scanned = omega_scan(dims, p, q, z, y)
                        checked += 1
                        if analytic.as_set() != scanned.as_set():
                            omega_mismatches += 1
                        if scanned.count != structured.omega_count(dims, p, q):
                            cardinality_mismatches += 1
    results.append(
        CheckResult(
            "omega-analytic-vs-scan",
            omega_mismatches == 0,
            float(omega_mismatches),
            f"{checked} index sets",
        )
    )
    results.append(
        CheckResult(
            "omega-cardinality-formula",
            cardinality_mismatches == 0,
            float(cardinality_mismatches),
        )
    )

    worst_frob = 0.0
    for k, n, g, h in ((3, 5, 1, 1), (3, 4, 2, 2), (5, 6, 1, 2)):
        kernel = KernelTensor(rng.uniform(-1.0, 1.0, (k, k, g, h)))
        dims = kernel.dims(n)
        closed = penalties.frob_penalty(kernel, dims)
        explicit = 0.5 * structured.frobenius_norm_sq(structured.build_multi(kernel, n))
        worst_frob = max(worst_frob, abs(closed - explicit) / max(explicit, 1e-300))
    results.append(CheckResult("frobenius-closed-form", worst_frob <= 1e-12, worst_frob))

    worst_frob_fd = 0.0
    for k, n, g, h in ((3, 5, 1, 1), (3, 4, 2, 2)):
        kernel = KernelTensor(rng.uniform(0.1, 1.0, (k, k, g, h)))
        dims = kernel.dims(n)
        analytic = penalties.frob_gradient(kernel, dims)
        numeric = fd_gradient(lambda kk: penalties.frob_penalty(kk, dims), kernel)
        err = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-9)
        worst_frob_fd = max(worst_frob_fd, float(err.max()))
    results.append(CheckResult("frobenius-gradient-fd", worst_frob_fd <= 1e-7, worst_frob_fd))

    worst_sigma_fd = 0.0
    accepted = 0
    attempts = 0
    while accepted < 2 and attempts < 20:
        attempts += 1
        kernel = KernelTensor(rng.uniform(0.1, 1.0, (3, 3, 1, 1)))
        dims = kernel.dims(5)
        matrix = structured.build_multi(kernel, dims.N)
        pair_max, pair_min = spectral.extreme_singular_pairs(matrix)
        if pair_min.gap < 1e-3 or pair_min.sigma < 1e-3:
            continue
        accepted += 1
        analytic = penalties.sigma_min_gradient(kernel, dims, pair_min, scale=pair_max.sigma)
        numeric = fd_gradient(
            lambda kk: penalties.penalty_value(kk, dims, penalties.PenaltyKind.NEG_SIGMA_MIN),
            kernel,
        )
        err = np.abs(-analytic - numeric) / np.maximum(np.abs(numeric), 1e-9)
        worst_sigma_fd = max(worst_sigma_fd, float(err.max()))
    results.append(
        CheckResult(
            "sigma-min-gradient-fd",
            accepted >= 1 and worst_sigma_fd <= 1e-5,
            worst_sigma_fd,
            f"{accepted} kernels",
        )
    )
    return results
