"""Penalty functions on the structured matrix and their exact kernel gradients.

Three penalties are supported: half the squared Frobenius norm (pulls
every singular value down), the negated smallest singular value (pushes
sigma_min up under descent), and their combination
0.5*||M||_F^2 - min(g,h)*N^2*sigma_min(M) (pushes the spectrum toward a
common moderate scale).

Gradients never differentiate through the matrix build.  Each kernel
entry (p, q, z, y) occupies a known index set of positions in the
matrix, so the chain rule collapses to sums over that set:

  * Frobenius:  d(0.5*||M||_F^2)/dK[p,q,z,y] = count * K[p,q,z,y],
    where count is the index-set cardinality (every occupied position
    holds the same value).
  * sigma_min:  d(sigma_min)/dK[p,q,z,y] = sum over the index set of
    u(row) * v(col), valid only while sigma_min is simple and positive
    (u, v the normalized singular vectors).  The result is invariant
    under the (u, v) -> (-u, -v) sign ambiguity.

The Frobenius penalty and gradient therefore run in O(k^2 g h) without
building the matrix; the explicit-matrix route exists only in tests.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .spectral import (
    GAP_THRESHOLD,
    DegenerateSpectrumError,
    SpectralPair,
    extreme_singular_pairs,
    simplicity_check,
)
from .structured import build_multi, omega_count_grid
from .tensors import KernelTensor, ProblemDims, overlap_range

__all__ = [
    "PenaltyKind",
    "combined_scale",
    "frob_penalty",
    "frob_gradient",
    "sigma_min_gradient",
    "combined_gradient",
    "penalty_value",
]


class PenaltyKind(Enum):
    """Which penalty a descent run minimizes; values match the CLI --reg flag."""

    FROBENIUS = "frob"
    NEG_SIGMA_MIN = "sigma-min"
    COMBINED = "combined"


def combined_scale(dims: ProblemDims) -> int:
    """Weight min(g, h) * N^2 on the sigma_min term of the combined penalty."""
    return min(dims.g, dims.h) * dims.N * dims.N


def frob_penalty(kernel: KernelTensor, dims: ProblemDims) -> float:
    """0.5 * ||M||_F^2 via index-set cardinalities; no matrix is built."""
    counts = omega_count_grid(dims)
    return 0.5 * float(np.einsum("pq,pqzy->", counts.astype(float), kernel.values**2))


def frob_gradient(kernel: KernelTensor, dims: ProblemDims) -> np.ndarray:
    """Gradient of frob_penalty: entrywise cardinality * kernel value (exact)."""
    counts = omega_count_grid(dims)
    return counts[:, :, None, None] * kernel.values


def sigma_min_gradient(
    kernel: KernelTensor,
    dims: ProblemDims,
    pair: SpectralPair,
    gap_threshold: float = GAP_THRESHOLD,
    scale: float | None = None,
) -> np.ndarray:
    """Gradient of sigma_min(M) with respect to every kernel entry.

    pair must be the smallest singular pair of the matrix built from
    kernel at these dims; the caller controls when that SVD runs.  scale
    should be sigma_max of the same matrix so the simplicity gate is
    relative to the spectrum's size.  Refuses (DegenerateSpectrumError)
    when the singular value is not simple and positive, since the
    perturbation formula does not hold there.
    """
    if not simplicity_check(pair, gap_threshold, scale):
        raise DegenerateSpectrumError(
            f"sigma_min={pair.sigma:.6e} with gap={pair.gap:.6e} is not certifiably "
            f"simple and positive (threshold {gap_threshold:g}); gradient refused"
        )
    n = dims.N
    u3 = pair.u.reshape((n, n, dims.h), order="F")
    v3 = pair.v.reshape((n, n, dims.g), order="F")
    grad = np.zeros((dims.k, dims.k, dims.g, dims.h))
    for y0 in range(dims.h):
        u_block = u3[:, :, y0]
        for z0 in range(dims.g):
            v_block = v3[:, :, z0]
            for q0 in range(dims.k):
                b = q0 + 1 - dims.m
                s_lo, s_hi = overlap_range(n, b)
                if s_lo > s_hi:
                    continue
                for p0 in range(dims.k):
                    a = p0 + 1 - dims.m
                    r_lo, r_hi = overlap_range(n, a)
                    if r_lo > r_hi:
                        continue
                    u_win = u_block[r_lo - 1 : r_hi, s_lo - 1 : s_hi]
                    v_win = v_block[r_lo - 1 + a : r_hi + a, s_lo - 1 + b : s_hi + b]
                    grad[p0, q0, z0, y0] = float(np.sum(u_win * v_win))
    return grad


def combined_gradient(
    kernel: KernelTensor,
    dims: ProblemDims,
    pair: SpectralPair,
    gap_threshold: float = GAP_THRESHOLD,
    scale: float | None = None,
) -> np.ndarray:
    """Gradient of 0.5*||M||_F^2 - min(g,h)*N^2*sigma_min(M)."""
    sigma_part = sigma_min_gradient(kernel, dims, pair, gap_threshold, scale)
    return frob_gradient(kernel, dims) - combined_scale(dims) * sigma_part


def penalty_value(kernel: KernelTensor, dims: ProblemDims, kind: PenaltyKind) -> float:
    """Scalar penalty of the selected kind; spectral failures propagate."""
    if kind is PenaltyKind.FROBENIUS:
        return frob_penalty(kernel, dims)
    matrix = build_multi(kernel, dims.N)
    _, pair_min = extreme_singular_pairs(matrix)
    if kind is PenaltyKind.NEG_SIGMA_MIN:
        return -pair_min.sigma
    if kind is PenaltyKind.COMBINED:
        return frob_penalty(kernel, dims) - combined_scale(dims) * pair_min.sigma
    raise ValueError(f"unknown penalty kind: {kind!r}")
