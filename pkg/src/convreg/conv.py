"""Matrix-free zero-padded same convolution and its adjoint.

Semantics: unit stride, no kernel flip (cross-correlation, as in deep
learning), output spatial size equal to the input's, out-of-range input
taps treated as zero.  Out-of-range taps are skipped by clipping the
accumulation windows rather than materializing a padded tensor, and the
accumulation order is fixed (input channel outer, then filter column,
then filter row) so results are bit-reproducible on a platform.

These functions are the reference semantics for the explicit structured
matrix and double as the fast operator for iterative spectral methods.
"""

from __future__ import annotations

import math

import numpy as np

from .tensors import (
    InputTensor,
    KernelTensor,
    OutputTensor,
    ceil_half,
    overlap_range,
)

__all__ = ["conv_single", "conv_multi", "apply_operator", "apply_adjoint"]


def _forward(kvals: np.ndarray, xvals: np.ndarray) -> np.ndarray:
    """Y[r,s,c] = sum_{d,p,q} X[r-m+p, s-m+q, d] * K[p,q,d,c], zero outside."""
    k = kvals.shape[0]
    g, h = kvals.shape[2], kvals.shape[3]
    n = xvals.shape[0]
    m = ceil_half(k)
    out = np.zeros((n, n, h))
    for d in range(g):
        for q in range(k):
            b = q + 1 - m
            s_lo, s_hi = overlap_range(n, b)
            if s_lo > s_hi:
                continue
            for p in range(k):
                a = p + 1 - m
                r_lo, r_hi = overlap_range(n, a)
                if r_lo > r_hi:
                    continue
                window = xvals[r_lo - 1 + a : r_hi + a, s_lo - 1 + b : s_hi + b, d]
                out[r_lo - 1 : r_hi, s_lo - 1 : s_hi, :] += window[:, :, None] * kvals[p, q, d, :]
    return out


def _adjoint(kvals: np.ndarray, wvals: np.ndarray) -> np.ndarray:
    """Transpose action: Z[i,j,d] = sum_{c,p,q} W[i-p+m, j-q+m, c] * K[p,q,d,c]."""
    k = kvals.shape[0]
    g, h = kvals.shape[2], kvals.shape[3]
    n = wvals.shape[0]
    m = ceil_half(k)
    out = np.zeros((n, n, g))
    for c in range(h):
        for q in range(k):
            b = q + 1 - m
            j_lo, j_hi = overlap_range(n, -b)
            if j_lo > j_hi:
                continue
            for p in range(k):
                a = p + 1 - m
                i_lo, i_hi = overlap_range(n, -a)
                if i_lo > i_hi:
                    continue
                window = wvals[i_lo - 1 - a : i_hi - a, j_lo - 1 - b : j_hi - b, c]
                out[i_lo - 1 : i_hi, j_lo - 1 : j_hi, :] += window[:, :, None] * kvals[p, q, :, c]
    return out


def conv_multi(kernel: KernelTensor, x: InputTensor) -> OutputTensor:
    """Multi-channel same convolution; output is N x N x h."""
    if x.g != kernel.g:
        raise ValueError(f"input has {x.g} channels but kernel expects {kernel.g}")
    return OutputTensor(_forward(kernel.values, x.values))


def conv_single(kernel: KernelTensor, x: InputTensor) -> OutputTensor:
    """Single-channel same convolution (g = h = 1)."""
    if kernel.g != 1 or kernel.h != 1:
        raise ValueError(f"conv_single needs g = h = 1, got g={kernel.g}, h={kernel.h}")
    return conv_multi(kernel, x)


def _infer_side(size: int, channels: int, what: str) -> int:
    if size % channels:
        raise ValueError(f"{what} length {size} is not a multiple of {channels} channels")
    n = math.isqrt(size // channels)
    if n * n * channels != size:
        raise ValueError(f"{what} length {size} is not {channels} * N^2 for integer N")
    return n


def apply_operator(kernel: KernelTensor, v: np.ndarray) -> np.ndarray:
    """Matrix-free action of the structured matrix: v of length g*N^2 -> h*N^2."""
    v = np.asarray(v, dtype=float).reshape(-1)
    n = _infer_side(v.size, kernel.g, "operator input")
    x = v.reshape((n, n, kernel.g), order="F")
    return _forward(kernel.values, x).reshape(-1, order="F")


def apply_adjoint(kernel: KernelTensor, w: np.ndarray) -> np.ndarray:
    """Matrix-free transpose action: w of length h*N^2 -> g*N^2."""
    w = np.asarray(w, dtype=float).reshape(-1)
    n = _infer_side(w.size, kernel.h, "adjoint input")
    y = w.reshape((n, n, kernel.h), order="F")
    return _adjoint(kernel.values, y).reshape(-1, order="F")
