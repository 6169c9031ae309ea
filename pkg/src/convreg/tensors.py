"""Tensor containers, index conventions, and vectorization maps.

Index contract
--------------
All public indices are 1-based: a kernel entry is addressed as
(p, q, z, y) with filter row p, filter column q, input channel z and
output channel y; input entries are (i, j, d) and output entries
(r, s, c).  Storage is plain 0-based numpy, so ``K.values[p-1, q-1,
z-1, y-1]`` holds the entry the contract calls (p, q, z, y).

Vectorization stacks columns first: position (d-1)*N^2 + (j-1)*N + i of
``vec_input(X)`` holds X_{i,j,d}.  Every row/column/block convention in
the rest of the package derives from this one choice, so it must never
change independently of the structured-matrix builder.

All containers are immutable after construction (the wrapped arrays are
marked read-only) and all functions here are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "KernelTensor",
    "InputTensor",
    "OutputTensor",
    "ProblemDims",
    "ceil_half",
    "overlap_range",
    "vec_input",
    "vec_output",
    "unvec_input",
    "unvec_output",
    "identity_kernel",
    "read_kernel",
    "write_kernel",
    "read_input",
    "write_input",
]


def ceil_half(k: int) -> int:
    """Smallest integer >= k/2 (the filter center offset m)."""
    return -(-k // 2)


def overlap_range(n: int, offset: int) -> tuple[int, int]:
    """1-based inclusive range of r with both r and r+offset inside [1, n].

    Returns (lo, hi); the range is empty when lo > hi.
    """
    return max(1, 1 - offset), min(n, n - offset)


def _as_readonly_float(values, ndim: int, what: str) -> np.ndarray:
    v = np.array(values, dtype=float)
    if v.ndim != ndim:
        raise ValueError(f"{what} must be a {ndim}-d array, got {v.ndim}-d")
    if not np.isfinite(v).all():
        raise ValueError(f"{what} entries must be finite")
    v.flags.writeable = False
    return v


def _check_positive_int(value, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return int(value)


@dataclass(frozen=True)
class ProblemDims:
    """Dimensions of a kernel/input pairing.

    N is the spatial side length of the input, k the filter side length,
    g/h the input/output channel counts.  m = ceil(k/2) is the filter
    center offset used by the zero-padded convolution formula.
    """

    N: int
    k: int
    g: int
    h: int

    def __post_init__(self):
        for name in ("N", "k", "g", "h"):
            object.__setattr__(self, name, _check_positive_int(getattr(self, name), name))

    @property
    def m(self) -> int:
        return ceil_half(self.k)

    @property
    def n_in(self) -> int:
        return self.g * self.N * self.N

    @property
    def n_out(self) -> int:
        return self.h * self.N * self.N


@dataclass(frozen=True)
class KernelTensor:
    """Convolution kernel of shape (k, k, g, h)."""

    values: np.ndarray

    def __post_init__(self):
        v = _as_readonly_float(self.values, 4, "kernel")
        if v.shape[0] != v.shape[1]:
            raise ValueError(f"kernel must be square in its filter axes, got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def g(self) -> int:
        return self.values.shape[2]

    @property
    def h(self) -> int:
        return self.values.shape[3]

    def dims(self, N: int) -> ProblemDims:
        return ProblemDims(N, self.k, self.g, self.h)


@dataclass(frozen=True)
class InputTensor:
    """Input of shape (N, N, g); values[i-1, j-1, d-1] is entry (i, j, d)."""

    values: np.ndarray

    def __post_init__(self):
        v = _as_readonly_float(self.values, 3, "input")
        if v.shape[0] != v.shape[1]:
            raise ValueError(f"input must be square in its spatial axes, got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def g(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class OutputTensor:
    """Output of shape (N, N, h); values[r-1, s-1, c-1] is entry (r, s, c)."""

    values: np.ndarray

    def __post_init__(self):
        v = _as_readonly_float(self.values, 3, "output")
        if v.shape[0] != v.shape[1]:
            raise ValueError(f"output must be square in its spatial axes, got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> int:
        return self.values.shape[2]


def vec_input(x: InputTensor) -> np.ndarray:
    """Column-stack x into a vector of length g*N^2.

    Entry (d-1)*N^2 + (j-1)*N + i (1-based) equals X_{i,j,d}: i varies
    fastest, then j, with channel slabs concatenated in order d = 1..g.
    """
    return x.values.flatten(order="F")


def vec_output(y: OutputTensor) -> np.ndarray:
    """Same stacking as vec_input, with channel index c = 1..h."""
    return y.values.flatten(order="F")


def unvec_input(v: np.ndarray, dims: ProblemDims) -> InputTensor:
    """Inverse of vec_input; exact (a pure reshape, no arithmetic)."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != dims.n_in:
        raise ValueError(f"expected vector of length {dims.n_in}, got {v.size}")
    return InputTensor(v.reshape((dims.N, dims.N, dims.g), order="F"))


def unvec_output(w: np.ndarray, dims: ProblemDims) -> OutputTensor:
    """Inverse of vec_output."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != dims.n_out:
        raise ValueError(f"expected vector of length {dims.n_out}, got {w.size}")
    return OutputTensor(w.reshape((dims.N, dims.N, dims.h), order="F"))


def identity_kernel(k: int = 3) -> KernelTensor:
    """Single-channel kernel with a 1 at the center (m, m): convolution acts as identity."""
    m = ceil_half(k)
    vals = np.zeros((k, k, 1, 1))
    vals[m - 1, m - 1, 0, 0] = 1.0
    return KernelTensor(vals)


# --- text file format -------------------------------------------------------
#
# Kernels:  line 1 "k k g h", then whitespace-separated decimal values with
# p varying fastest, then q, then z, then y.  Inputs: line 1 "N N g", values
# with i fastest, then j, then d.  Written with 17 significant digits so
# float64 round-trips exactly and golden files stay diffable.


def write_kernel(kernel: KernelTensor, path) -> None:
    vals = kernel.values.flatten(order="F")
    with open(path, "w") as f:
        f.write(f"{kernel.k} {kernel.k} {kernel.g} {kernel.h}\n")
        f.write("\n".join(f"{v:.17g}" for v in vals))
        f.write("\n")


def read_kernel(path) -> KernelTensor:
    with open(path) as f:
        header = f.readline().split()
        body = f.read().split()
    if len(header) != 4:
        raise ValueError(f"kernel file {path}: header must be 'k k g h', got {header}")
    k1, k2, g, h = (int(t) for t in header)
    if k1 != k2:
        raise ValueError(f"kernel file {path}: filter axes differ ({k1} vs {k2})")
    expected = k1 * k2 * g * h
    if len(body) != expected:
        raise ValueError(f"kernel file {path}: expected {expected} values, got {len(body)}")
    vals = np.array([float(t) for t in body]).reshape((k1, k2, g, h), order="F")
    return KernelTensor(vals)


def write_input(x: InputTensor, path) -> None:
    vals = x.values.flatten(order="F")
    with open(path, "w") as f:
        f.write(f"{x.N} {x.N} {x.g}\n")
        f.write("\n".join(f"{v:.17g}" for v in vals))
        f.write("\n")


def read_input(path) -> InputTensor:
    with open(path) as f:
        header = f.readline().split()
        body = f.read().split()
    if len(header) != 3:
        raise ValueError(f"input file {path}: header must be 'N N g', got {header}")
    n1, n2, g = (int(t) for t in header)
    if n1 != n2:
        raise ValueError(f"input file {path}: spatial axes differ ({n1} vs {n2})")
    expected = n1 * n2 * g
    if len(body) != expected:
        raise ValueError(f"input file {path}: expected {expected} values, got {len(body)}")
    vals = np.array([float(t) for t in body]).reshape((n1, n2, g), order="F")
    return InputTensor(vals)
