"""convreg: steer the singular values of the matrix a convolution kernel induces.

A zero-padded unit-stride convolution with kernel K acts on vectorized
inputs as a structured sparse matrix M.  This package builds M
explicitly, evaluates three penalties on it (half the squared Frobenius
norm, the negated smallest singular value, and their combination) with
exact gradients with respect to the kernel entries, and runs fixed-step
gradient descent to move sigma_max down and/or sigma_min up.  A CLI
(`convreg`) runs experiments, self-verifies against independent
oracles, and renders trace figures.
"""

from .conv import apply_adjoint, apply_operator, conv_multi, conv_single
from .descent import (
    GdConfig,
    GradNormStop,
    RunStatus,
    SigmaBand,
    Trace,
    TraceRecord,
    init_kernel,
    read_trace_csv,
    run,
    write_trace_csv,
)
from .penalties import (
    PenaltyKind,
    combined_gradient,
    combined_scale,
    frob_gradient,
    frob_penalty,
    penalty_value,
    sigma_min_gradient,
)
from .spectral import (
    DegenerateSpectrumError,
    SpectralError,
    SpectralPair,
    extreme_singular_pairs,
    sigma_max_iterative,
    simplicity_check,
)
from .structured import (
    OmegaIndexSet,
    StructuredMatrix,
    build_multi,
    build_single,
    frobenius_norm_sq,
    omega,
    omega_count,
    omega_count_grid,
    write_matrix_market,
)
from .tensors import (
    InputTensor,
    KernelTensor,
    OutputTensor,
    ProblemDims,
    identity_kernel,
    read_input,
    read_kernel,
    unvec_input,
    unvec_output,
    vec_input,
    vec_output,
    write_input,
    write_kernel,
)
from .validate import fd_gradient, matvec_equivalence_report, omega_scan, run_verification

__version__ = "0.1.0"
