import math

import numpy as np
import pytest

from convreg import (
    GdConfig,
    GradNormStop,
    KernelTensor,
    PenaltyKind,
    RunStatus,
    SigmaBand,
    Trace,
    TraceRecord,
    build_multi,
    combined_gradient,
    extreme_singular_pairs,
    frob_penalty,
    identity_kernel,
    init_kernel,
    read_trace_csv,
    run,
    write_trace_csv,
)
from convreg.structured import omega_count_grid

from conftest import random_kernel


def test_config_validation():
    with pytest.raises(ValueError):
        GdConfig(kind=PenaltyKind.FROBENIUS, lr=0.0, max_iters=10)
    with pytest.raises(ValueError):
        GdConfig(kind=PenaltyKind.FROBENIUS, lr=1e-5, max_iters=0)
    with pytest.raises(ValueError):
        GdConfig(kind=PenaltyKind.FROBENIUS, lr=1e-5, max_iters=5, trace_every=0)
    with pytest.raises(ValueError):
        GdConfig(kind=PenaltyKind.FROBENIUS, lr=1e-5, max_iters=5, svd="magic")
    with pytest.raises(ValueError):
        SigmaBand(lo=2.0, hi=1.0)
    with pytest.raises(ValueError):
        GradNormStop(threshold=0.0)


def test_one_step_from_identity_center_is_exact():
    kernel = identity_kernel(3)
    cfg = GdConfig(kind=PenaltyKind.FROBENIUS, lr=1e-5, max_iters=1)
    final, trace, status = run(kernel, kernel.dims(20), cfg)
    assert status is RunStatus.MAX_ITERS
    assert abs(final.values[1, 1, 0, 0] - 0.996) <= 1e-15
    others = final.values.copy()
    others[1, 1, 0, 0] = 0.0
    assert np.all(others == 0.0)


def test_zero_kernel_is_fixed_point():
    kernel = KernelTensor(np.zeros((3, 3, 1, 1)))
    cfg = GdConfig(kind=PenaltyKind.FROBENIUS, lr=1e-3, max_iters=5)
    final, trace, status = run(kernel, kernel.dims(4), cfg)
    assert np.all(final.values == 0.0)
    assert all(r.penalty == 0.0 for r in trace)


def test_run_is_deterministic(rng):
    kernel = random_kernel(rng, 3, 2, 1)
    dims = kernel.dims(5)
    cfg = GdConfig(kind=PenaltyKind.COMBINED, lr=1e-4, max_iters=20)
    final_a, trace_a, _ = run(kernel, dims, cfg)
    final_b, trace_b, _ = run(kernel, dims, cfg)
    assert np.array_equal(final_a.values, final_b.values)
    for ra, rb in zip(trace_a, trace_b):
        assert (ra.iter, ra.penalty, ra.sigma_max, ra.sigma_min, ra.grad_norm) == (
            rb.iter,
            rb.penalty,
            rb.sigma_max,
            rb.sigma_min,
            rb.grad_norm,
        )


def test_frobenius_descent_monotone_within_step_bound(rng):
    kernel = random_kernel(rng, 3, 2, 2)
    dims = kernel.dims(6)
    lr = 0.9 / (2.0 * float(omega_count_grid(dims).max()))
    cfg = GdConfig(kind=PenaltyKind.FROBENIUS, lr=lr, max_iters=30)
    _, trace, _ = run(kernel, dims, cfg)
    penalties = [r.penalty for r in trace]
    assert all(b <= a for a, b in zip(penalties, penalties[1:]))


def test_trace_schedule_and_invariants(rng):
    kernel = random_kernel(rng, 3, 1, 1)
    dims = kernel.dims(5)
    cfg = GdConfig(kind=PenaltyKind.FROBENIUS, lr=1e-4, max_iters=10, trace_every=4)
    _, trace, status = run(kernel, dims, cfg)
    assert status is RunStatus.MAX_ITERS
    assert [r.iter for r in trace] == [0, 4, 8, 10]  # every 4th plus first and last
    iters = [r.iter for r in trace]
    assert all(b > a for a, b in zip(iters, iters[1:]))
    for r in trace:
        assert math.isfinite(r.penalty) and math.isfinite(r.grad_norm)
        assert r.sigma_min <= r.sigma_max + 1e-12


def test_sigma_min_run_increases_sigma_min(rng):
    kernel = random_kernel(rng, 3, 1, 1, lo=0.0, hi=1.0)
    dims = kernel.dims(6)
    cfg = GdConfig(kind=PenaltyKind.NEG_SIGMA_MIN, lr=1e-4, max_iters=50)
    _, trace, status = run(kernel, dims, cfg)
    assert status is RunStatus.MAX_ITERS
    assert trace.last.sigma_min > trace.first.sigma_min


def test_degenerate_sigma_min_terminates_cleanly():
    kernel = identity_kernel(3)
    cfg = GdConfig(kind=PenaltyKind.NEG_SIGMA_MIN, lr=1e-4, max_iters=10)
    final, trace, status = run(kernel, kernel.dims(20), cfg)
    assert status is RunStatus.DEGENERATE_SIGMA
    assert np.array_equal(final.values, kernel.values)  # no bogus update applied
    assert len(trace) == 1
    assert trace.last.iter == 0
    assert math.isnan(trace.last.grad_norm)  # no gradient exists at the refusal
    assert trace.last.penalty == pytest.approx(-1.0, abs=1e-12)


def test_sigma_band_stop(rng):
    kernel = random_kernel(rng, 3, 1, 1, lo=0.5, hi=1.0)
    dims = kernel.dims(5)
    pair_max, pair_min = extreme_singular_pairs(build_multi(kernel, 5))
    # band that the Frobenius shrinkage will enter: sigma_max just below current
    band = SigmaBand(lo=0.0, hi=pair_max.sigma * 0.9)
    cfg = GdConfig(kind=PenaltyKind.FROBENIUS, lr=1e-3, max_iters=500, stop=band, trace_every=1000)
    _, trace, status = run(kernel, dims, cfg)
    assert status is RunStatus.CONVERGED
    assert trace.last.sigma_max <= band.hi
    assert trace.last.iter < 500
    assert trace.first.iter == 0  # first state recorded despite sparse schedule


def test_grad_norm_stop(rng):
    # Frobenius descent is an entrywise contraction, so the gradient norm
    # decays geometrically and the threshold rule fires before the budget
    kernel = random_kernel(rng, 3, 1, 1, lo=0.3, hi=1.0)
    dims = kernel.dims(5)
    lr = 0.9 / (2.0 * float(omega_count_grid(dims).max()))
    cfg = GdConfig(
        kind=PenaltyKind.FROBENIUS,
        lr=lr,
        max_iters=5000,
        stop=GradNormStop(threshold=1e-6),
        trace_every=1000,
    )
    final, trace, status = run(kernel, dims, cfg)
    assert status is RunStatus.CONVERGED
    assert trace.last.grad_norm <= 1e-6
    assert trace.last.iter < 5000
    assert frob_penalty(final, dims) < frob_penalty(kernel, dims)


def test_init_kernel_uniform_determinism_and_range():
    a = init_kernel(3, 2, 1, seed=7)
    b = init_kernel(3, 2, 1, seed=7)
    assert np.array_equal(a.values, b.values)
    assert np.all((a.values >= 0.0) & (a.values < 1.0))
    c = init_kernel(3, 2, 1, seed=8)
    assert not np.array_equal(a.values, c.values)
    mean = init_kernel(3, 1, 1, seed=1).values.mean()
    assert 0.3 <= mean <= 0.7


def test_init_kernel_from_file(tmp_path, rng):
    from convreg import write_kernel

    kernel = random_kernel(rng, 3, 2, 1)
    path = tmp_path / "k.txt"
    write_kernel(kernel, path)
    loaded = init_kernel(3, 2, 1, scheme="file", path=path)
    assert np.array_equal(loaded.values, kernel.values)
    with pytest.raises(ValueError):
        init_kernel(3, 1, 1, scheme="file", path=path)  # g mismatch
    with pytest.raises(ValueError):
        init_kernel(3, 2, 1, scheme="nope")
    with pytest.raises(ValueError):
        init_kernel(None, None, None, scheme="uniform01")


def test_trace_csv_round_trip(tmp_path):
    records = [
        TraceRecord(0, 1.2345678901234567, 3.0, 0.5, 0.25, 1.5),
        TraceRecord(10, -7.654321e-12, 2.5, 0.75, 0.125, 20.25),
    ]
    path = tmp_path / "trace.csv"
    write_trace_csv(Trace(records), path)
    text = path.read_text().splitlines()
    assert text[0] == "iter,penalty,sigma_max,sigma_min,grad_norm,wall_ms"
    again = read_trace_csv(path)
    assert len(again) == 2
    for orig, back in zip(records, again):
        assert orig == back  # 17 significant digits round-trip float64 exactly

    bad = tmp_path / "bad.csv"
    bad.write_text("nope\n")
    with pytest.raises(ValueError):
        read_trace_csv(bad)
