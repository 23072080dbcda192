import numpy as np
import pytest

from asyncsvrg.data import generate_synthetic
from asyncsvrg.model import (Dataset, LossConstants, SparseExample,
                             full_gradient, grad_component, gradient_example,
                             gradient_partial, logistic_coefs, loss_constants,
                             mean_sq_update_norm, objective,
                             smoothness_constant, strong_convexity_constant,
                             vr_update_vector)

LAM = 0.01


def _loss_i(ex, w, lam):
    z = float(ex.vals @ w[ex.indices]) if ex.indices.size else 0.0
    return float(np.logaddexp(0.0, -ex.label * z)) + 0.5 * lam * float(w @ w)


def test_gradient_matches_central_finite_differences(rng):
    for trial in range(20):
        d = int(rng.integers(2, 51))
        nnz = int(rng.integers(1, d + 1))
        idx = np.sort(rng.choice(d, size=nnz, replace=False))
        ex = SparseExample(idx, rng.standard_normal(nnz), int(rng.choice([1, -1])))
        w = rng.standard_normal(d)
        g = grad_component(ex, w, LAM)
        fd = np.zeros(d)
        h = 1e-6
        for j in range(d):
            wp, wm = w.copy(), w.copy()
            wp[j] += h
            wm[j] -= h
            fd[j] = (_loss_i(ex, wp, LAM) - _loss_i(ex, wm, LAM)) / (2 * h)
        rel = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)
        assert rel <= 1e-5


def test_gradient_example_matches_grad_component(small_data, rng):
    w = rng.standard_normal(small_data.dim)
    for i in (0, 7, small_data.n - 1):
        assert np.array_equal(gradient_example(small_data, i, w, LAM),
                              grad_component(small_data.example(i), w, LAM))


def test_full_gradient_is_mean_of_example_gradients(small_data, rng):
    w = rng.standard_normal(small_data.dim)
    mean = np.mean([gradient_example(small_data, i, w, LAM)
                    for i in range(small_data.n)], axis=0)
    assert np.allclose(full_gradient(small_data, w, LAM), mean, atol=1e-13)


def test_full_gradient_partition_merge(small_data, rng):
    w = rng.standard_normal(small_data.dim)
    base = full_gradient(small_data, w, LAM)
    blocks = np.array_split(np.arange(small_data.n), 4)
    assert np.allclose(full_gradient(small_data, w, LAM, partition=blocks),
                       base, atol=1e-13)
    # the single-block expression used by the engine is bitwise identical
    acc = np.zeros(small_data.dim)
    acc += gradient_partial(small_data, w, np.arange(small_data.n))
    assert np.array_equal(acc / small_data.n + LAM * w, base)


def test_full_gradient_rejects_bad_partition(small_data, rng):
    w = rng.standard_normal(small_data.dim)
    with pytest.raises(ValueError):
        full_gradient(small_data, w, LAM, partition=[np.arange(10)])
    with pytest.raises(ValueError):
        full_gradient(small_data, w, LAM,
                      partition=[np.arange(small_data.n), np.array([0])])


def test_vr_update_unbiased(small_data, rng):
    for _ in range(10):
        u = rng.standard_normal(small_data.dim)
        u0 = rng.standard_normal(small_data.dim)
        g0 = full_gradient(small_data, u0, LAM)
        mean_v = np.mean([vr_update_vector(small_data, i, u, u0, g0, LAM)
                          for i in range(small_data.n)], axis=0)
        assert np.max(np.abs(mean_v - full_gradient(small_data, u, LAM))) <= 1e-12


def test_objective_matches_extended_precision(small_data, rng):
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 50
    w = 0.5 * rng.standard_normal(small_data.dim)
    total = mp.mpf(0)
    for i in range(small_data.n):
        ex = small_data.example(i)
        z = mp.mpf(float(ex.vals @ w[ex.indices]))
        total += mp.log(1 + mp.exp(-ex.label * z))
    ref = total / small_data.n + mp.mpf(LAM) / 2 * mp.mpf(float(w @ w))
    assert abs(objective(small_data, w, LAM) - float(ref)) <= 1e-12


def test_objective_stable_for_extreme_margins(small_data):
    w = np.full(small_data.dim, 1e3)
    val = objective(small_data, w, 0.0)
    assert np.isfinite(val) and val >= 0.0


def test_mean_sq_update_norm_matches_naive(small_data, rng):
    u0 = rng.standard_normal(small_data.dim)
    x = u0 + 0.3 * rng.standard_normal(small_data.dim)
    g0 = full_gradient(small_data, u0, LAM)
    naive = np.mean([
        float(np.sum(vr_update_vector(small_data, i, x, u0, g0, LAM) ** 2))
        for i in range(small_data.n)])
    fast = mean_sq_update_norm(small_data, x, u0, g0, LAM)
    assert fast == pytest.approx(naive, rel=1e-10)


def test_smoothness_bounds_gradient_lipschitz(small_data, rng):
    L = smoothness_constant(small_data, LAM)
    for _ in range(30):
        w1 = rng.standard_normal(small_data.dim)
        w2 = w1 + rng.standard_normal(small_data.dim)
        i = int(rng.integers(small_data.n))
        lhs = np.linalg.norm(gradient_example(small_data, i, w1, LAM)
                             - gradient_example(small_data, i, w2, LAM))
        assert lhs <= L * np.linalg.norm(w1 - w2) * (1 + 1e-12)


def test_logistic_coefs_match_per_example(small_data, rng):
    w = rng.standard_normal(small_data.dim)
    coefs = logistic_coefs(small_data, w)
    g5 = gradient_example(small_data, 5, w, 0.0)
    ex = small_data.example(5)
    rebuilt = np.zeros(small_data.dim)
    rebuilt[ex.indices] = coefs[5] * ex.vals
    assert np.allclose(g5, rebuilt, atol=1e-15)


def test_constants_and_validation(small_data):
    lc = loss_constants(small_data, LAM)
    assert lc.strong_convexity == LAM
    assert lc.smoothness == smoothness_constant(small_data, LAM)
    with pytest.raises(ValueError):
        strong_convexity_constant(0.0)
    with pytest.raises(ValueError):
        LossConstants(smoothness=0.1, strong_convexity=0.2, regularizer=0.2)
    with pytest.raises(ValueError):
        SparseExample(np.array([3, 1]), np.array([1.0, 2.0]), 1)
    with pytest.raises(ValueError):
        SparseExample(np.array([0]), np.array([1.0]), 0)
    with pytest.raises(ValueError):
        Dataset(np.array([0, 1]), np.array([5]), np.array([1.0]),
                np.array([1.0]), dim=3)
    with pytest.raises(ValueError):
        objective(small_data, np.zeros(small_data.dim + 1), LAM)


def test_smoothness_value_dense_rows():
    data = generate_synthetic(50, 6, seed=1)
    # rows are L2-normalized, so L = 1/4 + lam exactly
    assert smoothness_constant(data, LAM) == pytest.approx(0.25 + LAM, rel=1e-12)
