"""The jit and numpy epoch kernels must implement the same update rule."""

import numpy as np
import pytest

from uqled.kernels import JIT_ENABLED, sgd_epoch, sgd_epoch_numba, sgd_epoch_numpy


def _epoch_inputs(seed, n=64, d=6, c=4, batch=8, rate=0.3):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    y = rng.integers(0, c, size=n).astype(np.int64)
    w = rng.standard_normal((d, c)) * 0.1
    b = rng.standard_normal(c) * 0.1
    perm = rng.permutation(n)
    keep = 1.0 - rate
    xmask = (rng.random((n, d)) >= rate) / keep
    return w, b, x, y, perm, xmask


def test_both_paths_agree_on_one_epoch():
    for seed in range(5):
        w0, b0, x, y, perm, xmask = _epoch_inputs(seed)
        w1, b1 = w0.copy(), b0.copy()
        w2, b2 = w0.copy(), b0.copy()
        loss1 = sgd_epoch_numba(w1, b1, x, y, perm, xmask, 0.5, 8)
        loss2 = sgd_epoch_numpy(w2, b2, x, y, perm, xmask, 0.5, 8)
        assert np.allclose(w1, w2, rtol=0, atol=1e-12)
        assert np.allclose(b1, b2, rtol=0, atol=1e-12)
        assert loss1 == pytest.approx(loss2, rel=1e-12)


def test_partial_batch_is_dropped():
    w0, b0, x, y, perm, xmask = _epoch_inputs(3, n=10, batch=8)
    w, b = w0.copy(), b0.copy()
    sgd_epoch_numpy(w, b, x, y, perm, xmask, 0.5, 8)
    # only one batch of 8 runs; rerun with the trailing 2 samples removed
    w_trim, b_trim = w0.copy(), b0.copy()
    sgd_epoch_numpy(w_trim, b_trim, x, y, perm[:8], xmask[:8], 0.5, 8)
    assert np.array_equal(w, w_trim)
    assert np.array_equal(b, b_trim)


def test_loss_is_finite_and_positive():
    w0, b0, x, y, perm, xmask = _epoch_inputs(7)
    loss = sgd_epoch(w0.copy(), b0.copy(), x, y, perm, xmask, 0.1, 8)
    assert np.isfinite(loss) and loss > 0


def test_updates_reduce_loss_on_separable_data():
    rng = np.random.default_rng(11)
    n, d, c = 120, 4, 3
    centers = np.eye(c, d) * 6
    y = rng.integers(0, c, size=n).astype(np.int64)
    x = centers[y] + rng.standard_normal((n, d))
    w = np.zeros((d, c))
    b = np.zeros(c)
    xmask = np.ones((n, d))
    losses = []
    for epoch in range(8):
        perm = rng.permutation(n)
        losses.append(sgd_epoch(w, b, x, y, perm, xmask, 0.2, 8))
    assert losses[-1] < losses[0] * 0.5


def test_selected_path_matches_flag():
    import uqled._jit as jit

    if JIT_ENABLED:
        assert sgd_epoch is sgd_epoch_numba
    else:
        assert sgd_epoch is sgd_epoch_numpy
    assert jit.JIT_ENABLED == JIT_ENABLED
