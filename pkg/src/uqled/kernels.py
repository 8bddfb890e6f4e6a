"""Hot numeric kernels: one SGD epoch of the dropout softmax classifier.

Two interchangeable implementations exist. ``sgd_epoch_numba`` carries
explicit loops compiled with ``@njit``; ``sgd_epoch_numpy`` is the
vectorized pure-numpy fallback. ``sgd_epoch`` points at whichever one the
``UQLED_NUMBA`` flag selects (see :mod:`uqled._jit`). Both consume
pre-drawn randomness (sample order and dropout masks), so results differ
between the paths only by floating-point summation order.

Shared semantics per epoch:

* samples are visited in the order given by ``perm``,
* the epoch processes ``len(perm) // batch`` full batches and drops the
  final partial batch,
* ``xmask`` holds one pre-scaled dropout mask row per visited sample
  (entries are 0 or 1/keep-rate),
* weights and bias are updated in place with the mean cross-entropy
  gradient of each batch,
* the summed negative log-likelihood of all processed samples is
  returned so the caller can detect divergence.
"""

import numpy as np

from ._jit import JIT_ENABLED, njit

__all__ = ["JIT_ENABLED", "sgd_epoch", "sgd_epoch_numba", "sgd_epoch_numpy"]

_P_FLOOR = 1e-300  # keeps log() finite when softmax underflows


@njit(cache=True, nogil=True)
def _sgd_epoch_jit(w, b, x, y, perm, xmask, lr, batch):
    n_features, n_classes = w.shape
    n_batches = perm.shape[0] // batch
    inv_batch = 1.0 / batch
    loss = 0.0

    xd = np.empty((batch, n_features))
    logits = np.empty((batch, n_classes))
    grad_w = np.empty((n_features, n_classes))
    grad_b = np.empty(n_classes)

    for s in range(n_batches):
        base = s * batch
        for i in range(batch):
            row = perm[base + i]
            for j in range(n_features):
                xd[i, j] = x[row, j] * xmask[base + i, j]

        for i in range(batch):
            for k in range(n_classes):
                acc = b[k]
                for j in range(n_features):
                    acc += xd[i, j] * w[j, k]
                logits[i, k] = acc

        # stable softmax; logits becomes (p - onehot) in place
        for i in range(batch):
            m = logits[i, 0]
            for k in range(1, n_classes):
                if logits[i, k] > m:
                    m = logits[i, k]
            z = 0.0
            for k in range(n_classes):
                logits[i, k] = np.exp(logits[i, k] - m)
                z += logits[i, k]
            target = y[perm[base + i]]
            for k in range(n_classes):
                logits[i, k] /= z
            p_target = logits[i, target]
            if p_target < _P_FLOOR:
                p_target = _P_FLOOR
            loss -= np.log(p_target)
            logits[i, target] -= 1.0

        for j in range(n_features):
            for k in range(n_classes):
                grad_w[j, k] = 0.0
        for k in range(n_classes):
            grad_b[k] = 0.0
        for i in range(batch):
            for j in range(n_features):
                xij = xd[i, j]
                if xij != 0.0:
                    for k in range(n_classes):
                        grad_w[j, k] += xij * logits[i, k]
            for k in range(n_classes):
                grad_b[k] += logits[i, k]

        for j in range(n_features):
            for k in range(n_classes):
                w[j, k] -= lr * grad_w[j, k] * inv_batch
        for k in range(n_classes):
            b[k] -= lr * grad_b[k] * inv_batch

    return loss


def sgd_epoch_numpy(w, b, x, y, perm, xmask, lr, batch):
    """Vectorized fallback with the same contract as the jitted kernel."""
    n_batches = perm.shape[0] // batch
    loss = 0.0
    idx = np.arange(batch)
    for s in range(n_batches):
        rows = perm[s * batch : (s + 1) * batch]
        xd = x[rows] * xmask[s * batch : (s + 1) * batch]
        z = xd @ w + b
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        targets = y[rows]
        loss -= np.log(np.maximum(p[idx, targets], _P_FLOOR)).sum()
        p[idx, targets] -= 1.0
        w -= (lr / batch) * (xd.T @ p)
        b -= (lr / batch) * p.sum(axis=0)
    return loss


# with the flag off, njit is a no-op shim and _sgd_epoch_jit stays a
# plain-python function: same update rule, just uncompiled
sgd_epoch_numba = _sgd_epoch_jit
sgd_epoch = _sgd_epoch_jit if JIT_ENABLED else sgd_epoch_numpy
