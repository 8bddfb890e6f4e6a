"""Timing comparison of the two SGD epoch kernels.

The package ships one training inner loop in two builds: a jitted
per-element version (uqled.kernels.sgd_epoch_numba) and a vectorized
numpy fallback (sgd_epoch_numpy).  The UQLED_NUMBA env flag picks which
one `sgd_epoch` resolves to at import time; this script times both on
the same workload regardless of the flag.

Usage:

    python benchmarks/bench_kernels.py --n 2000 --epochs 50

Note: with UQLED_NUMBA=0 the "jit" row runs the undecorated python
loops, which is the honest cost of that configuration.
"""

import argparse
import time

import numpy as np

from uqled import kernels
from uqled.synthlab import make_blobs


def _epoch_inputs(n, d, rate, rng):
    perm = rng.permutation(n)
    keep = (rng.random((n, d)) >= rate).astype(np.float64)
    if rate < 1.0:
        keep /= 1.0 - rate
    return perm, keep


def run(kernel, x, y, c, epochs, lr, batch, rate, seed):
    n, d = x.shape
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.01, size=(d, c))
    b = np.zeros(c)
    losses = np.empty(epochs)
    t0 = time.perf_counter()
    for e in range(epochs):
        perm, keep = _epoch_inputs(n, d, rate, rng)
        losses[e] = kernel(w, b, x, y, perm, keep, lr, batch)
    return time.perf_counter() - t0, losses


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--c", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--batch", type=int, default=4)
    ap.add_argument("--lr", type=float, default=1.5)
    ap.add_argument("--dropout", type=float, default=0.15)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data = make_blobs(args.n, args.c, args.d, separation=3.5, seed=args.seed)
    x, y = data.features, data.labels.labels

    # compile outside the timed region
    warm_w = np.zeros((args.d, args.c))
    warm_b = np.zeros(args.c)
    perm, keep = _epoch_inputs(args.n, args.d, args.dropout, np.random.default_rng(0))
    kernels.sgd_epoch_numba(warm_w, warm_b, x, y, perm, keep, args.lr, args.batch)

    rows = []
    for name, fn in (("jit", kernels.sgd_epoch_numba), ("numpy", kernels.sgd_epoch_numpy)):
        wall, losses = run(
            fn, x, y, args.c, args.epochs, args.lr, args.batch, args.dropout, args.seed
        )
        rows.append((name, wall, losses))

    print(f"jit enabled: {kernels.JIT_ENABLED}")
    print(f"workload: n={args.n} d={args.d} c={args.c} epochs={args.epochs} batch={args.batch}")
    base = rows[1][1]
    for name, wall, losses in rows:
        print(
            f"  {name:<6} {wall:8.3f} s   {args.epochs / wall:9.1f} epochs/s"
            f"   speedup vs numpy: {base / wall:5.2f}x"
        )
    # first epoch starts from identical weights, so its loss gap measures
    # pure rounding discrepancy; later epochs diverge as rounding feeds
    # back through the weight updates, especially at high learning rates
    first = abs(rows[0][2][0] - rows[1][2][0])
    last = abs(rows[0][2][-1] - rows[1][2][-1])
    print(f"|loss difference|: first epoch {first:.3e}, last epoch {last:.3e}")


if __name__ == "__main__":
    main()
