"""Timing comparison of the compiled and pure-Python numeric backends.

Runs the hot training primitives of both backends on one synthetic
sparse problem and prints per-call times plus the compiled-over-python
speedup.  The two backends implement identical semantics, so any result
difference beyond float rounding is a bug (tests/test_backends.py holds
them to each other); this script only compares speed.

Usage:
    python benchmarks/benchmark_backends.py [--n 1000] [--degree 3]
"""

import argparse
import time

import numpy as np

from hofm.backend import load_backend
from hofm.sparse import SampleMatrix

LOSS_SQUARED = 0


def _synthetic(rng, n, d, nnz, k):
    indices = np.empty((n, nnz), dtype=np.int64)
    for i in range(n):
        indices[i] = np.sort(rng.choice(d, size=nnz, replace=False))
    indptr = np.arange(0, nnz * (n + 1), nnz, dtype=np.int64)
    X = SampleMatrix(n, d, indptr, indices.ravel(), rng.normal(size=n * nnz))
    y = rng.normal(size=n)
    P = rng.normal(scale=0.3, size=(d, k))
    return X, y, P


def _time_call(fn, min_seconds=0.2, max_reps=1000):
    # Adaptive repetition: grow reps until the batch is long enough to
    # trust, then report the best per-call time.
    reps, best = 1, float("inf")
    while True:
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        elapsed = time.perf_counter() - t0
        best = min(best, elapsed / reps)
        if elapsed >= min_seconds or reps >= max_reps:
            return best
        reps = min(max_reps, max(reps * 2, int(reps * min_seconds / max(elapsed, 1e-9))))


def _tasks(mod, X, y, P, m):
    n, k = X.n, P.shape[1]
    csc_indptr, csc_rows, csc_vals = X.csc
    z = (P[X.indices[: X.indptr[1]], 0] * X.data[: X.indptr[1]]).copy()

    def anova_value():
        mod.anova_value(z, m)

    def batch_predict():
        out = np.zeros(n)
        mod.predict_anova_batch(P, m, X.indptr, X.indices, X.data, out)

    avals = np.empty((n, m + 1))
    dvals = np.empty((n, m + 1))
    y_hat0 = np.zeros(n)
    mod.predict_anova_batch(P, m, X.indptr, X.indices, X.data, y_hat0)

    def cd_epoch():
        # One full coordinate pass: per-column cache rebuild plus the
        # guarded coordinate sweep, exactly as the solver runs it.
        Q = P.copy()
        y_hat = y_hat0.copy()
        for s in range(k):
            mod.rebuild_anova_caches(Q[:, s].copy(), m, X.indptr, X.indices,
                                     X.data, avals, dvals)
            mod.cd_epoch_anova(Q, s, m, csc_indptr, csc_rows, csc_vals, y,
                               y_hat, avals, dvals, LOSS_SQUARED, 1.0, 0.1)

    order = np.arange(n, dtype=np.int64)
    offsets = np.zeros(n)

    def adagrad_epoch():
        Q = P.copy()
        G = np.zeros_like(Q)
        mod.adagrad_epoch_anova(Q, m, X.indptr, X.indices, X.data, y, offsets,
                                G, order, LOSS_SQUARED, 0.1, 0.001, 1e-10)

    return [
        ("anova_value (single row)", anova_value),
        ("predict batch", batch_predict),
        ("cd epoch (all %d columns)" % k, cd_epoch),
        ("adagrad epoch", adagrad_epoch),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000, help="number of samples")
    ap.add_argument("--d", type=int, default=100, help="feature dimension")
    ap.add_argument("--nnz", type=int, default=20, help="nonzeros per row")
    ap.add_argument("--rank", type=int, default=10, help="factor columns")
    ap.add_argument("--degree", type=int, default=3, help="kernel degree m")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    X, y, P = _synthetic(rng, args.n, args.d, args.nnz, args.rank)

    python = load_backend("python")
    try:
        compiled = load_backend("c")
    except ImportError:
        print("compiled backend unavailable; install with a C toolchain "
              "and Cython to compare")
        return 1

    print("n=%d d=%d nnz=%d rank=%d degree=%d"
          % (args.n, args.d, args.nnz, args.rank, args.degree))
    print("%-28s %12s %12s %9s" % ("primitive", "python", "compiled",
                                   "speedup"))
    for (name, fn_py), (_, fn_c) in zip(_tasks(python, X, y, P, args.degree),
                                        _tasks(compiled, X, y, P,
                                               args.degree)):
        t_py = _time_call(fn_py)
        t_c = _time_call(fn_c)
        print("%-28s %10.3f ms %10.3f ms %8.1fx"
              % (name, t_py * 1e3, t_c * 1e3, t_py / t_c))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
