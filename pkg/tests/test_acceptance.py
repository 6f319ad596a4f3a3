"""End-to-end acceptance checks.

Eight criteria, one test and one printed PASS/FAIL line each (run with
``pytest tests/test_acceptance.py -v -s`` to see the lines).  Reference
values come from independent routes: brute-force subset enumeration,
central finite differences, and closed-form identities.  Tolerances are
relative to max(|reference|, 1), which keeps instances whose reference
value cancels to ~0 from dividing by rounding noise.
"""

import itertools
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from hofm import (
    SampleMatrix,
    SparseVector,
    TrainConfig,
    auc,
    dump_svmlight,
    fit,
    load_svmlight,
    predict,
    predict_many,
    rmse,
    run_solver_comparison,
    split_links,
)
from hofm.data import LinkDataset, load_link_files
from hofm.kernels import (
    all_subsets_eval,
    all_subsets_grad,
    anova_coord_deriv,
    anova_eval,
    anova_eval_all,
    anova_eval_alt,
    anova_grad,
    anova_grad_alt,
)
from hofm.model import (
    HofmModel,
    augment_input,
    gamma_to_theta,
    predict_fm2_fast,
)
from hofm.solvers import fit_linear_cd


def _report(num, name, ok, detail):
    print("acceptance %d %s: %s (%s)" % (num, name, "PASS" if ok else "FAIL",
                                         detail))
    assert ok, "criterion %d (%s): %s" % (num, name, detail)


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1.0)


def _rel_vec(a, b):
    if len(b) == 0:
        return 0.0
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0)))


def _random_sparse(rng, d, max_nnz=None):
    hi = d if max_nnz is None else min(d, max_nnz)
    nnz = int(rng.integers(0, hi + 1))
    idx = np.sort(rng.choice(d, size=nnz, replace=False)).astype(np.int64)
    vals = rng.normal(size=nnz)
    vals[vals == 0.0] = 1.0
    return SparseVector(d, idx, vals)


def _anova_brute(p, x, m):
    if m == 0:
        return 1.0
    total = 0.0
    z = p[x.indices] * x.values
    for combo in itertools.combinations(range(x.nnz), m):
        prod = 1.0
        for j in combo:
            prod *= z[j]
        total += prod
    return total


def _all_subsets_brute(p, x):
    total = 0.0
    for m in range(x.nnz + 1):
        total += _anova_brute(p, x, m)
    return total


# ---------------------------------------------------------------------------
# 1. Kernel value oracle
# ---------------------------------------------------------------------------

def test_criterion_1_kernel_value_oracle():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 9))
        m = int(rng.integers(1, 5))
        x = _random_sparse(rng, d)
        p = rng.normal(size=d)
        ref = _anova_brute(p, x, m)
        worst = max(worst, _rel(anova_eval(p, x, m)[0], ref))
        worst = max(worst, _rel(anova_eval_alt(p, x, m)[0], ref))
        if m >= 2:
            factors = tuple(
                np.zeros((d, 1)) if t != m else p[:, None].copy()
                for t in range(2, m + 1))
            model = HofmModel(variant="separate", d=d, bias=0.0, degree=m,
                              w=np.zeros(d), factors=factors)
            worst = max(worst, _rel(predict(model, x), ref))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 5.0
    _report(1, "kernel value oracle", ok,
            "max rel err %.2e (tol 1e-10), %.2fs (cap 5s)" % (worst, elapsed))


# ---------------------------------------------------------------------------
# 2. Gradient routes vs finite differences and each other
# ---------------------------------------------------------------------------

def _fd_grad(fn, p, support, h_scale=1e-6):
    out = np.empty(len(support))
    for r, j in enumerate(support):
        h = h_scale * max(1.0, abs(p[j]))
        hi = p.copy()
        hi[j] += h
        lo = p.copy()
        lo[j] -= h
        out[r] = (fn(hi) - fn(lo)) / (2.0 * h)
    return out


def test_criterion_2_gradient_suite():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    worst_fd = 0.0
    worst_cross = 0.0
    for _ in range(200):
        d = int(rng.integers(2, 33))
        m = int(rng.integers(1, 6))
        x = _random_sparse(rng, d)
        p = rng.normal(size=d)

        value, table = anova_eval(p, x, m)
        g_table = anova_grad(p, x, m, table).to_dense()[x.indices]
        g_alt = anova_grad_alt(p, x, m).to_dense()[x.indices]
        _, cache = anova_eval_alt(p, x, m)
        g_coord = np.array([
            anova_coord_deriv(cache, p[j], x.values[r], m)
            for r, j in enumerate(x.indices)])
        fd = _fd_grad(lambda q: anova_eval(q, x, m)[0], p, x.indices)
        worst_fd = max(worst_fd, _rel_vec(g_table, fd))
        worst_cross = max(worst_cross, _rel_vec(g_alt, g_table),
                          _rel_vec(g_coord, g_table))

        gs = all_subsets_grad(p, x).to_dense()[x.indices]
        fd_s = _fd_grad(lambda q: all_subsets_eval(q, x), p, x.indices)
        worst_fd = max(worst_fd, _rel_vec(gs, fd_s))
    elapsed = time.perf_counter() - start
    ok = worst_fd <= 1e-5 and worst_cross <= 1e-10 and elapsed < 10.0
    _report(2, "gradient suite", ok,
            "max FD err %.2e (tol 1e-5), max cross err %.2e (tol 1e-10), "
            "%.2fs (cap 10s)" % (worst_fd, worst_cross, elapsed))


# ---------------------------------------------------------------------------
# 3. Structural identities
# ---------------------------------------------------------------------------

def test_criterion_3_identity_suite():
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(2, 13))
        m = int(rng.integers(1, 5))
        x = _random_sparse(rng, d)
        p = rng.normal(size=d)

        # value is affine in each single coordinate of p
        if x.nnz:
            r = int(rng.integers(x.nnz))
            j = int(x.indices[r])
            keep = np.arange(x.nnz) != r
            x_red = SparseVector(d, x.indices[keep], x.values[keep])
            lhs = anova_eval(p, x, m)[0]
            rhs = (anova_eval(p, x_red, m)[0]
                   + p[j] * x.values[r] * anova_eval(p, x_red, m - 1)[0])
            worst = max(worst, _rel(lhs, rhs))

        # scaling p scales the value by alpha^m
        alpha = float(rng.normal()) or 1.0
        worst = max(worst, _rel(anova_eval(alpha * p, x, m)[0],
                                alpha ** m * anova_eval(p, x, m)[0]))

        # degree-2 quadratic-expansion shortcut
        k = int(rng.integers(1, 5))
        fm2 = HofmModel(variant="fm2", d=d, bias=float(rng.normal()), degree=2,
                        w=rng.normal(size=d),
                        factors=(rng.normal(size=(d, k)),))
        worst = max(worst, _rel(predict_fm2_fast(fm2, x), predict(fm2, x)))

        # dummy-feature augmentation mixes degrees with theta weights
        ma = int(rng.integers(2, 5))
        gamma = rng.normal(size=ma - 1)
        p_aug = np.concatenate([gamma, p])
        lhs = anova_eval(p_aug, augment_input(x, ma), ma)[0]
        theta = gamma_to_theta(gamma).theta
        rhs = float(theta @ anova_eval_all(p, x, ma))
        worst = max(worst, _rel(lhs, rhs))

        # all-subsets kernel equals one plus the sum over degrees
        lhs = all_subsets_eval(p, x)
        rhs = 1.0 + float(np.sum(anova_eval_all(p, x, max(x.nnz, 1))))
        worst = max(worst, _rel(lhs, rhs))
    ok = worst <= 1e-8
    _report(3, "identity suite", ok, "max rel err %.2e (tol 1e-8)" % worst)


# ---------------------------------------------------------------------------
# 4. Coordinate descent never increases the squared-loss objective
# ---------------------------------------------------------------------------

def test_criterion_4_cd_monotone():
    rng = np.random.default_rng(404)
    epochs_checked = 0
    violations = 0
    worst_jump = 0.0
    for problem in range(50):
        n = int(rng.integers(30, 201))
        d = int(rng.integers(5, 31))
        m = int(rng.choice([2, 3, 4]))
        k = int(rng.integers(1, 6))
        beta = float(rng.choice([0.0, 0.1]))
        dense = rng.normal(size=(n, d)) * (rng.random((n, d)) < 0.3)
        X = SampleMatrix.from_dense(dense)
        y = rng.normal(size=n)
        config = TrainConfig(degree=m, rank=k, beta=beta, epochs=5,
                             solver="cd", seed=problem, tol=0.0)
        trace = fit(X, y, config, variant="separate").trace
        for before, after in zip(trace, trace[1:]):
            epochs_checked += 1
            slack = 1e-12 * (1.0 + abs(before.objective))
            jump = after.objective - before.objective
            worst_jump = max(worst_jump, jump)
            if jump > slack:
                violations += 1
    ok = violations == 0
    _report(4, "cd monotonicity", ok,
            "%d/%d epochs non-increasing, worst increase %.2e"
            % (epochs_checked - violations, epochs_checked, worst_jump))


# ---------------------------------------------------------------------------
# 5. Planted third-order model beats a linear fit on held-out data
# ---------------------------------------------------------------------------

def _planted_data(rng, n, d, nnz, k, noise, degree=3, scale=0.8):
    indices = np.empty((n, nnz), dtype=np.int64)
    for i in range(n):
        indices[i] = np.sort(rng.choice(d, size=nnz, replace=False))
    data = rng.normal(size=(n, nnz))
    indptr = np.arange(0, nnz * (n + 1), nnz, dtype=np.int64)
    X = SampleMatrix(n, d, indptr, indices.ravel(), data.ravel())
    truth = HofmModel(
        variant="separate", d=d, bias=0.0, degree=degree, w=np.zeros(d),
        factors=tuple(rng.normal(size=(d, k)) * scale
                      for _ in range(degree - 1)))
    y = predict_many(truth, X) + noise * rng.normal(size=n)
    return X, y


def test_criterion_5_planted_recovery():
    rng = np.random.default_rng(505)
    start = time.perf_counter()
    X, y = _planted_data(rng, n=2000, d=40, nnz=5, k=3, noise=0.01)
    n_train = 1600
    rows = [X.row(i) for i in range(X.n)]
    X_train = SampleMatrix.from_rows(rows[:n_train], dim=X.d)
    X_test = SampleMatrix.from_rows(rows[n_train:], dim=X.d)
    y_train, y_test = y[:n_train], y[n_train:]

    config = TrainConfig(degree=3, rank=3, beta=0.01, epochs=100, solver="cd",
                         seed=7, tol=0.0)
    model = fit(X_train, y_train, config, variant="separate").model
    rmse_hofm = rmse(y_test, predict_many(model, X_test))

    w = np.zeros(X.d)
    bias = 0.0
    y_hat = np.zeros(n_train)
    for _ in range(100):
        w, bias = fit_linear_cd(w, bias, X_train, y_train, beta=0.01,
                                y_hat=y_hat)
    rmse_lin = rmse(y_test, X_test.dot(w) + bias)

    elapsed = time.perf_counter() - start
    ok = rmse_hofm <= 0.7 * rmse_lin and elapsed < 60.0
    _report(5, "planted recovery", ok,
            "held-out rmse %.4f vs linear %.4f (need <= 70%%), %.1fs (cap 60s)"
            % (rmse_hofm, rmse_lin, elapsed))


# ---------------------------------------------------------------------------
# 6. Per-epoch cost growth with the degree
# ---------------------------------------------------------------------------

def _epoch_seconds(trace):
    # trace seconds are cumulative; median of the per-epoch increments
    deltas = [b.seconds - a.seconds for a, b in zip(trace, trace[1:])]
    return float(np.median(deltas))


def test_criterion_6_epoch_scaling():
    # A planted degree-4 signal plus a non-vanishing init keeps both
    # degree cells optimizing for the whole run.  Near-zero factors at
    # degree 4 see ~p^3 gradients, so ridge shrinkage parks cd at the
    # exact zero model, whose epochs skip all cache-resync work and no
    # longer measure representative per-epoch cost.
    rng = np.random.default_rng(606)
    X, y = _planted_data(rng, 5000, 100, 20, 3, 0.1, degree=4, scale=0.3)
    config = TrainConfig(rank=10, beta=0.1, epochs=10, learning_rate=0.001,
                         seed=1, tol=0.0, init_stddev=0.3)
    comparison = run_solver_comparison(X, y, degrees=(2, 4),
                                       solvers=("cd", "adagrad"),
                                       config=config)
    for cell in comparison.cells:
        assert cell.error is None, cell.error
    t = {(c.solver, c.degree): _epoch_seconds(c.trace)
         for c in comparison.cells}
    ada_ratio = t[("adagrad", 4)] / t[("adagrad", 2)]
    cd_ratio = t[("cd", 4)] / t[("cd", 2)]
    ok = 1.3 <= ada_ratio <= 3.0 and 1.5 <= cd_ratio <= 5.0
    _report(6, "epoch scaling", ok,
            "adagrad m4/m2 %.2f (need 1.3-3.0), cd m4/m2 %.2f (need 1.5-5.0)"
            % (ada_ratio, cd_ratio))


# ---------------------------------------------------------------------------
# 7. Optional: rating-graph link prediction benchmark
# ---------------------------------------------------------------------------

@pytest.mark.skipif("HOFM_MOVIELENS" not in os.environ,
                    reason="needs downloaded data; set HOFM_MOVIELENS to the "
                           "directory written by scripts/prepare_movielens.py")
def test_criterion_7_movielens_auc():
    root = os.environ["HOFM_MOVIELENS"]
    ld = load_link_files(os.path.join(root, "a.svm"),
                         os.path.join(root, "b.svm"),
                         os.path.join(root, "pairs.txt"))
    aucs = []
    for seed in (0, 1, 2):
        split = split_links(LinkDataset(ld.A, ld.B, ld.positives, seed=seed))
        config = TrainConfig(degree=3, rank=30, beta=0.1, epochs=30,
                             solver="cd", seed=seed, tol=0.0)
        model = fit(split.X_train, split.y_train, config,
                    variant="separate").model
        aucs.append(auc(split.y_test, predict_many(model, split.X_test)))
    mean_auc = float(np.mean(aucs))
    ok = abs(mean_auc - 0.786) <= 0.03
    _report(7, "link prediction benchmark", ok,
            "mean test AUC %.4f over 3 seeds (need 0.786 +/- 0.03)" % mean_auc)


# ---------------------------------------------------------------------------
# 8. Bitwise-deterministic training artifacts
# ---------------------------------------------------------------------------

def test_criterion_8_determinism(tmp_path):
    rng = np.random.default_rng(808)
    dense = rng.normal(size=(60, 12)) * (rng.random((60, 12)) < 0.4)
    X = SampleMatrix.from_dense(dense)
    y = rng.normal(size=60)
    data_path = tmp_path / "train.svm"
    with open(data_path, "w") as fh:
        dump_svmlight(X, y, fh)

    identical = True
    for solver in ("cd", "adagrad"):
        blobs = []
        for run in range(2):
            out = tmp_path / ("model_%s_%d.txt" % (solver, run))
            cmd = [sys.executable, "-c",
                   "from hofm.cli import main; raise SystemExit(main())",
                   "train", "--data", str(data_path), "--variant", "separate",
                   "--degree", "3", "--rank", "4", "--beta", "0.1",
                   "--solver", solver, "--epochs", "8", "--seed", "3",
                   "--out", str(out)]
            proc = subprocess.run(cmd, capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            blobs.append(out.read_bytes())
        identical = identical and blobs[0] == blobs[1]
    _report(8, "determinism", identical,
            "model files byte-identical across reruns for cd and adagrad")
