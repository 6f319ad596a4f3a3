"""Regularization sweep over beta in {1e-6, ..., 1e6}.

Cross-validating beta on a 13-point logarithmic grid is part of the
reference experimental protocol but deliberately not a library or CLI
feature; this script documents and automates it.  It holds out a
validation fraction of the rows, fits one model per grid point, and
prints the validation metric for each, marking the best.

Example:
    python scripts/beta_grid.py --data train.svm --degree 3 --rank 30 \
        --solver cd --epochs 30 --metric rmse --seed 7
"""

import argparse
import sys

import numpy as np

from hofm.data import load_svmlight
from hofm.evaluate import auc, rmse
from hofm.model import predict_many
from hofm.solvers import TrainConfig, fit
from hofm.sparse import SampleMatrix

BETAS = [10.0 ** e for e in range(-6, 7)]


def _take_rows(X, idx):
    return SampleMatrix.from_rows([X.row(i) for i in idx], dim=X.d)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", required=True, help="labeled svmlight data")
    ap.add_argument("--variant", default="separate",
                    choices=["separate", "shared_augmented", "all_subsets"])
    ap.add_argument("--degree", type=int, default=3)
    ap.add_argument("--rank", type=int, default=30)
    ap.add_argument("--solver", default="cd", choices=["cd", "adagrad"])
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--loss", default="squared",
                    choices=["squared", "logistic"])
    ap.add_argument("--metric", default="rmse", choices=["rmse", "auc"])
    ap.add_argument("--learning-rate", type=float, default=0.001)
    ap.add_argument("--val-fraction", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    X, y = load_svmlight(args.data)
    rng = np.random.default_rng(args.seed)
    order = rng.permutation(X.n)
    n_val = max(1, int(X.n * args.val_fraction))
    if n_val >= X.n:
        print("error: validation fraction leaves no training rows",
              file=sys.stderr)
        return 1
    val_idx, train_idx = order[:n_val], order[n_val:]
    X_train, y_train = _take_rows(X, train_idx), y[train_idx]
    X_val, y_val = _take_rows(X, val_idx), y[val_idx]
    score = rmse if args.metric == "rmse" else auc
    better = (lambda a, b: a < b) if args.metric == "rmse" else \
        (lambda a, b: a > b)

    best = None
    print("%12s %12s" % ("beta", args.metric))
    for beta in BETAS:
        config = TrainConfig(degree=args.degree, rank=args.rank, beta=beta,
                             epochs=args.epochs, solver=args.solver,
                             learning_rate=args.learning_rate,
                             seed=args.seed, tol=0.0)
        model = fit(X_train, y_train, config, variant=args.variant,
                    loss=args.loss).model
        val = score(y_val, predict_many(model, X_val))
        flag = ""
        if best is None or better(val, best[1]):
            best = (beta, val)
            flag = "  <- best so far"
        print("%12g %12.5f%s" % (beta, val, flag))
    print("best beta: %g (%s %.5f)" % (best[0], args.metric, best[1]))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
