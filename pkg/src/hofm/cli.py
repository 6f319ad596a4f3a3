"""Command-line interface: train, predict, evaluate, link, bench.

Every command is deterministic given --seed (falling back to the
HOFM_SEED environment variable, then 0).  Errors print a diagnostic to
stderr and exit nonzero; argparse usage problems exit with status 2.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .data import load_link_files, load_svmlight, split_links
from .evaluate import auc, rmse, run_solver_comparison
from .model import load_model, predict_many, save_model
from .solvers import TrainConfig, fit, objective
from .sparse import SampleMatrix

__all__ = ["main", "build_parser"]


def _default_seed():
    env = os.environ.get("HOFM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise SystemExit("HOFM_SEED must be an integer, got %r" % env)


def _add_train_flags(p):
    p.add_argument("--variant", default="separate",
                   choices=["separate", "shared_augmented", "all_subsets", "fm2"])
    p.add_argument("--degree", type=int, default=2,
                   help="highest interaction degree m (ignored by all_subsets)")
    p.add_argument("--rank", type=int, default=30,
                   help="columns per factor matrix")
    p.add_argument("--beta", type=float, default=0.1,
                   help="L2 strength for linear weights and factors")
    p.add_argument("--solver", default="cd", choices=["cd", "adagrad"])
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--loss", default="squared", choices=["squared", "logistic"])
    p.add_argument("--learning-rate", type=float, default=0.001,
                   help="AdaGrad step scale")
    p.add_argument("--epsilon", type=float, default=1e-10,
                   help="AdaGrad denominator guard")
    p.add_argument("--init-stddev", type=float, default=0.01)
    p.add_argument("--tol", type=float, default=1e-6,
                   help="relative-decrease early stop; 0 disables")
    p.add_argument("--seed", type=int, default=None,
                   help="randomness seed (default: HOFM_SEED or 0)")


def _config_from(args):
    seed = args.seed if args.seed is not None else _default_seed()
    return TrainConfig(degree=args.degree, rank=args.rank, beta=args.beta,
                       epochs=args.epochs, solver=args.solver,
                       learning_rate=args.learning_rate, epsilon=args.epsilon,
                       seed=seed, init_stddev=args.init_stddev, tol=args.tol)


def _write_trace(trace, path):
    with open(path, "w") as fh:
        fh.write("epoch,objective,seconds\n")
        for rec in trace:
            fh.write("%d,%.17g,%.6f\n" % (rec.epoch, rec.objective, rec.seconds))


def _load_for_model(path, model):
    X, y = load_svmlight(path)
    if X.d > model.d:
        raise ValueError("data has %d features but the model expects %d"
                         % (X.d, model.d))
    if X.d < model.d:  # svmlight cannot express trailing all-zero columns
        X = SampleMatrix(X.n, model.d, X.indptr, X.indices, X.data, check=False)
    return X, y


def cmd_train(args):
    X, y = load_svmlight(args.data)
    config = _config_from(args)
    result = fit(X, y, config, variant=args.variant, loss=args.loss)
    save_model(result.model, args.out)
    trace_path = args.trace if args.trace else args.out + ".trace.csv"
    _write_trace(result.trace, trace_path)
    print("final objective %.17g" % result.trace[-1].objective)
    return 0


def cmd_predict(args):
    model = load_model(args.model)
    X, _ = _load_for_model(args.data, model)
    preds = predict_many(model, X)
    with open(args.out, "w") as fh:
        for v in preds:
            fh.write("%.17g\n" % v)
    return 0


def cmd_evaluate(args):
    model = load_model(args.model)
    X, y = _load_for_model(args.data, model)
    preds = predict_many(model, X)
    if args.metric == "rmse":
        print("rmse %.17g" % rmse(y, preds))
    else:
        print("auc %.17g" % auc(y, preds))
    return 0


def cmd_link(args):
    ld = load_link_files(args.a, args.b, args.pairs)
    config = _config_from(args)
    rng = np.random.default_rng(config.seed)
    negative = -1.0 if args.loss == "logistic" else 0.0
    split = split_links(ld, train_fraction=args.train_fraction, rng=rng,
                        negative_label=negative,
                        test_negative_cap=args.test_negative_cap)
    result = fit(split.X_train, split.y_train, config, variant=args.variant,
                 loss=args.loss)
    if args.out:
        save_model(result.model, args.out)
    scores = predict_many(result.model, split.X_test)
    if split.test_negatives_capped:
        print("test negatives capped at %d of %d"
              % (split.test_negatives_used, split.test_negatives_total))
    print("test auc %.17g" % auc(split.y_test, scores))
    return 0


def cmd_bench(args):
    X, y = load_svmlight(args.data)
    degrees = [int(t) for t in args.degrees.split(",") if t]
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    for s in solvers:
        if s not in ("cd", "adagrad"):
            raise SystemExit("unknown solver %r (choose from cd, adagrad)" % s)
    seed = args.seed if args.seed is not None else _default_seed()
    config = TrainConfig(rank=args.rank, beta=args.beta, epochs=args.epochs,
                         learning_rate=args.learning_rate, seed=seed, tol=0.0)
    cmp = run_solver_comparison(X, y, degrees=degrees, solvers=solvers,
                                config=config, loss=args.loss)
    cmp.to_csv(args.out)
    failures = [c for c in cmp.cells if c.error]
    for c in failures:
        print("cell %s m=%d failed: %s" % (c.solver, c.degree, c.error),
              file=sys.stderr)
    print("wrote %s (%d cells)" % (args.out, len(cmp.cells)))
    return 1 if failures else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hofm",
        description="Train and evaluate higher-order factorization machines "
                    "on sparse data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model on svmlight data")
    p.add_argument("--data", required=True, help="training data (svmlight)")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--trace", default=None,
                   help="epoch trace CSV (default: <out>.trace.csv)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write one prediction per input row")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a model file on labeled data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--metric", default="rmse", choices=["rmse", "auc"])
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("link", help="split a link dataset, train, report AUC")
    p.add_argument("--a", required=True, help="left node features (svmlight)")
    p.add_argument("--b", default=None,
                   help="right node features; omit for an undirected graph")
    p.add_argument("--pairs", required=True, help="positive pairs, 'i j' lines")
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--test-negative-cap", type=int, default=200_000)
    p.add_argument("--out", default=None, help="optionally save the model")
    _add_train_flags(p)
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("bench", help="solver comparison traces to CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="trace CSV to write")
    p.add_argument("--solvers", default="cd,adagrad")
    p.add_argument("--degrees", default="2,3,4")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--rank", type=int, default=10)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--learning-rate", type=float, default=0.001)
    p.add_argument("--loss", default="squared", choices=["squared", "logistic"])
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (OSError, ValueError, RuntimeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
