"""Metrics and the solver-comparison harness.

AUC follows the probabilistic definition: the chance that a random
positive scores above a random negative, ties counting one half.  The
comparison harness trains one model per (solver, degree) cell from a
shared seed and collects the per-epoch objective/time traces into one
CSV-friendly table.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .solvers import TrainConfig, fit

__all__ = [
    "UndefinedMetricError",
    "auc",
    "rmse",
    "ComparisonCell",
    "SolverComparison",
    "run_solver_comparison",
]


class UndefinedMetricError(ValueError):
    """The metric is undefined on this input (e.g. single-class AUC)."""


def auc(labels, scores):
    """Area under the ROC curve via rank statistics, O(n log n).

    Parameters
    ----------
    labels : array-like
        Binary labels; entries > 0 are the positive class (so both
        0/1 and -1/+1 conventions work).
    scores : array-like
        Real-valued rankings; higher means more positive.

    Returns
    -------
    float in [0, 1]
        Correctly ordered positive-negative pairs, ties worth one half,
        divided by the number of pairs.
    """
    labels = np.asarray(labels, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise ValueError("labels and scores must be equal-length vectors")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    pos = labels > 0
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    ranks = rankdata(scores)  # average ranks implement the half-tie rule
    pos_rank_sum = float(ranks[pos].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def rmse(targets, predictions):
    """Root mean squared error."""
    targets = np.asarray(targets, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    if targets.shape != predictions.shape or targets.size == 0:
        raise ValueError("targets and predictions must be equal nonempty shape")
    return float(np.sqrt(np.mean((targets - predictions) ** 2)))


@dataclass
class ComparisonCell:
    """Trace of one (solver, degree) training run; error text if it failed."""

    solver: str
    degree: int
    trace: list
    error: str | None = None


@dataclass
class SolverComparison:
    """All cells of one comparison run."""

    cells: list

    def to_csv(self, sink):
        """Write `solver,m,epoch,objective,seconds` rows for every cell."""
        close = False
        if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
            sink = open(sink, "w")
            close = True
        try:
            sink.write("solver,m,epoch,objective,seconds\n")
            for cell in self.cells:
                for rec in cell.trace:
                    sink.write("%s,%d,%d,%.17g,%.6f\n"
                               % (cell.solver, cell.degree, rec.epoch,
                                  rec.objective, rec.seconds))
        finally:
            if close:
                sink.close()

    def cell(self, solver, degree):
        for c in self.cells:
            if c.solver == solver and c.degree == degree:
                return c
        raise KeyError((solver, degree))


def run_solver_comparison(X, y, degrees, solvers=("cd", "adagrad"),
                          config=None, variant="shared_augmented",
                          loss="squared"):
    """Train one model per (solver, degree) cell and collect traces.

    Every cell starts from the same seed, so cells of equal degree share
    their initialization and epoch-0 objective.  The default variant
    trains a single factor matrix per cell (degree mixing through the
    dummy features), which keeps one kernel block per epoch and makes
    the per-epoch cost comparison across degrees direct.  A failing
    cell records its error text and leaves the other cells untouched.

    Parameters
    ----------
    X : SampleMatrix
    y : array-like
    degrees : iterable of int
    solvers : iterable of str, from {'cd', 'adagrad'}
    config : TrainConfig, optional
        Template; each cell overrides ``degree`` and ``solver``.
    variant, loss : forwarded to fit().

    Returns
    -------
    SolverComparison
    """
    if config is None:
        config = TrainConfig(tol=0.0)
    cells = []
    for solver in solvers:
        if solver not in ("cd", "adagrad"):
            raise ValueError("unknown solver %r" % (solver,))
        for m in degrees:
            cell_cfg = dataclasses.replace(config, solver=solver, degree=int(m))
            try:
                result = fit(X, y, cell_cfg, variant=variant, loss=loss)
                cells.append(ComparisonCell(solver=solver, degree=int(m),
                                            trace=result.trace))
            except Exception as exc:  # keep remaining cells running
                cells.append(ComparisonCell(solver=solver, degree=int(m),
                                            trace=[], error=str(exc)))
    return SolverComparison(cells=cells)
