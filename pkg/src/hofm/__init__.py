"""Higher-order factorization machines on sparse data.

Linear-time ANOVA-kernel evaluation and gradients, coordinate-descent
and AdaGrad solvers, shared-parameter model variants, and a
link-prediction evaluation harness.  ``BACKEND`` names the numeric core
in use ('c' for the compiled extension, 'python' for the fallback).
"""

from .backend import BACKEND
from .data import LinkDataset, load_svmlight, dump_svmlight, split_links
from .evaluate import auc, rmse, run_solver_comparison
from .model import (
    HofmModel,
    load_model,
    predict,
    predict_many,
    save_model,
)
from .solvers import FitResult, TrainConfig, fit, objective
from .sparse import SampleMatrix, SparseVector

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "FitResult",
    "HofmModel",
    "LinkDataset",
    "SampleMatrix",
    "SparseVector",
    "TrainConfig",
    "auc",
    "dump_svmlight",
    "fit",
    "load_model",
    "load_svmlight",
    "objective",
    "predict",
    "predict_many",
    "rmse",
    "run_solver_comparison",
    "save_model",
    "split_links",
    "__version__",
]
