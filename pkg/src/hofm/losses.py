"""Loss functions for regression and binary classification.

Each loss carries its smoothness constant mu (a bound on the second
derivative in the prediction), which scales the coordinate-descent step
size.  Logistic targets are encoded as -1/+1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import _python as _ref

__all__ = ["LossFunction", "SQUARED", "LOGISTIC", "get_loss"]


def _squared_value(y, pred):
    diff = pred - y
    return 0.5 * diff * diff


def _logistic_value(y, pred):
    # log(1 + exp(-t)) without overflow on either tail
    t = y * pred
    return np.where(t >= 0, np.log1p(np.exp(-np.abs(t))),
                    -t + np.log1p(np.exp(-np.abs(t))))


def _squared_deriv(y, pred):
    return pred - y


def _logistic_deriv(y, pred):
    t = y * pred
    e = np.exp(-np.abs(t))
    return np.where(t >= 0, -y * e / (1.0 + e), -y / (1.0 + e))


@dataclass(frozen=True)
class LossFunction:
    """A mu-smooth loss with elementwise value and derivative.

    Attributes
    ----------
    kind : str
        'squared' or 'logistic'.
    code : int
        Integer tag understood by the numeric backends.
    mu : float
        Smoothness constant: 1 for squared, 1/4 for logistic.
    """

    kind: str
    code: int
    mu: float

    def value(self, y, pred):
        if self.code == _ref.LOSS_SQUARED:
            return _squared_value(np.asarray(y, float), np.asarray(pred, float))
        return _logistic_value(np.asarray(y, float), np.asarray(pred, float))

    def deriv(self, y, pred):
        if self.code == _ref.LOSS_SQUARED:
            return _squared_deriv(np.asarray(y, float), np.asarray(pred, float))
        return _logistic_deriv(np.asarray(y, float), np.asarray(pred, float))

    def check_targets(self, y):
        y = np.asarray(y, dtype=np.float64)
        if not np.all(np.isfinite(y)):
            raise ValueError("targets must be finite")
        if self.code == _ref.LOSS_LOGISTIC and not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("logistic loss expects targets in {-1, +1}")
        return y


SQUARED = LossFunction(kind="squared", code=_ref.LOSS_SQUARED, mu=1.0)
LOGISTIC = LossFunction(kind="logistic", code=_ref.LOSS_LOGISTIC, mu=0.25)

_BY_NAME = {"squared": SQUARED, "logistic": LOGISTIC}


def get_loss(name):
    """Look up a loss by name ('squared' or 'logistic')."""
    if isinstance(name, LossFunction):
        return name
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError("unknown loss %r; expected one of %s"
                         % (name, sorted(_BY_NAME))) from None
