"""Factorization-machine models: representation, prediction, persistence.

Four variants share one container:

``separate``
    Bias, linear weights and one factor matrix per interaction degree
    t = 2..m; degree-t effects use the degree-t ANOVA kernel.
``shared_augmented``
    A single factor matrix over the input plus m - 1 leading dummy
    features pinned to 1.  The dummy rows act as per-column mixing
    weights over degrees 1..m of the un-augmented input, so one matrix
    learns an inhomogeneous polynomial; no separate linear term.
``all_subsets``
    A single factor matrix scored with the all-subsets kernel (every
    interaction order at once); bias only.
``fm2``
    The classic degree-2 machine; same fields as separate with m = 2,
    kept distinct so the quadratic-expansion fast path stays an
    independent cross-check of the generic route.

Prediction routes deliberately differ per entry point: ``predict``
walks the dynamic-programming kernels one sample at a time, while
``predict_many`` calls the batched backend; tests hold them to each
other.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .backend import impl
from .sparse import SampleMatrix, SparseVector

__all__ = [
    "HofmModel",
    "ThetaWeights",
    "ModelFormatError",
    "predict",
    "predict_many",
    "predict_fm2_fast",
    "augment_input",
    "augment_matrix",
    "gamma_to_theta",
    "combination_weight",
    "save_model",
    "load_model",
]

VARIANTS = ("separate", "shared_augmented", "all_subsets", "fm2")


@dataclass
class HofmModel:
    """Trained model state for any variant.

    Attributes
    ----------
    variant : str
        One of 'separate', 'shared_augmented', 'all_subsets', 'fm2'.
    d : int
        Input dimensionality before any augmentation.
    bias : float
    degree : int or None
        Highest interaction degree m; None for all_subsets.
    w : ndarray of shape (d,) or None
        Linear weights; present for separate and fm2 only.
    factors : list of ndarray
        separate: matrices of shape (d, k_t) for t = 2..m, in degree
        order.  shared_augmented: one (d + m - 1, k) matrix whose first
        m - 1 rows are the dummy-feature rows.  all_subsets and fm2:
        one (d, k) matrix.
    """

    variant: str
    d: int
    bias: float
    degree: int | None
    w: np.ndarray | None
    factors: list = field(default_factory=list)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError("unknown variant %r" % (self.variant,))
        if self.d < 1:
            raise ValueError("d must be positive")
        self.bias = float(self.bias)
        self.factors = [np.ascontiguousarray(P, dtype=np.float64)
                        for P in self.factors]
        if self.w is not None:
            self.w = np.ascontiguousarray(self.w, dtype=np.float64)
            if self.w.shape != (self.d,):
                raise ValueError("w has shape %r, expected (%d,)"
                                 % (self.w.shape, self.d))
        if self.variant == "all_subsets":
            if self.degree is not None:
                raise ValueError("all_subsets has no degree")
            if self.w is not None:
                raise ValueError("all_subsets has no linear term")
            self._check_factor_shapes([self.d])
        else:
            if self.degree is None or self.degree < 2:
                raise ValueError("degree must be >= 2")
            if self.variant == "fm2" and self.degree != 2:
                raise ValueError("fm2 requires degree 2")
            if self.variant in ("separate", "fm2"):
                if self.w is None:
                    raise ValueError("%s requires linear weights" % self.variant)
                rows = [self.d] * (self.degree - 1 if self.variant == "separate" else 1)
            else:
                if self.w is not None:
                    raise ValueError("shared_augmented has no separate linear term")
                rows = [self.d + self.degree - 1]
            self._check_factor_shapes(rows)

    def _check_factor_shapes(self, expected_rows):
        if len(self.factors) != len(expected_rows):
            raise ValueError("expected %d factor matrices, got %d"
                             % (len(expected_rows), len(self.factors)))
        for P, rows in zip(self.factors, expected_rows):
            if P.ndim != 2 or P.shape[0] != rows or P.shape[1] < 1:
                raise ValueError("factor matrix has shape %r, expected (%d, k)"
                                 % (P.shape, rows))

    @property
    def ranks(self):
        return [P.shape[1] for P in self.factors]

    def factor(self, t):
        """Factor matrix for interaction degree t (separate variant)."""
        if self.variant != "separate":
            raise ValueError("per-degree factors exist only for 'separate'")
        if not 2 <= t <= self.degree:
            raise ValueError("degree %d outside [2, %d]" % (t, self.degree))
        return self.factors[t - 2]

    def gamma(self):
        """Dummy-row view (m - 1, k) of a shared_augmented factor matrix."""
        if self.variant != "shared_augmented":
            raise ValueError("gamma exists only for 'shared_augmented'")
        return self.factors[0][: self.degree - 1, :]


@dataclass
class ThetaWeights:
    """Per-degree mixing weights theta[0..m-1], theta[t-1] scaling A^t."""

    theta: np.ndarray


class ModelFormatError(ValueError):
    """Malformed model file; carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def _check_x(model, x):
    if x.dim != model.d:
        raise ValueError("x.dim=%d does not match model d=%d" % (x.dim, model.d))


def predict(model, x):
    """Model output for one sample.

    Parameters
    ----------
    model : HofmModel
    x : SparseVector
        Dimension must equal ``model.d``; for shared_augmented the
        dummy features are added internally.

    Returns
    -------
    float
    """
    _check_x(model, x)
    out = model.bias
    if model.variant == "all_subsets":
        for s in range(model.factors[0].shape[1]):
            out += kernels.all_subsets_eval(model.factors[0][:, s], x)
        return out
    if model.variant == "shared_augmented":
        xa = augment_input(x, model.degree)
        P = model.factors[0]
        for s in range(P.shape[1]):
            out += kernels.anova_eval(P[:, s], xa, model.degree)[0]
        return out
    out += float(model.w[x.indices] @ x.values)
    for P, t in zip(model.factors, range(2, (model.degree or 2) + 1)):
        for s in range(P.shape[1]):
            out += kernels.anova_eval(P[:, s], x, t)[0]
    return out


def predict_many(model, X):
    """Model outputs for every row of a SampleMatrix, batched."""
    if X.d != model.d:
        raise ValueError("X.d=%d does not match model d=%d" % (X.d, model.d))
    out = np.full(X.n, model.bias)
    if model.variant == "all_subsets":
        impl.predict_all_subsets_batch(model.factors[0], X.indptr, X.indices,
                                       X.data, out)
        return out
    if model.variant == "shared_augmented":
        Xa = augment_matrix(X, model.degree)
        impl.predict_anova_batch(model.factors[0], model.degree,
                                 Xa.indptr, Xa.indices, Xa.data, out)
        return out
    out += X.dot(model.w)
    for P, t in zip(model.factors, range(2, model.degree + 1)):
        impl.predict_anova_batch(P, t, X.indptr, X.indices, X.data, out)
    return out


def predict_fm2_fast(model, x):
    """Degree-2 prediction through the quadratic expansion.

    Computes bias + <w, x> + half of (|P^T x|^2 minus the sum of the
    squared per-column products), touching each stored entry twice per
    column.  Agrees with ``predict`` on fm2 models to rounding; kept as
    an independent route rather than a shared code path.
    """
    if model.variant != "fm2":
        raise ValueError("predict_fm2_fast requires variant 'fm2'")
    _check_x(model, x)
    zmat = model.factors[0][x.indices, :] * x.values[:, None]
    lin = zmat.sum(axis=0)
    sq = (zmat * zmat).sum(axis=0)
    return (model.bias + float(model.w[x.indices] @ x.values)
            + 0.5 * float((lin * lin - sq).sum()))


# ---------------------------------------------------------------------------
# Augmentation machinery
# ---------------------------------------------------------------------------

def augment_input(x, m):
    """Prepend m - 1 dummy features pinned to 1.

    The result has dimension ``x.dim + m - 1``; original indices shift
    up by m - 1.
    """
    if m < 2:
        raise ValueError("degree must be >= 2, got %d" % m)
    pad = m - 1
    indices = np.concatenate([np.arange(pad, dtype=np.int64), x.indices + pad])
    values = np.concatenate([np.ones(pad), x.values])
    return SparseVector(x.dim + pad, indices, values)


def augment_matrix(X, m):
    """Row-wise counterpart of augment_input for a SampleMatrix."""
    if m < 2:
        raise ValueError("degree must be >= 2, got %d" % m)
    pad = m - 1
    ones = sp.csr_matrix(np.ones((X.n, pad)))
    return SampleMatrix.from_scipy(sp.hstack([ones, X.tocsr()], format="csr"),
                                   d=X.d + pad)


def gamma_to_theta(gamma):
    """Per-degree weights induced by dummy-feature values.

    A degree-m kernel over an input with m - 1 dummy ones in front
    expands into a weighted sum of the degrees 1..m of the original
    input; the weight on degree t is the elementary symmetric
    polynomial of order m - t in the gamma values.

    Parameters
    ----------
    gamma : array-like of shape (m - 1,)
        Dummy-row values of one factor column.

    Returns
    -------
    ThetaWeights
        theta[t - 1] multiplies the degree-t kernel; theta[m - 1] is 1.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.ndim != 1 or gamma.size < 1:
        raise ValueError("gamma must be a vector of length m - 1 >= 1")
    m = gamma.size + 1
    e = np.zeros(m)
    e[0] = 1.0
    for g in gamma:  # running elementary symmetric polynomials
        e[1:] = e[1:] + g * e[:-1]
    return ThetaWeights(theta=e[::-1].copy())


def combination_weight(model, t, indices):
    """Interaction weight of one feature tuple in a separate-variant model.

    Returns the coefficient of the product of the features in
    ``indices`` as induced by the degree-t factors: the sum over
    columns of the per-column entry products.
    """
    if model.variant != "separate":
        raise ValueError("combination weights exist only for 'separate'")
    if not 2 <= t <= model.degree:
        raise ValueError("degree %d outside [2, %d]" % (t, model.degree))
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size != t:
        raise ValueError("expected %d indices, got %d" % (t, idx.size))
    if np.any(np.diff(idx) <= 0):
        raise ValueError("indices must be strictly increasing (distinct)")
    if idx[0] < 0 or idx[-1] >= model.d:
        raise ValueError("index out of range [0, d)")
    P = model.factor(t)
    return float(P[idx, :].prod(axis=0).sum())


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

_HEADER = "hofm-model v1"
_FIELD_RE = re.compile(r"^variant=(\S+) d=(\d+) m=(\d+) bias=(\S+)$")


def _fmt(values):
    return " ".join("%.17g" % v for v in np.atleast_1d(values))


def save_model(model, sink):
    """Write a model as line-oriented text; see load_model for the format."""
    arrays = list(model.factors) + ([model.w] if model.w is not None else [])
    if not all(np.all(np.isfinite(a)) for a in arrays) or not math.isfinite(model.bias):
        raise ValueError("refusing to serialize non-finite model values")
    close = False
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        sink = open(sink, "w")
        close = True
    try:
        sink.write(_HEADER + "\n")
        m = 0 if model.degree is None else model.degree
        sink.write("variant=%s d=%d m=%d bias=%.17g\n"
                   % (model.variant, model.d, m, model.bias))
        if model.w is not None:
            sink.write("w: %s\n" % _fmt(model.w))
        degrees = (range(2, m + 1) if model.variant == "separate"
                   else [m])  # all_subsets uses the m=0 sentinel
        for P, t in zip(model.factors, degrees):
            sink.write("P t=%d rows=%d cols=%d\n" % (t, P.shape[0], P.shape[1]))
            for r in range(P.shape[0]):
                sink.write(_fmt(P[r]) + "\n")
    finally:
        if close:
            sink.close()


class _LineReader:
    def __init__(self, source):
        self.lines = source.read().splitlines()
        self.pos = 0

    def next(self, what):
        if self.pos >= len(self.lines):
            raise ModelFormatError("unexpected end of file, wanted %s" % what,
                                   line=len(self.lines) + 1)
        self.pos += 1
        return self.lines[self.pos - 1]

    def peek(self):
        return self.lines[self.pos] if self.pos < len(self.lines) else None


def _parse_reals(text, count, line):
    parts = text.split()
    if len(parts) != count:
        raise ModelFormatError("expected %d values, found %d" % (count, len(parts)),
                               line=line)
    try:
        out = np.array([float(p) for p in parts])
    except ValueError:
        raise ModelFormatError("unparseable real value", line=line) from None
    if not np.all(np.isfinite(out)):
        raise ModelFormatError("non-finite value", line=line)
    return out


def load_model(source):
    """Read a model written by save_model.

    The format is line-oriented text: a version line ``hofm-model v1``,
    a field line ``variant=<name> d=<int> m=<int> bias=<real>`` (m = 0
    stands for the degree-free all_subsets variant), an optional
    ``w: <d reals>`` line, then one ``P t=<degree> rows=<r> cols=<c>``
    block per factor matrix with one row per line.

    Raises
    ------
    ModelFormatError
        On any structural problem; carries the 1-based line number.
    """
    close = False
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        source = open(source)
        close = True
    try:
        rd = _LineReader(source)
    finally:
        if close:
            source.close()

    if rd.next("version header") != _HEADER:
        raise ModelFormatError("bad version header, expected %r" % _HEADER, line=1)
    fields = _FIELD_RE.match(rd.next("model fields"))
    if fields is None:
        raise ModelFormatError("malformed field line", line=2)
    variant = fields.group(1)
    if variant not in VARIANTS:
        raise ModelFormatError("unknown variant %r" % variant, line=2)
    d = int(fields.group(2))
    m = int(fields.group(3))
    try:
        bias = float(fields.group(4))
    except ValueError:
        raise ModelFormatError("unparseable bias", line=2) from None
    if not math.isfinite(bias):
        raise ModelFormatError("non-finite bias", line=2)
    if (m == 0) != (variant == "all_subsets"):
        raise ModelFormatError("m=0 is reserved for variant=all_subsets", line=2)

    w = None
    nxt = rd.peek()
    if nxt is not None and nxt.startswith("w:"):
        line_no = rd.pos + 1
        w = _parse_reals(rd.next("w")[2:], d, line_no)

    expected_ts = ([0] if variant == "all_subsets"
                   else list(range(2, m + 1)) if variant == "separate"
                   else [m])
    factors = []
    for t_want in expected_ts:
        line_no = rd.pos + 1
        head = rd.next("factor header")
        mt = re.match(r"^P t=(\d+) rows=(\d+) cols=(\d+)$", head)
        if mt is None:
            raise ModelFormatError("malformed factor header", line=line_no)
        t, rows, cols = (int(g) for g in mt.groups())
        if t != t_want:
            raise ModelFormatError("factor degree %d out of order, expected %d"
                                   % (t, t_want), line=line_no)
        want_rows = d + m - 1 if variant == "shared_augmented" else d
        if rows != want_rows:
            raise ModelFormatError("declared rows=%d, expected %d" % (rows, want_rows),
                                   line=line_no)
        if cols < 1:
            raise ModelFormatError("cols must be positive", line=line_no)
        P = np.empty((rows, cols))
        for r in range(rows):
            line_no = rd.pos + 1
            P[r] = _parse_reals(rd.next("factor row"), cols, line_no)
        factors.append(P)
    if rd.peek() is not None:
        raise ModelFormatError("trailing content", line=rd.pos + 1)

    try:
        return HofmModel(variant=variant, d=d, bias=bias,
                         degree=None if m == 0 else m, w=w, factors=factors)
    except ValueError as exc:
        raise ModelFormatError(str(exc), line=2) from None
