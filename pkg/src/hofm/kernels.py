"""ANOVA and all-subsets kernels with gradients, linear in the support size.

The degree-m ANOVA kernel of a parameter vector ``p`` and a sample ``x``
sums, over all strictly increasing index m-tuples, the products of the
matching entries of ``p`` and ``x``.  Degree 0 is defined as 1, degree 1
is the inner product, and any degree above the support size is 0.  The
all-subsets kernel multiplies ``1 + p_j x_j`` over the support, which
equals one plus the sum of the ANOVA kernels of every degree.

Two evaluation routes are provided.  The dynamic-programming route fills
a table over the support and backpropagates through it for the gradient.
The power-sum route rewrites the kernel in terms of the sums of powers
of ``p_j x_j``, needs only O(m) memory per sample, and yields both a
cheap single-coordinate derivative and a full gradient.  Both routes
cost O(nnz * m) up to an additive O(m^2) term and agree to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import impl
from .sparse import SparseVector

__all__ = [
    "DpTable",
    "AltCache",
    "anova_eval",
    "anova_grad",
    "anova_eval_all",
    "power_sums",
    "anova_eval_alt",
    "anova_coord_deriv",
    "anova_grad_alt",
    "all_subsets_eval",
    "all_subsets_grad",
]


@dataclass
class DpTable:
    """Dynamic-programming grid for one ANOVA kernel evaluation.

    ``cells[j, t]`` is the degree-t kernel of the first j support
    entries, so ``cells[:, 0] == 1``, ``cells[j, t] == 0`` for j < t,
    and the bottom-right cell is the requested value.

    Attributes
    ----------
    degree : int
        Kernel degree m; the table has m + 1 columns.
    dim_effective : int
        Number of support entries iterated; the table has
        dim_effective + 1 rows.
    cells : ndarray of shape (dim_effective + 1, degree + 1)
    """

    degree: int
    dim_effective: int
    cells: np.ndarray


@dataclass
class AltCache:
    """Per-sample statistics of the power-sum recursion.

    Attributes
    ----------
    degree : int
        Highest kernel degree m held.
    a : ndarray of shape (degree + 1,)
        ANOVA kernel values of degrees 0..m; ``a[0] == 1``.
    dpow : ndarray of shape (degree + 1,)
        Power sums of the support products; ``dpow[t]`` for t >= 1 is
        the sum of (p_j x_j)^t, and ``dpow[0]`` is unused (kept 0).
    """

    degree: int
    a: np.ndarray
    dpow: np.ndarray


def _support_products(p, x):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] != x.dim:
        raise ValueError(
            "p has shape %r, expected (%d,) to match x.dim" % (p.shape, x.dim))
    return p[x.indices] * x.values


def anova_eval(p, x, m):
    """Evaluate the degree-m ANOVA kernel of p and x.

    Parameters
    ----------
    p : array-like of shape (x.dim,)
        Parameter vector.
    x : SparseVector
        Sample.
    m : int
        Kernel degree, >= 0.

    Returns
    -------
    value : float
        The kernel value; 1 when m = 0, and 0 when m exceeds the
        support size of x.
    table : DpTable
        The filled grid, reusable by anova_grad.
    """
    if m < 0:
        raise ValueError("degree must be >= 0, got %d" % m)
    z = _support_products(p, x)
    cells = np.empty((x.nnz + 1, m + 1))
    value = impl.anova_table(z, m, cells)
    return value, DpTable(degree=m, dim_effective=x.nnz, cells=cells)


def anova_grad(p, x, m, table):
    """Gradient of the degree-m ANOVA kernel with respect to p.

    Reverse-mode pass over a table produced by ``anova_eval`` on the
    same arguments.  The result lives on the support of x.

    Parameters
    ----------
    p : array-like of shape (x.dim,)
    x : SparseVector
    m : int
    table : DpTable
        Output of ``anova_eval(p, x, m)``.

    Returns
    -------
    gradient : SparseVector
        Support is a subset of the support of x (coordinates whose
        derivative is exactly zero are dropped).
    """
    if m < 0:
        raise ValueError("degree must be >= 0, got %d" % m)
    z = _support_products(p, x)
    if table.cells.shape != (x.nnz + 1, m + 1):
        raise ValueError(
            "table shape %r does not match nnz=%d, m=%d"
            % (table.cells.shape, x.nnz, m))
    out = np.empty(x.nnz)
    impl.anova_grad_from_table(z, x.values, table.cells, out)
    return SparseVector.from_support(x.dim, x.indices, out)


def anova_eval_all(p, x, m):
    """ANOVA kernel values of every degree 1..m in one DP pass.

    Returns
    -------
    values : ndarray of shape (m,)
        ``values[t - 1]`` is the degree-t kernel.
    """
    if m < 1:
        raise ValueError("degree must be >= 1, got %d" % m)
    z = _support_products(p, x)
    cells = np.empty((x.nnz + 1, m + 1))
    impl.anova_table(z, m, cells)
    return cells[x.nnz, 1:].copy()


def power_sums(p, x, m):
    """Sums of the t-th powers of the support products, t = 1..m."""
    if m < 1:
        raise ValueError("degree must be >= 1, got %d" % m)
    z = _support_products(p, x)
    out = np.empty(m + 1)
    impl.power_sums(z, m, out)
    return out[1:].copy()


def anova_eval_alt(p, x, m):
    """Degree-m ANOVA kernel through the power-sum recursion.

    Same value as ``anova_eval`` up to floating-point reordering, but
    O(m) memory; the returned cache feeds ``anova_coord_deriv``.

    Returns
    -------
    value : float
    cache : AltCache
    """
    if m < 1:
        raise ValueError("degree must be >= 1, got %d" % m)
    z = _support_products(p, x)
    avals = np.empty(m + 1)
    dvals = np.empty(m + 1)
    value = impl.anova_alt(z, m, avals, dvals)
    return value, AltCache(degree=m, a=avals, dpow=dvals)


def anova_coord_deriv(cache, p_j, x_j, m):
    """Derivative of the degree-m kernel with respect to one coordinate.

    Forward-mode pass over the cached kernel values and power sums;
    needs only (p_j, x_j) on top of the cache, so a sweep over the
    support costs O(m^2) per touched coordinate and no table.

    Parameters
    ----------
    cache : AltCache
        From ``anova_eval_alt`` on the current (p, x), degree >= m.
    p_j, x_j : float
        The coordinate's parameter and feature values; x_j must be a
        support entry (nonzero).
    m : int

    Returns
    -------
    float
        Matches the corresponding entry of ``anova_grad``.
    """
    if m < 1:
        raise ValueError("degree must be >= 1, got %d" % m)
    if m > cache.degree:
        raise ValueError(
            "cache holds degrees up to %d, requested %d" % (cache.degree, m))
    return impl.anova_coord_deriv(cache.a, cache.dpow, m, p_j, x_j)


def anova_grad_alt(p, x, m):
    """Gradient of the degree-m kernel via the power-sum recursion.

    Backpropagates through the kernel-value and power-sum adjoints and
    expands to the support with a plain Vandermonde product; equal to
    ``anova_grad`` up to rounding at O(nnz * m + m^2) cost and O(m)
    intermediate memory.
    """
    if m < 1:
        raise ValueError("degree must be >= 1, got %d" % m)
    z = _support_products(p, x)
    avals = np.empty(m + 1)
    dvals = np.empty(m + 1)
    impl.anova_alt(z, m, avals, dvals)
    out = np.empty(x.nnz)
    impl.anova_grad_alt(z, x.values, avals, dvals, m, out)
    return SparseVector.from_support(x.dim, x.indices, out)


def all_subsets_eval(p, x):
    """All-subsets kernel: product of (1 + p_j x_j) over the support."""
    z = _support_products(p, x)
    return impl.all_subsets_value(z)


def all_subsets_grad(p, x):
    """Gradient of the all-subsets kernel with respect to p.

    Entry j is x_j times the product of (1 + p_r x_r) over the other
    support coordinates; exact zero factors are handled without
    dividing by zero.
    """
    z = _support_products(p, x)
    out = np.empty(x.nnz)
    impl.all_subsets_grad(z, x.values, out)
    return SparseVector.from_support(x.dim, x.indices, out)
