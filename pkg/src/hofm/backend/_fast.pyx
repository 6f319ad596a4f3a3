# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled numeric core.

Twin of ``hofm.backend._python``: same functions, same signatures, same
semantics, written as C loops.  Tests hold the two modules to each
other; behavioral changes must land in both.

The kernel recursions exist twice here: once over 1-D views for the
public entry points, and once indexed by a row/column position so the
solver loops never materialize per-sample subviews.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, log1p, sqrt

cdef extern from *:
    r"""
    #include <math.h>

    #if defined(__GNUC__) && !defined(__clang__)
    #define HOFM_HOT __attribute__((optimize("O3", "tree-vectorize", \
                                             "no-math-errno")))
    #else
    #define HOFM_HOT
    #endif

    /* AdaGrad update of the k coordinates in one touched row.  Plain C
       with restrict so the compiler can vectorize the sqrt/div chain;
       the equivalent memoryview loop carries runtime strides and alias
       checks that defeat it.  Returns 0.0 iff every updated coordinate
       is finite: x - x is exactly 0.0 for finite x and NaN otherwise,
       and a NaN term makes the sum compare unequal to zero. */
    HOFM_HOT static double
    hofm_adagrad_row(double *restrict p, double *restrict acc,
                     const double *restrict grad, double dloss, double beta,
                     double lr, double eps, long k)
    {
        double chk = 0.0;
        long s;
        for (s = 0; s < k; s++) {
            double g = dloss * grad[s] + beta * p[s];
            acc[s] += g * g;
            p[s] -= lr * g / (sqrt(acc[s]) + eps);
            chk += p[s] - p[s];
        }
        return chk;
    }

    /* z row for one touched feature: z[s] = p[s] * x over the k columns. */
    HOFM_HOT static void
    hofm_zs_row(double *restrict z, const double *restrict p, double x,
                long k)
    {
        long s;
        for (s = 0; s < k; s++)
            z[s] = p[s] * x;
    }

    /* Degree-m kernel value for one factor column via the rolling O(m)
       recurrence; a is (m+1) scratch.  The column's z values sit in zT
       at stride ldz starting at offset s. */
    static double
    hofm_anova_fwd(const double *restrict zT, long ldz, long s,
                   double *restrict a, long nz, int m)
    {
        long j;
        int t, hi;
        a[0] = 1.0;
        for (t = 1; t <= m; t++)
            a[t] = 0.0;
        for (j = 0; j < nz; j++) {
            const double zj = zT[j * ldz + s];
            hi = m < j + 1 ? m : (int)(j + 1);
            for (t = hi; t >= 1; t--)
                a[t] += zj * a[t - 1];
        }
        return a[m];
    }

    /* Forward DP table for one factor column.  tab is (nz+1) x (m+1)
       row-major; the column's z values sit in zT at stride ldz starting
       at offset s.  Returns the degree-m kernel value tab[nz][m]. */
    static double
    hofm_tab_fill(double *restrict tab, const double *restrict zT, long ldz,
                  long s, long nz, int m)
    {
        const long ld = m + 1;
        long j;
        int t;
        tab[0] = 1.0;
        for (t = 1; t <= m; t++)
            tab[t] = 0.0;
        for (j = 1; j <= nz; j++) {
            const double zj = zT[(j - 1) * ldz + s];
            double *row = tab + j * ld;
            const double *prev = row - ld;
            row[0] = 1.0;
            for (t = 1; t <= m; t++)
                row[t] = prev[t] + zj * prev[t - 1];
        }
        return tab[nz * ld + m];
    }

    /* Reverse sweep over a filled DP table; writes the kernel gradient
       for column s into gT (same stride/offset convention as zT).  adj
       is (nz+1) x (m+2) scratch; every cell read is written first, so
       it carries no state between calls. */
    static void
    hofm_grad_into(const double *restrict tab, const double *restrict zT,
                   const double *restrict x, double *restrict adj,
                   double *restrict gT, long ldz, long s, long nz, int m)
    {
        const long lda = m + 2, ld = m + 1;
        double *top;
        long j, r;
        int t;
        if (m == 0) {
            for (r = 0; r < nz; r++)
                gT[r * ldz + s] = 0.0;
            return;
        }
        top = adj + nz * lda;
        for (t = 1; t <= m + 1; t++)
            top[t] = 0.0;
        top[m] = 1.0;
        for (j = nz - 1; j >= 1; j--) {
            const double zj = zT[j * ldz + s];
            double *row = adj + j * lda;
            const double *nxt = row + lda;
            for (t = 1; t <= m; t++)
                row[t] = nxt[t] + zj * nxt[t + 1];
            row[m + 1] = 0.0;
        }
        for (r = 0; r < nz; r++) {
            const double *arow = adj + (r + 1) * lda;
            const double *trow = tab + r * ld;
            double acc = 0.0;
            for (t = 1; t <= m; t++)
                acc += arow[t] * trow[t - 1];
            gT[r * ldz + s] = acc * x[r];
        }
    }
    """
    double hofm_adagrad_row(double* p, double* acc, const double* grad,
                            double dloss, double beta, double lr, double eps,
                            long k) nogil
    void hofm_zs_row(double* z, const double* p, double x, long k) nogil
    double hofm_anova_fwd(const double* zT, long ldz, long s, double* a,
                          long nz, int m) nogil
    double hofm_tab_fill(double* tab, const double* zT, long ldz, long s,
                         long nz, int m) nogil
    void hofm_grad_into(const double* tab, const double* zT, const double* x,
                        double* adj, double* gT, long ldz, long s, long nz,
                        int m) nogil

cnp.import_array()

ctypedef cnp.int64_t i64

BACKEND_NAME = "c"

LOSS_SQUARED = 0
LOSS_LOGISTIC = 1


cdef inline bint _finite(double v):
    return -INFINITY < v < INFINITY


cdef inline double _deriv(int kind, double y, double pred):
    cdef double t, e
    if kind == LOSS_SQUARED:
        return pred - y
    t = y * pred
    if t >= 0.0:
        e = exp(-t)
        return -y * e / (1.0 + e)
    return -y / (1.0 + exp(t))


cdef inline double _value(int kind, double y, double pred):
    cdef double t
    if kind == LOSS_SQUARED:
        return 0.5 * (pred - y) * (pred - y)
    t = y * pred
    if t >= 0.0:
        return log1p(exp(-t))
    return -t + log1p(exp(t))


def _loss_deriv(kind, y, pred):
    """Pointwise loss derivative; python-visible wrapper for tests."""
    return _deriv(kind, y, pred)


def _loss_value(kind, y, pred):
    """Pointwise loss value; python-visible wrapper for tests."""
    return _value(kind, y, pred)


# ---------------------------------------------------------------------------
# ANOVA kernel primitives
# ---------------------------------------------------------------------------

def anova_value(double[::1] z, int m):
    """Degree-m ANOVA kernel from support products, O(nnz * m) time, O(m) memory."""
    cdef double[::1] a = np.zeros(m + 1)
    cdef Py_ssize_t j
    cdef int t, hi
    a[0] = 1.0
    for j in range(z.shape[0]):
        hi = m if m < j + 1 else <int> (j + 1)
        for t in range(hi, 0, -1):
            a[t] += z[j] * a[t - 1]
    return a[m]


def anova_table(double[::1] z, int m, double[:, ::1] table):
    """Fill the (nnz+1, m+1) DP table row by row; returns the kernel value."""
    cdef Py_ssize_t nz = z.shape[0], j
    cdef int t
    for j in range(nz + 1):
        table[j, 0] = 1.0
        for t in range(1, m + 1):
            table[j, t] = 0.0
    for j in range(1, nz + 1):
        for t in range(1, m + 1):
            table[j, t] = table[j - 1, t] + z[j - 1] * table[j - 1, t - 1]
    return table[nz, m]


def anova_grad_from_table(double[::1] z, double[::1] xv, double[:, ::1] table,
                          double[::1] out):
    """Reverse-mode gradient of the degree-m kernel w.r.t. p, on the support."""
    cdef Py_ssize_t nz = z.shape[0], j, r
    cdef int m = <int> (table.shape[1] - 1), t
    cdef double acc
    cdef double[:, ::1] adj
    if m == 0:
        for r in range(nz):
            out[r] = 0.0
        return
    adj = np.zeros((nz + 1, m + 2))
    adj[nz, m] = 1.0
    for j in range(nz - 1, 0, -1):
        for t in range(1, m + 1):
            adj[j, t] = adj[j + 1, t] + z[j] * adj[j + 1, t + 1]
    for r in range(nz):
        acc = 0.0
        for t in range(1, m + 1):
            acc += adj[r + 1, t] * table[r, t - 1]
        out[r] = acc * xv[r]


def power_sums(double[::1] z, int m, double[::1] out):
    """out[t] = sum_j z_j^t for t = 1..m; out[0] is set to 0."""
    cdef Py_ssize_t j
    cdef int t
    cdef double pw
    for t in range(m + 1):
        out[t] = 0.0
    for j in range(z.shape[0]):
        pw = 1.0
        for t in range(1, m + 1):
            pw *= z[j]
            out[t] += pw


cdef void _anova_from_dvals(double[::1] dvals, int m, double[::1] avals):
    cdef int s, t
    cdef double acc, sign
    avals[0] = 1.0
    for s in range(1, m + 1):
        acc = 0.0
        sign = 1.0
        for t in range(1, s + 1):
            acc += sign * avals[s - t] * dvals[t]
            sign = -sign
        avals[s] = acc / s


cdef void _anova_from_dvals_i(double[:, ::1] dvals, Py_ssize_t i, int m,
                              double[:, ::1] avals):
    cdef int s, t
    cdef double acc, sign
    avals[i, 0] = 1.0
    for s in range(1, m + 1):
        acc = 0.0
        sign = 1.0
        for t in range(1, s + 1):
            acc += sign * avals[i, s - t] * dvals[i, t]
            sign = -sign
        avals[i, s] = acc / s


def anova_alt(double[::1] z, int m, double[::1] avals, double[::1] dvals):
    """Evaluate degrees 1..m through the power-sum recursion."""
    power_sums(z, m, dvals)
    _anova_from_dvals(dvals, m, avals)
    return avals[m]


cdef double _coord_deriv_i(double[:, ::1] avals, double[:, ::1] dvals,
                           Py_ssize_t i, int m, double pj, double xj,
                           double[::1] ddot, double[::1] adot):
    cdef int s, t
    cdef double pw = xj, acc, sign
    for t in range(1, m + 1):
        ddot[t] = t * pw
        pw *= pj * xj
    adot[0] = 0.0
    for s in range(1, m + 1):
        acc = 0.0
        sign = 1.0
        for t in range(1, s + 1):
            acc += sign * (adot[s - t] * dvals[i, t]
                           + avals[i, s - t] * ddot[t])
            sign = -sign
        adot[s] = acc / s
    return adot[m]


def anova_coord_deriv(double[::1] avals, double[::1] dvals, int m, double pj,
                      double xj):
    """Forward-mode derivative of the degree-m kernel w.r.t. one coordinate."""
    cdef double[::1] ddot = np.empty(m + 1)
    cdef double[::1] adot = np.empty(m + 1)
    cdef int s, t
    cdef double pw = xj, acc, sign
    for t in range(1, m + 1):
        ddot[t] = t * pw
        pw *= pj * xj
    adot[0] = 0.0
    for s in range(1, m + 1):
        acc = 0.0
        sign = 1.0
        for t in range(1, s + 1):
            acc += sign * (adot[s - t] * dvals[t] + avals[s - t] * ddot[t])
            sign = -sign
        adot[s] = acc / s
    return adot[m]


def anova_grad_alt(double[::1] z, double[::1] xv, double[::1] avals,
                   double[::1] dvals, int m, double[::1] out):
    """Reverse-mode gradient through the power-sum recursion."""
    cdef double[::1] atil = np.zeros(m + 1)
    cdef double[::1] dtil = np.empty(m + 1)
    cdef int s, t
    cdef Py_ssize_t j
    cdef double acc, sign
    if m == 0:
        for j in range(out.shape[0]):
            out[j] = 0.0
        return
    atil[m] = 1.0
    for t in range(m - 1, 0, -1):
        acc = 0.0
        for s in range(t + 1, m + 1):
            sign = 1.0 if (s - t) % 2 == 1 else -1.0  # (-1)^(s-t+1)
            acc += sign * atil[s] * dvals[s - t] / s
        atil[t] = acc
    for t in range(1, m + 1):
        acc = 0.0
        for s in range(t, m + 1):
            acc += atil[s] * avals[s - t] / s
        dtil[t] = acc if t % 2 == 1 else -acc
    for j in range(z.shape[0]):  # Horner in z over coefficients t * dtil[t]
        acc = m * dtil[m]
        for t in range(m - 1, 0, -1):
            acc = acc * z[j] + t * dtil[t]
        out[j] = acc * xv[j]


def all_subsets_value(double[::1] z):
    """Product of (1 + z_j) over the support; 1 on empty support."""
    cdef double out = 1.0
    cdef Py_ssize_t j
    for j in range(z.shape[0]):
        out *= 1.0 + z[j]
    return out


def all_subsets_grad(double[::1] z, double[::1] xv, double[::1] out):
    """Gradient of the all-subsets kernel w.r.t. p on the support."""
    cdef Py_ssize_t j, r
    cdef double total = 1.0, loo
    for j in range(z.shape[0]):
        total *= 1.0 + z[j]
    for j in range(z.shape[0]):
        if 1.0 + z[j] == 0.0:
            loo = 1.0
            for r in range(z.shape[0]):
                if r != j:
                    loo *= 1.0 + z[r]
            out[j] = xv[j] * loo
        else:
            out[j] = xv[j] * total / (1.0 + z[j])


# ---------------------------------------------------------------------------
# Batch prediction over CSR rows
# ---------------------------------------------------------------------------

def predict_anova_batch(double[:, ::1] P, int m, i64[::1] indptr,
                        i64[::1] indices, double[::1] data, double[::1] out):
    """out[i] += sum over columns s of A^m(P[:, s], x_i)."""
    cdef Py_ssize_t n = out.shape[0], k = P.shape[1], i, s, r, nz, nz_max = 0
    cdef i64 lo
    cdef double acc
    cdef double[:, ::1] zsT
    cdef double[::1] a = np.empty(m + 1)
    for i in range(indptr.shape[0] - 1):
        if indptr[i + 1] - indptr[i] > nz_max:
            nz_max = indptr[i + 1] - indptr[i]
    zsT = np.empty((nz_max if nz_max else 1, k))
    for i in range(n):
        lo = indptr[i]
        nz = indptr[i + 1] - lo
        for r in range(nz):
            hofm_zs_row(&zsT[r, 0], &P[indices[lo + r], 0], data[lo + r], k)
        acc = 0.0
        for s in range(k):
            acc += hofm_anova_fwd(&zsT[0, 0], k, s, &a[0], nz, m)
        out[i] += acc


def predict_all_subsets_batch(double[:, ::1] P, i64[::1] indptr,
                              i64[::1] indices, double[::1] data,
                              double[::1] out):
    """out[i] += sum over columns s of the all-subsets kernel S(P[:, s], x_i)."""
    cdef Py_ssize_t n = out.shape[0], k = P.shape[1], i, s
    cdef i64 lo, hi, r
    cdef double acc, v
    for i in range(n):
        lo = indptr[i]
        hi = indptr[i + 1]
        acc = 0.0
        for s in range(k):
            v = 1.0
            for r in range(lo, hi):
                v *= 1.0 + P[indices[r], s] * data[r]
            acc += v
        out[i] += acc


# ---------------------------------------------------------------------------
# Coordinate descent
# ---------------------------------------------------------------------------

def rebuild_anova_caches(double[::1] p, int m, i64[::1] indptr,
                         i64[::1] indices, double[::1] data,
                         double[:, ::1] avals, double[:, ::1] dvals):
    """Recompute the per-sample kernel/power-sum caches for one column p."""
    cdef Py_ssize_t n = avals.shape[0], i
    cdef i64 r
    cdef int t
    cdef double zj, pw
    for i in range(n):
        for t in range(m + 1):
            dvals[i, t] = 0.0
        for r in range(indptr[i], indptr[i + 1]):
            zj = p[indices[r]] * data[r]
            pw = 1.0
            for t in range(1, m + 1):
                pw *= zj
                dvals[i, t] += pw
        _anova_from_dvals_i(dvals, i, m, avals)


def cd_epoch_anova(double[:, ::1] P, Py_ssize_t s, int m, i64[::1] csc_indptr,
                   i64[::1] csc_rows, double[::1] csc_vals, double[::1] y,
                   double[::1] y_hat, double[:, ::1] avals,
                   double[:, ::1] dvals, int loss_kind, double mu,
                   double beta):
    """One cyclic pass over the features of column s; returns sum |delta|.

    For each coordinate: Newton-style step with the mu-smooth step size,
    then incremental resync of the power sums, the kernel values and the
    prediction cache for every sample touching that feature.

    Each step is applied tentatively and kept only if the exact change
    in (loss sum)/n plus the ridge term is <= 0.  Exact arithmetic can
    never fail this check (the step minimizes that quantity along the
    coordinate), so a failure means the incremental caches cannot track
    the move - large steps along nearly flat high-degree directions
    push the power sums into catastrophic cancellation - and the state
    is rolled back to its exact prior bytes.
    """
    cdef Py_ssize_t n = y.shape[0], d = P.shape[0], j, r
    cdef i64 lo, hi, idx, i
    cdef int t
    cdef double p_old, p_new, grad, hess, g, step, delta, viol = 0.0
    cdef double xij, top_old, pw_old, pw_new, loss_old, loss_new, gain
    cdef double[::1] ddot = np.empty(m + 1)
    cdef double[::1] adot = np.empty(m + 1)
    cdef double[:, ::1] a_save = np.empty_like(np.asarray(avals))
    cdef double[:, ::1] d_save = np.empty_like(np.asarray(dvals))
    cdef double[::1] yh_save = np.empty(n)
    for j in range(d):
        lo = csc_indptr[j]
        hi = csc_indptr[j + 1]
        p_old = P[j, s]
        grad = 0.0
        hess = 0.0
        for idx in range(lo, hi):
            i = csc_rows[idx]
            g = _coord_deriv_i(avals, dvals, i, m, p_old, csc_vals[idx],
                               ddot, adot)
            grad += _deriv(loss_kind, y[i], y_hat[i]) * g
            hess += g * g
        step = mu * hess / n + beta
        if step == 0.0:
            continue
        delta = -(grad / n + beta * p_old) / step
        if delta == 0.0:
            continue
        p_new = p_old + delta
        loss_old = 0.0
        loss_new = 0.0
        for idx in range(lo, hi):
            i = csc_rows[idx]
            xij = csc_vals[idx]
            r = idx - lo
            yh_save[r] = y_hat[i]
            for t in range(m + 1):
                a_save[r, t] = avals[i, t]
                d_save[r, t] = dvals[i, t]
            loss_old += _value(loss_kind, y[i], y_hat[i])
            top_old = avals[i, m]
            pw_old = p_old * xij
            pw_new = p_new * xij
            for t in range(1, m + 1):
                dvals[i, t] += pw_new - pw_old
                pw_old *= p_old * xij
                pw_new *= p_new * xij
            _anova_from_dvals_i(dvals, i, m, avals)
            y_hat[i] += avals[i, m] - top_old
            loss_new += _value(loss_kind, y[i], y_hat[i])
        gain = ((loss_new - loss_old) / n
                + 0.5 * beta * (p_new * p_new - p_old * p_old))
        if gain <= 0.0:
            P[j, s] = p_new
            viol += delta if delta > 0.0 else -delta
        else:
            for idx in range(lo, hi):
                i = csc_rows[idx]
                r = idx - lo
                y_hat[i] = yh_save[r]
                for t in range(m + 1):
                    avals[i, t] = a_save[r, t]
                    dvals[i, t] = d_save[r, t]
    return viol


def cd_epoch_linear(double[::1] w, i64[::1] csc_indptr, i64[::1] csc_rows,
                    double[::1] csc_vals, double[::1] y, double[::1] y_hat,
                    int loss_kind, double mu, double beta):
    """Coordinate pass over the linear weights; returns sum |delta|."""
    cdef Py_ssize_t n = y.shape[0], j
    cdef i64 lo, hi, idx
    cdef double grad, hess, xij, step, delta, viol = 0.0
    for j in range(w.shape[0]):
        lo = csc_indptr[j]
        hi = csc_indptr[j + 1]
        grad = 0.0
        hess = 0.0
        for idx in range(lo, hi):
            xij = csc_vals[idx]
            grad += _deriv(loss_kind, y[csc_rows[idx]],
                           y_hat[csc_rows[idx]]) * xij
            hess += xij * xij
        step = mu * hess / n + beta
        if step == 0.0:
            continue
        delta = -(grad / n + beta * w[j]) / step
        if delta == 0.0:
            continue
        w[j] += delta
        viol += delta if delta > 0.0 else -delta
        for idx in range(lo, hi):
            y_hat[csc_rows[idx]] += delta * csc_vals[idx]
    return viol


def rebuild_all_subsets_cache(double[::1] p, i64[::1] indptr,
                              i64[::1] indices, double[::1] data,
                              double[::1] svals):
    """svals[i] = all-subsets kernel of column p against sample i."""
    cdef Py_ssize_t n = svals.shape[0], i
    cdef i64 r
    cdef double v
    for i in range(n):
        v = 1.0
        for r in range(indptr[i], indptr[i + 1]):
            v *= 1.0 + p[indices[r]] * data[r]
        svals[i] = v


def cd_epoch_all_subsets(double[:, ::1] P, Py_ssize_t s, i64[::1] csr_indptr,
                         i64[::1] csr_indices, double[::1] csr_data,
                         i64[::1] csc_indptr, i64[::1] csc_rows,
                         double[::1] csc_vals, double[::1] y,
                         double[::1] y_hat, double[::1] svals, int loss_kind,
                         double mu, double beta):
    """Cyclic coordinate pass for the all-subsets kernel, column s.

    Per-sample cache is the full product; leave-one-out values come from
    the quotient except across exact zero factors, where the row is
    rescanned.  Steps are tentatively applied and rolled back unless the
    coordinate objective decreases, as in cd_epoch_anova.
    """
    cdef Py_ssize_t n = y.shape[0], j, r2
    cdef i64 lo, hi, idx, i, r, col
    cdef double p_old, p_new, grad, hess, g, step, delta, viol = 0.0
    cdef double xij, f_old, loo_i, s_new, prod, loss_old, loss_new, gain
    cdef double[::1] loo = np.empty(n)
    cdef double[::1] s_save = np.empty(n)
    cdef double[::1] yh_save = np.empty(n)
    for j in range(P.shape[0]):
        lo = csc_indptr[j]
        hi = csc_indptr[j + 1]
        p_old = P[j, s]
        grad = 0.0
        hess = 0.0
        for idx in range(lo, hi):
            i = csc_rows[idx]
            xij = csc_vals[idx]
            f_old = 1.0 + p_old * xij
            if f_old == 0.0:
                prod = 1.0
                for r in range(csr_indptr[i], csr_indptr[i + 1]):
                    col = csr_indices[r]
                    if col != j:
                        prod *= 1.0 + P[col, s] * csr_data[r]
                loo_i = prod
            else:
                loo_i = svals[i] / f_old
            loo[i] = loo_i
            g = xij * loo_i
            grad += _deriv(loss_kind, y[i], y_hat[i]) * g
            hess += g * g
        step = mu * hess / n + beta
        if step == 0.0:
            continue
        delta = -(grad / n + beta * p_old) / step
        if delta == 0.0:
            continue
        p_new = p_old + delta
        loss_old = 0.0
        loss_new = 0.0
        for idx in range(lo, hi):
            i = csc_rows[idx]
            r2 = idx - lo
            yh_save[r2] = y_hat[i]
            s_save[r2] = svals[i]
            loss_old += _value(loss_kind, y[i], y_hat[i])
            s_new = loo[i] * (1.0 + p_new * csc_vals[idx])
            y_hat[i] += s_new - svals[i]
            svals[i] = s_new
            loss_new += _value(loss_kind, y[i], y_hat[i])
        gain = ((loss_new - loss_old) / n
                + 0.5 * beta * (p_new * p_new - p_old * p_old))
        if gain <= 0.0:
            P[j, s] = p_new
            viol += delta if delta > 0.0 else -delta
        else:
            for idx in range(lo, hi):
                i = csc_rows[idx]
                r2 = idx - lo
                y_hat[i] = yh_save[r2]
                svals[i] = s_save[r2]
    return viol


# ---------------------------------------------------------------------------
# AdaGrad
# ---------------------------------------------------------------------------

def adagrad_epoch_anova(double[:, ::1] P, int m, i64[::1] indptr,
                        i64[::1] indices, double[::1] data, double[::1] y,
                        double[::1] offsets, double[:, ::1] G,
                        i64[::1] order, int loss_kind, double beta, double lr,
                        double eps):
    """One stochastic pass in the given sample order over a degree-m factor.

    Gradients are restricted to each sample's support, with the ridge
    pull applied lazily to the touched coordinates only.  Returns the
    first sample index at which a non-finite prediction or update
    appeared, or -1 (coordinates are checked after each sample's
    updates so the inner loop stays branch-free).
    """
    cdef Py_ssize_t k = P.shape[1], oi, s, r, nz, nz_max = 0
    cdef i64 i, lo, j
    cdef double pred, dloss, chk
    cdef double[:, :, ::1] tables
    cdef double[:, ::1] adj, zsT, gbufT
    cdef i64[::1] jbuf
    cdef double[::1] xbuf
    for oi in range(indptr.shape[0] - 1):
        if indptr[oi + 1] - indptr[oi] > nz_max:
            nz_max = indptr[oi + 1] - indptr[oi]
    tables = np.empty((k, nz_max + 1, m + 1))
    adj = np.empty((nz_max + 1, m + 2))
    zsT = np.empty((nz_max if nz_max else 1, k))
    gbufT = np.empty((nz_max if nz_max else 1, k))
    jbuf = np.empty(nz_max if nz_max else 1, dtype=np.int64)
    xbuf = np.empty(nz_max if nz_max else 1)
    for oi in range(order.shape[0]):
        i = order[oi]
        lo = indptr[i]
        nz = indptr[i + 1] - lo
        for r in range(nz):
            jbuf[r] = indices[lo + r]
            xbuf[r] = data[lo + r]
            hofm_zs_row(&zsT[r, 0], &P[jbuf[r], 0], xbuf[r], k)
        pred = offsets[i]
        for s in range(k):
            pred += hofm_tab_fill(&tables[s, 0, 0], &zsT[0, 0], k, s, nz, m)
        if not _finite(pred):
            return i
        dloss = _deriv(loss_kind, y[i], pred)
        for s in range(k):
            hofm_grad_into(&tables[s, 0, 0], &zsT[0, 0], &xbuf[0],
                           &adj[0, 0], &gbufT[0, 0], k, s, nz, m)
        chk = 0.0
        for r in range(nz):
            j = jbuf[r]
            chk += hofm_adagrad_row(&P[j, 0], &G[j, 0], &gbufT[r, 0],
                                    dloss, beta, lr, eps, k)
        if chk != 0.0:
            return i
    return -1


def adagrad_epoch_all_subsets(double[:, ::1] P, i64[::1] indptr,
                              i64[::1] indices, double[::1] data,
                              double[::1] y, double[::1] offsets,
                              double[:, ::1] G, i64[::1] order, int loss_kind,
                              double beta, double lr, double eps):
    """AdaGrad pass for the all-subsets kernel; same contract as the ANOVA pass."""
    cdef Py_ssize_t k = P.shape[1], oi, s, r, q, nz, nz_max = 0
    cdef i64 i, lo, j
    cdef double pred, dloss, chk, total, f, loo
    cdef double[:, ::1] zs, gbufT
    cdef i64[::1] jbuf
    cdef double[::1] xbuf
    for oi in range(indptr.shape[0] - 1):
        if indptr[oi + 1] - indptr[oi] > nz_max:
            nz_max = indptr[oi + 1] - indptr[oi]
    zs = np.empty((k, nz_max if nz_max else 1))
    gbufT = np.empty((nz_max if nz_max else 1, k))
    jbuf = np.empty(nz_max if nz_max else 1, dtype=np.int64)
    xbuf = np.empty(nz_max if nz_max else 1)
    for oi in range(order.shape[0]):
        i = order[oi]
        lo = indptr[i]
        nz = indptr[i + 1] - lo
        for r in range(nz):
            jbuf[r] = indices[lo + r]
            xbuf[r] = data[lo + r]
        pred = offsets[i]
        for s in range(k):
            total = 1.0
            for r in range(nz):
                zs[s, r] = P[jbuf[r], s] * xbuf[r]
                total *= 1.0 + zs[s, r]
            pred += total
            for r in range(nz):
                f = 1.0 + zs[s, r]
                if f == 0.0:
                    loo = 1.0
                    for q in range(nz):
                        if q != r:
                            loo *= 1.0 + zs[s, q]
                    gbufT[r, s] = xbuf[r] * loo
                else:
                    gbufT[r, s] = xbuf[r] * total / f
        if not _finite(pred):
            return i
        dloss = _deriv(loss_kind, y[i], pred)
        chk = 0.0
        for r in range(nz):
            j = jbuf[r]
            chk += hofm_adagrad_row(&P[j, 0], &G[j, 0], &gbufT[r, 0],
                                    dloss, beta, lr, eps, k)
        if chk != 0.0:
            return i
    return -1


def adagrad_epoch_linear(double[::1] w, double[::1] bias, double[::1] Gw,
                         double[::1] Gb, i64[::1] indptr, i64[::1] indices,
                         double[::1] data, double[::1] y, double[::1] offsets,
                         i64[::1] order, int loss_kind, double beta,
                         double lr, double eps):
    """AdaGrad pass over bias and linear weights; bias stays unregularized."""
    cdef Py_ssize_t oi
    cdef i64 i, lo, hi, r, j
    cdef double pred, dloss, g
    for oi in range(order.shape[0]):
        i = order[oi]
        lo = indptr[i]
        hi = indptr[i + 1]
        pred = offsets[i] + bias[0]
        for r in range(lo, hi):
            pred += w[indices[r]] * data[r]
        if not _finite(pred):
            return i
        dloss = _deriv(loss_kind, y[i], pred)
        Gb[0] += dloss * dloss
        bias[0] -= lr * dloss / (sqrt(Gb[0]) + eps)
        for r in range(lo, hi):
            j = indices[r]
            g = dloss * data[r] + beta * w[j]
            Gw[j] += g * g
            w[j] -= lr * g / (sqrt(Gw[j]) + eps)
            if not _finite(w[j]):
                return i
    return -1
