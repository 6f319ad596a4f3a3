"""Pure-Python/numpy numeric core.

Mirror of the compiled module ``hofm.backend._fast``: every public
function here has an identically named twin there with the same
signature and semantics.  This module is the fallback when the extension
is unavailable and the reference the extension is tested against.

All functions work on raw arrays.  ``z`` denotes the elementwise
products ``p[j] * x[j]`` restricted to the support of ``x``; CSR/CSC
arrays use int64 indices and float64 values.

Loss codes: 0 = squared (mu = 1), 1 = logistic (mu = 1/4).
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"

LOSS_SQUARED = 0
LOSS_LOGISTIC = 1


def _loss_deriv(kind: int, y: float, pred: float) -> float:
    if kind == LOSS_SQUARED:
        return pred - y
    t = y * pred
    if t >= 0.0:
        e = math.exp(-t)
        return -y * e / (1.0 + e)
    return -y / (1.0 + math.exp(t))


def _loss_value(kind: int, y: float, pred: float) -> float:
    if kind == LOSS_SQUARED:
        return 0.5 * (pred - y) * (pred - y)
    t = y * pred
    if t >= 0.0:
        return math.log1p(math.exp(-t))
    return -t + math.log1p(math.exp(t))


# ---------------------------------------------------------------------------
# ANOVA kernel primitives
# ---------------------------------------------------------------------------

def anova_value(z: np.ndarray, m: int) -> float:
    """Degree-m ANOVA kernel from support products, O(nnz * m) time, O(m) memory."""
    a = np.zeros(m + 1)
    a[0] = 1.0
    for j in range(z.shape[0]):
        hi = min(m, j + 1)
        a[1:hi + 1] += z[j] * a[:hi]
    return float(a[m])


def anova_table(z: np.ndarray, m: int, table: np.ndarray) -> float:
    """Fill the (nnz+1, m+1) DP table row by row; returns the kernel value.

    Row j holds the degree-t kernels of the first j support entries;
    column 0 is all ones and cells with j < t stay zero.
    """
    table[:, :] = 0.0
    table[:, 0] = 1.0
    nz = z.shape[0]
    for j in range(1, nz + 1):
        table[j, 1:] = table[j - 1, 1:] + z[j - 1] * table[j - 1, :-1]
    return float(table[nz, m])


def anova_grad_from_table(z: np.ndarray, xv: np.ndarray, table: np.ndarray,
                          out: np.ndarray) -> None:
    """Reverse-mode gradient of the degree-m kernel w.r.t. p, on the support.

    Consumes the forward DP table; runs the adjoint recursion backwards
    and contracts each row with the forward values.
    """
    nz = z.shape[0]
    m = table.shape[1] - 1
    if m == 0:
        out[:] = 0.0
        return
    adj = np.zeros((nz + 1, m + 2))
    adj[nz, m] = 1.0
    for j in range(nz - 1, 0, -1):
        adj[j, 1:m + 1] = adj[j + 1, 1:m + 1] + z[j] * adj[j + 1, 2:m + 2]
    acc = np.zeros(nz)
    for t in range(1, m + 1):
        acc += adj[1:, t] * table[:-1, t - 1]
    out[:] = acc * xv


def power_sums(z: np.ndarray, m: int, out: np.ndarray) -> None:
    """out[t] = sum_j z_j^t for t = 1..m; out[0] is set to 0."""
    out[0] = 0.0
    pw = np.ones_like(z)
    for t in range(1, m + 1):
        pw = pw * z
        out[t] = pw.sum()


def anova_alt(z: np.ndarray, m: int, avals: np.ndarray, dvals: np.ndarray) -> float:
    """Evaluate degrees 1..m through the power-sum recursion.

    Fills ``avals[0..m]`` with the kernel values and ``dvals[1..m]`` with
    the power sums; this pair is the per-sample cache coordinate descent
    keeps, O(m) per sample.
    """
    power_sums(z, m, dvals)
    _anova_from_power_sums(dvals, m, avals)
    return float(avals[m])


def _anova_from_power_sums(dvals: np.ndarray, m: int, avals: np.ndarray) -> None:
    avals[0] = 1.0
    for s in range(1, m + 1):
        acc = 0.0
        sign = 1.0
        for t in range(1, s + 1):
            acc += sign * avals[s - t] * dvals[t]
            sign = -sign
        avals[s] = acc / s


def anova_coord_deriv(avals: np.ndarray, dvals: np.ndarray, m: int,
                      pj: float, xj: float) -> float:
    """Forward-mode derivative of the degree-m kernel w.r.t. one coordinate.

    Uses only the O(m) cached values plus (pj, xj); cost O(m^2).
    """
    # ddot[t] = d/dp_j of the t-th power sum = t * pj^(t-1) * xj^t
    ddot = np.empty(m + 1)
    pw = xj  # pj^(t-1) * xj^t, starting at t = 1
    for t in range(1, m + 1):
        ddot[t] = t * pw
        pw *= pj * xj
    adot = np.zeros(m + 1)
    for s in range(1, m + 1):
        acc = 0.0
        sign = 1.0
        for t in range(1, s + 1):
            acc += sign * (adot[s - t] * dvals[t] + avals[s - t] * ddot[t])
            sign = -sign
        adot[s] = acc / s
    return float(adot[m])


def anova_grad_alt(z: np.ndarray, xv: np.ndarray, avals: np.ndarray,
                   dvals: np.ndarray, m: int, out: np.ndarray) -> None:
    """Reverse-mode gradient through the power-sum recursion.

    Backpropagates adjoints of the kernel values and of the power sums
    (both O(m^2)), then expands to the support with a plain
    Vandermonde-times-vector product, O(nnz * m).
    """
    if m == 0:
        out[:] = 0.0
        return
    atil = np.zeros(m + 1)
    atil[m] = 1.0
    for t in range(m - 1, 0, -1):
        acc = 0.0
        for s in range(t + 1, m + 1):
            sign = 1.0 if (s - t) % 2 == 1 else -1.0  # (-1)^(s-t+1)
            acc += sign * atil[s] * dvals[s - t] / s
        atil[t] = acc
    dtil = np.empty(m + 1)
    for t in range(1, m + 1):
        acc = 0.0
        for s in range(t, m + 1):
            acc += atil[s] * avals[s - t] / s
        dtil[t] = acc if t % 2 == 1 else -acc
    # out[j] = xv[j] * sum_t t * dtil[t] * z[j]^(t-1)
    coef = dtil[1:] * np.arange(1, m + 1)
    acc = np.full(z.shape[0], coef[m - 1])
    for t in range(m - 2, -1, -1):  # Horner in z
        acc = acc * z + coef[t]
    out[:] = acc * xv


def all_subsets_value(z: np.ndarray) -> float:
    """Product of (1 + z_j) over the support; 1 on empty support."""
    out = 1.0
    for j in range(z.shape[0]):
        out *= 1.0 + z[j]
    return out


def all_subsets_grad(z: np.ndarray, xv: np.ndarray, out: np.ndarray) -> None:
    """Gradient of the all-subsets kernel w.r.t. p on the support.

    Entry j is xv[j] times the leave-one-out product.  Factors that are
    exactly zero get their leave-one-out product recomputed directly
    instead of through the quotient, which would divide by zero.
    """
    f = 1.0 + z
    total = all_subsets_value(z)
    for j in range(z.shape[0]):
        if f[j] == 0.0:
            loo = 1.0
            for r in range(z.shape[0]):
                if r != j:
                    loo *= f[r]
            out[j] = xv[j] * loo
        else:
            out[j] = xv[j] * total / f[j]


# ---------------------------------------------------------------------------
# Batch prediction over CSR rows
# ---------------------------------------------------------------------------

def predict_anova_batch(P: np.ndarray, m: int, indptr: np.ndarray,
                        indices: np.ndarray, data: np.ndarray,
                        out: np.ndarray) -> None:
    """out[i] += sum over columns s of A^m(P[:, s], x_i)."""
    k = P.shape[1]
    a = np.empty((m + 1, k))
    for i in range(out.shape[0]):
        lo, hi = indptr[i], indptr[i + 1]
        a[:] = 0.0
        a[0, :] = 1.0
        zrows = P[indices[lo:hi], :] * data[lo:hi, None]
        for j in range(hi - lo):
            t_hi = min(m, j + 1)
            a[1:t_hi + 1] += zrows[j] * a[:t_hi]
        out[i] += a[m].sum()


def predict_all_subsets_batch(P: np.ndarray, indptr: np.ndarray,
                              indices: np.ndarray, data: np.ndarray,
                              out: np.ndarray) -> None:
    """out[i] += sum over columns s of the all-subsets kernel S(P[:, s], x_i)."""
    for i in range(out.shape[0]):
        lo, hi = indptr[i], indptr[i + 1]
        prods = 1.0 + P[indices[lo:hi], :] * data[lo:hi, None]
        out[i] += prods.prod(axis=0).sum() if hi > lo else float(P.shape[1])


# ---------------------------------------------------------------------------
# Coordinate descent
# ---------------------------------------------------------------------------

def rebuild_anova_caches(p: np.ndarray, m: int, indptr: np.ndarray,
                         indices: np.ndarray, data: np.ndarray,
                         avals: np.ndarray, dvals: np.ndarray) -> None:
    """Recompute the per-sample kernel/power-sum caches for one column p."""
    for i in range(avals.shape[0]):
        lo, hi = indptr[i], indptr[i + 1]
        z = p[indices[lo:hi]] * data[lo:hi]
        anova_alt(z, m, avals[i], dvals[i])


def cd_epoch_anova(P: np.ndarray, s: int, m: int, csc_indptr: np.ndarray,
                   csc_rows: np.ndarray, csc_vals: np.ndarray,
                   y: np.ndarray, y_hat: np.ndarray,
                   avals: np.ndarray, dvals: np.ndarray,
                   loss_kind: int, mu: float, beta: float) -> float:
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
    n = y.shape[0]
    d = P.shape[0]
    a_save = np.empty_like(avals)
    d_save = np.empty_like(dvals)
    yh_save = np.empty(n)
    viol = 0.0
    for j in range(d):
        lo, hi = csc_indptr[j], csc_indptr[j + 1]
        p_old = P[j, s]
        grad = 0.0
        hess = 0.0
        for idx in range(lo, hi):
            i = csc_rows[idx]
            g = anova_coord_deriv(avals[i], dvals[i], m, p_old, csc_vals[idx])
            grad += _loss_deriv(loss_kind, y[i], y_hat[i]) * g
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
            a_i = avals[i]
            d_i = dvals[i]
            yh_save[r] = y_hat[i]
            a_save[r] = a_i
            d_save[r] = d_i
            loss_old += _loss_value(loss_kind, y[i], y_hat[i])
            top_old = a_i[m]
            pw_old = p_old * xij
            pw_new = p_new * xij
            for t in range(1, m + 1):
                d_i[t] += pw_new - pw_old
                pw_old *= p_old * xij
                pw_new *= p_new * xij
            _anova_from_power_sums(d_i, m, a_i)
            y_hat[i] += a_i[m] - top_old
            loss_new += _loss_value(loss_kind, y[i], y_hat[i])
        gain = ((loss_new - loss_old) / n
                + 0.5 * beta * (p_new * p_new - p_old * p_old))
        if gain <= 0.0:
            P[j, s] = p_new
            viol += abs(delta)
        else:
            for idx in range(lo, hi):
                i = csc_rows[idx]
                r = idx - lo
                y_hat[i] = yh_save[r]
                avals[i] = a_save[r]
                dvals[i] = d_save[r]
    return viol


def cd_epoch_linear(w: np.ndarray, csc_indptr: np.ndarray, csc_rows: np.ndarray,
                    csc_vals: np.ndarray, y: np.ndarray, y_hat: np.ndarray,
                    loss_kind: int, mu: float, beta: float) -> float:
    """Coordinate pass over the linear weights; returns sum |delta|."""
    n = y.shape[0]
    viol = 0.0
    for j in range(w.shape[0]):
        lo, hi = csc_indptr[j], csc_indptr[j + 1]
        grad = 0.0
        hess = 0.0
        for idx in range(lo, hi):
            i = csc_rows[idx]
            xij = csc_vals[idx]
            grad += _loss_deriv(loss_kind, y[i], y_hat[i]) * xij
            hess += xij * xij
        step = mu * hess / n + beta
        if step == 0.0:
            continue
        delta = -(grad / n + beta * w[j]) / step
        if delta == 0.0:
            continue
        w[j] += delta
        viol += abs(delta)
        for idx in range(lo, hi):
            y_hat[csc_rows[idx]] += delta * csc_vals[idx]
    return viol


def rebuild_all_subsets_cache(p: np.ndarray, indptr: np.ndarray,
                              indices: np.ndarray, data: np.ndarray,
                              svals: np.ndarray) -> None:
    """svals[i] = all-subsets kernel of column p against sample i."""
    for i in range(svals.shape[0]):
        lo, hi = indptr[i], indptr[i + 1]
        svals[i] = all_subsets_value(p[indices[lo:hi]] * data[lo:hi])


def cd_epoch_all_subsets(P: np.ndarray, s: int,
                         csr_indptr: np.ndarray, csr_indices: np.ndarray,
                         csr_data: np.ndarray,
                         csc_indptr: np.ndarray, csc_rows: np.ndarray,
                         csc_vals: np.ndarray, y: np.ndarray, y_hat: np.ndarray,
                         svals: np.ndarray, loss_kind: int, mu: float,
                         beta: float) -> float:
    """Cyclic coordinate pass for the all-subsets kernel, column s.

    Per-sample cache is the full product; leave-one-out values come from
    the quotient except across exact zero factors, where the row is
    rescanned.  Steps are tentatively applied and rolled back unless the
    coordinate objective decreases, as in cd_epoch_anova.
    """
    n = y.shape[0]
    p = P[:, s]
    loo = np.empty(n)
    s_save = np.empty(n)
    yh_save = np.empty(n)
    viol = 0.0
    for j in range(P.shape[0]):
        lo, hi = csc_indptr[j], csc_indptr[j + 1]
        p_old = p[j]
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
                        prod *= 1.0 + p[col] * csr_data[r]
                loo_i = prod
            else:
                loo_i = svals[i] / f_old
            loo[i] = loo_i
            g = xij * loo_i
            grad += _loss_deriv(loss_kind, y[i], y_hat[i]) * g
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
            r = idx - lo
            yh_save[r] = y_hat[i]
            s_save[r] = svals[i]
            loss_old += _loss_value(loss_kind, y[i], y_hat[i])
            s_new = loo[i] * (1.0 + p_new * csc_vals[idx])
            y_hat[i] += s_new - svals[i]
            svals[i] = s_new
            loss_new += _loss_value(loss_kind, y[i], y_hat[i])
        gain = ((loss_new - loss_old) / n
                + 0.5 * beta * (p_new * p_new - p_old * p_old))
        if gain <= 0.0:
            p[j] = p_new
            viol += abs(delta)
        else:
            for idx in range(lo, hi):
                i = csc_rows[idx]
                r = idx - lo
                y_hat[i] = yh_save[r]
                svals[i] = s_save[r]
    return viol


# ---------------------------------------------------------------------------
# AdaGrad
# ---------------------------------------------------------------------------

def adagrad_epoch_anova(P: np.ndarray, m: int, indptr: np.ndarray,
                        indices: np.ndarray, data: np.ndarray, y: np.ndarray,
                        offsets: np.ndarray, G: np.ndarray, order: np.ndarray,
                        loss_kind: int, beta: float, lr: float,
                        eps: float) -> int:
    """One stochastic pass in the given sample order over a degree-m factor.

    Gradients are restricted to each sample's support, with the ridge
    pull applied lazily to the touched coordinates only.  Returns the
    first sample index at which a non-finite prediction or update
    appeared, or -1.
    """
    k = P.shape[1]
    nz_max = int(np.max(np.diff(indptr))) if indptr.shape[0] > 1 else 0
    tables = np.empty((k, nz_max + 1, m + 1))
    gbuf = np.empty(nz_max)
    for i in order:
        lo, hi = indptr[i], indptr[i + 1]
        nz = hi - lo
        cols = indices[lo:hi]
        xv = data[lo:hi]
        pred = offsets[i]
        zmat = P[cols, :] * xv[:, None]
        for s in range(k):
            pred += anova_table(zmat[:, s], m, tables[s, :nz + 1])
        if not math.isfinite(pred):
            return int(i)
        dloss = _loss_deriv(loss_kind, y[i], pred)
        for s in range(k):
            anova_grad_from_table(zmat[:, s], xv, tables[s, :nz + 1], gbuf[:nz])
            for r in range(nz):
                j = cols[r]
                g = dloss * gbuf[r] + beta * P[j, s]
                G[j, s] += g * g
                P[j, s] -= lr * g / (math.sqrt(G[j, s]) + eps)
                if not math.isfinite(P[j, s]):
                    return int(i)
    return -1


def adagrad_epoch_all_subsets(P: np.ndarray, indptr: np.ndarray,
                              indices: np.ndarray, data: np.ndarray,
                              y: np.ndarray, offsets: np.ndarray,
                              G: np.ndarray, order: np.ndarray,
                              loss_kind: int, beta: float, lr: float,
                              eps: float) -> int:
    """AdaGrad pass for the all-subsets kernel; same contract as the ANOVA pass."""
    k = P.shape[1]
    nz_max = int(np.max(np.diff(indptr))) if indptr.shape[0] > 1 else 0
    gbuf = np.empty((nz_max, k))
    for i in order:
        lo, hi = indptr[i], indptr[i + 1]
        nz = hi - lo
        cols = indices[lo:hi]
        xv = data[lo:hi]
        zmat = P[cols, :] * xv[:, None]
        pred = offsets[i]
        for s in range(k):
            all_subsets_grad(zmat[:, s], xv, gbuf[:nz, s])
            pred += all_subsets_value(zmat[:, s])
        if not math.isfinite(pred):
            return int(i)
        dloss = _loss_deriv(loss_kind, y[i], pred)
        for s in range(k):
            for r in range(nz):
                j = cols[r]
                g = dloss * gbuf[r, s] + beta * P[j, s]
                G[j, s] += g * g
                P[j, s] -= lr * g / (math.sqrt(G[j, s]) + eps)
                if not math.isfinite(P[j, s]):
                    return int(i)
    return -1


def adagrad_epoch_linear(w: np.ndarray, bias: np.ndarray, Gw: np.ndarray,
                         Gb: np.ndarray, indptr: np.ndarray,
                         indices: np.ndarray, data: np.ndarray, y: np.ndarray,
                         offsets: np.ndarray, order: np.ndarray,
                         loss_kind: int, beta: float, lr: float,
                         eps: float) -> int:
    """AdaGrad pass over bias and linear weights; bias stays unregularized."""
    for i in order:
        lo, hi = indptr[i], indptr[i + 1]
        cols = indices[lo:hi]
        xv = data[lo:hi]
        pred = offsets[i] + bias[0] + float(w[cols] @ xv)
        if not math.isfinite(pred):
            return int(i)
        dloss = _loss_deriv(loss_kind, y[i], pred)
        Gb[0] += dloss * dloss
        bias[0] -= lr * dloss / (math.sqrt(Gb[0]) + eps)
        for r in range(cols.shape[0]):
            j = cols[r]
            g = dloss * xv[r] + beta * w[j]
            Gw[j] += g * g
            w[j] -= lr * g / (math.sqrt(Gw[j]) + eps)
            if not math.isfinite(w[j]):
                return int(i)
    return -1
