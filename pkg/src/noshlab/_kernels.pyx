# cython: language_level=3
"""Compiled kernels for the simulation hot loop.

Every routine makes a single pass over the rows with a fixed summation
order, so results do not depend on threading or on how work is split.
The numpy twins live in ``_kernels_py``.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef enum:
    MAXK = 16      # largest design width the product kernels accept
    NTERM = 3      # factors per product term
    NPARAM = 4 + 12 + 12 + 6 + 6


def cross_moments(const double[:, ::1] W, const double[:, ::1] R, const double[::1] y):
    """Return ``(W'R, W'y)`` accumulated in one pass over the rows."""
    cdef Py_ssize_t n = W.shape[0], k = W.shape[1], m = R.shape[1]
    cdef Py_ssize_t i, a, b
    cdef double wa, yi
    if R.shape[0] != n or y.shape[0] != n:
        raise ValueError("row counts of W, R and y differ")
    WR_arr = np.zeros((k, m), dtype=np.float64)
    Wy_arr = np.zeros(k, dtype=np.float64)
    cdef double[:, ::1] WR = WR_arr
    cdef double[::1] Wy = Wy_arr
    with nogil:
        for i in range(n):
            yi = y[i]
            for a in range(k):
                wa = W[i, a]
                Wy[a] += wa * yi
                for b in range(m):
                    WR[a, b] += wa * R[i, b]
    return WR_arr, Wy_arr


def residual_meat(
    const double[:, ::1] W,
    const double[:, ::1] R,
    const double[::1] y,
    const double[::1] coef,
):
    """Return residuals ``y - R coef`` and the HC0 meat ``sum_i w_i w_i' e_i^2``."""
    cdef Py_ssize_t n = W.shape[0], k = W.shape[1], m = R.shape[1]
    cdef Py_ssize_t i, a, b
    cdef double e, e2, wa
    if R.shape[0] != n or y.shape[0] != n:
        raise ValueError("row counts of W, R and y differ")
    if coef.shape[0] != m:
        raise ValueError("coefficient length does not match R")
    resid_arr = np.empty(n, dtype=np.float64)
    meat_arr = np.zeros((k, k), dtype=np.float64)
    cdef double[::1] resid = resid_arr
    cdef double[:, ::1] meat = meat_arr
    with nogil:
        for i in range(n):
            e = y[i]
            for b in range(m):
                e -= R[i, b] * coef[b]
            resid[i] = e
            e2 = e * e
            for a in range(k):
                wa = W[i, a] * e2
                for b in range(a, k):
                    meat[a, b] += wa * W[i, b]
        for a in range(k):
            for b in range(a + 1, k):
                meat[b, a] = meat[a, b]
    return resid_arr, meat_arr


cdef int _check_terms(const Py_ssize_t[:, ::1] terms, Py_ssize_t p) except -1:
    cdef Py_ssize_t a, j
    if terms.shape[0] > MAXK:
        raise ValueError(f"at most {MAXK} design columns are supported")
    if terms.shape[1] != NTERM:
        raise ValueError(f"terms must have {NTERM} columns")
    for a in range(terms.shape[0]):
        for j in range(NTERM):
            if terms[a, j] >= p or terms[a, j] < -1:
                raise ValueError("term index out of range")
    return 0


cdef enum:
    MAXP = 16      # largest number of base columns


cdef int _load_terms(const Py_ssize_t[:, ::1] terms, Py_ssize_t p, int* out) except -1:
    # Padding (-1) points at the trailing 1.0 slot of the row buffer.
    cdef Py_ssize_t a, j, c
    if p >= MAXP:
        raise ValueError(f"at most {MAXP - 1} base columns are supported")
    _check_terms(terms, p)
    for a in range(terms.shape[0]):
        for j in range(NTERM):
            c = terms[a, j]
            out[a * NTERM + j] = <int>(p if c < 0 else c)
    return 0


cdef inline void _expand(const double* row, const int* idx, Py_ssize_t k,
                         double* out) noexcept nogil:
    cdef Py_ssize_t a
    for a in range(k):
        out[a] = row[idx[3 * a]] * row[idx[3 * a + 1]] * row[idx[3 * a + 2]]


def product_moments(
    const double[:, ::1] base,
    const Py_ssize_t[:, ::1] r_terms,
    const Py_ssize_t[:, ::1] w_terms,
    const double[::1] y,
):
    """``(W'R, W'y)`` for designs whose columns are products of base columns.

    Row ``a`` of ``r_terms`` lists up to three column indices of ``base``
    (``-1`` pads); design column ``a`` is their product, or 1 when all are
    padding. The design matrices are never formed.
    """
    cdef Py_ssize_t n = base.shape[0], p = base.shape[1]
    cdef Py_ssize_t k = r_terms.shape[0], i, a, b
    cdef double r[MAXK]
    cdef double w[MAXK]
    cdef double acc[MAXK * MAXK]
    cdef double accy[MAXK]
    cdef double wa, yi
    cdef double buf[MAXP]
    cdef int ridx[MAXK * NTERM]
    cdef int widx[MAXK * NTERM]
    if w_terms.shape[0] != k:
        raise ValueError("r_terms and w_terms must have the same length")
    _load_terms(r_terms, p, ridx)
    _load_terms(w_terms, p, widx)
    buf[p] = 1.0
    if y.shape[0] != n:
        raise ValueError("y and base have different row counts")
    for a in range(k * k):
        acc[a] = 0.0
    for a in range(k):
        accy[a] = 0.0
    with nogil:
        for i in range(n):
            for a in range(p):
                buf[a] = base[i, a]
            _expand(buf, ridx, k, r)
            _expand(buf, widx, k, w)
            yi = y[i]
            for a in range(k):
                wa = w[a]
                accy[a] += wa * yi
                for b in range(k):
                    acc[a * k + b] += wa * r[b]
    WR = np.empty((k, k), dtype=np.float64)
    Wy = np.empty(k, dtype=np.float64)
    for a in range(k):
        Wy[a] = accy[a]
        for b in range(k):
            WR[a, b] = acc[a * k + b]
    return WR, Wy


def product_meat(
    const double[:, ::1] base,
    const Py_ssize_t[:, ::1] r_terms,
    const Py_ssize_t[:, ::1] w_terms,
    const double[::1] y,
    const double[::1] coef,
):
    """Residuals ``y - R coef`` and HC0 meat for a product-term design."""
    cdef Py_ssize_t n = base.shape[0], p = base.shape[1]
    cdef Py_ssize_t k = r_terms.shape[0], i, a, b
    cdef double r[MAXK]
    cdef double w[MAXK]
    cdef double acc[MAXK * MAXK]
    cdef double cf[MAXK]
    cdef double e, e2, wa
    cdef double buf[MAXP]
    cdef int ridx[MAXK * NTERM]
    cdef int widx[MAXK * NTERM]
    if w_terms.shape[0] != k or coef.shape[0] != k:
        raise ValueError("r_terms, w_terms and coef must have the same length")
    _load_terms(r_terms, p, ridx)
    _load_terms(w_terms, p, widx)
    buf[p] = 1.0
    if y.shape[0] != n:
        raise ValueError("y and base have different row counts")
    for a in range(k):
        cf[a] = coef[a]
    for a in range(k * k):
        acc[a] = 0.0
    resid_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] resid = resid_arr
    with nogil:
        for i in range(n):
            for a in range(p):
                buf[a] = base[i, a]
            _expand(buf, ridx, k, r)
            _expand(buf, widx, k, w)
            e = y[i]
            for b in range(k):
                e -= r[b] * cf[b]
            resid[i] = e
            e2 = e * e
            for a in range(k):
                wa = w[a] * e2
                for b in range(a, k):
                    acc[a * k + b] += wa * w[b]
    meat = np.empty((k, k), dtype=np.float64)
    for a in range(k):
        for b in range(a, k):
            meat[a, b] = acc[a * k + b]
            meat[b, a] = acc[a * k + b]
    return resid_arr, meat


def structural(
    const double[::1] z,
    const double[::1] eps_x,
    const double[::1] eps_y,
    const cnp.int8_t[:, ::1] bits,
    const double[::1] params,
    int rho_power,
):
    """Treatment and outcome of the confounder model in one pass.

    ``bits`` rows are U3, V3, U4, V4, U5, V5, U6, V6. ``params`` layout:
    gamma, rho, tau, phi; delta_x for blocks 3-6 as (u, v, uv) triples;
    delta_y likewise; theta_x for blocks 4 and 6; theta_y for blocks 5 and 6.
    """
    cdef Py_ssize_t n = z.shape[0], i, j
    cdef double gamma, rho, tau, phi, zi, zp, xi, yi, U, V, UV, mx, my, bx, by
    cdef double P[NPARAM]
    if eps_x.shape[0] != n or eps_y.shape[0] != n or bits.shape[1] != n:
        raise ValueError("inputs have different lengths")
    if bits.shape[0] != 8:
        raise ValueError("bits must have 8 rows (U3, V3, ..., U6, V6)")
    if params.shape[0] != NPARAM:
        raise ValueError(f"params must have {NPARAM} entries")
    if rho_power != 2 and rho_power != 3:
        raise ValueError("rho_power must be 2 or 3")
    for j in range(NPARAM):
        P[j] = params[j]
    gamma, rho, tau, phi = P[0], P[1], P[2], P[3]
    x_arr = np.empty(n, dtype=np.float64)
    y_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] y = y_arr
    with nogil:
        for i in range(n):
            zi = z[i]
            zp = zi * zi
            if rho_power == 3:
                zp = zp * zi
            mx = 0.0
            my = 0.0
            bx = 0.0
            by = 0.0
            for j in range(4):
                U = bits[2 * j, i]
                V = bits[2 * j + 1, i]
                UV = U * V
                mx = mx + (P[4 + 3 * j] * U + P[5 + 3 * j] * V + P[6 + 3 * j] * UV)
                my = my + (P[16 + 3 * j] * U + P[17 + 3 * j] * V + P[18 + 3 * j] * UV)
                if j == 1 or j == 3:
                    bx = bx + (P[28 + 3 * (j // 2)] * U + P[29 + 3 * (j // 2)] * V
                               + P[30 + 3 * (j // 2)] * UV)
                if j == 2 or j == 3:
                    by = by + (P[34 + 3 * (j - 2)] * U + P[35 + 3 * (j - 2)] * V
                               + P[36 + 3 * (j - 2)] * UV)
            xi = gamma * zi + rho * zp + mx + zi * bx + eps_x[i]
            yi = tau * xi + phi * xi * xi + my + xi * by + eps_y[i]
            x[i] = xi
            y[i] = yi
    return x_arr, y_arr
