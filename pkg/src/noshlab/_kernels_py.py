"""Pure-numpy twins of the compiled kernels in ``_kernels.pyx``."""

import numpy as np

NPARAM = 4 + 12 + 12 + 6 + 6


def cross_moments(W, R, y):
    W = np.asarray(W, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if R.shape[0] != W.shape[0] or y.shape[0] != W.shape[0]:
        raise ValueError("row counts of W, R and y differ")
    return W.T @ R, W.T @ y


def residual_meat(W, R, y, coef):
    W = np.asarray(W, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    coef = np.asarray(coef, dtype=np.float64)
    if R.shape[0] != W.shape[0] or y.shape[0] != W.shape[0]:
        raise ValueError("row counts of W, R and y differ")
    if coef.shape[0] != R.shape[1]:
        raise ValueError("coefficient length does not match R")
    resid = y - R @ coef
    weighted = W * (resid * resid)[:, None]
    return resid, weighted.T @ W


def expand_terms(base, terms):
    """Materialise a product-term design (see ``product_moments``)."""
    base = np.asarray(base, dtype=np.float64)
    terms = np.asarray(terms)
    if terms.ndim != 2 or terms.shape[1] != 3:
        raise ValueError("terms must have 3 columns")
    if np.any(terms >= base.shape[1]) or np.any(terms < -1):
        raise ValueError("term index out of range")
    out = np.empty((base.shape[0], terms.shape[0]))
    for a, term in enumerate(terms):
        col = np.ones(base.shape[0])
        for c in term:
            if c >= 0:
                col = col * base[:, c]
        out[:, a] = col
    return out


def product_moments(base, r_terms, w_terms, y):
    if len(r_terms) != len(w_terms):
        raise ValueError("r_terms and w_terms must have the same length")
    return cross_moments(expand_terms(base, w_terms), expand_terms(base, r_terms), y)


def product_meat(base, r_terms, w_terms, y, coef):
    if len(r_terms) != len(w_terms) or len(coef) != len(r_terms):
        raise ValueError("r_terms, w_terms and coef must have the same length")
    return residual_meat(expand_terms(base, w_terms), expand_terms(base, r_terms), y, coef)


def structural(z, eps_x, eps_y, bits, params, rho_power):
    z = np.asarray(z, dtype=np.float64)
    P = np.asarray(params, dtype=np.float64)
    if P.shape[0] != NPARAM:
        raise ValueError(f"params must have {NPARAM} entries")
    if rho_power not in (2, 3):
        raise ValueError("rho_power must be 2 or 3")
    bits = np.asarray(bits)
    if bits.shape != (8, z.shape[0]):
        raise ValueError("bits must have 8 rows (U3, V3, ..., U6, V6)")
    gamma, rho, tau, phi = P[:4]
    mx = np.zeros_like(z)
    my = np.zeros_like(z)
    bx = np.zeros_like(z)
    by = np.zeros_like(z)
    for j in range(4):
        U = bits[2 * j].astype(np.float64)
        V = bits[2 * j + 1].astype(np.float64)
        UV = U * V
        mx += P[4 + 3 * j] * U + P[5 + 3 * j] * V + P[6 + 3 * j] * UV
        my += P[16 + 3 * j] * U + P[17 + 3 * j] * V + P[18 + 3 * j] * UV
        if j in (1, 3):
            o = 28 + 3 * (j // 2)
            bx += P[o] * U + P[o + 1] * V + P[o + 2] * UV
        if j in (2, 3):
            o = 34 + 3 * (j - 2)
            by += P[o] * U + P[o + 1] * V + P[o + 2] * UV
    x = gamma * z + rho * z**rho_power + mx + z * bx + eps_x
    y = tau * x + phi * x * x + my + x * by + eps_y
    return x, y
