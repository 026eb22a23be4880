"""Hot inner loops: simplex distances, their gradients, and batched projection.

Each kernel has a numba implementation and a pure-numpy twin with identical
semantics. The public names bind to the numba versions unless acceleration is
disabled (see :mod:`mfmsbo._accel`). Distance kinds are passed as integer codes:
0 = squared L2, 1 = total variation (L1), 2 = Jensen-Shannon (natural log).
"""

import numpy as np

from mfmsbo._accel import njit, use_numba

SQUARED_L2 = 0
TOTAL_VARIATION = 1
JENSEN_SHANNON = 2

_LOG_FLOOR = 1e-300
_GRAD_FLOOR = 1e-12


# -- numpy reference paths -------------------------------------------------


def _xlogx_ratio(a, total):
    # a * log(a / mid) with mid = total / 2 and 0 log 0 = 0. Dividing by the
    # sum rather than the midpoint keeps subnormal coordinates from underflowing.
    safe_a = np.where(a > 0.0, a, 1.0)
    safe_total = np.where(a > 0.0, total, 1.0)
    return np.where(a > 0.0, a * np.log(2.0 * safe_a / safe_total), 0.0)


def pairwise_distances_np(A, B, kind):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if kind == SQUARED_L2:
        diff = A[:, None, :] - B[None, :, :]
        return np.einsum("pnk,pnk->pn", diff, diff)
    if kind == TOTAL_VARIATION:
        return np.abs(A[:, None, :] - B[None, :, :]).sum(axis=2)
    if kind == JENSEN_SHANNON:
        a = A[:, None, :]
        b = B[None, :, :]
        total = a + b
        return 0.5 * (_xlogx_ratio(a, total) + _xlogx_ratio(b, total)).sum(axis=2)
    raise ValueError(f"unknown distance kind {kind}")


def _distance_grad_terms_np(X, B, kind):
    diff = X[:, None, :] - B[None, :, :]
    if kind == SQUARED_L2:
        return 2.0 * diff
    if kind == TOTAL_VARIATION:
        return np.sign(diff)
    if kind == JENSEN_SHANNON:
        a = np.maximum(X[:, None, :], _GRAD_FLOOR)
        return 0.5 * np.log(2.0 * a / (a + B[None, :, :]))
    raise ValueError(f"unknown distance kind {kind}")


def weighted_distance_grad_np(X, B, C, kind):
    """Return ``G[p] = sum_j C[p, j] * d/dX[p] dist(X[p], B[j])``."""
    X = np.asarray(X, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    if kind == SQUARED_L2:
        return 2.0 * (X * C.sum(axis=1)[:, None] - C @ B)
    terms = _distance_grad_terms_np(X, B, kind)
    return np.einsum("pn,pnk->pk", C, terms)


def project_rows_np(V):
    """Euclidean projection of every row of ``V`` onto the probability simplex."""
    V = np.asarray(V, dtype=float)
    n = V.shape[1]
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    ind = np.arange(1, n + 1)
    cond = U - css / ind > 0
    rho = n - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(V.shape[0]), rho - 1] / rho
    return np.maximum(V - theta[:, None], 0.0)


# -- numba paths ------------------------------------------------------------


@njit
def _pairwise_distances_nb(A, B, kind):
    P, n = A.shape
    N = B.shape[0]
    out = np.zeros((P, N))
    for p in range(P):
        for j in range(N):
            s = 0.0
            for k in range(n):
                a = A[p, k]
                b = B[j, k]
                if kind == 0:
                    d = a - b
                    s += d * d
                elif kind == 1:
                    s += abs(a - b)
                else:
                    total = a + b
                    if a > 0.0:
                        s += 0.5 * a * np.log(2.0 * a / total)
                    if b > 0.0:
                        s += 0.5 * b * np.log(2.0 * b / total)
            out[p, j] = s
    return out


@njit
def _weighted_distance_grad_nb(X, B, C, kind):
    P, n = X.shape
    N = B.shape[0]
    out = np.zeros((P, n))
    for p in range(P):
        for j in range(N):
            c = C[p, j]
            if c == 0.0:
                continue
            for k in range(n):
                x = X[p, k]
                b = B[j, k]
                if kind == 0:
                    g = 2.0 * (x - b)
                elif kind == 1:
                    if x > b:
                        g = 1.0
                    elif x < b:
                        g = -1.0
                    else:
                        g = 0.0
                else:
                    a = max(x, 1e-12)
                    g = 0.5 * np.log(2.0 * a / (a + b))
                out[p, k] += c * g
    return out


@njit
def _project_rows_nb(V):
    P, n = V.shape
    out = np.empty((P, n))
    for p in range(P):
        u = np.sort(V[p])[::-1]
        css = 0.0
        theta = 0.0
        for i in range(n):
            css += u[i]
            t = (css - 1.0) / (i + 1)
            if u[i] - t > 0.0:
                theta = t
        for i in range(n):
            out[p, i] = max(V[p, i] - theta, 0.0)
    return out


if use_numba():

    def pairwise_distances(A, B, kind):
        return _pairwise_distances_nb(
            np.ascontiguousarray(A, dtype=np.float64), np.ascontiguousarray(B, dtype=np.float64), int(kind)
        )

    def weighted_distance_grad(X, B, C, kind):
        if kind == SQUARED_L2:
            # closed form is two BLAS calls; loops do not beat it
            return weighted_distance_grad_np(X, B, C, kind)
        return _weighted_distance_grad_nb(
            np.ascontiguousarray(X, dtype=np.float64),
            np.ascontiguousarray(B, dtype=np.float64),
            np.ascontiguousarray(C, dtype=np.float64),
            int(kind),
        )

    def project_rows(V):
        return _project_rows_nb(np.ascontiguousarray(V, dtype=np.float64))

else:
    pairwise_distances = pairwise_distances_np
    weighted_distance_grad = weighted_distance_grad_np
    project_rows = project_rows_np


BACKEND = "numba" if use_numba() else "numpy"
