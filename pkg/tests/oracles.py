"""Independent dense re-computations used as test oracles."""

import numpy as np


def variable_weights(x, pts, c, k, kernel):
    """``W[g, t] = K((X_t - x0_g) / h_t) / h_t`` with ``h_t = c t^-k``."""
    t = np.arange(1, len(x) + 1)
    h = c * t ** (-k)
    return kernel.evaluate((np.asarray(x)[None, :] - pts[:, None]) / h[None, :]) / h[None, :]


def dense_locpoly(x, y, pts, c, k, kernel, degree, eps, scale):
    """Intercepts of ``(eps I + Z'WZ)^-1 Z'Wy`` solved from scratch at every grid point.

    ``Z`` holds ``((X_t - x0) / scale)^j``, the ridge sits in those coordinates.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    W = variable_weights(x, pts, c, k, kernel)
    out = np.empty(len(pts))
    for g, x0 in enumerate(pts):
        Z = ((x - x0) / scale)[:, None] ** np.arange(degree + 1)
        S = eps * np.eye(degree + 1) + Z.T @ (W[g][:, None] * Z)
        out[g] = np.linalg.solve(S, Z.T @ (W[g] * y))[0]
    return out


def direct_nw(x, y, pts, c, k, kernel):
    W = variable_weights(x, pts, c, k, kernel)
    return W @ np.asarray(y, float), W.sum(axis=1)
