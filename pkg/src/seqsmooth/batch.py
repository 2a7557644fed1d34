"""Fixed-bandwidth batch local polynomial fits and leave-one-out selection.

These are the classical baselines: every query refits from all stored data,
so a full-grid refit costs ``O(|G| n p^2)``.  Features are scaled by
``min(h, 1)`` and the ridge is ``ridge_eps`` times the local kernel mass,
so it stays negligible at any bandwidth.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import QualityWarning, SelectionError
from .kernels import GAUSSIAN, KernelSpec
from .locpoly import DEN_FLOOR

__all__ = ["BatchFitConfig", "batch_locpoly_fit", "loo_predictions", "loo_cv_constant"]


@dataclass(frozen=True)
class BatchFitConfig:
    degree: int = 1
    h: float = 0.1
    kernel: KernelSpec = GAUSSIAN
    ridge_eps: float = 1e-12

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("bandwidth h must be positive")
        if int(self.degree) != self.degree or self.degree < 0:
            raise ValueError("degree must be a nonnegative integer")
        if self.ridge_eps < 0:
            raise ValueError("ridge_eps must be nonnegative")


def _as_xy(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, tuple) and len(data) == 2 and np.ndim(data[0]) == 1:
        x, y = data
    else:
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("data must be (x, y) arrays or a list of (x, y) pairs")
        x, y = arr[:, 0], arr[:, 1]
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size == 0:
        raise ValueError("data must be non-empty")
    return x, y


def _solve_local(moments: np.ndarray, targets: np.ndarray, q: int, ridge_eps: float) -> np.ndarray:
    """Intercepts from Hankel moment sums.

    ``moments[..., m] = sum w * z^m`` for ``m < 2q-1`` and
    ``targets[..., j] = sum w * z^j * y``.
    """
    idx = np.arange(q)
    gram = moments[..., idx[:, None] + idx[None, :]]
    mass = moments[..., 0]
    ridge = ridge_eps * np.where(mass > 0, mass, 1.0)
    gram = gram + ridge[..., None, None] * np.eye(q)
    return np.linalg.solve(gram, targets[..., None])[..., 0, 0]


def batch_locpoly_fit(data, cfg: BatchFitConfig, x0):
    """Intercept of the kernel-weighted least-squares fit at ``x0``.

    ``x0`` may be a scalar or an array; every query uses bandwidth
    ``cfg.h`` for all points.  A :class:`QualityWarning` is emitted where
    the kernel mass falls below the low-mass floor.
    """
    x, y = _as_xy(data)
    x0_arr = np.atleast_1d(np.asarray(x0, dtype=float))
    q = cfg.degree + 1
    h = cfg.h
    scale = min(h, 1.0)
    diff = x[None, :] - x0_arr[:, None]
    w = cfg.kernel.evaluate(diff / h) / h
    z = diff / scale
    zp = np.ones_like(z)
    moments = np.empty((len(x0_arr), 2 * q - 1))
    targets = np.empty((len(x0_arr), q))
    for m in range(2 * q - 1):
        wz = w * zp
        moments[:, m] = wz.sum(axis=1)
        if m < q:
            targets[:, m] = wz @ y
        zp = zp * z
    if np.any(moments[:, 0] < DEN_FLOOR):
        warnings.warn("batch fit has negligible kernel mass at some points", QualityWarning)
    out = _solve_local(moments, targets, q, cfg.ridge_eps)
    return float(out[0]) if np.ndim(x0) == 0 else out


def loo_predictions(x, y, h: float, degree: int, kernel: KernelSpec = GAUSSIAN,
                    ridge_eps: float = 1e-12) -> np.ndarray:
    """Leave-one-out fits ``m_{-i}(x_i)``; ``nan`` where no other point has weight."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    q = degree + 1
    diff = x[None, :] - x[:, None]
    w = kernel.evaluate(diff / h) / h
    np.fill_diagonal(w, 0.0)
    z = diff / min(h, 1.0)
    zp = np.ones_like(z)
    moments = np.empty((len(x), 2 * q - 1))
    targets = np.empty((len(x), q))
    for m in range(2 * q - 1):
        wz = w * zp
        moments[:, m] = wz.sum(axis=1)
        if m < q:
            targets[:, m] = wz @ y
        zp = zp * z
    out = np.full(len(x), np.nan)
    ok = moments[:, 0] > DEN_FLOOR
    if np.any(ok):
        out[ok] = _solve_local(moments[ok], targets[ok], q, ridge_eps)
    return out


def loo_cv_constant(
    data,
    candidates: Sequence[float],
    degree: int = 1,
    kernel: KernelSpec = GAUSSIAN,
    n_exponent: float = 0.2,
    ridge_eps: float = 1e-12,
) -> float:
    """Pick the bandwidth constant with the smallest leave-one-out error.

    Each candidate ``c`` is scored with ``h = c * n**(-n_exponent)``.  Points
    whose leave-one-out fit has no kernel mass are scored against the mean
    of the other responses.  Ties go to the smallest candidate.
    """
    x, y = _as_xy(data)
    if len(x) < 2:
        raise ValueError("leave-one-out needs at least two points")
    cands = [float(c) for c in candidates]
    if not cands:
        raise ValueError("no candidates given")
    if any(not c > 0 for c in cands):
        raise ValueError("candidates must be positive")
    n = len(x)
    loo_mean = (y.sum() - y) / (n - 1)
    best, best_score = None, np.inf
    for c in sorted(set(cands)):
        pred = loo_predictions(x, y, c * n ** (-n_exponent), degree, kernel, ridge_eps)
        if np.all(np.isnan(pred)):
            continue
        pred = np.where(np.isnan(pred), loo_mean, pred)
        score = float(np.sum((y - pred) ** 2))
        if score < best_score:
            best, best_score = c, score
    if best is None:
        raise SelectionError("every candidate produced a degenerate fit")
    return best
