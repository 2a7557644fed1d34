"""Sequential local polynomial regression with rank-one inverse updates.

Every grid point ``x0`` keeps the weighted Gram matrix ``S`` of the
centred design, its inverse, and the moment vector ``b``.  A new pair
``(X, Y)`` at step ``t`` contributes

    S += w * z z^T,      b += w * Y * z,      w = K_{h_t}(X, x0),

with ``z_j = ((X - x0) / s)**j``.  The inverse follows ``S`` through the
Sherman-Morrison identity, so an update costs ``O(|G| p^2)`` however long
the stream is.

Numerics
--------
The powers are scaled by ``s`` (the schedule constant by default) so the
moment matrix stays well conditioned for ``p`` up to 5.  ``S`` starts at
``ridge_eps * I``.  An inverse whose spectrum still spans the ridge and the
data cannot be stored in float64 without losing the data directions, so a
grid point only switches to inverse tracking once the smallest eigenvalue
of ``S`` clears ``1e6 * ridge_eps``.  Before that its fit is a direct
``(p+1) x (p+1)`` solve.

State files
-----------
:meth:`SequentialLocPoly.save` writes an ``.npz`` archive holding a JSON
header under ``meta`` (format name, version, configuration, ``n``) and the
arrays ``gram``, ``s_inv``, ``b`` and ``promoted``, one leading row per grid
point.
"""

from __future__ import annotations

import copy as _copy
import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bandwidth import BandwidthSchedule
from .errors import EmptyEstimatorError, LowMassError
from .grid import EvaluationGrid
from .kernels import GAUSSIAN, KernelSpec, get_kernel

__all__ = [
    "rank_one_inverse_update",
    "GridPointState",
    "SequentialLocPoly",
    "SequentialNW",
    "DEN_FLOOR",
]

DEN_FLOOR = 1e-12
STATE_FORMAT = "seqsmooth.locpoly"
STATE_VERSION = 1


def rank_one_inverse_update(a_inv, v, scale: float = 1.0) -> np.ndarray:
    """Return ``(A + scale * v v^T)^-1`` given ``A^-1``.

    Uses ``A^-1 - g u u^T`` with ``u = A^-1 v`` and
    ``g = scale / (1 + scale * v^T u)``, which stays defined as
    ``scale -> 0``.  ``A^-1`` must be symmetric positive definite.
    """
    a_inv = np.asarray(a_inv, dtype=float)
    v = np.asarray(v, dtype=float)
    if a_inv.ndim != 2 or a_inv.shape[0] != a_inv.shape[1] or v.shape != (a_inv.shape[0],):
        raise ValueError("a_inv must be square and v must match its dimension")
    if not (np.all(np.isfinite(a_inv)) and np.all(np.isfinite(v)) and math.isfinite(scale)):
        raise ValueError("inputs must be finite")
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    if scale == 0:
        return a_inv.copy()
    u = a_inv @ v
    g = scale / (1.0 + scale * (v @ u))
    return a_inv - g * np.outer(u, u)


def _rank_one_batch(a_inv: np.ndarray, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    # a_inv (m, q, q), z (m, q), w (m,)
    u = np.einsum("mij,mj->mi", a_inv, z)
    g = w / (1.0 + w * np.einsum("mi,mi->m", z, u))
    return a_inv - g[:, None, None] * u[:, :, None] * u[:, None, :]


@dataclass
class GridPointState:
    """Snapshot of one grid point: ``S^-1`` and ``b`` in scaled features."""

    x0: float
    s_inv: np.ndarray
    b: np.ndarray
    feature_scale: float

    @property
    def coefficients(self) -> np.ndarray:
        return self.s_inv @ self.b

    def raw(self) -> tuple[np.ndarray, np.ndarray]:
        """``(S^-1, b)`` for unscaled powers ``(X - x0)**j``."""
        q = len(self.b)
        d = self.feature_scale ** np.arange(q)
        return self.s_inv / np.outer(d, d), self.b * d


class SequentialLocPoly:
    """Degree-``p`` sequential local polynomial smoother on a grid.

    Parameters
    ----------
    schedule : BandwidthSchedule
        Gives ``h_t`` for the ``t``-th observation.
    degree : int
        Polynomial degree ``p`` (0 to 5).
    grid : EvaluationGrid, optional
        Defaults to 201 points on ``[0, 1]``.
    kernel : KernelSpec
        Must be nonnegative.
    ridge_eps : float
        ``S`` starts at ``ridge_eps * I`` in scaled features.
    feature_scale : float, optional
        Length ``s`` dividing ``X - x0``; defaults to ``schedule.c``.
    """

    def __init__(
        self,
        schedule: BandwidthSchedule,
        degree: int = 1,
        grid: EvaluationGrid | None = None,
        kernel: KernelSpec = GAUSSIAN,
        ridge_eps: float = 1e-9,
        feature_scale: float | None = None,
        den_floor: float = DEN_FLOOR,
    ):
        if int(degree) != degree or not 0 <= degree <= 5:
            raise ValueError("degree must be an integer in [0, 5]")
        if not ridge_eps > 0:
            raise ValueError("ridge_eps must be positive")
        if not kernel.nonnegative:
            raise ValueError("local polynomial weights need a nonnegative kernel")
        self.schedule = schedule.require_valid()
        self.degree = int(degree)
        self.grid = grid if grid is not None else EvaluationGrid()
        self.kernel = kernel
        self.ridge_eps = float(ridge_eps)
        self.feature_scale = float(feature_scale if feature_scale is not None else schedule.c)
        self.den_floor = float(den_floor)
        self._promote_floor = 1e6 * self.ridge_eps

        g, q = len(self.grid), self.degree + 1
        eye = np.eye(q)
        self._gram = np.broadcast_to(self.ridge_eps * eye, (g, q, q)).copy()
        self._s_inv = np.broadcast_to(eye / self.ridge_eps, (g, q, q)).copy()
        self._b = np.zeros((g, q))
        self._mass = np.zeros(g)
        self._promoted = np.zeros(g, dtype=bool)
        self._powers = np.arange(q)
        self.n = 0
        self._y_sum = 0.0

    # -- updating -------------------------------------------------------
    def update(self, x: float, y: float) -> "SequentialLocPoly":
        x, y = float(x), float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError("observation must be finite")
        h = self.schedule.step(self.n + 1)
        reach = self.kernel.effective_radius * h
        lo, hi = self.grid.index_range(x - reach, x + reach)
        if hi > lo:
            self._absorb(slice(lo, hi), x, y, h)
        self.n += 1
        self._y_sum += y
        return self

    def _absorb(self, sl: slice, x: float, y: float, h: float) -> None:
        diff = x - self.grid.points[sl]
        w = self.kernel.raw(diff / h) / h
        z = (diff / self.feature_scale)[:, None] ** self._powers
        self._gram[sl] += w[:, None, None] * z[:, :, None] * z[:, None, :]
        self._b[sl] += (w * y)[:, None] * z
        self._mass[sl] += w

        promoted = self._promoted[sl]
        if promoted.all():
            self._s_inv[sl] = _rank_one_batch(self._s_inv[sl], z, w)
            return
        idx = np.arange(sl.start, sl.stop)
        live = idx[promoted]
        if live.size:
            self._s_inv[live] = _rank_one_batch(self._s_inv[live], z[promoted], w[promoted])
        waiting = idx[~promoted & (w > 0)]
        if waiting.size:
            lam = np.linalg.eigvalsh(self._gram[waiting])[:, 0]
            ready = waiting[lam >= self._promote_floor]
            if ready.size:
                inv = np.linalg.inv(self._gram[ready])
                self._s_inv[ready] = 0.5 * (inv + np.swapaxes(inv, 1, 2))
                self._promoted[ready] = True

    def update_many(self, xs, ys) -> "SequentialLocPoly":
        for x, y in zip(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)):
            self.update(x, y)
        return self

    def shift(self, c: float) -> None:
        """Subtract the constant ``c`` from the fitted function everywhere.

        Implemented as ``b -= c * S e1``, i.e. as if every past response
        had been lowered by ``c``; later updates build on the shifted fit.
        """
        self._b -= c * self._gram[:, :, 0]

    def center(self) -> float:
        """Shift the fit to zero mean over the grid; return the removed mean."""
        c = float(np.mean(self.predict_grid()))
        self.shift(c)
        return c

    # -- querying -------------------------------------------------------
    @property
    def y_mean(self) -> float:
        return self._y_sum / self.n if self.n else 0.0

    @property
    def mass(self) -> np.ndarray:
        """Kernel mass ``sum_t K_{h_t}(X_t, x0)`` per grid point."""
        return self._mass.copy()

    def _coef(self, idx=slice(None)) -> np.ndarray:
        s_inv, gram, b = self._s_inv[idx], self._gram[idx], self._b[idx]
        promoted = self._promoted[idx]
        beta = np.einsum("gij,gj->gi", s_inv, b)
        if not np.all(promoted):
            rest = ~promoted
            beta[rest] = np.linalg.solve(gram[rest], b[rest][..., None])[..., 0]
        return beta

    def coefficients(self) -> np.ndarray:
        """Local coefficients in scaled features, shape ``(|G|, p+1)``."""
        return self._coef()

    def predict_grid(self) -> np.ndarray:
        """Intercepts at every grid point (the ridge solution where mass is 0)."""
        return self._coef()[:, 0]

    def predict(self, x0: float) -> float:
        """Estimate at ``x0``: intercept on the grid, linear in between."""
        if self.n == 0:
            raise EmptyEstimatorError("no observations yet")
        i, frac = self.grid.bracket(float(x0))
        i, frac = int(i), float(frac)
        idx = [i] if frac == 0.0 else [i + 1] if frac == 1.0 else [i, i + 1]
        if np.any(self._mass[idx] <= self.den_floor):
            raise LowMassError(f"no local data near x0={x0}")
        vals = self._coef(idx)[:, 0]
        if len(idx) == 1:
            return float(vals[0])
        return float(vals[0] + frac * (vals[1] - vals[0]))

    def predict_many(self, xs) -> np.ndarray:
        """Vectorised :meth:`predict`; ``nan`` where local mass is too low."""
        if self.n == 0:
            raise EmptyEstimatorError("no observations yet")
        vals = np.where(self._mass > self.den_floor, self.predict_grid(), np.nan)
        return np.asarray(self.grid.interpolate(vals, xs), dtype=float)

    __call__ = predict

    def state_at(self, i: int) -> GridPointState:
        if self._promoted[i]:
            s_inv = self._s_inv[i].copy()
        else:
            s_inv = np.linalg.inv(self._gram[i])
        return GridPointState(
            x0=float(self.grid.points[i]),
            s_inv=s_inv,
            b=self._b[i].copy(),
            feature_scale=self.feature_scale,
        )

    def copy(self) -> "SequentialLocPoly":
        new = _copy.copy(self)
        for name in ("_gram", "_s_inv", "_b", "_mass", "_promoted"):
            setattr(new, name, getattr(self, name).copy())
        return new

    # -- persistence ----------------------------------------------------
    def _meta(self) -> dict:
        return {
            "format": STATE_FORMAT,
            "version": STATE_VERSION,
            "n": self.n,
            "y_sum": self._y_sum,
            "degree": self.degree,
            "kernel": self.kernel.name,
            "schedule": {"c": self.schedule.c, "k": self.schedule.exponent_k},
            "grid": {"lo": self.grid.lo, "hi": self.grid.hi, "count": self.grid.count},
            "ridge_eps": self.ridge_eps,
            "feature_scale": self.feature_scale,
            "den_floor": self.den_floor,
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("wb") as fh:
            np.savez(
                fh,
                meta=np.array(json.dumps(self._meta())),
                gram=self._gram,
                s_inv=self._s_inv,
                b=self._b,
                mass=self._mass,
                promoted=self._promoted,
            )
        return path

    @classmethod
    def load(cls, path: str | Path) -> "SequentialLocPoly":
        with np.load(Path(path), allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format") != STATE_FORMAT:
                raise ValueError("not a local polynomial state file")
            if meta.get("version") != STATE_VERSION:
                raise ValueError(f"unsupported state version {meta.get('version')}")
            est = cls(
                BandwidthSchedule(meta["schedule"]["c"], meta["schedule"]["k"]),
                degree=meta["degree"],
                grid=EvaluationGrid(**meta["grid"]),
                kernel=get_kernel(meta["kernel"]),
                ridge_eps=meta["ridge_eps"],
                feature_scale=meta["feature_scale"],
                den_floor=meta["den_floor"],
            )
            est._gram = data["gram"].copy()
            est._s_inv = data["s_inv"].copy()
            est._b = data["b"].copy()
            est._mass = data["mass"].copy()
            est._promoted = data["promoted"].copy()
        est.n = int(meta["n"])
        est._y_sum = float(meta["y_sum"])
        return est

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        vals = np.where(self._mass > self.den_floor, self.predict_grid(), np.nan)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x0", "m_hat"])
            for x, v in zip(self.grid.points, vals):
                w.writerow([repr(float(x)), repr(float(v))])
        return path


class SequentialNW:
    """Sequential Nadaraya-Watson estimator: running kernel-weighted sums.

    ``num[x0] = sum_t K_{h_t}(X_t, x0) Y_t`` and ``den[x0] = sum_t
    K_{h_t}(X_t, x0)``; the estimate is their ratio.
    """

    def __init__(
        self,
        schedule: BandwidthSchedule,
        grid: EvaluationGrid | None = None,
        kernel: KernelSpec = GAUSSIAN,
        den_floor: float = DEN_FLOOR,
    ):
        self.schedule = schedule.require_valid()
        self.grid = grid if grid is not None else EvaluationGrid()
        self.kernel = kernel
        self.den_floor = float(den_floor)
        self.num = np.zeros(len(self.grid))
        self.den = np.zeros(len(self.grid))
        self.n = 0
        self._y_sum = 0.0

    def update(self, x: float, y: float) -> "SequentialNW":
        x, y = float(x), float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError("observation must be finite")
        h = self.schedule.step(self.n + 1)
        reach = self.kernel.effective_radius * h
        lo, hi = self.grid.index_range(x - reach, x + reach)
        if hi > lo:
            w = self.kernel.raw((x - self.grid.points[lo:hi]) / h) / h
            self.num[lo:hi] += w * y
            self.den[lo:hi] += w
        self.n += 1
        self._y_sum += y
        return self

    def update_many(self, xs, ys) -> "SequentialNW":
        for x, y in zip(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)):
            self.update(x, y)
        return self

    @property
    def y_mean(self) -> float:
        return self._y_sum / self.n if self.n else 0.0

    def density(self) -> np.ndarray:
        """``den / n``: the sequential KDE of the design density."""
        if self.n == 0:
            raise EmptyEstimatorError("no observations yet")
        return self.den / self.n

    def predict_grid(self) -> np.ndarray:
        """``num / den`` on the grid, ``nan`` where ``den <= den_floor``."""
        ok = self.den > self.den_floor
        out = np.full(len(self.grid), np.nan)
        np.divide(self.num, self.den, out=out, where=ok)
        return out

    def predict(self, x0: float) -> float:
        if self.n == 0:
            raise EmptyEstimatorError("no observations yet")
        i, frac = self.grid.bracket(float(x0))
        i, frac = int(i), float(frac)
        idx = [i] if frac == 0.0 else [i + 1] if frac == 1.0 else [i, i + 1]
        den = self.den[idx]
        if np.any(den <= self.den_floor):
            raise LowMassError(f"no local data near x0={x0}")
        vals = self.num[idx] / den
        if len(idx) == 1:
            return float(vals[0])
        return float(vals[0] + frac * (vals[1] - vals[0]))

    def predict_many(self, xs) -> np.ndarray:
        if self.n == 0:
            raise EmptyEstimatorError("no observations yet")
        return np.asarray(self.grid.interpolate(self.predict_grid(), xs), dtype=float)

    __call__ = predict

    def shift(self, c: float) -> None:
        self.num -= c * self.den

    def copy(self) -> "SequentialNW":
        new = _copy.copy(self)
        new.num = self.num.copy()
        new.den = self.den.copy()
        return new

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x0", "m_hat"])
            for x, v in zip(self.grid.points, self.predict_grid()):
                w.writerow([repr(float(x)), repr(float(v))])
        return path
