"""Sequential kernel density estimation on a fixed grid.

The estimate after ``n`` observations is

    f_n(x) = (1/n) * sum_t K((x - X_t) / h_t) / h_t,

with ``h_t`` drawn from a :class:`~seqsmooth.bandwidth.BandwidthSchedule`.
The running sum is stored unnormalised, so one update only touches grid
points inside the kernel's effective support.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .bandwidth import BandwidthSchedule
from .errors import EmptyEstimatorError
from .grid import EvaluationGrid
from .kernels import GAUSSIAN, KernelSpec, kernel_moment, kernel_roughness

__all__ = ["SequentialKDE", "kde_leading_risk"]


class SequentialKDE:
    """Grid-valued sequential KDE with shrinking per-observation bandwidths."""

    def __init__(
        self,
        schedule: BandwidthSchedule,
        grid: EvaluationGrid | None = None,
        kernel: KernelSpec = GAUSSIAN,
    ):
        self.schedule = schedule.require_valid()
        self.grid = grid if grid is not None else EvaluationGrid()
        self.kernel = kernel
        self.n = 0
        self._sums = np.zeros(len(self.grid))

    @property
    def values(self) -> np.ndarray:
        """Current estimate at every grid point (zeros before any data)."""
        if self.n == 0:
            return np.zeros_like(self._sums)
        return self._sums / self.n

    def update(self, x_new: float) -> "SequentialKDE":
        x_new = float(x_new)
        if not math.isfinite(x_new):
            raise ValueError("observation must be finite")
        h = self.schedule.step(self.n + 1)
        reach = self.kernel.effective_radius * h
        lo, hi = self.grid.index_range(x_new - reach, x_new + reach)
        if hi > lo:
            u = (self.grid.points[lo:hi] - x_new) / h
            self._sums[lo:hi] += self.kernel.raw(u) / h
        self.n += 1
        return self

    def update_many(self, xs) -> "SequentialKDE":
        for x in np.asarray(xs, dtype=float).ravel():
            self.update(x)
        return self

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        """Stored value at grid points, linear interpolation in between."""
        if self.n == 0:
            raise EmptyEstimatorError("no observations yet")
        return self.grid.interpolate(self.values, x)

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "f_hat"])
            for x, v in zip(self.grid.points, self.values):
                w.writerow([repr(float(x)), repr(float(v))])
        return path


def kde_leading_risk(
    curvature_integral: float,
    kernel: KernelSpec,
    schedule: BandwidthSchedule,
    n: int,
) -> float:
    """Leading-order MISE of the sequential KDE after ``n`` observations.

    ``(c1 * (sum h_t^2)^2 + c2 * sum 1/h_t) / n^2`` with
    ``c1 = sigma_K^4 * int f''^2 / 4`` and ``c2 = int K^2``.  The partial
    sums are exact; lower-order remainder terms are not included.

    Parameters
    ----------
    curvature_integral : float
        ``int f''(x)^2 dx`` for the true density.
    """
    if curvature_integral < 0:
        raise ValueError("curvature integral must be nonnegative")
    if n < 1:
        raise ValueError("n must be >= 1")
    sigma2 = kernel_moment(kernel, 2)
    c1 = 0.25 * sigma2**2 * curvature_integral
    c2 = kernel_roughness(kernel)
    sum_h2, sum_inv_h = schedule.partial_sums(n)
    return (c1 * sum_h2**2 + c2 * sum_inv_h) / n**2
