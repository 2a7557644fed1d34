"""Uniform evaluation grids and piecewise-linear lookup."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import OutOfGridError

__all__ = ["EvaluationGrid"]


@dataclass(frozen=True)
class EvaluationGrid:
    """``count`` equally spaced points on ``[lo, hi]``, endpoints included."""

    lo: float = 0.0
    hi: float = 1.0
    count: int = 201

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or not self.lo < self.hi:
            raise ValueError(f"grid needs finite lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.count) != self.count or self.count < 2:
            raise ValueError("grid needs at least two points")

    @cached_property
    def points(self) -> np.ndarray:
        pts = np.linspace(self.lo, self.hi, int(self.count))
        pts.setflags(write=False)
        return pts

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)

    def __len__(self) -> int:
        return int(self.count)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        tol = 1e-12 * (self.hi - self.lo)
        return (x >= self.lo - tol) & (x <= self.hi + tol)

    def check(self, x) -> None:
        if not np.all(self.contains(x)):
            raise OutOfGridError(f"point(s) outside grid range [{self.lo}, {self.hi}]")

    def index_range(self, a: float, b: float) -> tuple[int, int]:
        """Slice bounds ``(i, j)`` of grid points inside ``[a, b]``."""
        pts = self.points
        return int(np.searchsorted(pts, a, "left")), int(np.searchsorted(pts, b, "right"))

    def bracket(self, x):
        """Left neighbour index and interpolation fraction for each ``x``."""
        self.check(x)
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        pos = (x - self.lo) / self.spacing
        i = np.clip(np.floor(pos).astype(int), 0, self.count - 2)
        frac = pos - i
        # Snap onto grid points so stored values come back exactly.
        frac = np.where(np.abs(frac) < 1e-9, 0.0, np.where(np.abs(frac - 1) < 1e-9, 1.0, frac))
        return i, frac

    def interpolate(self, values: np.ndarray, x):
        """Piecewise-linear interpolation of grid ``values`` at ``x``."""
        i, frac = self.bracket(x)
        left, right = values[i], values[i + 1]
        out = np.where(frac == 0.0, left, np.where(frac == 1.0, right, left + frac * (right - left)))
        return float(out) if np.ndim(out) == 0 else out
