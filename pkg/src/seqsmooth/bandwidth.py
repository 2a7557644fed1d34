"""Shrinking power-law bandwidth sequences ``h_t = c * t**(-k)``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["BandwidthSchedule", "bandwidth_at", "validate_power_schedule"]


@dataclass(frozen=True)
class BandwidthSchedule:
    """Per-observation bandwidth rule ``h_t = c * t**(-exponent_k)``.

    The ``t``-th observation of a stream is smoothed with ``h_t`` and keeps
    that bandwidth forever.  Construction does not validate; use
    :func:`validate_power_schedule` or :meth:`require_valid`.
    """

    c: float
    exponent_k: float
    smoothness_d: int | None = None

    @classmethod
    def from_smoothness(cls, c: float, d: int) -> "BandwidthSchedule":
        """Rate-optimal schedule ``k = 1/(2d+1)`` for targets in ``C^d``."""
        if int(d) != d or d < 1:
            raise ValueError(f"smoothness d must be a positive integer, got {d}")
        return cls(c=float(c), exponent_k=1.0 / (2 * int(d) + 1), smoothness_d=int(d))

    @classmethod
    def for_degree(cls, c: float, degree: int) -> "BandwidthSchedule":
        """Schedule for a degree-``p`` local polynomial, which targets ``C^(p+1)``."""
        return cls.from_smoothness(c, int(degree) + 1)

    def require_valid(self) -> "BandwidthSchedule":
        if not validate_power_schedule(self):
            raise ValueError(f"invalid bandwidth schedule {self}: need c > 0 and 0 < k < 1")
        return self

    def at(self, t):
        """Bandwidth for observation index ``t`` (scalar or array, ``t >= 1``)."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 1):
            raise ValueError("observation index t must be >= 1")
        out = self.c * t_arr ** (-self.exponent_k)
        return float(out) if out.ndim == 0 else out

    __call__ = at

    def step(self, t: int) -> float:
        """Scalar fast path of :meth:`at` for a validated integer ``t >= 1``."""
        return self.c * t ** (-self.exponent_k)

    def partial_sums(self, n: int) -> tuple[float, float]:
        """Return ``(sum h_t**2, sum 1/h_t)`` over ``t = 1..n``."""
        h = self.at(np.arange(1, int(n) + 1))
        h = np.atleast_1d(h)
        return float(np.sum(h * h)), float(np.sum(1.0 / h))


def bandwidth_at(s: BandwidthSchedule, t: int) -> float:
    if int(t) != t:
        raise ValueError("observation index must be an integer")
    return s.at(int(t))


def validate_power_schedule(s: BandwidthSchedule) -> bool:
    """True iff ``c > 0`` and ``0 < k < 1``.

    For power laws this is enough for ``h_t -> 0`` and
    ``(1/n**2) * sum(1/h_t) -> 0``.
    """
    try:
        c, k = float(s.c), float(s.exponent_k)
    except (TypeError, ValueError):
        return False
    return math.isfinite(c) and math.isfinite(k) and c > 0 and 0 < k < 1
