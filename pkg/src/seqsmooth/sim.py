"""Test functions, data streams, and risk metrics for the simulations."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyEstimatorError, LowMassError, OutOfGridError, QualityWarning
from .grid import EvaluationGrid

__all__ = [
    "TrueFunction",
    "f1", "f2", "f3", "f4", "holder", "additive", "custom",
    "get_function",
    "SimConfig",
    "replication_rng",
    "generate_stream",
    "integrated_squared_error",
    "sequential_avg_loss",
    "RiskRow",
    "RiskReport",
    "rate_slope",
    "INTERIOR",
    "TruncatedNormal",
]

_SQRT_005PI = math.sqrt(0.005 * math.pi)

INTERIOR = EvaluationGrid(0.1, 0.9, 161)


@dataclass(frozen=True)
class TrueFunction:
    """Regression function on ``[0, 1]`` (or ``[0, 1]^p`` for additive kinds)."""

    kind: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    params: tuple = ()
    dim: int = 1

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise OutOfGridError("true functions are defined on [0, 1]")
        if self.dim > 1 and arr.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} coordinates")
        out = self.func(arr)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def label(self) -> str:
        if self.kind == "holder":
            return f"holder{self.params[0]:g}"
        return self.kind


def f1() -> TrueFunction:
    return TrueFunction("f1", lambda x: np.exp(-x))


def f2() -> TrueFunction:
    return TrueFunction("f2", lambda x: 1 + 2 * x**2 + np.exp(-5 * (x - 0.5) ** 2))


def f3() -> TrueFunction:
    return TrueFunction("f3", lambda x: 1 + 2 * x**2 + np.exp(-200 * (x - 0.5) ** 2))


def f4() -> TrueFunction:
    return TrueFunction(
        "f4",
        lambda x: (np.exp(-200 * (x - 0.2) ** 2) + np.exp(-200 * (x - 0.8) ** 2)) / _SQRT_005PI,
    )


def holder(alpha: float) -> TrueFunction:
    """``2 |0.5 (x - 0.5)|^alpha``: Holder-``alpha`` at ``x = 0.5``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    a = float(alpha)
    return TrueFunction("holder", lambda x: 2 * np.abs(0.5 * (x - 0.5)) ** a, (a,))


def additive(parts: Sequence[TrueFunction], intercept: float = 0.0) -> TrueFunction:
    parts = tuple(parts)

    def func(x: np.ndarray) -> np.ndarray:
        return intercept + sum(f.func(x[..., j]) for j, f in enumerate(parts))

    return TrueFunction("additive", func, (parts, intercept), dim=len(parts))


def custom(func: Callable[[np.ndarray], np.ndarray], name: str = "custom") -> TrueFunction:
    return TrueFunction(name, func)


def get_function(name: str) -> TrueFunction:
    key = name.lower()
    simple = {"f1": f1, "f2": f2, "f3": f3, "f4": f4}
    if key in simple:
        return simple[key]()
    if key.startswith("holder"):
        return holder(float(key[len("holder"):].strip("()= ")))
    raise KeyError(f"unknown function {name!r}")


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal density restricted to ``[0, 1]``: the KDE test density."""

    mean: float = 0.5
    sd: float = 0.1

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("sd must be positive")

    @property
    def mass(self) -> float:
        """Untruncated probability of ``[0, 1]``."""
        z = lambda v: 0.5 * math.erfc(-(v - self.mean) / (self.sd * math.sqrt(2)))
        return z(1.0) - z(0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        u = (x - self.mean) / self.sd
        out = np.exp(-0.5 * u * u) / (self.sd * math.sqrt(2 * math.pi) * self.mass)
        return np.where((x >= 0) & (x <= 1), out, 0.0)

    def curvature_integral(self) -> float:
        """``int f''^2`` over the real line, ``3 / (8 sqrt(pi) sd^5)`` rescaled by the mass.

        Truncation at ``[0, 1]`` drops only the tails, negligible for the
        default ``sd = 0.1``.
        """
        return 3.0 / (8.0 * math.sqrt(math.pi) * self.sd**5) / self.mass**2

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Rejection sampling from the untruncated normal."""
        out = np.empty(0)
        while out.size < n:
            draw = rng.normal(self.mean, self.sd, size=max(2 * (n - out.size), 16))
            out = np.concatenate([out, draw[(draw >= 0) & (draw <= 1)]])
        return out[:n]


@dataclass(frozen=True)
class SimConfig:
    n: int
    sigma2: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n < 0 or self.sigma2 < 0:
            raise ValueError("need n >= 0 and sigma2 >= 0")


def replication_rng(seed: int, replication: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, replication)`` via ``SeedSequence``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(replication)]))


def generate_stream(cfg: SimConfig, f: TrueFunction, replication: int = 0,
                    rng: np.random.Generator | None = None):
    """``n`` pairs with ``X ~ U[0,1]^dim`` and ``Y = f(X) + N(0, sigma2)``."""
    rng = rng if rng is not None else replication_rng(cfg.seed, replication)
    shape = (cfg.n,) if f.dim == 1 else (cfg.n, f.dim)
    x = rng.uniform(0.0, 1.0, size=shape)
    noise = rng.standard_normal(cfg.n) * math.sqrt(cfg.sigma2)
    return x, f(x) + noise


def integrated_squared_error(predict, f, grid: EvaluationGrid = INTERIOR,
                             fallback: float | None = None) -> float:
    """Trapezoid rule for ``int (predict - f)^2`` over the grid interval.

    ``predict`` maps an array of points to an array; ``nan`` entries
    are replaced by ``fallback`` (with a :class:`QualityWarning`) or raise
    :class:`LowMassError` if no fallback is given.  ``f`` may be a
    callable or a precomputed array of true values on the grid.
    """
    pts = grid.points
    pred = np.asarray(predict(pts), dtype=float)
    bad = ~np.isfinite(pred)
    if bad.any():
        if fallback is None:
            raise LowMassError(f"{bad.sum()} grid points have no estimate")
        warnings.warn(f"{bad.sum()} grid points used the fallback value", QualityWarning)
        pred = np.where(bad, fallback, pred)
    truth = np.asarray(f(pts) if callable(f) else f, dtype=float)
    return float(np.trapezoid((pred - truth) ** 2, pts))


def sequential_avg_loss(x, y, estimator, warmup: int = 0):
    """Running average of one-step-ahead squared prediction loss.

    For ``t > warmup`` the estimator predicts ``y_t`` from data up to
    ``t - 1``; failed predictions fall back to the running mean of ``y``.

    Returns
    -------
    t : ndarray
        Sample sizes ``warmup+1 .. n``.
    avg : ndarray
        Average loss over steps ``warmup+1 .. t``.
    fallbacks : int
        Number of predictions that used the fallback.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if warmup < 0:
        raise ValueError("warmup must be nonnegative")
    losses = []
    fallbacks = 0
    running = 0.0
    for t in range(1, len(y) + 1):
        if t > warmup:
            try:
                pred = estimator.predict(x[t - 1])
            except (LowMassError, EmptyEstimatorError):
                pred = running / (t - 1) if t > 1 else 0.0
                fallbacks += 1
            losses.append((y[t - 1] - pred) ** 2)
        estimator.update(x[t - 1], y[t - 1])
        running += y[t - 1]
    losses = np.asarray(losses)
    steps = np.arange(warmup + 1, len(y) + 1)
    avg = np.cumsum(losses) / np.arange(1, len(losses) + 1)
    return steps, avg, fallbacks


@dataclass(frozen=True)
class RiskRow:
    n: int
    mean_risk: float
    stderr: float
    reps: int


@dataclass
class RiskReport:
    rows: list[RiskRow]
    metric: str = "ISE"
    estimator_label: str = ""

    @classmethod
    def from_samples(cls, ns: Sequence[int], samples, metric: str = "ISE",
                     estimator_label: str = "") -> "RiskReport":
        """Build from a ``(reps, len(ns))`` array of per-replication risks."""
        samples = np.asarray(samples, dtype=float)
        reps = samples.shape[0]
        mean = samples.mean(axis=0)
        se = samples.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.zeros_like(mean)
        rows = [RiskRow(int(n), float(m), float(s), reps) for n, m, s in zip(ns, mean, se)]
        return cls(rows, metric, estimator_label)

    @property
    def ns(self) -> np.ndarray:
        return np.array([r.n for r in self.rows])

    @property
    def risks(self) -> np.ndarray:
        return np.array([r.mean_risk for r in self.rows])

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "mean_risk", "stderr", "reps", "metric", "estimator_label"])
            for r in self.rows:
                w.writerow([r.n, repr(r.mean_risk), repr(r.stderr), r.reps, self.metric,
                            self.estimator_label])
        return path


def rate_slope(report: RiskReport) -> float:
    """Least-squares slope of ``log(risk)`` against ``log(n)``."""
    ns, risks = report.ns.astype(float), report.risks
    ok = risks > 0
    if not ok.all():
        warnings.warn(f"dropping {(~ok).sum()} nonpositive risk values", QualityWarning)
    if len(np.unique(ns[ok])) < 3:
        raise ValueError("need at least three distinct n with positive risk")
    slope, _ = np.polyfit(np.log(ns[ok]), np.log(risks[ok]), 1)
    return float(slope)
