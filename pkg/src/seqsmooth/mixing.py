"""Exponentially weighted mixtures of sequential estimators.

Each expert is scored by its cumulative squared prediction loss, where
the prediction of ``Y_t`` is made *before* the expert sees ``(X_t, Y_t)``.
Weights are ``softmax(-eta * loss)``, maintained multiplicatively.
"""

from __future__ import annotations

import csv
import math
from itertools import product
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .bandwidth import BandwidthSchedule
from .errors import EmptyEstimatorError, LowMassError
from .grid import EvaluationGrid
from .kernels import GAUSSIAN, KernelSpec
from .locpoly import SequentialLocPoly

__all__ = ["weights_from_losses", "default_eta", "ExpertPool", "build_expert_pool"]


def weights_from_losses(losses, eta: float) -> np.ndarray:
    """``exp(-eta * l_k) / sum_k' exp(-eta * l_k')``, shifted to avoid overflow."""
    losses = np.asarray(losses, dtype=float)
    if losses.size == 0:
        raise ValueError("need at least one loss")
    if not eta > 0:
        raise ValueError("eta must be positive")
    if not np.all(np.isfinite(losses)):
        raise ValueError("losses must be finite")
    a = -eta * (losses - losses.min())
    w = np.exp(a)
    return w / w.sum()


def default_eta(clip_bound: float) -> float:
    """``1 / (8 A^2)``: exp-concave range for squared loss on ``[-A, A]``."""
    return 1.0 / (8.0 * clip_bound**2)


class ExpertPool:
    """Exponential-weight aggregate of sequential estimators.

    Parameters
    ----------
    experts : sequence of (label, estimator)
        Estimators need ``update(x, y)``, ``predict(x)`` and ``y_mean``.
    eta : float, optional
        Learning rate; defaults to :func:`default_eta`.
    clip_bound : float
        Expert outputs are clipped to ``[-A, A]``.
    record_trace : bool
        Keep per-step ``(t, label, loss, weight)`` rows for export.
    """

    def __init__(
        self,
        experts: Sequence[tuple[Any, Any]],
        eta: float | None = None,
        clip_bound: float = 4.0,
        record_trace: bool = False,
    ):
        if not experts:
            raise ValueError("need at least one expert")
        if not clip_bound > 0:
            raise ValueError("clip bound must be positive")
        self.labels = [lab for lab, _ in experts]
        self.experts = [est for _, est in experts]
        self.clip_bound = float(clip_bound)
        self.eta = float(eta) if eta is not None else default_eta(self.clip_bound)
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        m = len(self.experts)
        self.losses = np.zeros(m)
        self.weights = np.full(m, 1.0 / m)
        self.t = 0
        self.trace: list[tuple[int, str, float, float]] | None = [] if record_trace else None

    def __len__(self) -> int:
        return len(self.experts)

    def _expert_predictions(self, x: float) -> tuple[np.ndarray, int]:
        preds = np.empty(len(self.experts))
        fallbacks = 0
        for k, est in enumerate(self.experts):
            try:
                preds[k] = est.predict(x)
            except (LowMassError, EmptyEstimatorError):
                preds[k] = est.y_mean
                fallbacks += 1
        return np.clip(preds, -self.clip_bound, self.clip_bound), fallbacks

    def observe(self, x: float, y: float) -> "ExpertPool":
        """Score every expert on ``(x, y)``, reweight, then update the experts."""
        x, y = float(x), float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError("observation must be finite")
        preds, _ = self._expert_predictions(x)
        step = (y - preds) ** 2
        self.losses += step
        w = self.weights * np.exp(-self.eta * (step - step.min()))
        self.weights = w / w.sum()
        for est in self.experts:
            est.update(x, y)
        self.t += 1
        if self.trace is not None:
            for lab, loss, wk in zip(self.labels, self.losses, self.weights):
                self.trace.append((self.t, str(lab), float(loss), float(wk)))
        return self

    def predict_with_quality(self, x0: float) -> tuple[float, int]:
        """Mixture prediction and the number of experts that fell back."""
        if self.t == 0:
            raise EmptyEstimatorError("no observations yet")
        preds, fallbacks = self._expert_predictions(x0)
        return float(self.weights @ preds), fallbacks

    def predict(self, x0: float) -> float:
        return self.predict_with_quality(x0)[0]

    __call__ = predict

    @property
    def y_mean(self) -> float:
        return self.experts[0].y_mean

    def update(self, x: float, y: float) -> "ExpertPool":
        return self.observe(x, y)

    def trace_to_csv(self, path: str | Path) -> Path:
        if self.trace is None:
            raise RuntimeError("pool was built without record_trace=True")
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "expert_label", "loss", "weight"])
            for t, lab, loss, wk in self.trace:
                w.writerow([t, lab, repr(loss), repr(wk)])
        return path


def build_expert_pool(
    constants: Sequence[float],
    degrees: Sequence[int],
    grid: EvaluationGrid | None = None,
    kernel: KernelSpec = GAUSSIAN,
    eta: float | None = None,
    clip_bound: float = 4.0,
    record_trace: bool = False,
) -> ExpertPool:
    """Pool over every ``(c, d)``: degree ``d-1`` smoother with ``h_t = c t^(-1/(2d+1))``."""
    experts = []
    for c, d in product(constants, degrees):
        sched = BandwidthSchedule.from_smoothness(c, d)
        experts.append((f"c={c:g},d={d}", SequentialLocPoly(sched, degree=d - 1, grid=grid, kernel=kernel)))
    return ExpertPool(experts, eta=eta, clip_bound=clip_bound, record_trace=record_trace)
