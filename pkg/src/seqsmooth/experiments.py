"""Experiment runners behind the command-line tool.

Each runner is deterministic given its seed: replication ``r`` draws from
``replication_rng(seed, r)`` and results are reduced in replication order,
whatever the worker count.  Runners return result objects whose ``write``
method emits CSV files into a directory.
"""

from __future__ import annotations

import csv
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .additive import SequentialBackfitter
from .bandwidth import BandwidthSchedule
from .batch import BatchFitConfig, batch_locpoly_fit, loo_cv_constant
from .density import SequentialKDE, kde_leading_risk
from .errors import LowMassError, QualityWarning
from .grid import EvaluationGrid
from .kernels import get_kernel
from .locpoly import SequentialLocPoly, SequentialNW
from .mixing import ExpertPool
from .sim import (
    INTERIOR,
    RiskReport,
    SimConfig,
    TruncatedNormal,
    additive,
    custom,
    generate_stream,
    get_function,
    holder,
    integrated_squared_error,
    replication_rng,
    sequential_avg_loss,
)

__all__ = [
    "RATE_LADDER",
    "FIG1_CONSTANTS",
    "FIG2_ALPHAS",
    "map_replications",
    "rate_kde",
    "rate_locpoly",
    "kde_risk_check",
    "Fig1Result",
    "fig1",
    "Fig2Result",
    "fig2",
    "BenchResult",
    "bench_update_cost",
    "additive_truth",
    "additive_ise",
    "BackfitResult",
    "backfit_demo",
]

RATE_LADDER = (200, 500, 1000, 2000, 5000)
FIG1_CONSTANTS = (0.05, 0.07, 0.1, 0.3, 0.5, 0.7, 1.0, 1.5)
FIG2_ALPHAS = (1.0, 1.5, 2.0, 2.5)


def map_replications(func: Callable[[int], object], reps: int, workers: int | None = 1) -> list:
    """``[func(0), ..., func(reps-1)]``, optionally over a process pool.

    ``func`` must be picklable when ``workers > 1``.  Output order never
    depends on scheduling.
    """
    if reps < 1:
        raise ValueError("need at least one replication")
    workers = (os.cpu_count() or 1) if workers is None else int(workers)
    if workers <= 1 or reps == 1:
        return [func(r) for r in range(reps)]
    with ProcessPoolExecutor(max_workers=min(workers, reps)) as pool:
        return list(pool.map(func, range(reps), chunksize=max(1, reps // (4 * workers))))


def _fmt(v) -> str:
    return repr(float(v))


def _write_rows(path: Path, header: Sequence[str], rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


# -- rates --------------------------------------------------------------

def _checkpoints(ns: Sequence[int]) -> list[int]:
    ns = sorted({int(n) for n in ns})
    if not ns or ns[0] < 1:
        raise ValueError("sample sizes must be positive")
    return ns


def _kde_replicate(rep: int, *, seed: int, c: float, k: float, ns: list[int],
                   density: TruncatedNormal, kernel: str, grid: EvaluationGrid,
                   metric_grid: EvaluationGrid) -> np.ndarray:
    x = density.sample(replication_rng(seed, rep), ns[-1])
    est = SequentialKDE(BandwidthSchedule(c, k), grid, get_kernel(kernel))
    truth = density.pdf(metric_grid.points)
    out, done = [], 0
    for n in ns:
        est.update_many(x[done:n])
        done = n
        out.append(integrated_squared_error(est.evaluate, truth, metric_grid))
    return np.array(out)


def rate_kde(
    ns: Sequence[int] = RATE_LADDER,
    reps: int = 50,
    c: float = 0.05,
    k: float = 0.2,
    seed: int = 0,
    workers: int | None = 1,
    density: TruncatedNormal = TruncatedNormal(),
    kernel: str = "gaussian",
    grid: EvaluationGrid = EvaluationGrid(),
    metric_grid: EvaluationGrid = INTERIOR,
    replicate: Callable[[int], np.ndarray] | None = None,
) -> RiskReport:
    """Interior ISE of the sequential KDE along a ladder of sample sizes.

    One stream of length ``max(ns)`` per replication; the estimate is
    scored at each checkpoint.  ``replicate(rep) -> risks`` replaces the
    built-in simulation when given.
    """
    ns = _checkpoints(ns)
    if replicate is None:
        replicate = partial(_kde_replicate, seed=seed, c=c, k=k, ns=ns, density=density,
                            kernel=kernel, grid=grid, metric_grid=metric_grid)
    samples = map_replications(replicate, reps, workers)
    return RiskReport.from_samples(ns, samples, "ISE", f"kde(c={c:g},k={k:g})")


def _locpoly_replicate(rep: int, *, seed: int, c: float, k: float, degree: int, ns: list[int],
                       function: str, sigma2: float, kernel: str, grid: EvaluationGrid,
                       metric_grid: EvaluationGrid) -> np.ndarray:
    f = get_function(function)
    x, y = generate_stream(SimConfig(ns[-1], sigma2, seed), f, replication=rep)
    est = SequentialLocPoly(BandwidthSchedule(c, k), degree=degree, grid=grid,
                            kernel=get_kernel(kernel))
    out, done = [], 0
    for n in ns:
        est.update_many(x[done:n], y[done:n])
        done = n
        out.append(integrated_squared_error(est.predict_many, f, metric_grid, fallback=est.y_mean))
    return np.array(out)


def rate_locpoly(
    ns: Sequence[int] = RATE_LADDER,
    reps: int = 50,
    c: float = 0.3,
    k: float = 0.2,
    degree: int = 1,
    function: str = "f2",
    sigma2: float = 0.5,
    seed: int = 0,
    workers: int | None = 1,
    kernel: str = "gaussian",
    grid: EvaluationGrid = EvaluationGrid(),
    metric_grid: EvaluationGrid = INTERIOR,
    replicate: Callable[[int], np.ndarray] | None = None,
) -> RiskReport:
    """Interior ISE of sequential local polynomial regression along ``ns``."""
    ns = _checkpoints(ns)
    if replicate is None:
        replicate = partial(_locpoly_replicate, seed=seed, c=c, k=k, degree=degree, ns=ns,
                            function=function, sigma2=sigma2, kernel=kernel, grid=grid,
                            metric_grid=metric_grid)
    samples = map_replications(replicate, reps, workers)
    label = f"locpoly(p={degree},c={c:g},k={k:g},{function})"
    return RiskReport.from_samples(ns, samples, "ISE", label)


def kde_risk_check(n: int = 2000, reps: int = 200, c: float = 0.05, k: float = 0.2,
                   seed: int = 0, workers: int | None = 1,
                   density: TruncatedNormal = TruncatedNormal(),
                   kernel: str = "gaussian") -> tuple[RiskReport, float]:
    """Monte-Carlo KDE risk at ``n`` next to the leading-order prediction.

    The Monte-Carlo risk is integrated over the interior only, while the
    leading term is a whole-line integral; for a density concentrated
    inside the interior the two agree.
    """
    report = rate_kde([n], reps, c, k, seed, workers, density, kernel)
    lead = kde_leading_risk(density.curvature_integral(), get_kernel(kernel),
                            BandwidthSchedule(c, k), n)
    return report, lead


# -- fig1: sequential vs batch prediction loss --------------------------

def _batch_step_losses(x, y, warmup: int, degree: int, k: float, kernel, c_of_t) -> np.ndarray:
    losses = []
    for t in range(warmup + 1, len(y) + 1):
        m = t - 1
        c = c_of_t(x[:m], y[:m])
        cfg = BatchFitConfig(degree, c * m ** (-k), kernel)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", QualityWarning)
            pred = batch_locpoly_fit((x[:m], y[:m]), cfg, x[m])
        losses.append((y[m] - pred) ** 2)
    return np.asarray(losses)


def _running_mean(losses: np.ndarray) -> np.ndarray:
    return np.cumsum(losses) / np.arange(1, len(losses) + 1)


def _fig1_replicate(rep: int, *, function: str, constants: tuple, n: int, sigma2: float,
                    seed: int, warmup: int, degree: int, k: float, kernel: str,
                    grid: EvaluationGrid, cv: bool):
    f = get_function(function)
    kern = get_kernel(kernel)
    x, y = generate_stream(SimConfig(n, sigma2, seed), f, replication=rep)
    seq, bat, fallbacks = [], [], 0
    for c in constants:
        est = SequentialLocPoly(BandwidthSchedule(c, k), degree=degree, grid=grid, kernel=kern)
        _, avg, fb = sequential_avg_loss(x, y, est, warmup)
        seq.append(avg)
        fallbacks += fb
        bat.append(_running_mean(_batch_step_losses(x, y, warmup, degree, k, kern,
                                                    lambda xs, ys, c=c: c)))
    cv_curve = None
    if cv:
        def pick(xs, ys):
            return loo_cv_constant((xs, ys), constants, degree, kern, n_exponent=k)
        cv_curve = _running_mean(_batch_step_losses(x, y, warmup, degree, k, kern, pick))
    return np.array(seq), np.array(bat), cv_curve, fallbacks


@dataclass
class Fig1Result:
    """Average one-step prediction loss curves for one regression function.

    ``seq_curves`` and ``batch_curves`` have shape ``(len(constants), T)``
    and hold replication means of the running average loss at
    ``t = warmup+1 .. n``.
    """

    function: str
    constants: tuple
    t: np.ndarray
    seq_curves: np.ndarray
    batch_curves: np.ndarray
    cv_curve: np.ndarray | None
    fit_x: np.ndarray
    fit_truth: np.ndarray
    fit_seq: np.ndarray
    fit_batch: np.ndarray
    fallbacks: int
    reps: int

    @property
    def best_seq_index(self) -> int:
        return int(np.argmin(self.seq_curves[:, -1]))

    @property
    def best_batch_index(self) -> int:
        return int(np.argmin(self.batch_curves[:, -1]))

    @property
    def best_seq_loss(self) -> float:
        return float(self.seq_curves[self.best_seq_index, -1])

    @property
    def best_batch_loss(self) -> float:
        return float(self.batch_curves[self.best_batch_index, -1])

    @property
    def gap(self) -> float:
        return abs(self.best_seq_loss - self.best_batch_loss)

    def write(self, out: Path) -> list[Path]:
        out = Path(out)
        header = ["t", "best_sequential", "best_batch"]
        cols = [self.t, self.seq_curves[self.best_seq_index], self.batch_curves[self.best_batch_index]]
        if self.cv_curve is not None:
            header.append("batch_cv")
            cols.append(self.cv_curve)
        rows = [[int(r[0])] + [_fmt(v) for v in r[1:]] for r in zip(*cols)]
        paths = [_write_rows(out / f"fig1_{self.function}_loss.csv", header, rows)]
        rows = [[_fmt(a), _fmt(b), _fmt(c), _fmt(d)]
                for a, b, c, d in zip(self.fit_x, self.fit_truth, self.fit_seq, self.fit_batch)]
        paths.append(_write_rows(out / f"fig1_{self.function}_fit.csv",
                                 ["x", "truth", "sequential", "batch"], rows))
        rows = []
        for i, c in enumerate(self.constants):
            rows.append(["sequential", _fmt(c), _fmt(self.seq_curves[i, -1])])
            rows.append(["batch", _fmt(c), _fmt(self.batch_curves[i, -1])])
        if self.cv_curve is not None:
            rows.append(["batch_cv", "", _fmt(self.cv_curve[-1])])
        paths.append(_write_rows(out / f"fig1_{self.function}_summary.csv",
                                 ["estimator", "c", "final_avg_loss"], rows))
        return paths


def fig1(
    function: str = "f2",
    constants: Sequence[float] = FIG1_CONSTANTS,
    n: int = 150,
    sigma2: float = 0.5,
    reps: int = 100,
    seed: int = 0,
    warmup: int = 50,
    degree: int = 1,
    k: float = 0.2,
    kernel: str = "gaussian",
    grid: EvaluationGrid = EvaluationGrid(),
    cv: bool = True,
    workers: int | None = 1,
) -> Fig1Result:
    """Sequential versus batch local polynomial prediction loss on one function.

    For every constant ``c`` the sequential smoother uses ``h_t = c t^-k``
    and the batch fit predicting ``Y_t`` uses ``h = c (t-1)^-k`` on the
    first ``t-1`` points.  With ``cv`` the batch constant is re-selected by
    leave-one-out at every step after the warmup.
    """
    if not 0 <= warmup < n:
        raise ValueError("need 0 <= warmup < n")
    constants = tuple(float(c) for c in constants)
    job = partial(_fig1_replicate, function=function, constants=constants, n=n, sigma2=sigma2,
                  seed=seed, warmup=warmup, degree=degree, k=k, kernel=kernel, grid=grid, cv=cv)
    results = map_replications(job, reps, workers)
    seq = np.mean([r[0] for r in results], axis=0)
    bat = np.mean([r[1] for r in results], axis=0)
    cv_curve = np.mean([r[2] for r in results], axis=0) if cv else None
    fallbacks = sum(r[3] for r in results)

    # Fit curves from replication 0 at the winning constants.
    f = get_function(function)
    kern = get_kernel(kernel)
    x, y = generate_stream(SimConfig(n, sigma2, seed), f, replication=0)
    c_seq = constants[int(np.argmin(seq[:, -1]))]
    c_bat = constants[int(np.argmin(bat[:, -1]))]
    est = SequentialLocPoly(BandwidthSchedule(c_seq, k), degree=degree, grid=grid, kernel=kern)
    est.update_many(x, y)
    pts = grid.points
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", QualityWarning)
        fit_batch = batch_locpoly_fit((x, y), BatchFitConfig(degree, c_bat * n ** (-k), kern), pts)
    return Fig1Result(function, constants, np.arange(warmup + 1, n + 1), seq, bat, cv_curve,
                      pts.copy(), f(pts), est.predict_grid(), fit_batch, fallbacks, reps)


# -- fig2: Holder family and expert mixing -------------------------------

def _fig2_replicate(rep: int, *, alpha: float, alphas: tuple, c: float, n: int, sigma2: float,
                    seed: int, x0: float, kernel: str, grid: EvaluationGrid,
                    clip_bound: float, eta: float | None):
    f = holder(alpha)
    kern = get_kernel(kernel)
    truth = f(x0)
    x, y = generate_stream(SimConfig(n, sigma2, seed), f, replication=rep)
    experts = [(f"alpha={a:g}", SequentialNW(BandwidthSchedule(c, 1.0 / (2 * a + 1)), grid, kern))
               for a in alphas]
    pool = ExpertPool(experts, eta=eta, clip_bound=clip_bound)
    risk = np.empty((n, len(alphas) + 1))
    for t in range(n):
        pool.observe(x[t], y[t])
        preds = [_predict_or_mean(est, x0) for est in pool.experts]
        risk[t, :-1] = (np.asarray(preds) - truth) ** 2
        risk[t, -1] = (pool.predict(x0) - truth) ** 2
    return risk, pool.weights.copy(), pool.eta


def _predict_or_mean(est, x0: float) -> float:
    try:
        return est.predict(x0)
    except LowMassError:
        return est.y_mean


@dataclass
class Fig2Result:
    """Pointwise risk at ``x0`` for every expert and the mixture, per sample size.

    ``risk_mean`` and ``risk_se`` have shape ``(n, M + 1)``; the last
    column is the mixture.
    """

    alpha: float
    alphas: tuple
    ns: np.ndarray
    risk_mean: np.ndarray
    risk_se: np.ndarray
    weights_mean: np.ndarray
    top_weight_counts: np.ndarray
    eta: float
    reps: int
    x0: float = 0.5

    @property
    def labels(self) -> list[str]:
        return [f"alpha_{a:g}" for a in self.alphas]

    @property
    def best_expert(self) -> float:
        """``alpha'`` of the expert with the lowest final mean risk."""
        return self.alphas[int(np.argmin(self.risk_mean[-1, :-1]))]

    @property
    def matching_wins(self) -> bool:
        return self.best_expert == self.alpha

    @property
    def mixture_excess(self) -> float:
        return float(self.risk_mean[-1, -1] - self.risk_mean[-1, :-1].min())

    def oracle_allowance(self, n_se: float = 3.0) -> float:
        """``2 ln M / (n eta)`` plus ``n_se`` standard errors of the mixture risk."""
        m, n = len(self.alphas), int(self.ns[-1])
        return 2 * math.log(m) / (n * self.eta) + n_se * float(self.risk_se[-1, -1])

    def write(self, out: Path) -> list[Path]:
        out = Path(out)
        rows = [[int(n)] + [_fmt(v) for v in row] for n, row in zip(self.ns, self.risk_mean)]
        p1 = _write_rows(out / f"fig2_alpha_{self.alpha:g}.csv", ["n", *self.labels, "mixture"], rows)
        rows = [[lab, _fmt(r), _fmt(s), _fmt(w), int(cnt)] for lab, r, s, w, cnt in
                zip(self.labels, self.risk_mean[-1, :-1], self.risk_se[-1, :-1],
                    self.weights_mean, self.top_weight_counts)]
        rows.append(["mixture", _fmt(self.risk_mean[-1, -1]), _fmt(self.risk_se[-1, -1]), "", ""])
        p2 = _write_rows(out / f"fig2_alpha_{self.alpha:g}_final.csv",
                         ["expert", "mean_risk", "stderr", "mean_weight", "top_weight_reps"], rows)
        return [p1, p2]


def fig2(
    alpha: float,
    alphas: Sequence[float] = FIG2_ALPHAS,
    c: float = 0.4,
    n: int = 150,
    sigma2: float = 0.01,
    reps: int = 200,
    seed: int = 0,
    x0: float = 0.5,
    kernel: str = "gaussian",
    grid: EvaluationGrid = EvaluationGrid(),
    clip_bound: float = 4.0,
    eta: float | None = None,
    workers: int | None = 1,
) -> Fig2Result:
    """Risk at ``x0`` of Nadaraya-Watson experts ``h_t = c t^(-1/(2 alpha' + 1))``.

    The data follow the Holder function with exponent ``alpha``; every
    expert and their exponential-weight mixture see the same stream.
    """
    alphas = tuple(float(a) for a in alphas)
    job = partial(_fig2_replicate, alpha=float(alpha), alphas=alphas, c=c, n=n, sigma2=sigma2,
                  seed=seed, x0=x0, kernel=kernel, grid=grid, clip_bound=clip_bound, eta=eta)
    results = map_replications(job, reps, workers)
    risk = np.array([r[0] for r in results])
    weights = np.array([r[1] for r in results])
    se = risk.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.zeros(risk.shape[1:])
    counts = np.bincount(np.argmax(weights, axis=1), minlength=len(alphas))
    return Fig2Result(float(alpha), alphas, np.arange(1, n + 1), risk.mean(axis=0), se,
                      weights.mean(axis=0), counts, results[0][2], reps, x0)


# -- update cost ------------------------------------------------------------

@dataclass
class BenchResult:
    ns: list[int]
    sequential: list[float]
    batch: list[float]
    config: dict = field(default_factory=dict)

    def ratio(self, which: str = "sequential") -> float:
        vals = getattr(self, which)
        return max(vals) / min(vals)

    def write(self, out: Path) -> list[Path]:
        rows = [[n, _fmt(s), _fmt(b)] for n, s, b in zip(self.ns, self.sequential, self.batch)]
        return [_write_rows(Path(out) / "bench_update_cost.csv",
                            ["n", "sequential_update_s", "batch_refit_s"], rows)]


def bench_update_cost(
    ns: Sequence[int] = (100, 10_000),
    window: int = 200,
    c: float = 0.5,
    degree: int = 2,
    kernel: str = "epanechnikov",
    grid: EvaluationGrid = EvaluationGrid(),
    seed: int = 0,
    batch_repeats: int = 3,
) -> BenchResult:
    """Mean wall time of one sequential update against one full-grid batch refit.

    The sequential cost at ``n`` is averaged over updates ``n+1 .. n+window``
    of a single stream; the batch cost is the mean of ``batch_repeats``
    refits over every grid point using the first ``n`` points.
    """
    ns = _checkpoints(ns)
    kern = get_kernel(kernel)
    sched = BandwidthSchedule.for_degree(c, degree)
    x, y = generate_stream(SimConfig(ns[-1] + window, 0.5, seed), get_function("f2"))
    est = SequentialLocPoly(sched, degree=degree, grid=grid, kernel=kern)
    seq, bat, done = [], [], 0
    for n in ns:
        est.update_many(x[done:n], y[done:n])
        t0 = time.perf_counter()
        for i in range(n, n + window):
            est.update(x[i], y[i])
        seq.append((time.perf_counter() - t0) / window)
        done = n + window
        cfg = BatchFitConfig(degree, sched.step(n), kern)
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", QualityWarning)
            for _ in range(batch_repeats):
                batch_locpoly_fit((x[:n], y[:n]), cfg, grid.points)
        bat.append((time.perf_counter() - t0) / batch_repeats)
    config = dict(window=window, c=c, degree=degree, kernel=kernel, grid=len(grid), seed=seed)
    return BenchResult(list(ns), seq, bat, config)


# -- additive model -------------------------------------------------------------

def additive_truth():
    """``(x1 - 0.5)^2 - 1/12 + sin(2 pi x2)``: both components centred on ``[0, 1]``."""
    return additive([custom(lambda v: (v - 0.5) ** 2 - 1.0 / 12.0, "quad"),
                     custom(lambda v: np.sin(2 * np.pi * v), "sine")])


def additive_ise(predict_many, f, grid: EvaluationGrid = EvaluationGrid(0.1, 0.9, 41)) -> float:
    """Trapezoid ISE over ``grid x grid`` for a two-covariate predictor."""
    g = grid.points
    xx, yy = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    err = (np.asarray(predict_many(pts)) - f(pts)).reshape(len(g), len(g)) ** 2
    return float(np.trapezoid(np.trapezoid(err, g, axis=1), g))


@dataclass
class BackfitResult:
    model: SequentialBackfitter
    ise: float
    n: int

    @property
    def nonconverged_fraction(self) -> float:
        return self.model.nonconverged_steps / max(self.n, 1)

    def write(self, out: Path) -> list[Path]:
        out = Path(out)
        comp = out / "backfit_components.csv"
        self.model.components_to_csv(comp)
        summary = _write_rows(out / "backfit_summary.csv",
                              ["n", "m0", "interior_ise", "nonconverged_steps"],
                              [[self.n, _fmt(self.model.m0), _fmt(self.ise),
                                self.model.nonconverged_steps]])
        return [comp, summary]


def backfit_demo(n: int = 2000, sigma2: float = 0.0, c: float = 0.3, degree: int = 1,
                 tol: float = 1e-6, max_iter: int = 20, seed: int = 0,
                 grid: EvaluationGrid = EvaluationGrid(), kernel: str = "gaussian") -> BackfitResult:
    """Sequential backfitting on the two-component additive truth."""
    f = additive_truth()
    x, y = generate_stream(SimConfig(n, sigma2, seed), f)
    model = SequentialBackfitter.local_linear(2, c=c, grids=[grid, grid], kernel=get_kernel(kernel),
                                              degree=degree, tol=tol, max_iter=max_iter)
    for xi, yi in zip(x, y):
        model.observe(xi, yi)
    return BackfitResult(model, additive_ise(model.predict_many, f), n)
