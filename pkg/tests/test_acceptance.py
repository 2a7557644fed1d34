"""End-to-end acceptance criteria, each reporting one PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from acceptance_log import record
from oracles import dense_locpoly
from seqsmooth.additive import SequentialBackfitter
from seqsmooth.bandwidth import BandwidthSchedule
from seqsmooth.experiments import (
    FIG1_CONSTANTS,
    FIG2_ALPHAS,
    RATE_LADDER,
    backfit_demo,
    bench_update_cost,
    fig1,
    kde_risk_check,
    rate_kde,
    rate_locpoly,
)
from seqsmooth.kernels import EPANECHNIKOV, GAUSSIAN
from seqsmooth.locpoly import SequentialLocPoly, rank_one_inverse_update
from seqsmooth.mixing import ExpertPool, weights_from_losses
from seqsmooth.sim import rate_slope

pytestmark = pytest.mark.slow


def test_c01_incremental_equals_batch():
    rng = np.random.default_rng(1)
    worst = 0.0
    start = time.perf_counter()
    for s in range(100):
        degree = s % 4
        kernel = GAUSSIAN if s % 2 == 0 else EPANECHNIKOV
        n = int(rng.integers(20, 501))
        c = float(rng.choice([0.2, 0.3, 0.5]))
        k = 1.0 / (2 * degree + 3)
        x = rng.uniform(0, 1, n)
        # Offset keeps the targets away from zero so relative error is meaningful.
        y = 3 + np.sin(2 * math.pi * x) + rng.normal(0, 0.3, n)
        est = SequentialLocPoly(BandwidthSchedule(c, k), degree=degree, kernel=kernel)
        est.update_many(x, y)
        ref = dense_locpoly(x, y, est.grid.points, c, k, kernel, degree, est.ridge_eps, est.feature_scale)
        worst = max(worst, float(np.max(np.abs(est.predict_grid() - ref) / np.abs(ref))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-7 and elapsed < 60
    record(1, "incremental equals dense solve", ok, f"max rel err {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_c02_woodbury():
    rng = np.random.default_rng(2)
    worst = 0.0
    start = time.perf_counter()
    for trial in range(100):
        d = trial % 6 + 1
        B = rng.normal(size=(d, d))
        A = B @ B.T + np.eye(d)
        a_inv = np.linalg.inv(A)
        for _ in range(100):
            v = rng.normal(size=d)
            w = float(rng.uniform(0, 2))
            A = A + w * np.outer(v, v)
            a_inv = rank_one_inverse_update(a_inv, v, w)
            exact = np.linalg.inv(A)
            worst = max(worst, float(np.linalg.norm(a_inv - exact) / np.linalg.norm(exact)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9
    record(2, "Woodbury rank-one updates", ok, f"1e4 updates, max rel err {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_c03_kde_rate():
    start = time.perf_counter()
    report = rate_kde(RATE_LADDER, reps=50, c=0.05, k=0.2, seed=0)
    slope = rate_slope(report)
    elapsed = time.perf_counter() - start
    ok = -1.0 <= slope <= -0.6 and elapsed < 300
    record(3, "KDE risk rate", ok, f"slope {slope:.3f}, {elapsed:.1f}s")
    assert ok


def test_c04_regression_rate():
    start = time.perf_counter()
    report = rate_locpoly(RATE_LADDER, reps=50, c=0.3, k=0.2, degree=1, function="f2", sigma2=0.5, seed=0)
    slope = rate_slope(report)
    elapsed = time.perf_counter() - start
    ok = -1.0 <= slope <= -0.55 and elapsed < 600
    record(4, "local linear ISE rate on f2", ok, f"slope {slope:.3f}, {elapsed:.1f}s")
    assert ok


def test_c05_sequential_vs_batch_prediction_loss():
    parts = []
    ok = True
    for name in ("f1", "f2", "f3", "f4"):
        res = fig1(name, FIG1_CONSTANTS, n=150, sigma2=0.5, reps=100, seed=0, warmup=50, cv=False)
        good = 0.4 <= res.best_seq_loss <= 0.75 and res.gap < 0.1
        ok &= good
        parts.append(f"{name} seq {res.best_seq_loss:.3f} batch {res.best_batch_loss:.3f}")
    record(5, "sequential loss near noise level and near batch", ok, "; ".join(parts))
    assert ok


def test_c06_matching_expert_has_lowest_risk(fig2_results):
    won = [a for a in FIG2_ALPHAS if fig2_results[a].best_expert == a]
    best = {a: fig2_results[a].best_expert for a in FIG2_ALPHAS}
    ok = len(won) >= 3
    record(6, "matching Holder expert has lowest risk", ok,
           f"{len(won)} of 4 matched; argmin alpha' by alpha: {best}")
    assert ok


def test_c07_mixture_oracle_inequality(fig2_results):
    parts = []
    ok = True
    for a in FIG2_ALPHAS:
        res = fig2_results[a]
        excess, allowance = res.mixture_excess, res.oracle_allowance(3)
        ok &= excess < allowance
        parts.append(f"alpha {a:g}: {excess:.2e} < {allowance:.3f}")
    record(7, "mixture risk within oracle allowance", ok, "; ".join(parts))
    assert ok


def test_c08_update_cost_independent_of_n():
    start = time.perf_counter()
    res = bench_update_cost((100, 10_000), degree=2, kernel="epanechnikov")
    seq, batch = res.ratio("sequential"), res.ratio("batch")
    elapsed = time.perf_counter() - start
    ok = seq < 3 and batch > 10 and elapsed < 300
    record(8, "per-update cost flat in n", ok,
           f"sequential ratio {seq:.2f}, batch ratio {batch:.1f}, {elapsed:.1f}s")
    assert ok


def test_c09_mixing_weight_algebra():
    rng = np.random.default_rng(9)

    class Noisy:
        def __init__(self, bias):
            self.bias = bias

        def predict(self, x):
            return self.bias + 0.5 * math.sin(7 * x)

        def update(self, x, y):
            pass

        y_mean = 0.0

    worst_w, worst_sum = 0.0, 0.0
    for eta in (1 / 128, 0.3, 2.0):
        pool = ExpertPool([(b, Noisy(b)) for b in (-1.0, -0.2, 0.0, 0.4, 1.5)], eta=eta)
        for x, y in zip(rng.uniform(0, 1, 1000), rng.normal(0, 1, 1000)):
            pool.observe(x, y)
            worst_w = max(worst_w, float(np.max(np.abs(pool.weights - weights_from_losses(pool.losses, eta)))))
            worst_sum = max(worst_sum, abs(float(pool.weights.sum()) - 1))
    ok = worst_w <= 1e-10 and worst_sum <= 1e-12
    record(9, "incremental weights equal batch weights", ok,
           f"max weight diff {worst_w:.1e}, max |sum - 1| {worst_sum:.1e}")
    assert ok


def _backfit_properties() -> list[str]:
    failed = []
    rng = np.random.default_rng(10)

    bf = SequentialBackfitter.local_linear(2)
    for x in rng.uniform(0, 1, (30, 2)):
        bf.observe(x, 0.0)
    if not all(np.all(bf.component_grid_values(j) == 0) for j in range(2)):
        failed.append("zero input")

    x = rng.uniform(0, 1, 60)
    y = np.cos(4 * x) + rng.normal(0, 0.1, 60)
    one = SequentialBackfitter.local_linear(1)
    ref = SequentialLocPoly(BandwidthSchedule.for_degree(0.3, 1), degree=1, ridge_eps=one.components[0].ridge_eps)
    m0 = 0.0
    for t, (xi, yi) in enumerate(zip(x, y), start=1):
        one.observe([xi], yi)
        m0 = ((t - 1) * m0 + yi) / t
        ref.update(xi, yi - m0)
        ref.center()
    if np.max(np.abs(one.components[0].predict_grid() - ref.predict_grid())) > 1e-12:
        failed.append("p = 1 equivalence")

    bf = SequentialBackfitter.local_linear(2)
    ys = []
    centred = True
    for xv in rng.uniform(0, 1, (60, 2)):
        yv = xv[0] ** 2 + math.sin(3 * xv[1]) + rng.normal(0, 0.1)
        ys.append(yv)
        bf.observe(xv, yv)
        centred &= all(abs(bf.component_grid_values(j).mean()) < 1e-9 for j in range(2))
        if abs(bf.m0 - np.mean(ys)) > 1e-12:
            failed.append("running mean")
            break
    if not centred:
        failed.append("centering")
    return failed


def test_c10_backfitting():
    failed = _backfit_properties()
    res = backfit_demo(n=2000, sigma2=0.0, seed=0)
    ok = not failed and res.ise < 0.02
    record(10, "backfitting invariants and additive recovery", ok,
           f"failed properties: {failed or 'none'}, ISE {res.ise:.4f}, "
           f"non-converged {100 * res.nonconverged_fraction:.2f}% of steps")
    assert ok


def test_c11_kde_leading_risk():
    report, leading = kde_risk_check(n=2000, reps=200, seed=0)
    ratio = report.risks[0] / leading
    ok = 0.7 <= ratio <= 1.3
    record(11, "KDE Monte-Carlo risk against leading-order risk", ok,
           f"MC {report.risks[0]:.3e}, leading {leading:.3e}, ratio {ratio:.3f}")
    assert ok
