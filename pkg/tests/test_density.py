import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqsmooth.bandwidth import BandwidthSchedule
from seqsmooth.density import SequentialKDE, kde_leading_risk
from seqsmooth.errors import EmptyEstimatorError, OutOfGridError
from seqsmooth.grid import EvaluationGrid
from seqsmooth.kernels import EPANECHNIKOV, GAUSSIAN, kernel_moment
from seqsmooth.sim import TruncatedNormal

SCHED = BandwidthSchedule(0.2, 0.2)


def direct_kde(xs, pts, sched, kernel):
    """Defining sum, evaluated from scratch."""
    total = np.zeros_like(pts)
    for t, x in enumerate(xs, start=1):
        h = sched.c * t ** (-sched.exponent_k)
        total += kernel.evaluate((pts - x) / h) / h
    return total / len(xs)


def test_single_point():
    kde = SequentialKDE(SCHED).update(0.5)
    assert kde.evaluate(0.5) == pytest.approx(GAUSSIAN.evaluate(0.0) / 0.2, rel=1e-14)


def test_three_points_direct_sum(rng):
    xs = rng.uniform(0, 1, 3)
    kde = SequentialKDE(SCHED).update_many(xs)
    np.testing.assert_allclose(kde.values, direct_kde(xs, kde.grid.points, SCHED, GAUSSIAN), atol=1e-12, rtol=0)


@pytest.mark.parametrize("kernel", [GAUSSIAN, EPANECHNIKOV])
def test_recursive_update_rule(kernel, rng):
    # The n/(n+1) recursion, applied literally, against the stored running sum.
    kde = SequentialKDE(SCHED, kernel=kernel)
    pts = kde.grid.points
    vals = np.zeros_like(pts)
    for n, x in enumerate(rng.uniform(0, 1, 60)):
        h = SCHED.at(n + 1)
        vals = n / (n + 1) * vals + kernel.evaluate((pts - x) / h) / ((n + 1) * h)
        kde.update(x)
        np.testing.assert_allclose(kde.values, vals, atol=1e-10, rtol=0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=500), st.sampled_from([GAUSSIAN, EPANECHNIKOV]))
def test_incremental_equals_direct(xs, kernel):
    kde = SequentialKDE(SCHED, kernel=kernel).update_many(xs)
    np.testing.assert_allclose(kde.values, direct_kde(np.array(xs), kde.grid.points, SCHED, kernel),
                               atol=1e-10, rtol=0)
    assert np.all(kde.values >= 0)


def test_constant_schedule_is_batch_kde(rng):
    # With a tiny exponent h_t is constant to ~1e-10; compare with the fixed-h KDE.
    sched = BandwidthSchedule(0.1, 1e-12)
    xs = rng.uniform(0, 1, 40)
    kde = SequentialKDE(sched).update_many(xs)
    pts = kde.grid.points
    batch = GAUSSIAN.evaluate((pts[:, None] - xs[None, :]) / 0.1).sum(axis=1) / (40 * 0.1)
    np.testing.assert_allclose(kde.values, batch, rtol=1e-9)


def test_interpolation_and_grid_values(rng):
    kde = SequentialKDE(SCHED).update_many(rng.uniform(0, 1, 20))
    g = kde.grid.points
    assert kde.evaluate(g[17]) == kde.values[17]
    mid = 0.5 * (g[17] + g[18])
    assert kde.evaluate(mid) == pytest.approx(0.5 * (kde.values[17] + kde.values[18]), rel=1e-12)


def test_interpolation_close_to_direct_sum(rng):
    xs = rng.uniform(0, 1, 50)
    grid = EvaluationGrid(0, 1, 2001)
    kde = SequentialKDE(SCHED, grid).update_many(xs)
    q = rng.uniform(0, 1, 200)
    exact = direct_kde(xs, q, SCHED, GAUSSIAN)
    # Linear interpolation error <= spacing^2 / 8 * max|f''|; f'' <= ~ 1/h^3 scale here.
    bound = grid.spacing**2 / 8 * 0.4 / 0.2**3 * 5
    assert np.max(np.abs(kde.evaluate(q) - exact)) < bound


def test_errors():
    kde = SequentialKDE(SCHED)
    with pytest.raises(EmptyEstimatorError):
        kde.evaluate(0.5)
    with pytest.raises(ValueError):
        kde.update(math.nan)
    assert kde.n == 0 and np.all(kde.values == 0)
    kde.update(0.5)
    with pytest.raises(OutOfGridError):
        kde.evaluate(1.5)


def test_density_integrates_to_one(rng):
    dens = TruncatedNormal()
    xs = dens.sample(rng, 5000)
    kde = SequentialKDE(BandwidthSchedule(0.05, 0.2)).update_many(xs)
    assert np.trapezoid(kde.values, kde.grid.points) == pytest.approx(1.0, abs=0.05)


def test_to_csv(tmp_path, rng):
    kde = SequentialKDE(SCHED).update_many(rng.uniform(0, 1, 5))
    path = kde.to_csv(tmp_path / "kde.csv")
    rows = path.read_text().splitlines()
    assert rows[0] == "x,f_hat" and len(rows) == 202
    x, v = map(float, rows[51].split(","))
    assert x == kde.grid.points[50] and v == kde.values[50]


def test_leading_risk_constant_schedule():
    h, n, curv = 0.1, 1000, 2.5
    sched = BandwidthSchedule(h, 1e-15)
    c1 = 0.25 * kernel_moment(GAUSSIAN, 2) ** 2 * curv
    c2 = 1 / (2 * math.sqrt(math.pi))
    assert kde_leading_risk(curv, GAUSSIAN, sched, n) == pytest.approx(c1 * h**4 + c2 / (n * h), rel=1e-9)


def test_leading_risk_single_term():
    sched = BandwidthSchedule(0.3, 0.2)
    c1 = 0.25 * 0.2**2 * 4.0
    assert kde_leading_risk(4.0, EPANECHNIKOV, sched, 1) == pytest.approx(c1 * 0.3**4 + 0.6 / 0.3, rel=1e-10)


def test_leading_risk_rejects_negative_curvature():
    with pytest.raises(ValueError):
        kde_leading_risk(-1.0, GAUSSIAN, SCHED, 10)


def test_truncated_normal_curvature_by_quadrature():
    from scipy import integrate

    d = TruncatedNormal(0.5, 0.1)

    def f2(x):
        u = (x - 0.5) / 0.1
        return (u * u - 1) / 0.01 * d.pdf(x)

    val, _ = integrate.quad(lambda x: f2(x) ** 2, 0, 1, points=[0.5], limit=200)
    assert d.curvature_integral() == pytest.approx(val, rel=1e-6)
