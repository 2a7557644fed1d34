import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqsmooth.bandwidth import BandwidthSchedule, bandwidth_at, validate_power_schedule


def test_examples():
    assert bandwidth_at(BandwidthSchedule(0.4, 0.2), 1) == 0.4
    assert bandwidth_at(BandwidthSchedule(1.0, 0.37), 1) == 1.0
    assert bandwidth_at(BandwidthSchedule(0.4, 0.2), 32) == pytest.approx(0.2, rel=1e-14)


def test_t_below_one_rejected():
    s = BandwidthSchedule(0.4, 0.2)
    with pytest.raises(ValueError):
        bandwidth_at(s, 0)
    with pytest.raises(ValueError):
        s.at(np.array([1, 0]))


@pytest.mark.parametrize(
    "c,k,ok", [(1, 0.2, True), (1, 1.5, False), (-1, 0.2, False), (1, 0.0, False), (1, 1.0, False),
               (0, 0.2, False), (float("nan"), 0.2, False)]
)
def test_validate(c, k, ok):
    assert validate_power_schedule(BandwidthSchedule(c, k)) is ok


def test_require_valid():
    with pytest.raises(ValueError):
        BandwidthSchedule(1, 1.5).require_valid()


def test_from_smoothness_and_degree():
    s = BandwidthSchedule.from_smoothness(0.5, 2)
    assert s.exponent_k == pytest.approx(0.2) and s.smoothness_d == 2
    assert BandwidthSchedule.for_degree(0.5, 2).exponent_k == pytest.approx(1 / 7)
    with pytest.raises(ValueError):
        BandwidthSchedule.from_smoothness(0.5, 0)


@given(st.floats(0.01, 5), st.floats(0.01, 0.99), st.integers(1, 10**6))
def test_monotone(c, k, t):
    s = BandwidthSchedule(c, k)
    assert s.at(t + 1) <= s.at(t)


@given(st.floats(0.05, 5), st.integers(1, 4), st.integers(1, 10**6))
def test_power_identity(c, d, t):
    s = BandwidthSchedule.from_smoothness(c, d)
    assert s.at(t) ** (2 * d + 1) * t == pytest.approx(c ** (2 * d + 1), rel=1e-12)


def test_step_matches_at():
    s = BandwidthSchedule(0.3, 0.2)
    for t in (1, 7, 1000):
        assert s.step(t) == s.at(t)


def test_partial_sums_and_vanishing_condition():
    s = BandwidthSchedule(0.3, 0.2)
    h = 0.3 * np.arange(1, 11) ** -0.2
    sh2, sinv = s.partial_sums(10)
    assert sh2 == pytest.approx(np.sum(h**2)) and sinv == pytest.approx(np.sum(1 / h))
    vals = [s.partial_sums(n)[1] / n**2 for n in (10, 1000, 10**6)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-4
