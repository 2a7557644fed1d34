import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from seqsmooth import kernels as kmod
from seqsmooth.errors import KernelConstructionError
from seqsmooth.kernels import (
    EPANECHNIKOV,
    GAUSSIAN,
    available_kernels,
    eval_kernel,
    get_kernel,
    kernel_moment,
    kernel_roughness,
    make_higher_order_kernel,
    scaled_kernel_weight,
)


def test_gaussian_values():
    assert eval_kernel(GAUSSIAN, 0.0) == pytest.approx(0.3989423, abs=1e-7)
    assert eval_kernel(GAUSSIAN, 1.0) == pytest.approx(math.exp(-0.5) / math.sqrt(2 * math.pi), rel=1e-14)
    assert eval_kernel(GAUSSIAN, 1.0) == pytest.approx(0.2419707, abs=1e-7)


def test_epanechnikov_outside_support():
    assert eval_kernel(EPANECHNIKOV, 1.5) == 0.0
    assert eval_kernel(EPANECHNIKOV, -1.0) == 0.0
    assert eval_kernel(EPANECHNIKOV, 0.0) == 0.75


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_argument_rejected(bad):
    with pytest.raises(ValueError):
        eval_kernel(GAUSSIAN, bad)


def test_scaled_weight_examples():
    assert scaled_kernel_weight(GAUSSIAN, 1.0, 0.3, 0.3) == pytest.approx(0.3989423, abs=1e-7)
    assert scaled_kernel_weight(GAUSSIAN, 0.5, 0.3, 0.3) == pytest.approx(0.7978846, abs=1e-7)
    assert scaled_kernel_weight(EPANECHNIKOV, 0.1, 0.5, 0.3) == 0.0


@pytest.mark.parametrize("h", [0.0, -0.1])
def test_scaled_weight_needs_positive_h(h):
    with pytest.raises(ValueError):
        scaled_kernel_weight(GAUSSIAN, h, 0.1, 0.2)


@pytest.mark.parametrize("kern", [GAUSSIAN, EPANECHNIKOV])
@pytest.mark.parametrize("h", [0.05, 0.3, 2.0])
def test_scaled_weight_integrates_to_one(kern, h):
    x0 = 0.4
    reach = 10 * h if kern is GAUSSIAN else h
    val, _ = integrate.quad(lambda x: scaled_kernel_weight(kern, h, x, x0), x0 - reach, x0 + reach,
                            points=[x0], limit=200)
    assert val == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(-2, 2), st.floats(-2, 2))
def test_scaled_weight_symmetric(h, x, x0):
    for kern in (GAUSSIAN, EPANECHNIKOV):
        assert scaled_kernel_weight(kern, h, x, x0) == pytest.approx(scaled_kernel_weight(kern, h, x0, x), rel=1e-14, abs=0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-8, 8))
def test_kernels_even(u):
    for kern in (GAUSSIAN, EPANECHNIKOV, get_kernel("epanechnikov-order4")):
        assert kern.evaluate(u) == pytest.approx(kern.evaluate(-u), rel=1e-14, abs=1e-300)


def test_gaussian_moments():
    assert kernel_moment(GAUSSIAN, 0) == pytest.approx(1.0, abs=1e-10)
    assert kernel_moment(GAUSSIAN, 1) == pytest.approx(0.0, abs=1e-12)
    assert kernel_moment(GAUSSIAN, 2) == pytest.approx(1.0, abs=1e-10)
    assert kernel_moment(GAUSSIAN, 4) == pytest.approx(3.0, abs=1e-9)


def test_epanechnikov_moments_and_roughness():
    # Closed forms: sigma^2 = 1/5, int K^2 = 3/5.
    assert kernel_moment(EPANECHNIKOV, 0) == pytest.approx(1.0, abs=1e-12)
    assert kernel_moment(EPANECHNIKOV, 2) == pytest.approx(0.2, abs=1e-12)
    assert kernel_roughness(EPANECHNIKOV) == pytest.approx(0.6, abs=1e-12)


def test_gaussian_roughness():
    assert kernel_roughness(GAUSSIAN) == pytest.approx(1 / (2 * math.sqrt(math.pi)), abs=1e-10)
    assert kernel_roughness(GAUSSIAN) == pytest.approx(0.2820948, abs=1e-7)


def test_moment_index_validated():
    with pytest.raises(ValueError):
        kernel_moment(GAUSSIAN, -1)


def test_unbounded_kernel_moment_unsupported():
    wide = kmod.KernelSpec("cauchy", lambda u: 1 / (math.pi * (1 + np.asarray(u) ** 2)), math.inf,
                           effective_radius=1e6, quad_radius=None)
    with pytest.raises(NotImplementedError):
        kernel_moment(wide, 2)


def test_order_two_leaves_base_unchanged():
    assert make_higher_order_kernel(EPANECHNIKOV, 2) is EPANECHNIKOV


def test_order_four_epanechnikov_matches_closed_form():
    k4 = make_higher_order_kernel(EPANECHNIKOV, 4)
    u = np.linspace(-1.2, 1.2, 97)
    # Hand solution of the 2x2 moment system: P(u) = 15/8 - 35/8 u^2.
    expected = np.where(np.abs(u) <= 1, 0.75 * (1 - u**2) * (15 / 8 - 35 / 8 * u**2), 0.0)
    np.testing.assert_allclose(k4.evaluate(u), expected, atol=1e-12)
    assert kernel_moment(k4, 0) == pytest.approx(1.0, abs=1e-8)
    assert kernel_moment(k4, 1) == pytest.approx(0.0, abs=1e-8)
    assert kernel_moment(k4, 2) == pytest.approx(0.0, abs=1e-8)
    assert kernel_moment(k4, 3) == pytest.approx(0.0, abs=1e-8)
    assert kernel_moment(k4, 4) == pytest.approx(-1 / 21, abs=1e-8)
    assert k4.order == 4 and not k4.nonnegative


@pytest.mark.parametrize("order", [4, 6])
def test_higher_order_gaussian_moments(order):
    k = make_higher_order_kernel(GAUSSIAN, order)
    for j in range(order):
        assert kernel_moment(k, j) == pytest.approx(1.0 if j == 0 else 0.0, abs=1e-8)
    assert abs(kernel_moment(k, order)) > 1e-6


@pytest.mark.parametrize("order", [3, 1, 0, 2.5])
def test_odd_or_invalid_order_rejected(order):
    with pytest.raises(ValueError):
        make_higher_order_kernel(EPANECHNIKOV, order)


def test_singular_moment_system_detected():
    spike = kmod.KernelSpec("spike", lambda u: np.where(np.abs(np.asarray(u)) <= 1e-7, 5e6, 0.0), 1e-7,
                            quad_radius=1e-7)
    with pytest.raises(KernelConstructionError):
        make_higher_order_kernel(spike, 6)


def test_registry():
    assert get_kernel("Gaussian") is GAUSSIAN
    assert "epanechnikov-order4" in available_kernels()
    assert get_kernel("epanechnikov-order4").order == 4
    with pytest.raises(KeyError):
        get_kernel("triangle")


def test_support_invariant():
    for name in available_kernels():
        k = get_kernel(name)
        if k.is_compact:
            u = np.linspace(k.support_radius + 1e-9, k.support_radius + 3, 20)
            assert np.all(k.evaluate(u) == 0)
            assert np.all(k.evaluate(-u) == 0)
