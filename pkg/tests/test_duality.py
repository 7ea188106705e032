"""Convex-duality core: relative entropy, log-MGF, Legendre transform."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailrisk.duality import (
    bernoulli_kl,
    bernoulli_kl_prime,
    bernoulli_log_mgf,
    bernoulli_log_mgf_prime,
    legendre_transform,
)
from tailrisk.errors import ConvergenceError

interior = st.floats(min_value=1e-6, max_value=1.0 - 1e-6)


# --- frozen values -----------------------------------------------------------


def test_kl_frozen_values():
    assert bernoulli_kl(0.08, 0.5) == pytest.approx(0.611407946063708, abs=1e-15)
    assert bernoulli_kl(0.08, 0.4) == pytest.approx(0.38730875607747633, abs=1e-15)
    assert bernoulli_kl(0.08, 0.1) == pytest.approx(0.002533339084523273, abs=1e-15)
    # full-default cost: kl(p, 1) = ln(1/p)
    assert bernoulli_kl(0.08, 1.0) == pytest.approx(math.log(1 / 0.08), abs=1e-15)
    assert bernoulli_kl(0.08, 0.0) == pytest.approx(-math.log(0.92), abs=1e-15)


def test_kl_prime_frozen_value():
    assert bernoulli_kl_prime(0.08, 0.5) == pytest.approx(math.log(0.92 / 0.08), abs=1e-12)


def test_log_mgf_frozen_value():
    # lambda_{1/2}(ln 3) = ln((3 + 1)/2) = ln 2
    assert bernoulli_log_mgf(0.5, math.log(3.0)) == pytest.approx(math.log(2.0), abs=1e-15)


# --- edge and branch behaviour ----------------------------------------------


def test_kl_outside_unit_interval_is_infinite():
    assert bernoulli_kl(0.3, -0.01) == math.inf
    assert bernoulli_kl(0.3, 1.01) == math.inf


def test_kl_degenerate_reference():
    assert bernoulli_kl(0.0, 0.0) == 0.0
    assert bernoulli_kl(0.0, 0.5) == math.inf
    assert bernoulli_kl(1.0, 1.0) == 0.0
    assert bernoulli_kl(1.0, 0.999) == math.inf


def test_kl_invalid_reference_raises():
    with pytest.raises(ValueError):
        bernoulli_kl(-0.1, 0.5)
    with pytest.raises(ValueError):
        bernoulli_kl(1.1, 0.5)


def test_kl_prime_requires_interior_points():
    with pytest.raises(ValueError):
        bernoulli_kl_prime(0.08, 0.0)
    with pytest.raises(ValueError):
        bernoulli_kl_prime(0.08, 1.0)
    with pytest.raises(ValueError):
        bernoulli_kl_prime(0.0, 0.5)


def test_log_mgf_degenerate_and_zero():
    assert bernoulli_log_mgf(0.3, 0.0) == 0.0
    assert bernoulli_log_mgf(0.0, 5.0) == 0.0
    assert bernoulli_log_mgf(1.0, -3.5) == -3.5


def test_log_mgf_extreme_arguments_stay_finite():
    up = bernoulli_log_mgf(0.08, 700.0)
    assert math.isfinite(up)
    assert up == pytest.approx(700.0 + math.log(0.08), rel=1e-12)
    down = bernoulli_log_mgf(0.08, -700.0)
    assert down == pytest.approx(math.log(0.92), rel=1e-12)
    assert 0.0 <= bernoulli_log_mgf_prime(0.08, 700.0) <= 1.0
    assert 0.0 <= bernoulli_log_mgf_prime(0.08, -700.0) <= 1.0


# --- structural properties ---------------------------------------------------


@given(p=interior, x=interior)
@settings(max_examples=200, deadline=None)
def test_kl_is_legendre_transform_of_log_mgf(p, x):
    direct = bernoulli_kl(p, x)
    via_transform = legendre_transform(
        lambda t: bernoulli_log_mgf(p, t), lambda t: bernoulli_log_mgf_prime(p, t), x
    )
    assert via_transform == pytest.approx(direct, abs=1e-10)


@given(p=interior, x=interior)
@settings(max_examples=200, deadline=None)
def test_derivatives_are_inverse_maps(p, x):
    theta = bernoulli_kl_prime(p, x)
    assert bernoulli_log_mgf_prime(p, theta) == pytest.approx(x, abs=1e-10)


@given(p=interior, x=interior)
@settings(max_examples=200, deadline=None)
def test_kl_nonnegative_and_zero_only_at_reference(p, x):
    value = bernoulli_kl(p, x)
    assert value >= 0.0
    assert bernoulli_kl(p, p) == 0.0
    if abs(x - p) > 1e-3:
        assert value > 0.0


@given(p=interior, x=interior, y=interior)
@settings(max_examples=200, deadline=None)
def test_kl_midpoint_convexity(p, x, y):
    mid = 0.5 * (x + y)
    assert bernoulli_kl(p, mid) <= 0.5 * (bernoulli_kl(p, x) + bernoulli_kl(p, y)) + 1e-12


@given(p=interior, x=st.floats(min_value=0.0, max_value=1.0), theta=st.floats(min_value=-50, max_value=50))
@settings(max_examples=200, deadline=None)
def test_fenchel_young_inequality(p, x, theta):
    assert theta * x <= bernoulli_kl(p, x) + bernoulli_log_mgf(p, theta) + 1e-10


# --- the generic transform ---------------------------------------------------


@given(x=st.floats(min_value=-500.0, max_value=500.0))
@settings(max_examples=100, deadline=None)
def test_quadratic_is_self_dual(x):
    value = legendre_transform(lambda t: 0.5 * t * t, lambda t: t, x)
    assert value == pytest.approx(0.5 * x * x, abs=1e-8, rel=1e-10)


def test_transform_beyond_slope_range_is_infinite():
    # f(t) = log cosh(t) has slopes in (-1, 1): x = 2 is unattainable.
    value = legendre_transform(
        lambda t: abs(t) + math.log1p(math.exp(-2 * abs(t))) - math.log(2.0),
        math.tanh,
        2.0,
    )
    assert value == math.inf


def test_transform_clipped_bracket_outside_slope_range_is_infinite():
    value = legendre_transform(lambda t: 0.5 * t * t, lambda t: t, 5.0, bracket=(-1.0, 1.0))
    assert value == math.inf


def test_transform_boundary_slope_within_tol_uses_endpoint():
    # x = 1 saturates the Bernoulli derivative range only in the limit; the
    # residual at theta = 700 is ~e^-700, so the endpoint value ln(1/p) is
    # returned rather than +inf.
    p = 0.08
    value = legendre_transform(
        lambda t: bernoulli_log_mgf(p, t), lambda t: bernoulli_log_mgf_prime(p, t), 1.0
    )
    assert value == pytest.approx(math.log(1 / p), abs=1e-10)


def test_transform_rejects_non_finite_oracle():
    with pytest.raises(ConvergenceError):
        legendre_transform(lambda t: math.nan, lambda t: math.nan, 0.3)
