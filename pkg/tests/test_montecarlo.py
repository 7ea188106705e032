"""Simulation and tail estimators: oracles, tilting identities, reproducibility."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from tailrisk.errors import InsufficientSamplesError
from tailrisk.montecarlo import (
    SimOutcome,
    gibbs_conditional,
    simulate,
    tail_exact_pointmass,
    tail_naive,
    tail_tilted,
)
from tailrisk.pool import PoolSpec, TypeSpec, lln, preset
from tailrisk.rates import RatePoint, rate_at
from tailrisk.recovery import BetaFamily, MeanMap, PointMass


def zero_tilt_point(spec: PoolSpec, ell: float) -> RatePoint:
    """The identity tilt: lambda1 = 0 and phi_k = p_k."""
    probs = tuple(float(p) for p in spec.default_probs)
    return RatePoint(
        ell=ell,
        rate=0.0,
        d_star=float(spec.weights @ spec.default_probs),
        r_star=math.nan,
        lambda1=0.0,
        lambda2=0.0,
        phi=probs,
        psi=(math.nan,) * len(probs),
        status="ok",
    )


# --- simulate -----------------------------------------------------------------


def test_single_certain_default_is_deterministic():
    spec = PoolSpec((TypeSpec(1.0, 1.0, PointMass(0.2)),))
    for seed in range(10):
        outcome = simulate(spec, 1, seed)
        assert outcome == SimOutcome(n=1, defaults_per_type=(1,), d_n=1.0, l_n=0.8)


def test_outcome_rates_are_ordered():
    spec = preset(5)
    rng = np.random.default_rng(42)
    for _ in range(300):
        outcome = simulate(spec, 60, rng)
        assert 0.0 <= outcome.l_n <= outcome.d_n <= 1.0
        assert outcome.d_n == sum(outcome.defaults_per_type) / outcome.n


def test_simulated_mean_loss_obeys_lln():
    spec = preset(2)
    rng = np.random.default_rng(7)
    losses = np.array([simulate(spec, 10_000, rng).l_n for _ in range(200)])
    se = losses.std() / math.sqrt(losses.size)
    assert abs(losses.mean() - 0.064) < 3 * se


def test_default_counts_are_binomial():
    # Case 1 at n=50: the default count must be Binomial(50, 0.08);
    # chi-square goodness of fit on 10^5 trials.
    spec = preset(1)
    rng = np.random.default_rng(2718)
    draws = np.array([simulate(spec, 50, rng).d_n * 50 for _ in range(100_000)]).round().astype(int)
    observed = np.bincount(draws, minlength=51).astype(float)
    expected = stats.binom.pmf(np.arange(51), 50, 0.08) * draws.size
    # merge the sparse upper tail so every cell has expected mass >= 5
    cut = int(np.argmax(np.cumsum(expected[::-1]) >= 5.0))
    cut = 51 - cut
    observed = np.append(observed[: cut - 1], observed[cut - 1 :].sum())
    expected = np.append(expected[: cut - 1], expected[cut - 1 :].sum())
    result = stats.chisquare(observed, expected * observed.sum() / expected.sum())
    assert result.pvalue > 0.001, f"p={result.pvalue:.2e}"


def test_recoveries_react_to_realized_default_rate():
    # Case 2's mean recovery falls as D rises: among defaulted names the
    # average recovery must decrease across default-rate bins.  Small pools
    # (n=50) make the realized default rate swing widely enough that the
    # -0.1 slope of the conditional mean shows through the sampling noise.
    spec = preset(2)
    rng = np.random.default_rng(11)
    outcomes = [simulate(spec, 50, rng) for _ in range(36_000)]
    d = np.array([o.d_n for o in outcomes])
    mean_rec = np.array([1.0 - o.l_n / o.d_n for o in outcomes if o.d_n > 0])
    d = d[d > 0]
    lo, hi = np.quantile(d, [1 / 3, 2 / 3])
    low_bin = mean_rec[d <= lo]
    high_bin = mean_rec[d >= hi]
    # the gap must be significant, not noise
    se = math.hypot(low_bin.std() / math.sqrt(low_bin.size), high_bin.std() / math.sqrt(high_bin.size))
    assert low_bin.mean() - high_bin.mean() > 3 * se


def test_simulate_validates_pool_size():
    with pytest.raises(ValueError):
        simulate(preset(1), 0, 1)


# --- naive estimator ----------------------------------------------------------


def test_naive_trivial_levels():
    spec = preset(2)
    assert tail_naive(spec, 0.0, 50, 200, 3).p_hat == 1.0
    assert tail_naive(preset(1), 0.81, 50, 200, 3).p_hat == 0.0


def test_naive_matches_exact_binomial_tail():
    spec = preset(1)
    exact = tail_exact_pointmass(spec, 0.32, 25).p_hat
    estimate = tail_naive(spec, 0.32, 25, 2_000_000, 1234)
    se = math.sqrt(exact * (1 - exact) / estimate.trials)
    assert abs(estimate.p_hat - exact) < 3 * se


# --- exact estimator ----------------------------------------------------------


def test_exact_matches_scipy_binomial():
    spec = preset(1)
    for n, ell in ((10, 0.4), (25, 0.32), (100, 0.2), (800, 0.32)):
        k_min = math.ceil(n * ell / 0.8 - 1e-12)
        ours = tail_exact_pointmass(spec, ell, n)
        assert ours.p_hat == pytest.approx(float(stats.binom.sf(k_min - 1, n, 0.08)), rel=1e-10)
        assert ours.std_err == 0.0


def test_exact_corner_cases():
    spec = preset(1)
    assert tail_exact_pointmass(spec, 0.8, 10).p_hat == pytest.approx(0.08**10, rel=1e-12)
    assert tail_exact_pointmass(spec, 0.0, 10).p_hat == 1.0
    assert tail_exact_pointmass(spec, 0.81, 10).p_hat == 0.0


def test_exact_requires_homogeneous_point_mass_pool():
    with pytest.raises(ValueError):
        tail_exact_pointmass(preset(2), 0.2, 10)
    mixed_r = PoolSpec(
        (TypeSpec(0.5, 0.08, PointMass(0.2)), TypeSpec(0.5, 0.08, PointMass(0.3)))
    )
    with pytest.raises(ValueError):
        tail_exact_pointmass(mixed_r, 0.2, 10)
    mixed_p = PoolSpec(
        (TypeSpec(0.5, 0.05, PointMass(0.2)), TypeSpec(0.5, 0.08, PointMass(0.2)))
    )
    with pytest.raises(ValueError):
        tail_exact_pointmass(mixed_p, 0.2, 10)
    # split homogeneous pool is fine
    split = PoolSpec(
        (TypeSpec(0.5, 0.08, PointMass(0.2)), TypeSpec(0.5, 0.08, PointMass(0.2)))
    )
    assert tail_exact_pointmass(split, 0.32, 25).p_hat == pytest.approx(
        tail_exact_pointmass(preset(1), 0.32, 25).p_hat, rel=1e-12
    )


# --- tilted estimator ---------------------------------------------------------


def test_zero_tilt_reproduces_naive_exactly():
    spec = preset(2)
    ell = lln(spec).l_bar
    naive = tail_naive(spec, ell, 100, 20_000, 99)
    tilted = tail_tilted(spec, ell, 100, 20_000, zero_tilt_point(spec, ell), 99)
    assert tilted.p_hat == naive.p_hat


def test_tilted_unbiased_against_exact_binomial():
    spec = preset(1)
    for ell in (0.16, 0.32, 0.48):
        point = rate_at(spec, ell)
        exact = tail_exact_pointmass(spec, ell, 25).p_hat
        estimate = tail_tilted(spec, ell, 25, 20_000, point, 314)
        assert estimate.std_err > 0.0
        assert abs(estimate.p_hat - exact) < 3 * estimate.std_err, f"ell={ell}"


def test_tilted_agrees_with_naive_on_beta_pool():
    spec = preset(2)
    ell, n = 0.15, 50
    point = rate_at(spec, ell)
    tilted = tail_tilted(spec, ell, n, 50_000, point, 271)
    naive = tail_naive(spec, ell, n, 1_000_000, 272)
    combined = math.hypot(tilted.std_err, naive.std_err)
    assert abs(tilted.p_hat - naive.p_hat) < 3 * combined


def test_tilted_relative_error_stays_small_for_large_pools():
    # At n=400 the event probability is ~1e-22; the tilted estimator still
    # resolves it with better than 10% relative error from 10^5 trials.
    spec = preset(2)
    point = rate_at(spec, 0.2)
    estimate = tail_tilted(spec, 0.2, 400, 100_000, point, 3)
    assert 0.0 < estimate.p_hat < 1e-18
    assert estimate.std_err / estimate.p_hat < 0.1


def test_tilted_variance_reduction_on_rare_event():
    spec = preset(1)
    point = rate_at(spec, 0.32)
    exact = tail_exact_pointmass(spec, 0.32, 25).p_hat
    tilted = tail_tilted(spec, 0.32, 25, 10_000, point, 13)
    naive_se = math.sqrt(exact * (1 - exact) / 10_000)
    assert tilted.std_err * 5 < naive_se


def test_tilted_rejects_unusable_rate_points():
    spec = preset(2)
    bad = rate_at(preset(1), 0.81)  # infeasible, infinite rate
    with pytest.raises(ValueError):
        tail_tilted(preset(1), 0.81, 25, 100, bad, 1)
    wrong_pool = rate_at(preset(4), 0.2)
    with pytest.raises(ValueError):
        tail_tilted(spec, 0.2, 25, 100, wrong_pool, 1)


# --- Gibbs conditioning -------------------------------------------------------


def test_gibbs_at_typical_level_recovers_mean_default_rate():
    spec = preset(2)
    ell = lln(spec).l_bar
    mean_d, std_err = gibbs_conditional(
        spec, ell, 10_000, 4_000, zero_tilt_point(spec, ell), 1001
    )
    assert abs(mean_d - 0.08) < 0.01


def test_gibbs_degenerate_recovery_pins_default_rate():
    spec = preset(1)
    point = rate_at(spec, 0.32)
    mean_d, _ = gibbs_conditional(spec, 0.32, 400, 50_000, point, 5)
    assert abs(mean_d - 0.4) < 0.01


def test_gibbs_converges_to_optimizer_default_rate():
    spec = preset(2)
    point = rate_at(spec, 0.2)
    mean_d, std_err = gibbs_conditional(spec, 0.2, 400, 100_000, point, 31415)
    assert abs(mean_d - point.d_star) <= 0.03
    assert std_err < 0.01


def test_gibbs_signals_empty_conditioning_event():
    spec = preset(2)
    with pytest.raises(InsufficientSamplesError):
        gibbs_conditional(spec, 0.5, 100, 20, zero_tilt_point(spec, 0.5), 8)


# --- reproducibility ----------------------------------------------------------


def test_estimates_reproduce_for_equal_seeds():
    spec = preset(4)
    a = tail_naive(spec, 0.12, 80, 30_000, 555)
    b = tail_naive(spec, 0.12, 80, 30_000, 555)
    assert a == b
    point = rate_at(spec, 0.2)
    c = tail_tilted(spec, 0.2, 80, 30_000, point, 556)
    d = tail_tilted(spec, 0.2, 80, 30_000, point, 556)
    assert c == d
    assert tail_naive(spec, 0.12, 80, 30_000, 557) != a


def test_simulation_stream_reproduces_for_equal_seeds():
    spec = preset(5)
    runs = []
    for _ in range(2):
        rng = np.random.default_rng(900)
        runs.append([simulate(spec, 40, rng) for _ in range(50)])
    assert runs[0] == runs[1]


def test_thread_count_does_not_change_results(monkeypatch):
    spec = preset(2)
    results = {}
    for threads in ("1", "4"):
        monkeypatch.setenv("TAILRISK_THREADS", threads)
        results[threads] = tail_naive(spec, 0.1, 60, 60_000, 777)
    assert results["1"] == results["4"]


def test_trial_count_validation():
    with pytest.raises(ValueError):
        tail_naive(preset(1), 0.2, 10, 0, 1)
