import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_params
from corrport import oracle
from corrport.errors import EmptyFeasibleSetError, HorizonTooLargeError, LengthMismatchError
from corrport.model import TimeGrid, derive_constants, baseline_grid, baseline_params
from corrport.strategies import (
    CorrelationAggregates,
    aggregates_for_step,
    conditional_correlation,
    cpc,
    csgp,
    pi_bar,
)


def test_shock_table_shapes():
    assert oracle.shock_table(2).shape == (64, 2, 3)
    t = oracle.shock_table(3, with_index=False)
    assert t.shape == (64, 3, 3)
    assert np.all(t[..., 2] == 1)
    assert len({tuple(r.ravel()) for r in oracle.shock_table(2)}) == 64


@pytest.mark.parametrize("n", [1, 2, 3])
def test_distribution_probabilities_and_index_moments(params, n):
    grid = baseline_grid(n)
    dist = oracle.exact_distribution(params, grid, [0.3] * n)
    assert math.fsum(dist.prob) == pytest.approx(1.0, abs=1e-14)
    assert dist.mean_b() == pytest.approx(1.05**n, rel=1e-13)
    second = (1.05**2 + params.sigma3**2) ** n
    assert dist.var_b() == pytest.approx(second - 1.05 ** (2 * n), rel=1e-12)


@pytest.mark.parametrize("k", [0.0, 0.1])
def test_income_variance_uses_half_range(params, k):
    p = params.replace(k=k)
    grid = TimeGrid(3, 0.5)
    dc = derive_constants(p, grid)
    dist = oracle.exact_distribution(p, grid, [0.0] * 3, with_index=False)
    growth = np.exp(k * grid.h * np.arange(1, 4))
    assert dist.var_w() == pytest.approx(dc.m_diff**2 * np.sum(growth**2), rel=1e-12)
    assert dist.var_w() != pytest.approx(dc.m_sum**2 * np.sum(growth**2), rel=1e-3)


def test_exact_expected_utility_examples(params):
    assert oracle.exact_expected_utility(params, baseline_grid(1), [0.0]) == pytest.approx(-0.349977, abs=1e-6)
    low = params.replace(gamma=0.25)
    assert oracle.exact_expected_utility(low, baseline_grid(1), [0.0]) == pytest.approx(-0.591572, abs=1e-6)
    # hand computation: -exp(-gamma (x0 + i0)) * mean(exp(-gamma * 0.07), exp(-gamma * 0.13))
    hand = -math.exp(-0.5) * 0.5 * (math.exp(-0.0175) + math.exp(-0.0325))
    assert oracle.exact_expected_utility(low, baseline_grid(1), [0.0]) == pytest.approx(hand, rel=1e-14)


def test_exact_expected_utility_limits(params):
    with pytest.raises(HorizonTooLargeError):
        oracle.exact_expected_utility(params, baseline_grid(11), [0.0] * 11)
    with pytest.raises(LengthMismatchError):
        oracle.exact_expected_utility(params, baseline_grid(2), [0.0])


def test_exact_correlation_examples(params, grid2):
    assert oracle.exact_correlation(params, baseline_grid(1), [0.0]) == pytest.approx(0.6, abs=1e-12)
    pb = pi_bar(params, grid2)
    assert oracle.exact_correlation(params, grid2, [pb, pb]) == pytest.approx(0.62776, abs=1e-5)


def test_interior_correlation_horizon_limit(params):
    with pytest.raises(HorizonTooLargeError):
        oracle.exact_correlation(params, baseline_grid(6), [0.0] * 6, condition_step=1)


def test_conditional_correlation_is_state_free(params):
    grid = baseline_grid(3)
    values = oracle.conditional_correlations(params, grid, [-0.2, 0.4, -0.1], condition_step=2)
    assert values.shape == (64,)
    assert np.ptp(values) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_closed_form_correlation_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    p, grid = random_params(rng, n_max=4, k_range=0.2)
    N = grid.n_steps
    strat = rng.uniform(-5, 5, size=N)
    m = int(rng.integers(0, N))
    n = N - m
    agg = aggregates_for_step(p, grid, strat[m + 1:], n)
    closed = conditional_correlation(p, grid, strat[m], agg)
    assert closed == pytest.approx(oracle.exact_correlation(p, grid, strat, m), abs=1e-10)


def test_grid_search_single_one_step(params):
    grid = baseline_grid(1)
    assert oracle.grid_search_single(params, grid) == pytest.approx(-0.123880861, abs=1e-4)


def test_grid_search_csgp_two_steps(params, grid2):
    found = oracle.grid_search_csgp(params, grid2)
    assert found.amounts == pytest.approx(csgp(params, grid2).amounts, abs=2e-4)


def test_grid_search_empty_feasible_set(params):
    p = params.replace(delta=0.65)
    with pytest.raises(EmptyFeasibleSetError):
        oracle.grid_search_single(p, baseline_grid(1))


def test_grid_search_unconstrained_returns_pi_bar(params, grid2):
    pb = pi_bar(params, grid2)
    found = oracle.grid_search_cpc(params, grid2, constrained=False)
    assert found.amounts == pytest.approx((pb, pb), abs=1e-3)


def test_grid_search_cpc_two_steps(params, grid2):
    found = oracle.grid_search_cpc(params, grid2)
    assert found.amounts == pytest.approx((-0.12405, -0.12485), abs=1e-4)
    assert oracle.exact_correlation(params, grid2, found) <= -params.delta
    # on a 1e-3 grid the scan can only land within one step of the equal-weight optimum
    eq = oracle.exact_expected_utility(params, grid2, cpc(params, grid2))
    assert oracle.exact_expected_utility(params, grid2, found) == pytest.approx(eq, abs=1e-5)


def test_grid_search_cpc_one_step_equals_single_scan(params):
    grid = baseline_grid(1)
    spec = oracle.GridSpec(-1.0, 1.0, 1e-5)
    joint = oracle.grid_search_cpc(params, grid, spec)
    assert joint[0] == pytest.approx(oracle.grid_search_single(params, grid, spec=spec), abs=2e-5)


def test_grid_search_cpc_limit(params):
    with pytest.raises(HorizonTooLargeError):
        oracle.grid_search_cpc(params, baseline_grid(4))


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        oracle.GridSpec(1.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        oracle.GridSpec(0.0, 1.0, 0.0)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_bisect_cap_matches_csgp(params, n):
    grid = baseline_grid(n)
    s = csgp(params, grid).amounts
    assert oracle.bisect_cap(params, grid, s[1:]) == pytest.approx(s[0], abs=1e-10)


def test_verify_root_ordering_cases(params):
    grid = baseline_grid(8)
    agg = aggregates_for_step(params, grid, csgp(params, grid).amounts[1:], 8)
    assert oracle.verify_root_ordering(params, grid, agg).ok
    flipped = CorrelationAggregates(-agg.b2, agg.k2_sq, agg.n_remaining)
    assert oracle.verify_root_ordering(params, grid, flipped).ok
    edge = params.replace(delta=0.99 * derive_constants(params, grid).admissibility_bound())
    rep = oracle.verify_root_ordering(edge, grid, agg)
    assert rep.ok and rep.r_left < rep.zero_point < rep.r_right
    bad = oracle.verify_root_ordering(params.replace(delta=0.5), grid, agg)
    assert not bad.ok and "Inadmissible" in bad.failures[0]
