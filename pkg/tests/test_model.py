import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrport.errors import InvalidParameterError, LengthMismatchError
from corrport.model import (
    MarketParams,
    PathState,
    ShockVector,
    TimeGrid,
    derive_constants,
    simulate_path,
    step,
    baseline_grid,
    baseline_params,
)


def test_derived_constants_baseline(params):
    dc = derive_constants(params, baseline_grid())
    assert dc.theta3 == pytest.approx(0.25 / 1.05, abs=1e-12)
    assert dc.theta3 == pytest.approx(0.238095, abs=1e-6)
    assert dc.b1 == pytest.approx(0.042857, abs=1e-6)
    assert dc.m_sum == pytest.approx(0.10, abs=1e-12)
    assert dc.m_diff == pytest.approx(0.03, abs=1e-12)
    assert dc.mu3_tilde == pytest.approx(1.05)


def test_income_scales_match_two_point_moments(params):
    # |0.03 + 0.1 eps| takes 0.13 and 0.07: mean 0.10, half-range 0.03
    dc = derive_constants(params, baseline_grid())
    values = [abs(0.03 + 0.1 * e) for e in (-1, 1)]
    assert np.mean(values) == pytest.approx(dc.m_sum, abs=1e-15)
    assert np.std(values) == pytest.approx(dc.m_diff, abs=1e-15)


def test_b1_is_one_step_covariance_of_x_and_b(params):
    grid = baseline_grid(1)
    dc = derive_constants(params, grid)
    outcomes = list(itertools.product((-1, 1), repeat=3))
    start = PathState(1.0, 1.0, 1.0, 1.0)
    ends = [step(params, grid, start, ShockVector(*o), 1.0, 0) for o in outcomes]
    x = np.array([e.x for e in ends])
    b = np.array([e.b for e in ends])
    cov = np.mean((x - x.mean()) * (b - b.mean()))
    # one unit invested, B_0 = 1: Cov(X_1, B_1) = mu3_tilde * b1
    assert cov / dc.mu3_tilde == pytest.approx(dc.b1, rel=1e-12)


def test_a33_completes_unit_norm():
    p = baseline_params()
    assert p.a33 == pytest.approx(math.sqrt(0.28), abs=1e-15)
    assert p.a33 == pytest.approx(0.529150, abs=1e-6)
    assert p.a31**2 + p.a32**2 + p.a33**2 == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.05, 0.95), st.floats(0.01, 0.99))
def test_a33_unit_norm_property(a31, frac):
    a32 = frac * math.sqrt(1 - a31**2)
    p = baseline_params(a31=a31, a32=a32)
    assert abs(p.a31**2 + p.a32**2 + p.a33**2 - 1) < 1e-12


@given(st.integers(1, 30))
def test_k1_increasing_and_bound_at_one_step(n):
    dc = derive_constants(baseline_params(), baseline_grid())
    assert dc.k1_sq(n + 1) > dc.k1_sq(n)
    assert dc.k1_sq(1) == pytest.approx(dc.theta3**2 * 0.09, rel=1e-14)
    assert abs(dc.b1 / math.sqrt(dc.k1_sq(1)) - 0.6) < 1e-12


@pytest.mark.parametrize("changes, message", [
    (dict(sigma1=0.0), "sigma1"),
    (dict(sigma3=0.0), "sigma3"),
    (dict(mu1=0.3), "theta"),
    (dict(sigma3=0.9), "index"),
])
def test_derive_constants_names_violated_invariant(changes, message):
    with pytest.raises(InvalidParameterError, match=message):
        derive_constants(baseline_params(**changes), baseline_grid())


@pytest.mark.parametrize("changes", [
    dict(a31=0.8, a32=0.7),
    dict(a31=0.0),
    dict(gamma=0.0),
    dict(delta=1.0),
    dict(b0=0.0),
    dict(sigma2=-0.1),
])
def test_market_params_rejects_structural_violations(changes):
    with pytest.raises(InvalidParameterError):
        baseline_params(**changes)


def test_time_grid():
    g = TimeGrid(5, 0.5)
    assert g.horizon == 2.5
    assert g.t(3) == 1.5
    with pytest.raises(InvalidParameterError):
        TimeGrid(0, 1.0)
    with pytest.raises(InvalidParameterError):
        TimeGrid(2, 0.0)


def test_step_all_up(params):
    grid = baseline_grid(1)
    out = step(params, grid, PathState(1.0, 1.0, 1.0, 1.0), ShockVector(1, 1, 1), 0.5, 0)
    assert out.s == pytest.approx(1.37, abs=1e-12)
    assert out.i == pytest.approx(1.13, abs=1e-12)
    assert out.b == pytest.approx(1.05 + 0.25 * (1.2 + math.sqrt(0.28)), abs=1e-12)
    assert out.b == pytest.approx(1.482288, abs=1e-6)
    assert out.x == pytest.approx(1.185, abs=1e-12)


def test_step_rejects_out_of_range_index(params):
    with pytest.raises(InvalidParameterError):
        step(params, baseline_grid(2), PathState(1, 1, 1, 1), ShockVector(1, 1, 1), 0.0, 2)


def test_zero_volatility_path_is_deterministic():
    p = baseline_params(sigma1=0.0, sigma2=0.0, sigma3=0.0)
    grid = baseline_grid(3)
    pis = [0.4, -0.2, 1.0]
    for shocks in itertools.product(itertools.product((-1, 1), repeat=3), repeat=3):
        path = simulate_path(p, grid, pis, shocks)
        assert np.allclose(np.diff(path.x), np.array(pis) * 0.07, atol=1e-15)
        assert np.allclose(np.diff(path.i), 0.03, atol=1e-15)


def test_no_investment_keeps_x(params):
    grid = baseline_grid(4)
    rng = np.random.default_rng(1)
    shocks = rng.choice([-1, 1], size=(4, 3))
    path = simulate_path(params, grid, [0.0] * 4, shocks)
    assert np.all(path.x == params.x0)


def test_simulate_path_examples(params):
    one = simulate_path(params, baseline_grid(1), [0.0], [(1, 1, 1)])
    assert one.w == pytest.approx(2.13, abs=1e-12)
    two = simulate_path(params, baseline_grid(2), [0.0, 0.0], [(-1, -1, -1)] * 2)
    assert two.w == pytest.approx(2.14, abs=1e-12)
    assert len(two.s) == 3 and len(two.shocks) == 2


def test_simulate_path_length_errors(params):
    with pytest.raises(LengthMismatchError):
        simulate_path(params, baseline_grid(2), [0.0], [(1, 1, 1)] * 2)
    with pytest.raises(LengthMismatchError):
        simulate_path(params, baseline_grid(2), [0.0, 0.0], [])
    with pytest.raises(InvalidParameterError):
        simulate_path(params, baseline_grid(1), [0.0], [(1, 0, 1)])


def test_income_growth_uses_landing_time():
    p = baseline_params(k=0.2)
    grid = TimeGrid(3, 0.5)
    path = simulate_path(p, grid, [0, 0, 0], [(1, 1, 1)] * 3)
    expected = [math.exp(0.2 * 0.5 * (n + 1)) * abs(0.03 * 0.5 + 0.1 * math.sqrt(0.5)) for n in range(3)]
    assert np.allclose(np.diff(path.i), expected, rtol=1e-14)


shock_paths = st.lists(st.tuples(*[st.sampled_from((-1, 1))] * 3), min_size=5, max_size=5)


@settings(max_examples=60)
@given(shock_paths, st.lists(st.floats(-3, 3), min_size=5, max_size=5), st.floats(-4, 4))
def test_wealth_linear_in_strategy(shocks, pis, c):
    p, grid = baseline_params(), baseline_grid(5)
    base = simulate_path(p, grid, pis, shocks)
    scaled = simulate_path(p, grid, [c * x for x in pis], shocks)
    assert scaled.x[-1] - p.x0 == pytest.approx(c * (base.x[-1] - p.x0), abs=1e-12)


@settings(max_examples=60)
@given(shock_paths)
def test_income_bounds_and_positivity(shocks):
    p, grid = baseline_params(k=0.05), baseline_grid(5)
    path = simulate_path(p, grid, [1.0] * 5, shocks)
    lo = sum(math.exp(0.05 * s) * 0.07 for s in range(1, 6))
    hi = sum(math.exp(0.05 * s) * 0.13 for s in range(1, 6))
    assert lo - 1e-12 <= path.i[-1] - path.i[0] <= hi + 1e-12
    assert np.all(np.diff(path.i) >= 0)
    assert np.all(path.s > 0) and np.all(path.b > 0)
