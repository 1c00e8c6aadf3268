"""
Market model: parameters, time grid, one-step dynamics and derived constants.

Three independent Rademacher walks drive the stock S, the income stream I and
the benchmark index B. Investment wealth X follows the self-financing rule
with an amount ``pi_n`` held in the stock over [t_n, t_{n+1}]; terminal
wealth is W = X_N + I_N.

``step`` is written with plain arithmetic so it broadcasts: the scalar path
simulator, the exhaustive-enumeration oracle and the Monte Carlo engine all
call the same function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidParameterError, LengthMismatchError


@dataclass(frozen=True)
class MarketParams:
    """Exogenous model coefficients.

    Rates are per unit time and volatilities per square-root time; the
    loadings ``a31`` and ``a32`` tie the index shock to the stock and income
    shocks, and ``a33`` completes them to unit norm.
    """

    mu1: float
    sigma1: float
    mu2: float
    sigma2: float
    k: float
    mu3: float
    sigma3: float
    a31: float
    a32: float
    gamma: float
    delta: float
    x0: float = 1.0
    i0: float = 1.0
    b0: float = 1.0

    def __post_init__(self):
        for name in ("sigma1", "sigma2", "sigma3"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        if not (self.a31 > 0 and self.a32 > 0):
            raise InvalidParameterError("a31 > 0 and a32 > 0 required")
        if self.a31**2 + self.a32**2 > 1.0 + 1e-15:
            raise InvalidParameterError("a31^2 + a32^2 <= 1 required (a33 must be real)")
        if not self.gamma > 0:
            raise InvalidParameterError("gamma > 0 required")
        if not self.b0 > 0:
            raise InvalidParameterError("b0 > 0 required")
        if not 0 < self.delta < 1:
            raise InvalidParameterError("delta must lie in (0, 1)")

    @property
    def a33(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.a31**2 - self.a32**2))

    def replace(self, **changes) -> "MarketParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class TimeGrid:
    """``n_steps`` trading dates t_n = n * h, horizon T = n_steps * h."""

    n_steps: int
    h: float = 1.0

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidParameterError("n_steps must be an integer >= 1")
        if not self.h > 0:
            raise InvalidParameterError("h > 0 required")

    @property
    def horizon(self) -> float:
        return self.n_steps * self.h

    def t(self, n):
        return n * self.h

    def replace(self, **changes) -> "TimeGrid":
        return replace(self, **changes)


def baseline_params(**overrides) -> MarketParams:
    """Base parameter set of the numerical study (h = 1, N = 8)."""
    base = dict(
        mu1=0.07, sigma1=0.30, mu2=0.03, sigma2=0.10, k=0.0,
        mu3=0.05, sigma3=0.25, a31=0.6, a32=0.6, gamma=0.5, delta=0.09,
        x0=1.0, i0=1.0, b0=1.0,
    )
    base.update(overrides)
    return MarketParams(**base)


def baseline_grid(n_steps: int = 8) -> TimeGrid:
    return TimeGrid(n_steps=n_steps, h=1.0)


def check_dynamics(params: MarketParams, grid: TimeGrid) -> None:
    """Raise if the stock or index could reach a non-positive level."""
    h, sq = grid.h, math.sqrt(grid.h)
    if not 1 + params.mu3 * h - params.sigma3 * sq * (params.a31 + params.a32 + params.a33) > 0:
        raise InvalidParameterError("index may become non-positive: need 1 + mu3*h - sigma3*sqrt(h)*(a31+a32+a33) > 0")
    if not 1 + params.mu3 * h > 0:
        raise InvalidParameterError("1 + mu3*h > 0 required")
    if not (1 + params.mu1 * h - params.sigma1 * sq > 0 and 1 + params.mu1 * h + params.sigma1 * sq > 0):
        raise InvalidParameterError("stock may become non-positive: need 1 + mu1*h +/- sigma1*sqrt(h) > 0")


def check_params(params: MarketParams, grid: TimeGrid) -> None:
    """Full invariant check required by the strategy formulas."""
    if not params.sigma1 > 0:
        raise InvalidParameterError("sigma1 > 0 required")
    if not params.sigma3 > 0:
        raise InvalidParameterError("sigma3 > 0 required")
    check_dynamics(params, grid)
    theta_sqrt_h = params.mu1 / params.sigma1 * math.sqrt(grid.h)
    if not abs(theta_sqrt_h) < 1:
        raise InvalidParameterError("|theta * sqrt(h)| < 1 required, theta = mu1 / sigma1")


@dataclass(frozen=True)
class DerivedConstants:
    theta: float
    mu3_tilde: float
    theta3: float
    a33: float
    m_sum: float
    m_diff: float
    b1: float
    sigma1_sq_h: float
    # e^{k t_s} for landing indices s = 1..N
    growth: tuple = field(repr=False)

    @property
    def n_steps(self) -> int:
        return len(self.growth)

    def k1_sq(self, n: int) -> float:
        """Variance-side coefficient of the current investment with n steps left."""
        if n < 1:
            raise InvalidParameterError("remaining-step count must be >= 1")
        return math.expm1(n * math.log1p(self.theta3**2)) * self.sigma1_sq_h

    def admissibility_bound(self, n: int | None = None) -> float:
        """b1 / k1(n); delta must lie strictly below it. Defaults to n = N."""
        n = self.n_steps if n is None else n
        return self.b1 / math.sqrt(self.k1_sq(n))


def derive_constants(params: MarketParams, grid: TimeGrid) -> DerivedConstants:
    check_params(params, grid)
    h, sq = grid.h, math.sqrt(grid.h)
    up = abs(params.mu2 * h + params.sigma2 * sq)
    down = abs(params.mu2 * h - params.sigma2 * sq)
    mu3_tilde = 1.0 + h * params.mu3
    theta3 = params.sigma3 * sq / mu3_tilde
    growth = tuple(math.exp(params.k * grid.t(s)) for s in range(1, grid.n_steps + 1))
    return DerivedConstants(
        theta=params.mu1 / params.sigma1,
        mu3_tilde=mu3_tilde,
        theta3=theta3,
        a33=params.a33,
        m_sum=0.5 * (up + down),
        m_diff=0.5 * (up - down),
        b1=theta3 * params.sigma1 * params.a31 * sq,
        sigma1_sq_h=params.sigma1**2 * h,
        growth=growth,
    )


class ShockVector(NamedTuple):
    """One step of stock, income and index shocks, each exactly +1 or -1."""

    eps_s: int
    eps_i: int
    eps_b: int


class PathState(NamedTuple):
    s: float
    i: float
    b: float
    x: float


def initial_state(params: MarketParams, s0: float = 1.0) -> PathState:
    return PathState(s=s0, i=params.i0, b=params.b0, x=params.x0)


def step(params: MarketParams, grid: TimeGrid, state: PathState, shock: ShockVector, pi_n, n: int) -> PathState:
    """Advance (S, I, B, X) over [t_n, t_{n+1}].

    The income increment is scaled by e^{k t_{n+1}} (its landing time).
    Fields of ``state`` and ``shock`` may be numpy arrays; the update
    broadcasts elementwise.
    """
    if not 0 <= n < grid.n_steps:
        raise InvalidParameterError(f"step index {n} outside 0..{grid.n_steps - 1}")
    h, sq = grid.h, math.sqrt(grid.h)
    eps_s, eps_i, eps_b = shock
    stock_ret = params.mu1 * h + params.sigma1 * sq * eps_s
    income_inc = math.exp(params.k * grid.t(n + 1)) * np.abs(params.mu2 * h + params.sigma2 * sq * eps_i)
    z = params.a31 * eps_s + params.a32 * eps_i + params.a33 * eps_b
    index_ret = params.mu3 * h + params.sigma3 * sq * z
    return PathState(
        s=state.s * (1 + stock_ret),
        i=state.i + income_inc,
        b=state.b * (1 + index_ret),
        x=state.x + pi_n * stock_ret,
    )


@dataclass(frozen=True)
class ScenarioPath:
    shocks: tuple
    s: np.ndarray
    i: np.ndarray
    b: np.ndarray
    x: np.ndarray

    @property
    def w(self) -> float:
        """Terminal wealth x_N + i_N."""
        return float(self.x[-1] + self.i[-1])


def strategy_amounts(strategy) -> np.ndarray:
    """Accept a StrategyVector or any sequence of amounts."""
    return np.asarray(getattr(strategy, "amounts", strategy), dtype=float)


def simulate_path(params: MarketParams, grid: TimeGrid, strategy, shocks: Sequence) -> ScenarioPath:
    amounts = strategy_amounts(strategy)
    if len(amounts) != grid.n_steps:
        raise LengthMismatchError(f"strategy has {len(amounts)} entries, grid has {grid.n_steps} steps")
    if len(shocks) != grid.n_steps:
        raise LengthMismatchError(f"{len(shocks)} shock triples for {grid.n_steps} steps")
    check_dynamics(params, grid)

    state = initial_state(params)
    rows = [state]
    triples = []
    for n, shock in enumerate(shocks):
        shock = ShockVector(*shock)
        if any(e not in (-1, 1) for e in shock):
            raise InvalidParameterError(f"shocks must be +/-1, got {shock}")
        triples.append(shock)
        state = step(params, grid, state, shock, amounts[n], n)
        rows.append(state)
    arr = np.array(rows, dtype=float)
    return ScenarioPath(shocks=tuple(triples), s=arr[:, 0], i=arr[:, 1], b=arr[:, 2], x=arr[:, 3])
