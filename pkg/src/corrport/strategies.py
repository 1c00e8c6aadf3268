"""
Closed-form investment strategies under the terminal correlation constraint.

Three strategies are provided:

* ``pi_bar``: the unconstrained optimum, identical for every step.
* ``csgp``: the constrained subgame perfect strategy, built by backward
  induction; each entry is the smaller of ``pi_bar`` and the left root of a
  quadratic whose coefficients depend on the already fixed future entries.
* ``cpc``: the constrained precommitment strategy, a single equal amount for
  every step chosen at time zero.

All strategies are deterministic amounts of wealth held in the stock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateVarianceError, InadmissibleDeltaError, LengthMismatchError
from .model import DerivedConstants, MarketParams, TimeGrid, derive_constants, strategy_amounts

KINDS = ("UnSGP", "CSGP", "CPC", "Custom")

# |lead| below this is treated as delta sitting on the admissibility bound
LEAD_EPS = 1e-14


@dataclass(frozen=True)
class StrategyVector:
    amounts: tuple
    kind: str = "Custom"

    def __post_init__(self):
        amounts = tuple(float(a) for a in self.amounts)
        if not all(math.isfinite(a) for a in amounts):
            raise ValueError("strategy amounts must be finite")
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        object.__setattr__(self, "amounts", amounts)

    def __len__(self):
        return len(self.amounts)

    def __getitem__(self, i):
        return self.amounts[i]

    def __iter__(self):
        return iter(self.amounts)

    def as_array(self) -> np.ndarray:
        return np.array(self.amounts)


@dataclass(frozen=True)
class CorrelationAggregates:
    """Contribution of income and of the fixed future investments.

    ``b2`` enters the covariance with the index, ``k2_sq`` the variance;
    both are already scaled by the index factors.
    """

    b2: float
    k2_sq: float
    n_remaining: int


@dataclass(frozen=True)
class QuadraticCap:
    lead: float
    mid: float
    constant: float
    r_left: float
    r_right: float

    @property
    def vertex(self) -> float:
        return -self.mid / (2 * self.lead)

    def __call__(self, x):
        return (self.lead * x + self.mid) * x + self.constant


@dataclass(frozen=True)
class CpcIntermediates:
    a: float
    c: float
    eta_sq: float
    b_shift: float


def pi_bar(params: MarketParams, grid: TimeGrid) -> float:
    """Unconstrained optimal amount, the same at every step.

    Maximizes the one-step expected exponential utility in closed form:
    ln((1 + theta sqrt(h)) / (1 - theta sqrt(h))) / (2 gamma sigma1 sqrt(h)).
    """
    dc = derive_constants(params, grid)
    x = dc.theta * math.sqrt(grid.h)
    return math.log((1 + x) / (1 - x)) / (2 * params.gamma * params.sigma1 * math.sqrt(grid.h))


def aggregates_for_step(params: MarketParams, grid: TimeGrid, future_strategy: Sequence[float],
                        n_remaining: int, constants: DerivedConstants | None = None) -> CorrelationAggregates:
    """Aggregates b2 and k2^2 at date t_{N-n} given the fixed later amounts.

    ``future_strategy`` holds pi_{N-n+1}, ..., pi_{N-1} (length n - 1).
    """
    dc = constants or derive_constants(params, grid)
    N, n = grid.n_steps, n_remaining
    if not 1 <= n <= N:
        raise LengthMismatchError(f"n_remaining must lie in 1..{N}, got {n}")
    tail = strategy_amounts(future_strategy)
    if len(tail) != n - 1:
        raise LengthMismatchError(f"future strategy needs {n - 1} entries, got {len(tail)}")
    growth = np.array(dc.growth[N - n:])  # s = N-n+1 .. N
    scale = math.expm1(n * math.log1p(dc.theta3**2))
    sq = math.sqrt(grid.h)
    b2 = dc.theta3 * (dc.m_diff * params.a32 * growth.sum() + params.sigma1 * params.a31 * sq * tail.sum())
    k2_sq = scale * (dc.m_diff**2 * np.sum(growth**2) + dc.sigma1_sq_h * np.sum(tail**2))
    return CorrelationAggregates(b2=float(b2), k2_sq=float(k2_sq), n_remaining=n)


def conditional_correlation(params: MarketParams, grid: TimeGrid, pi_now: float,
                            aggregates: CorrelationAggregates,
                            constants: DerivedConstants | None = None) -> float:
    """corr(W_N, B_N | F_{N-n}) = (b1 pi + b2) / sqrt(k1(n)^2 pi^2 + k2^2)."""
    dc = constants or derive_constants(params, grid)
    var = dc.k1_sq(aggregates.n_remaining) * pi_now**2 + aggregates.k2_sq
    if not var > 0:
        raise DegenerateVarianceError("terminal wealth has zero conditional variance")
    return (dc.b1 * pi_now + aggregates.b2) / math.sqrt(var)


def check_admissible(params: MarketParams, grid: TimeGrid, constants: DerivedConstants | None = None) -> float:
    """Return the bound b1 / k1(N), raising if delta does not lie below it."""
    dc = constants or derive_constants(params, grid)
    bound = dc.admissibility_bound(grid.n_steps)
    lead = dc.b1**2 - dc.k1_sq(grid.n_steps) * params.delta**2
    if params.delta >= bound or abs(lead) < LEAD_EPS:
        raise InadmissibleDeltaError(
            f"delta = {params.delta:g} is not below the admissibility bound "
            f"b1/k1,N = {bound:.6g} for N = {grid.n_steps}",
            bound=bound,
        )
    return bound


def quadratic_cap(params: MarketParams, grid: TimeGrid, aggregates: CorrelationAggregates,
                  constants: DerivedConstants | None = None) -> QuadraticCap:
    """Coefficients and ordered roots of the constraint quadratic Q(x)."""
    dc = constants or derive_constants(params, grid)
    check_admissible(params, grid, dc)
    d, b1, b2 = params.delta, dc.b1, aggregates.b2
    k1_sq = dc.k1_sq(aggregates.n_remaining)
    lead = b1**2 - k1_sq * d**2
    if lead < LEAD_EPS:
        raise InadmissibleDeltaError(
            f"delta = {d:g} leaves no admissible amount with {aggregates.n_remaining} steps left",
            bound=dc.admissibility_bound(aggregates.n_remaining),
        )
    mid = 2 * b1 * b2
    constant = b2**2 - d**2 * aggregates.k2_sq
    # discriminant / 4, written as a sum of non-negative terms
    disc = d**2 * (k1_sq * b2**2 + aggregates.k2_sq * (b1**2 - d**2 * k1_sq))
    root = math.sqrt(disc)
    # stable pairing: never subtract nearly equal numbers
    if b1 * b2 >= 0:
        q = -(b1 * b2 + root)
        r_left = q / lead
        r_right = constant / q if q != 0 else -r_left
    else:
        q = -(b1 * b2 - root)
        r_right = q / lead
        r_left = constant / q if q != 0 else -r_right
    return QuadraticCap(lead=lead, mid=mid, constant=constant, r_left=r_left, r_right=r_right)


def csgp_cap(params: MarketParams, grid: TimeGrid, aggregates: CorrelationAggregates,
             constants: DerivedConstants | None = None) -> float:
    """Largest amount meeting the constraint: the left root of Q."""
    return quadratic_cap(params, grid, aggregates, constants).r_left


def csgp(params: MarketParams, grid: TimeGrid, constrained: bool = True) -> StrategyVector:
    """Constrained subgame perfect strategy by backward induction.

    With ``constrained=False`` the constraint is dropped and every entry is
    ``pi_bar``.
    """
    dc = derive_constants(params, grid)
    unconstrained = pi_bar(params, grid)
    N = grid.n_steps
    if not constrained:
        return StrategyVector((unconstrained,) * N, kind="CSGP")
    check_admissible(params, grid, dc)
    future: list[float] = []
    for n in range(1, N + 1):
        agg = aggregates_for_step(params, grid, future, n, dc)
        future.insert(0, min(unconstrained, csgp_cap(params, grid, agg, dc)))
    return StrategyVector(tuple(future), kind="CSGP")


def cpc_intermediates(params: MarketParams, grid: TimeGrid,
                      constants: DerivedConstants | None = None) -> CpcIntermediates:
    dc = constants or derive_constants(params, grid)
    N = grid.n_steps
    agg = aggregates_for_step(params, grid, (0.0,) * (N - 1), N, dc)
    a = 1 - params.delta**2 * dc.k1_sq(N) / dc.b1**2
    c = agg.b2 / dc.b1
    eta_sq = agg.k2_sq * params.delta**2 / dc.b1**2
    return CpcIntermediates(a=a, c=c, eta_sq=eta_sq, b_shift=-c / (a + N - 1))


def cpc(params: MarketParams, grid: TimeGrid, constrained: bool = True) -> StrategyVector:
    """Constrained precommitment strategy: one equal amount for all steps.

    The equal amount is the smaller of ``pi_bar`` and the lower root of the
    constraint restricted to the equal-weight ray, which sits below the shift
    -c / (a + N - 1).
    """
    unconstrained = pi_bar(params, grid)
    N = grid.n_steps
    if not constrained:
        return StrategyVector((unconstrained,) * N, kind="CPC")
    dc = derive_constants(params, grid)
    check_admissible(params, grid, dc)
    ci = cpc_intermediates(params, grid, dc)
    spread = ci.c**2 * (1 - ci.a) / (N * (ci.a + N - 1) ** 2) + ci.eta_sq / (N * (ci.a + N - 1))
    value = ci.b_shift - math.sqrt(spread)
    return StrategyVector((min(unconstrained, value),) * N, kind="CPC")


def unconstrained(params: MarketParams, grid: TimeGrid) -> StrategyVector:
    return StrategyVector((pi_bar(params, grid),) * grid.n_steps, kind="UnSGP")


def unconditional_correlation(params: MarketParams, grid: TimeGrid, strategy) -> float:
    """Time-0 correlation of terminal wealth and index for a deterministic strategy."""
    amounts = strategy_amounts(strategy)
    if len(amounts) != grid.n_steps:
        raise LengthMismatchError(f"strategy has {len(amounts)} entries, grid has {grid.n_steps} steps")
    dc = derive_constants(params, grid)
    agg = aggregates_for_step(params, grid, amounts[1:], grid.n_steps, dc)
    return conditional_correlation(params, grid, float(amounts[0]), agg, dc)


def build(kind: str, params: MarketParams, grid: TimeGrid) -> StrategyVector:
    """Dispatch on a strategy label."""
    if kind == "UnSGP":
        return unconstrained(params, grid)
    if kind == "CSGP":
        return csgp(params, grid)
    if kind == "CPC":
        return cpc(params, grid)
    raise ValueError(f"unknown strategy kind {kind!r}")


# Direct single-period formulas. ``scale`` is the income
# scale of the final increment; the half-difference m_diff reproduces the
# multi-period cap at one remaining step, the half-sum m_sum does not.

def single_period_correlation(params: MarketParams, grid: TimeGrid, pi_now: float, scale: float) -> float:
    sq = math.sqrt(grid.h)
    num = pi_now * params.sigma1 * params.a31 * sq + scale * params.a32
    return num / math.sqrt(pi_now**2 * params.sigma1**2 * grid.h + scale**2)


def single_period_cap(params: MarketParams, grid: TimeGrid, scale: float | None = None) -> float:
    """Closed-form single-period cap R1, by default with the half-difference scale."""
    dc = derive_constants(params, grid)
    if scale is None:
        scale = dc.m_diff * dc.growth[-1]
    a31, a32, d = params.a31, params.a32, params.delta
    if not d < a31:
        raise InadmissibleDeltaError(f"delta = {d:g} must lie below a31 = {a31:g}", bound=a31)
    coef = scale / (params.sigma1 * math.sqrt(grid.h) * (a31**2 - d**2))
    return coef * (-a31 * a32 - d * math.sqrt(a31**2 + a32**2 - d**2))


def single_period_cap_half_sum(params: MarketParams, grid: TimeGrid) -> float:
    """Compatibility variant using the half-sum income scale M.

    Kept for documentation only; it does not make the cap bind and is never
    used by ``csgp``.
    """
    dc = derive_constants(params, grid)
    return single_period_cap(params, grid, scale=dc.m_sum * math.exp(params.k * grid.horizon))
