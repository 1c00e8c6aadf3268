"""
Brute-force ground truth by exhaustive enumeration of +/-1 shock paths.

Nothing here touches the closed-form aggregates of ``strategies``: every
expectation, variance and correlation is a probability-weighted sum over the
finite sample space, produced by iterating ``model.step``. The optimizers
are plain grid scans with local refinement.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVarianceError, EmptyFeasibleSetError, HorizonTooLargeError, LengthMismatchError
from .model import MarketParams, PathState, TimeGrid, check_dynamics, initial_state, step, strategy_amounts
from .strategies import CorrelationAggregates, StrategyVector, pi_bar, quadratic_cap

MAX_UTILITY_STEPS = 10
MAX_CORRELATION_STEPS = 6
MAX_PREFIX_STEPS = 4
MAX_CPC_STEPS = 3


@dataclass(frozen=True)
class ExactDistribution:
    """Finite joint law of terminal wealth and index level."""

    w: np.ndarray
    b: np.ndarray
    prob: np.ndarray

    def __post_init__(self):
        if abs(math.fsum(self.prob) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to one")

    def expect(self, values) -> float:
        return float(np.sum(self.prob * values))

    def mean_w(self) -> float:
        return self.expect(self.w)

    def mean_b(self) -> float:
        return self.expect(self.b)

    def var_w(self) -> float:
        return self.expect((self.w - self.mean_w()) ** 2)

    def var_b(self) -> float:
        return self.expect((self.b - self.mean_b()) ** 2)

    def correlation(self) -> float:
        dw = self.w - self.mean_w()
        db = self.b - self.mean_b()
        vw, vb = self.expect(dw * dw), self.expect(db * db)
        if not (vw > 0 and vb > 0):
            raise DegenerateVarianceError("zero variance in enumerated law")
        return self.expect(dw * db) / math.sqrt(vw * vb)


@dataclass(frozen=True)
class GridSpec:
    lower: float
    upper: float
    resolution: float
    refinements: int = 2

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("GridSpec needs lower < upper")
        if not self.resolution > 0:
            raise ValueError("GridSpec needs resolution > 0")


def default_grid_spec(params: MarketParams, grid: TimeGrid, resolution: float = 1e-4) -> GridSpec:
    center = pi_bar(params, grid)
    return GridSpec(center - 5.0, center + 5.0, resolution)


def shock_table(n_steps: int, with_index: bool = True) -> np.ndarray:
    """All shock paths, shape (outcomes, n_steps, 3).

    Without the index the index shock is pinned to +1 and only the 4^n
    (stock, income) paths are listed.
    """
    per_step = list(itertools.product((-1, 1), repeat=3 if with_index else 2))
    rows = np.array(list(itertools.product(per_step, repeat=n_steps)), dtype=float)
    rows = rows.reshape(len(per_step) ** n_steps, n_steps, -1)
    if not with_index:
        rows = np.concatenate([rows, np.ones(rows.shape[:2] + (1,))], axis=2)
    return rows


def _run(params, grid, amounts, state, shocks, start):
    """Iterate ``step`` from date ``start``; shocks has shape (..., steps, 3)."""
    for j in range(shocks.shape[-2]):
        n = start + j
        eps = (shocks[..., j, 0], shocks[..., j, 1], shocks[..., j, 2])
        state = step(params, grid, state, eps, amounts[n], n)
    return state


def exact_distribution(params: MarketParams, grid: TimeGrid, strategy, start: int = 0,
                       state: PathState | None = None, with_index: bool = True) -> ExactDistribution:
    """Law of (W_N, B_N) given ``state`` at date ``start``."""
    amounts = strategy_amounts(strategy)
    if len(amounts) != grid.n_steps:
        raise LengthMismatchError(f"strategy has {len(amounts)} entries, grid has {grid.n_steps} steps")
    check_dynamics(params, grid)
    state = state or initial_state(params)
    shocks = shock_table(grid.n_steps - start, with_index)
    end = _run(params, grid, amounts, state, shocks, start)
    m = shocks.shape[0]
    w = np.broadcast_to(end.x + end.i, (m,)).astype(float)
    b = np.broadcast_to(end.b, (m,)).astype(float)
    return ExactDistribution(w=w, b=b, prob=np.full(m, 1.0 / m))


def exact_expected_utility(params: MarketParams, grid: TimeGrid, strategy) -> float:
    """E[-exp(-gamma W_N)] summed over all 4^N stock and income paths."""
    if grid.n_steps > MAX_UTILITY_STEPS:
        raise HorizonTooLargeError(f"enumeration limited to N <= {MAX_UTILITY_STEPS}")
    dist = exact_distribution(params, grid, strategy, with_index=False)
    return dist.expect(-np.exp(-params.gamma * dist.w))


def _prefix_states(params, grid, amounts, m):
    """States at date m for every 8^m prefix, as array-valued PathState."""
    if m == 0:
        return initial_state(params)
    prefixes = shock_table(m)
    s0 = initial_state(params)
    ones = np.ones(prefixes.shape[0])
    state = PathState(*(ones * v for v in s0))
    return _run(params, grid, amounts, state, prefixes, 0)


def conditional_correlations(params: MarketParams, grid: TimeGrid, strategy, condition_step: int = 0) -> np.ndarray:
    """corr(W_N, B_N | F_m) at every node of date m = ``condition_step``."""
    amounts = strategy_amounts(strategy)
    N, m = grid.n_steps, condition_step
    if len(amounts) != N:
        raise LengthMismatchError(f"strategy has {len(amounts)} entries, grid has {N} steps")
    if not 0 <= m < N:
        raise ValueError(f"condition step must lie in 0..{N - 1}")
    if N - m > MAX_CORRELATION_STEPS:
        raise HorizonTooLargeError(f"enumeration limited to {MAX_CORRELATION_STEPS} remaining steps")
    if m > 0 and N > MAX_PREFIX_STEPS:
        raise HorizonTooLargeError(f"conditioning at interior dates limited to N <= {MAX_PREFIX_STEPS}")
    check_dynamics(params, grid)

    prefix = _prefix_states(params, grid, amounts, m)
    nodes = np.atleast_1d(prefix.x).shape[0]
    # broadcast: nodes along axis 0, suffix outcomes along axis 1
    state = PathState(*(np.atleast_1d(v).reshape(-1, 1) for v in prefix))
    suffix = shock_table(N - m)[None, ...]
    end = _run(params, grid, amounts, state, suffix, m)
    w = end.x + end.i
    b = end.b
    p = 1.0 / suffix.shape[1]
    dw = w - np.sum(w, axis=1, keepdims=True) * p
    db = b - np.sum(b, axis=1, keepdims=True) * p
    vw = np.sum(dw * dw, axis=1) * p
    vb = np.sum(db * db, axis=1) * p
    if np.any(vw <= 0) or np.any(vb <= 0):
        raise DegenerateVarianceError("zero conditional variance in enumerated law")
    out = np.sum(dw * db, axis=1) * p / np.sqrt(vw * vb)
    return out.reshape(nodes)


def exact_correlation(params: MarketParams, grid: TimeGrid, strategy, condition_step: int = 0) -> float:
    """Conditional correlation at date ``condition_step`` by enumeration.

    For deterministic strategies the value is the same at every node; a
    ValueError is raised if the enumerated nodes disagree.
    """
    values = conditional_correlations(params, grid, strategy, condition_step)
    if np.ptp(values) > 1e-9:
        raise ValueError("conditional correlation differs across nodes")
    return float(values[0])


@dataclass
class _Moments:
    """Exact first and second moments of W = A + sum_j pi_j R_j and B."""

    mean_a: float
    var_a: float
    var_b: float
    cov_ab: float
    cov_rb: np.ndarray
    cov_ar: np.ndarray
    cov_rr: np.ndarray
    # (stock, income) outcomes for utility: base wealth and per-step returns
    util_a: np.ndarray = field(repr=False)
    util_r: np.ndarray = field(repr=False)

    def correlation(self, pis: np.ndarray) -> np.ndarray:
        """Rows of ``pis`` are candidate amounts for the free dates."""
        cov = self.cov_ab + pis @ self.cov_rb
        var = self.var_a + 2 * pis @ self.cov_ar + np.einsum("gi,ij,gj->g", pis, self.cov_rr, pis)
        with np.errstate(invalid="ignore", divide="ignore"):
            return cov / np.sqrt(var * self.var_b)

    def expected_utility(self, pis: np.ndarray, gamma: float) -> np.ndarray:
        w = self.util_a[None, :] + pis @ self.util_r.T
        return -np.mean(np.exp(-gamma * w), axis=1)


def _moments(params, grid, amounts, free):
    """Enumerate from date start = min(free); ``free`` dates get amount 0 in A."""
    start = min(free)
    base = np.array(amounts, dtype=float)
    base[list(free)] = 0.0
    h, sq = grid.h, math.sqrt(grid.h)

    def pieces(shocks):
        end = _run(params, grid, base, initial_state(params), shocks, start)
        a = end.x + end.i
        r = np.stack([params.mu1 * h + params.sigma1 * sq * shocks[:, j - start, 0] for j in free], axis=1)
        return a, r, end.b

    a, r, b = pieces(shock_table(grid.n_steps - start))
    da, dr, db = a - a.mean(), r - r.mean(axis=0), b - b.mean()
    m = a.shape[0]
    ua, ur, _ = pieces(shock_table(grid.n_steps - start, with_index=False))
    return _Moments(
        mean_a=float(a.mean()),
        var_a=float(np.sum(da * da) / m),
        var_b=float(np.sum(db * db) / m),
        cov_ab=float(np.sum(da * db) / m),
        cov_rb=dr.T @ db / m,
        cov_ar=dr.T @ da / m,
        cov_rr=dr.T @ dr / m,
        util_a=ua,
        util_r=ur,
    )


def _best(points, moments, params, constrained):
    util = moments.expected_utility(points, params.gamma)
    if constrained:
        corr = moments.correlation(points)
        util = np.where(corr <= -params.delta, util, -np.inf)
    i = int(np.argmax(util))
    if not np.isfinite(util[i]):
        return None
    return points[i]


def grid_search_single(params: MarketParams, grid: TimeGrid, tail=(), spec: GridSpec | None = None,
                       constrained: bool = True) -> float:
    """Scan the amount at date N - n with the later amounts ``tail`` fixed.

    Maximizes the exact conditional expected utility over the grid points
    whose exact conditional correlation is at most -delta. The scan starts at
    step ``resolution * 100**refinements`` and refines twice around the best
    point.
    """
    tail = list(strategy_amounts(tail))
    n = len(tail) + 1
    if n > MAX_PREFIX_STEPS or n > grid.n_steps:
        raise HorizonTooLargeError(f"single-date scan limited to n <= min(N, {MAX_PREFIX_STEPS})")
    spec = spec or default_grid_spec(params, grid)
    N = grid.n_steps
    amounts = [0.0] * (N - n) + [0.0] + tail
    mom = _moments(params, grid, amounts, [N - n])

    coarse = min(spec.resolution * 100**spec.refinements, (spec.upper - spec.lower) / 10)
    widths = [max(coarse / 100**r, spec.resolution) for r in range(spec.refinements)] + [spec.resolution]
    lo, hi = spec.lower, spec.upper
    best = None
    for width in widths:
        count = int(math.floor((hi - lo) / width + 1e-9)) + 1
        points = (lo + width * np.arange(count))[:, None]
        found = _best(points, mom, params, constrained)
        if found is None:
            if best is None:
                raise EmptyFeasibleSetError(
                    f"no amount in [{spec.lower:g}, {spec.upper:g}] reaches correlation <= {-params.delta:g}")
            break
        best = float(found[0])
        lo, hi = max(spec.lower, best - width), min(spec.upper, best + width)
    return best


def grid_search_csgp(params: MarketParams, grid: TimeGrid, spec: GridSpec | None = None) -> StrategyVector:
    """Nested scans: solve the last date first, then move backwards."""
    tail: list[float] = []
    for _ in range(grid.n_steps):
        tail.insert(0, grid_search_single(params, grid, tail, spec))
    return StrategyVector(tuple(tail), kind="Custom")


def grid_search_cpc(params: MarketParams, grid: TimeGrid, spec: GridSpec | None = None,
                    constrained: bool = True, points_per_axis: int = 21) -> StrategyVector:
    """Scan all deterministic strategies under the time-0 constraint.

    A box of ``points_per_axis``^N points is zoomed around the incumbent
    (half-width two grid steps) until the step reaches ``spec.resolution``.
    Equal amounts are not assumed anywhere.
    """
    N = grid.n_steps
    if N > MAX_CPC_STEPS:
        raise HorizonTooLargeError(f"joint scan limited to N <= {MAX_CPC_STEPS}")
    spec = spec or default_grid_spec(params, grid, 1e-3)
    mom = _moments(params, grid, [0.0] * N, list(range(N)))

    lo = np.full(N, spec.lower)
    hi = np.full(N, spec.upper)
    best = None
    while True:
        axes = [np.linspace(l, u, points_per_axis) for l, u in zip(lo, hi)]
        width = (hi[0] - lo[0]) / (points_per_axis - 1)
        points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, N)
        found = _best(points, mom, params, constrained)
        if found is None:
            if best is None:
                raise EmptyFeasibleSetError("no deterministic strategy on the grid meets the constraint")
            break
        best = found
        if width <= spec.resolution:
            break
        lo = np.maximum(spec.lower, best - 2 * width)
        hi = np.minimum(spec.upper, best + 2 * width)
    return StrategyVector(tuple(best), kind="Custom")


def bisect_cap(params: MarketParams, grid: TimeGrid, tail=(), tol: float = 1e-13) -> float:
    """Amount at date N - n where the exact correlation crosses -delta.

    Brackets from below on the left branch (correlation tends to its infimum
    as the amount goes to -infinity) and bisects.
    """
    tail = list(strategy_amounts(tail))
    n = len(tail) + 1
    N = grid.n_steps
    mom = _moments(params, grid, [0.0] * (N - n) + [0.0] + tail, [N - n])

    def excess(x):
        return float(mom.correlation(np.array([[x]]))[0]) + params.delta

    hi = 0.0
    while excess(hi) <= 0:
        hi += 1.0
    lo = hi - 1.0
    while excess(lo) > 0:
        lo = hi - 2 * (hi - lo)
        if lo < -1e12:
            raise EmptyFeasibleSetError("correlation never reaches -delta")
    while hi - lo > tol * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return lo


def bisect_equal_weight(params: MarketParams, grid: TimeGrid, tol: float = 1e-13) -> float:
    """Largest equal amount p whose strategy (p, ..., p) meets the time-0 constraint."""
    N = grid.n_steps
    mom = _moments(params, grid, [0.0] * N, list(range(N)))

    def excess(x):
        return float(mom.correlation(np.full((1, N), x))[0]) + params.delta

    hi = 0.0
    while excess(hi) <= 0:
        hi += 1.0
    lo = hi - 1.0
    while excess(lo) > 0:
        lo = hi - 2 * (hi - lo)
        if lo < -1e12:
            raise EmptyFeasibleSetError("correlation never reaches -delta on the equal-weight ray")
    while hi - lo > tol * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class RootOrderingReport:
    ok: bool
    r_left: float = math.nan
    r_right: float = math.nan
    zero_point: float = math.nan
    q_at_zero_point: float = math.nan
    failures: list = field(default_factory=list)


def verify_root_ordering(params: MarketParams, grid: TimeGrid, aggregates: CorrelationAggregates) -> RootOrderingReport:
    """Check r_left <= -b2/b1 <= r_right and Q(-b2/b1) <= 0."""
    from .model import derive_constants

    try:
        cap = quadratic_cap(params, grid, aggregates)
    except Exception as exc:  # report, never raise
        return RootOrderingReport(ok=False, failures=[f"{type(exc).__name__}: {exc}"])
    b1 = derive_constants(params, grid).b1
    z = -aggregates.b2 / b1
    qz = float(cap(z))
    failures = []
    slack = 1e-12 * max(1.0, abs(z))
    if not cap.r_left <= z + slack:
        failures.append(f"r_left {cap.r_left!r} > -b2/b1 {z!r}")
    if not z <= cap.r_right + slack:
        failures.append(f"-b2/b1 {z!r} > r_right {cap.r_right!r}")
    if not qz <= 1e-15 * max(1.0, abs(cap.constant)):
        failures.append(f"Q(-b2/b1) = {qz!r} > 0")
    return RootOrderingReport(ok=not failures, r_left=cap.r_left, r_right=cap.r_right,
                              zero_point=z, q_at_zero_point=qz, failures=failures)
