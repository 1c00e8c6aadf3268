"""
Monte Carlo estimation of expected utility, the 5th wealth percentile and the
sample correlation of terminal wealth with the index.

Shocks come from a counter-based generator: path ``p`` always reads the
Philox blocks starting at counter ``p * blocks_per_path`` under key ``seed``,
so the draws for a path never depend on chunking or on the number of
workers. All terminal values are gathered before any statistic is formed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .model import MarketParams, PathState, TimeGrid, check_dynamics, initial_state, step, strategy_amounts
from .errors import LengthMismatchError

# Philox4x64 emits 4 words = 256 bits per counter value
BITS_PER_BLOCK = 256
N_PROCESSES = 3  # stock, income, index


@dataclass(frozen=True)
class SimulationConfig:
    n_sim: int = 1_000_000
    seed: int = 0
    chunk_size: int = 1 << 16
    workers: int = 1

    def __post_init__(self):
        if self.n_sim < 1:
            raise ValueError("n_sim must be >= 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class EstimateReport:
    expected_utility: float
    utility_stderr: float
    p05: float
    risk_shortfall: float
    sample_correlation: float
    mean_wealth: float
    median_wealth: float
    n_sim: int
    seed: int

    def as_dict(self) -> dict:
        return asdict(self)


def blocks_per_path(n_steps: int) -> int:
    return -(-N_PROCESSES * n_steps // BITS_PER_BLOCK)


def shocks(seed: int, first_path: int, n_paths: int, n_steps: int) -> np.ndarray:
    """Fair +/-1 shocks of shape (n_paths, n_steps, 3) for a range of paths.

    Bit ``3 n + j`` of a path's stream drives process ``j`` at step ``n``.
    """
    blocks = blocks_per_path(n_steps)
    gen = np.random.Philox(key=seed, counter=first_path * blocks)
    raw = gen.random_raw(4 * blocks * n_paths).reshape(n_paths, -1)
    bits = np.unpackbits(raw.view(np.uint8), axis=1, bitorder="little")
    bits = bits[:, : N_PROCESSES * n_steps].reshape(n_paths, n_steps, N_PROCESSES)
    return bits.astype(np.int8) * 2 - 1


def terminal_values(params: MarketParams, grid: TimeGrid, amounts, eps: np.ndarray):
    """Iterate ``model.step`` over a batch of shock paths; returns (W_N, B_N)."""
    s0 = initial_state(params)
    ones = np.ones(eps.shape[0])
    state = PathState(*(ones * v for v in s0))
    for n in range(grid.n_steps):
        shock = (eps[:, n, 0], eps[:, n, 1], eps[:, n, 2])
        state = step(params, grid, state, shock, amounts[n], n)
    return state.x + state.i, state.b


def simulate_terminal(params: MarketParams, grid: TimeGrid, strategy, config: SimulationConfig):
    """Terminal wealth and index for every path, in path order."""
    amounts = strategy_amounts(strategy)
    if len(amounts) != grid.n_steps:
        raise LengthMismatchError(f"strategy has {len(amounts)} entries, grid has {grid.n_steps} steps")
    check_dynamics(params, grid)
    w = np.empty(config.n_sim)
    b = np.empty(config.n_sim)

    def work(start):
        stop = min(start + config.chunk_size, config.n_sim)
        eps = shocks(config.seed, start, stop - start, grid.n_steps)
        w[start:stop], b[start:stop] = terminal_values(params, grid, amounts, eps)

    starts = range(0, config.n_sim, config.chunk_size)
    if config.workers == 1:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(work, starts))
    return w, b


def percentile(samples, p: float) -> float:
    """Order statistic at rank (m - 1) p + 1 with linear interpolation."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("percentile of an empty sample")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    return float(np.quantile(x, p, method="linear"))


def relative_change(current: float, base: float) -> float:
    """(current - base) / |base|; a less negative utility counts as a gain."""
    if base == 0:
        raise ZeroDivisionError("relative change against a zero base")
    return (current - base) / abs(base)


def _pearson(w, b) -> float:
    # a constant sample has no correlation; the rounding residue of w - mean(w) must not produce one
    if np.ptp(w) == 0 or np.ptp(b) == 0:
        return math.nan
    dw, db = w - w.mean(), b - b.mean()
    vw, vb = np.dot(dw, dw), np.dot(db, db)
    if vw == 0 or vb == 0:
        return math.nan
    return float(np.dot(dw, db) / math.sqrt(vw * vb))


def summarize(params: MarketParams, w: np.ndarray, b: np.ndarray, seed: int) -> EstimateReport:
    util = -np.exp(-params.gamma * w)
    n = w.size
    mean_u = float(util.mean())
    stderr = float(util.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    p05 = percentile(w, 0.05)
    return EstimateReport(
        expected_utility=mean_u,
        utility_stderr=stderr,
        p05=p05,
        risk_shortfall=params.x0 + params.i0 - p05,
        sample_correlation=_pearson(w, b),
        mean_wealth=float(w.mean()),
        median_wealth=percentile(w, 0.5),
        n_sim=n,
        seed=seed,
    )


def run(params: MarketParams, grid: TimeGrid, strategy, config: SimulationConfig | None = None) -> EstimateReport:
    config = config or SimulationConfig()
    w, b = simulate_terminal(params, grid, strategy, config)
    return summarize(params, w, b, config.seed)
