"""Multi-period portfolio choice under a terminal correlation constraint.

Closed-form strategies (unconstrained, constrained subgame perfect and
constrained precommitment), brute-force enumeration oracles, a Monte Carlo
engine and sweep harness for the utility/risk trade-off.
"""

from .errors import (
    ConfigError,
    CorrportError,
    DegenerateVarianceError,
    EmptyFeasibleSetError,
    HorizonTooLargeError,
    InadmissibleDeltaError,
    InvalidParameterError,
    LengthMismatchError,
)
from .model import (
    DerivedConstants,
    MarketParams,
    PathState,
    ScenarioPath,
    ShockVector,
    TimeGrid,
    baseline_grid,
    baseline_params,
    derive_constants,
    simulate_path,
    step,
)
from .strategies import (
    CorrelationAggregates,
    StrategyVector,
    aggregates_for_step,
    conditional_correlation,
    cpc,
    csgp,
    csgp_cap,
    pi_bar,
    unconditional_correlation,
    unconstrained,
)
from .montecarlo import EstimateReport, SimulationConfig, percentile, relative_change, run

__version__ = "0.1.0"
