"""
Experiment configuration, parameter sweeps, output emission and the oracle
verification suite behind the command line.

A configuration is one JSON document::

    {
      "market": {"mu1": 0.07, "sigma1": 0.3, ..., "x0": 1, "i0": 1, "b0": 1},
      "grid": {"n_steps": 8, "h": 1.0},
      "simulation": {"n_sim": 1000000, "seed": 0, "chunk_size": 65536},
      "sweep": {"variable": "delta", "values": [0.01, 0.05, 0.1]},
      "strategies": ["UnSGP", "CSGP"],
      "output": {"path": "delta.csv", "format": "csv"}
    }

``seed`` defaults to 0 and ``format`` to csv; every other field is required.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import montecarlo, oracle, strategies
from .errors import ConfigError, InadmissibleDeltaError, InvalidParameterError
from .model import MarketParams, TimeGrid, derive_constants
from .montecarlo import SimulationConfig, relative_change

SWEEP_VARIABLES = ("delta", "n_steps", "sigma13")
STRATEGY_ORDER = ("UnSGP", "CSGP", "CPC")
FORMATS = ("csv", "json")
MARKET_FIELDS = tuple(f.name for f in fields(MarketParams))


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    skip_inadmissible: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    market: MarketParams
    grid: TimeGrid
    simulation: SimulationConfig
    sweep: SweepSpec
    strategies: tuple
    output_path: str
    output_format: str = "csv"


def _require(doc, key, where):
    if not isinstance(doc, dict) or key not in doc:
        raise ConfigError(f"missing field {where}{key}")
    return doc[key]


def parse_config(doc: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a decoded JSON document."""
    try:
        market_doc = _require(doc, "market", "")
        market = MarketParams(**{name: float(_require(market_doc, name, "market."))
                                 for name in MARKET_FIELDS})
        grid_doc = _require(doc, "grid", "")
        grid = TimeGrid(n_steps=int(_require(grid_doc, "n_steps", "grid.")), h=float(_require(grid_doc, "h", "grid.")))
        sim_doc = _require(doc, "simulation", "")
        simulation = SimulationConfig(
            n_sim=int(_require(sim_doc, "n_sim", "simulation.")),
            seed=int(sim_doc.get("seed", 0)),
            chunk_size=int(_require(sim_doc, "chunk_size", "simulation.")),
        )
        sweep_doc = _require(doc, "sweep", "")
        variable = _require(sweep_doc, "variable", "sweep.")
        if variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep.variable must be one of {SWEEP_VARIABLES}, got {variable!r}")
        values = tuple(_require(sweep_doc, "values", "sweep."))
        if not values:
            raise ConfigError("sweep.values must be non-empty")
        values = tuple(int(v) for v in values) if variable == "n_steps" else tuple(float(v) for v in values)
        sweep = SweepSpec(variable, values, bool(sweep_doc.get("skip_inadmissible", True)))
        kinds = tuple(_require(doc, "strategies", ""))
        if not kinds or any(k not in STRATEGY_ORDER for k in kinds):
            raise ConfigError(f"strategies must be a non-empty subset of {STRATEGY_ORDER}")
        out_doc = _require(doc, "output", "")
        path = str(_require(out_doc, "path", "output."))
        fmt = out_doc.get("format", "csv")
        if fmt not in FORMATS:
            raise ConfigError(f"output.format must be csv or json, got {fmt!r}")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    kinds = tuple(k for k in STRATEGY_ORDER if k in kinds)
    return ExperimentConfig(market, grid, simulation, sweep, kinds, path, fmt)


def load_config(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(doc)


@dataclass
class SweepRow:
    variable: str
    value: float
    strategy: str
    is_base: bool = False
    skipped: bool = False
    note: str = ""
    entries: tuple = ()
    expected_utility: float | None = None
    utility_stderr: float | None = None
    p05: float | None = None
    risk_shortfall: float | None = None
    sample_correlation: float | None = None
    rho_unconstrained: float | None = None
    utility_change: float | None = None
    risk_change: float | None = None
    p05_change: float | None = None


COLUMNS = tuple(f.name for f in fields(SweepRow))


def _apply(config: ExperimentConfig, value):
    """Market and grid for one sweep value."""
    var = config.sweep.variable
    if var == "delta":
        return config.market.replace(delta=value), config.grid
    if var == "n_steps":
        return config.market, config.grid.replace(n_steps=value)
    return config.market.replace(sigma1=value, sigma3=value), config.grid


def _point(config, value, kind, sim, rho=None):
    """One row, or a skip record when the strategy cannot be formed."""
    var = config.sweep.variable
    try:
        params, grid = _apply(config, value)
        vec = strategies.build(kind, params, grid)
    except InadmissibleDeltaError as exc:
        if not config.sweep.skip_inadmissible:
            raise
        return SweepRow(var, value, kind, skipped=True, note=f"inadmissible: bound b1/k1,N = {exc.bound:.6g}")
    except InvalidParameterError as exc:
        if var != "sigma13":
            raise
        return SweepRow(var, value, kind, skipped=True, note=f"invalid parameters: {exc}")
    rep = montecarlo.run(params, grid, vec, sim)
    return SweepRow(
        var, value, kind, entries=vec.amounts,
        expected_utility=rep.expected_utility, utility_stderr=rep.utility_stderr,
        p05=rep.p05, risk_shortfall=rep.risk_shortfall,
        sample_correlation=rep.sample_correlation, rho_unconstrained=rho,
    )


def _finalize(rows):
    """Sort, flag base rows (smallest usable value per strategy), add relative changes."""
    order = {k: i for i, k in enumerate(STRATEGY_ORDER)}
    rows.sort(key=lambda r: (r.value, order[r.strategy]))
    for kind in STRATEGY_ORDER:
        live = [r for r in rows if r.strategy == kind and not r.skipped]
        if not live:
            continue
        base = live[0]
        base.is_base = True
        for r in live:
            r.utility_change = relative_change(r.expected_utility, base.expected_utility)
            r.risk_change = _safe_change(r.risk_shortfall, base.risk_shortfall)
            r.p05_change = _safe_change(r.p05, base.p05)
    return rows


def _safe_change(current, base):
    return relative_change(current, base) if base != 0 else math.nan


def _simulation(config, workers):
    return replace(config.simulation, workers=workers)


def sigma_sweep(config: ExperimentConfig, workers: int = 1) -> list:
    """Sweep sigma1 = sigma3 together; rows carry the unconstrained correlation."""
    if config.sweep.variable != "sigma13":
        raise ConfigError("sigma_sweep needs sweep.variable = 'sigma13'")
    sim = _simulation(config, workers)
    rows = []
    for value in config.sweep.values:
        params, grid = _apply(config, value)
        try:
            rho = strategies.unconditional_correlation(params, grid, strategies.unconstrained(params, grid))
        except InvalidParameterError as exc:
            rows.extend(SweepRow("sigma13", value, k, skipped=True, note=f"invalid parameters: {exc}")
                        for k in config.strategies)
            continue
        rows.extend(_point(config, value, k, sim, rho) for k in config.strategies)
    if all(r.skipped for r in rows):
        raise InvalidParameterError("no sweep value produced a usable parameter set")
    return _finalize(rows)


def run_config(config: ExperimentConfig, workers: int = 1) -> list:
    """Strategies, Monte Carlo estimates and relative changes for every sweep value.

    Every point uses the same seed, so differences between rows are not
    blurred by independent sampling noise.
    """
    if config.sweep.variable == "sigma13":
        return sigma_sweep(config, workers)
    sim = _simulation(config, workers)
    rows = [_point(config, v, k, sim) for v in config.sweep.values for k in config.strategies]
    if all(r.skipped for r in rows):
        bounds = "; ".join(r.note for r in rows)
        raise InadmissibleDeltaError(f"every sweep value is inadmissible ({bounds})")
    return _finalize(rows)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.9g}"
    if isinstance(x, tuple):
        return ";".join(f"{v:.9g}" for v in x)
    return str(x)


def _json_value(x):
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, tuple):
        return [float(f"{v:.9g}") for v in x]
    if isinstance(x, (int, np.integer)):
        return int(x)
    return None if math.isnan(x) else float(f"{x:.9g}")


def render(rows, fmt: str = "csv") -> str:
    if not rows:
        raise ValueError("nothing to emit: no rows")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in rows:
            writer.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        doc = [{c: _json_value(getattr(r, c)) for c in COLUMNS} for r in rows]
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit(rows, path, fmt: str = "csv") -> Path:
    """Write rows as CSV (fixed column order) or as a JSON array."""
    text = render(rows, fmt)
    path = Path(path)
    path.write_text(text)
    return path


def _parse_cell(name, text, variable):
    if name in ("variable", "strategy", "note"):
        return text
    if name in ("is_base", "skipped"):
        return text == "true"
    if name == "entries":
        return tuple(float(v) for v in text.split(";")) if text else ()
    if text == "":
        return None
    if name == "value" and variable == "n_steps":
        return int(text)
    return float(text)


def load_rows(path) -> list:
    """Read rows back from a file written by ``emit``."""
    text = Path(path).read_text()
    if text.lstrip().startswith("["):
        return [SweepRow(**{**doc, "entries": tuple(doc["entries"])}) for doc in json.loads(text)]
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != COLUMNS:
        raise ValueError("unexpected CSV header")
    return [SweepRow(**{c: _parse_cell(c, rec[c], rec["variable"]) for c in COLUMNS}) for rec in reader]


# ---------------------------------------------------------------------------
# oracle verification suite


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, passed, detail=""):
        self.checks.append(CheckResult(name, bool(passed), detail))

    def text(self) -> str:
        lines = [f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}" for c in self.checks]
        lines.append(f"{sum(c.passed for c in self.checks)}/{len(self.checks)} checks passed")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}


def verify(params: MarketParams, grid: TimeGrid, max_steps: int = 3, seed: int = 0) -> VerificationReport:
    """Compare every closed form against enumeration or grid search.

    Runs on the configured market with the horizon capped at ``max_steps``
    so that exhaustive enumeration stays cheap.
    """
    report = VerificationReport()
    g = grid.replace(n_steps=min(grid.n_steps, max_steps))
    N = g.n_steps
    dc = derive_constants(params, g)
    one = g.replace(n_steps=1)

    pb = strategies.pi_bar(params, g)
    scan = oracle.grid_search_single(params, one, constrained=False)
    report.add("pi_bar vs unconstrained scan", abs(scan - pb) <= 1e-4, f"closed {pb:.9g}, scan {scan:.9g}")

    eb = oracle.exact_distribution(params, g, [0.0] * N)
    mean_b = params.b0 * dc.mu3_tilde**N
    var_b = params.b0**2 * ((dc.mu3_tilde**2 + params.sigma3**2 * g.h) ** N - dc.mu3_tilde ** (2 * N))
    report.add("index mean and variance", abs(eb.mean_b() - mean_b) < 1e-10 and abs(eb.var_b() - var_b) < 1e-10,
               f"mean err {abs(eb.mean_b() - mean_b):.2e}, var err {abs(eb.var_b() - var_b):.2e}")
    var_i = dc.m_diff**2 * sum(x * x for x in dc.growth)
    report.add("income variance uses half-difference", abs(eb.var_w() - var_i) < 1e-10,
               f"enumerated {eb.var_w():.12g}, closed {var_i:.12g}")

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10):
        strat = rng.uniform(-2, 2, size=N)
        for n in range(1, N + 1):
            agg = strategies.aggregates_for_step(params, g, strat[N - n + 1:], n, dc)
            closed = strategies.conditional_correlation(params, g, strat[N - n], agg, dc)
            worst = max(worst, abs(closed - oracle.exact_correlation(params, g, strat, N - n)))
    report.add("conditional correlation closed form vs enumeration", worst < 1e-10, f"max abs error {worst:.2e}")

    try:
        cs = strategies.csgp(params, g)
        cp = strategies.cpc(params, g)
    except InadmissibleDeltaError as exc:
        report.add("admissibility", False, str(exc))
        return report

    for n in range(1, N + 1):
        agg = strategies.aggregates_for_step(params, g, cs.amounts[N - n + 1:], n, dc)
        ro = oracle.verify_root_ordering(params, g, agg)
        report.add(f"root ordering, {n} steps left", ro.ok, "; ".join(ro.failures) or f"r_left {ro.r_left:.9g}")

    nested = oracle.grid_search_csgp(params, g)
    err = max(abs(a - b) for a, b in zip(nested, cs))
    report.add("CSGP vs nested scan", err <= 1e-4, f"max deviation {err:.2e}")

    for m in range(N):
        corr = oracle.exact_correlation(params, g, cs, m)
        binding = cs[m] < pb
        ok = abs(corr + params.delta) < 1e-9 if binding else corr <= -params.delta + 1e-12
        report.add(f"CSGP constraint at date {m}", ok, f"correlation {corr:.12g}")

    joint = oracle.grid_search_cpc(params, g)
    err = max(abs(a - b) for a, b in zip(joint, cp))
    report.add("CPC vs joint scan", err <= 1e-3, f"max deviation {err:.2e}")
    corr = oracle.exact_correlation(params, g, cp)
    report.add("CPC constraint at date 0", corr <= -params.delta + 1e-9, f"correlation {corr:.12g}")
    return report
