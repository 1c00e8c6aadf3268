"""Command line entry point: ``corrport {strategy,simulate,sweep,verify}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, montecarlo, strategies
from .errors import ConfigError, InadmissibleDeltaError, InvalidParameterError
from .model import derive_constants

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INADMISSIBLE = 3
EXIT_VERIFY = 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment configuration (JSON)")
    common.add_argument("--seed", type=int, help="override simulation.seed")
    common.add_argument("--nsim", type=int, help="override simulation.n_sim")
    common.add_argument("--out", help="output path (overrides output.path)")
    common.add_argument("--format", choices=harness.FORMATS, help="output format (overrides output.format)")
    common.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo chunks")

    parser = argparse.ArgumentParser(prog="corrport", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("strategy", parents=[common], help="print UnSGP/CSGP/CPC vectors")
    sim = sub.add_parser("simulate", parents=[common], help="one Monte Carlo estimate report")
    sim.add_argument("--strategy", choices=harness.STRATEGY_ORDER, help="strategy to simulate (default: first in config)")
    sub.add_parser("sweep", parents=[common], help="run the configured sweep and write rows")
    sub.add_parser("verify", parents=[common], help="oracle verification suite")
    return parser


def _load(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config)
    sim = cfg.simulation
    try:
        if args.seed is not None:
            sim = replace(sim, seed=args.seed)
        if args.nsim is not None:
            sim = replace(sim, n_sim=args.nsim)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return replace(
        cfg,
        simulation=sim,
        output_path=args.out or cfg.output_path,
        output_format=args.format or cfg.output_format,
    )


def _write_json(doc, path):
    text = json.dumps(doc, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_strategy(cfg, args) -> int:
    params, grid = cfg.market, cfg.grid
    dc = derive_constants(params, grid)
    doc = {
        "n_steps": grid.n_steps,
        "pi_bar": strategies.pi_bar(params, grid),
        "admissibility_bound": dc.admissibility_bound(),
        "strategies": {k: list(strategies.build(k, params, grid).amounts) for k in cfg.strategies},
    }
    _write_json(doc, args.out)
    return EXIT_OK


def cmd_simulate(cfg, args) -> int:
    kind = args.strategy or cfg.strategies[0]
    vec = strategies.build(kind, cfg.market, cfg.grid)
    rep = montecarlo.run(cfg.market, cfg.grid, vec, replace(cfg.simulation, workers=args.workers))
    _write_json({"strategy": kind, "entries": list(vec.amounts), **rep.as_dict()}, args.out)
    return EXIT_OK


def cmd_sweep(cfg, args) -> int:
    rows = harness.run_config(cfg, workers=args.workers)
    path = harness.emit(rows, cfg.output_path, cfg.output_format)
    skipped = sum(r.skipped for r in rows)
    print(f"wrote {len(rows)} rows ({skipped} skipped) to {path}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(cfg, args) -> int:
    report = harness.verify(cfg.market, cfg.grid, seed=cfg.simulation.seed)
    print(report.text())
    if args.out:
        Path(args.out).write_text(json.dumps(report.as_dict(), indent=2) + "\n")
    return EXIT_OK if report.passed else EXIT_VERIFY


COMMANDS = {"strategy": cmd_strategy, "simulate": cmd_simulate, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InadmissibleDeltaError, InvalidParameterError) as exc:
        print(f"inadmissible parameters: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE


if __name__ == "__main__":
    sys.exit(main())
