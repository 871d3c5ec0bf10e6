"""Command-line scenario runner.

Subcommands: simulate, validate, brackets, tomography.  Exit codes:
0 success, 2 invalid configuration, 3 numerical guard violation.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .gaussian import DegenerateDesignError, PhysicalityError
from .grid import ConfigurationError, DomainTooSmallError
from .scenario import (ConfigError, ScenarioConfig, parse_config, run_scenario,
                       tomography_demo, validate_backends)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _load_config(args) -> ScenarioConfig:
    path = Path(args.config)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    config = parse_config(text)
    out = args.out or config.output_path or str(path.with_suffix(".csv"))
    return replace(config, output_path=out)


def _cmd_simulate(args) -> int:
    config = _load_config(args)
    report = run_scenario(config)
    print(f"wrote {len(report.rows)} rows to {config.output_path}")
    return 0


def _cmd_validate(args) -> int:
    config = _load_config(args)
    summary = validate_backends(config)
    print(f"max cross-backend moment residual: {summary.max_residual:.6e}")
    print(f"residual at dt/2:                  {summary.max_residual_half_dt:.6e}")
    print(f"dt-halving error ratio:            {summary.convergence_ratio:.3f}")
    return 0


def _cmd_brackets(args) -> int:
    config = _load_config(args)
    if not config.bracket_pairs:
        raise ConfigError("brackets subcommand needs bracket_pairs in the config")
    if "brackets" not in config.diagnostics:
        config = replace(config,
                         diagnostics=tuple(config.diagnostics) + ("brackets",))
    report = run_scenario(config)
    print(f"wrote {len(report.rows)} rows to {config.output_path}")
    return 0


def _cmd_tomography(args) -> int:
    config = _load_config(args)
    result = tomography_demo(config)
    print(f"{'moment':<8} {'planted':>22} {'recovered':>22}")
    for name in ("mean_x", "mean_k", "var_x", "var_k", "cov_xk"):
        print(f"{name:<8} {getattr(result.planted, name):>22.15g} "
              f"{getattr(result.recovered, name):>22.15g}")
    print(f"fit residual: {result.recovered.residual:.6e}")
    print(f"wrote {config.output_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridlab",
        description="Hybrid quantum-classical ensemble laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, doc in (
            ("simulate", _cmd_simulate, "evolve and tabulate diagnostics"),
            ("validate", _cmd_validate, "cross-backend moment validation"),
            ("brackets", _cmd_brackets, "hybrid Poisson bracket time series"),
            ("tomography", _cmd_tomography, "mediator moment reconstruction")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="scenario config file")
        p.add_argument("--out", default=None,
                       help="output CSV path (default: config name with .csv)")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PhysicalityError, DegenerateDesignError, DomainTooSmallError,
            ConfigurationError) as exc:
        print(f"numerical guard violation: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
