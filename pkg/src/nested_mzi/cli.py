"""Command-line entry point: ``nested-mzi {run,sweep,weak-values,scenarios,validate}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, ScenarioConfig
from .network import NetworkError
from .scenarios import (
    DEFAULT_SWEEPS,
    SWEEP_PARAMETERS,
    builtin_scenario,
    run,
    scenario_names,
    sweep,
    weak_value_table,
    write_table,
)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _load(args) -> ScenarioConfig:
    if args.config and args.scenario:
        raise ConfigError("give either --config or --scenario, not both")
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from exc
        return ScenarioConfig.from_json(text)
    if args.scenario:
        return builtin_scenario(args.scenario)
    raise ConfigError("one of --config or --scenario is required")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON scenario file")
    p.add_argument("--scenario", metavar="NAME", help="built-in scenario name")
    p.add_argument("--out", metavar="DIR", help="output directory for CSV/JSON artifacts")
    p.add_argument("--seed", type=int, help="seed for shot noise (if the config enables it)")
    p.add_argument("--format", choices=("csv", "json"), default="json", help="stdout format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nested-mzi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    _common(p)

    p = sub.add_parser("sweep", help="rerun a scenario over a parameter")
    _common(p)
    p.add_argument("--param", choices=SWEEP_PARAMETERS)
    p.add_argument("--values", help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("weak-values", help="print the weak-value table")
    _common(p)

    p = sub.add_parser("scenarios", help="built-in scenarios")
    p.add_argument("action", choices=("list",))

    p = sub.add_parser("validate", help="check a config file")
    _common(p)
    return parser


def _emit(rows, fmt: str) -> None:
    if fmt == "json":
        json.dump(rows, sys.stdout, indent=2, sort_keys=True, default=str)
        sys.stdout.write("\n")
        return
    if isinstance(rows, dict):
        rows = [rows]
    write_table(sys.stdout, rows)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "scenarios":
            for name in scenario_names():
                print(name)
            return EXIT_OK
        config = _load(args)
        if args.command == "validate":
            config.validate()
            print(f"ok {config.name} {config.hash()}")
            return EXIT_OK
        if args.command == "weak-values":
            table = weak_value_table(config)
            if args.format == "csv":
                rows = [
                    {"projector": k, "re": v["re"] if v else None, "im": v["im"] if v else None,
                     "singular": table["singular"]}
                    for k, v in table["values"].items()
                ]
                _emit(rows, "csv")
            else:
                _emit(table, "json")
            return EXIT_OK
        if args.command == "run":
            report = run(config, args.out, seed=args.seed)
            if args.format == "json":
                print(report.to_json())
            else:
                rows = [{"mirror": m, "power": p, "present": report.peaks_present[m]}
                        for m, p in report.peaks.items()]
                _emit(rows, "csv")
            return EXIT_OK
        if args.command == "sweep":
            param, values = args.param, None
            if args.values:
                try:
                    values = [float(v) for v in args.values.split(",")]
                except ValueError as exc:
                    raise ConfigError(f"bad --values: {exc}") from exc
            if param is None or values is None:
                default = DEFAULT_SWEEPS.get(config.name)
                if default is None:
                    raise ConfigError("--param and --values are required for this scenario")
                param = param or default[0]
                values = values or default[1]
            rows = sweep(config, param, values, args.out, jobs=args.jobs)
            _emit(rows, args.format)
            return EXIT_OK
    except (ConfigError, NetworkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
