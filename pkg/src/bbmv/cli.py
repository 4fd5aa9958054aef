"""Run the gravitational-entanglement Bell test pipeline from the command line.

Exit codes: 0 success, 1 invalid config, 2 insufficient data,
3 internal invariant failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np
import yaml

from . import __version__
from .causal import run_audits
from .errors import ConfigError, InsufficientDataError, InvalidInputError, InvariantError, NoSolutionError, StageError
from .harness import (
    FORMATS,
    MODELS,
    default_run_config,
    emit_report,
    load_config,
    run_experiment,
    sweep,
    sweep_csv,
    write_atomic,
)
from .lhv import CorrelationTable, best_lhv_fit

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INSUFFICIENT = 2
EXIT_INVARIANT = 3


def _config(args):
    cfg = load_config(args.config) if args.config else default_run_config()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "model", None) is not None:
        overrides["model"] = args.model
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    return replace(cfg, **overrides) if overrides else cfg


def _emit(args, content: str):
    if args.out:
        write_atomic(args.out, content)
    else:
        sys.stdout.write(content)


def _cmd_run(args):
    report = run_experiment(_config(args), workers=args.workers)
    _emit(args, emit_report(report, args.format))


def _cmd_audit(args):
    cfg = _config(args)
    results = run_audits(cfg.schedule, cfg.audits)
    payload = {name: r.to_dict() for name, r in results.items()}
    _emit(args, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_table(path) -> CorrelationTable:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read correlation table {path}: {exc}") from exc
    if isinstance(data, dict) and "table" in data:
        data = data["table"]
    try:
        return CorrelationTable(data)
    except (InvariantError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid correlation table: {exc}") from exc


def _cmd_lhv_fit(args):
    path = args.table or args.config
    if not path:
        raise ConfigError("lhv-fit needs --table (or --config) pointing at a correlation table")
    table = _read_table(path)
    mix, residual = best_lhv_fit(table)
    payload = {
        "target": table.to_dict(),
        "mixture": mix.to_dict(),
        "fitted": mix.table().to_dict(),
        "residual": residual,
        "target_chsh": table.chsh(),
        "fitted_chsh": mix.chsh(),
    }
    _emit(args, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _parse_values(args):
    if args.values:
        return [float(v) for v in args.values.split(",")]
    if args.grid:
        start, stop, num = args.grid.split(":")
        return [float(v) for v in np.linspace(float(start), float(stop), int(num))]
    raise ConfigError("sweep needs --values or --grid")


def _cmd_sweep(args):
    cfg = _config(args)
    rows = sweep(cfg, args.field, _parse_values(args), exact_only=args.exact_only, workers=args.workers)
    _emit(args, sweep_csv(rows))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bbmv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_run_flags=True):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--out", help="output path (written atomically); default stdout")
        if with_run_flags:
            p.add_argument("--seed", type=int)
            p.add_argument("--model", choices=MODELS)
            p.add_argument("--trials", type=int)
            p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("run", help="full pipeline")
    common(p)
    p.add_argument("--format", choices=FORMATS, default="json")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("audit", help="causal audits of the configured schedule only")
    common(p, with_run_flags=False)
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("lhv-fit", help="best local fit of a correlation table")
    common(p, with_run_flags=False)
    p.add_argument("--table", help="YAML/JSON file with keys 'a,b', 'a,b_prime', 'a_prime,b', 'a_prime,b_prime'")
    p.set_defaults(func=_cmd_lhv_fit)

    p = sub.add_parser("sweep", help="grid over one config field, CSV out")
    common(p)
    p.add_argument("--field", required=True,
                   help="dotted config path, e.g. transfer.depolarizing_probability or bmv.dephasing_rate")
    p.add_argument("--values", help="comma-separated values")
    p.add_argument("--grid", help="start:stop:num")
    p.add_argument("--exact-only", action="store_true", help="skip sampling; analytic CHSH only")
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, InsufficientDataError):
            return EXIT_INSUFFICIENT
        if isinstance(exc.cause, (ConfigError, InvalidInputError, NoSolutionError)):
            return EXIT_CONFIG
        return EXIT_INVARIANT
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    except InvariantError as exc:
        print(f"error: internal invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
