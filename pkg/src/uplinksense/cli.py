"""Command line entry points for running and inspecting result sweeps."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from types import SimpleNamespace

from .experiment import (
    CSV_COLUMNS,
    SCHEMA_VERSION,
    ExperimentSpec,
    preset,
    run_sweep,
    summarize,
)

_FLOAT_COLUMNS = (
    "nmse_delay", "nmse_doppler", "rmse_aoa_deg", "clustering_accuracy",
    "miss_rate", "false_alarm_rate",
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uplinksense",
        description="Run multiuser delay-recovery sweeps and inspect results.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a sweep and write its CSV")
    source = run_p.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", help="named experiment (smoke, fig2, ...)")
    source.add_argument("--config", help="JSON file holding a full spec")
    run_p.add_argument("--out", required=True, help="output CSV path")
    run_p.add_argument("--trials", type=int, help="override trial count")
    run_p.add_argument("--seed", type=int, help="override base seed")
    run_p.add_argument("--methods", help="comma separated method subset")
    run_p.add_argument("--oracle-count", action=argparse.BooleanOptionalAction,
                       default=None,
                       help="give recovery the true per-user path count")
    run_p.add_argument("--no-offsets", action="store_true",
                       help="disable timing/frequency/phase offsets")
    run_p.add_argument("--no-noise", action="store_true",
                       help="synthesize noise-free observations")
    run_p.add_argument("--keep-going", action="store_true",
                       help="exit 0 even if some trials are flagged failed")
    run_p.add_argument("--workers", type=int, default=1,
                       help="process pool size (output is identical)")

    ins_p = sub.add_parser("inspect", help="summarize an existing result CSV")
    ins_p.add_argument("csv_path")
    return parser


def _spec_from_args(args) -> ExperimentSpec:
    if args.preset is not None:
        try:
            spec = preset(args.preset)
        except KeyError:
            raise ValueError("unknown preset %r" % args.preset) from None
    else:
        with open(args.config) as fh:
            spec = ExperimentSpec.from_dict(json.load(fh))
    if args.trials is not None:
        spec = replace(spec, trials=args.trials)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.methods is not None:
        spec = replace(spec, methods=tuple(args.methods.split(",")))
    if args.oracle_count is not None:
        spec = replace(spec, oracle_count=args.oracle_count)
    if args.no_offsets:
        spec = replace(spec, no_offsets=True)
    if args.no_noise:
        if spec.sweep_param == "snr":
            raise ValueError("--no-noise is incompatible with an snr sweep")
        spec = replace(spec, system=replace(spec.system, snr_db=None))
    return spec


def _cmd_run(args) -> int:
    spec = _spec_from_args(args)
    outcome = run_sweep(spec, args.out, workers=args.workers, echo=print)
    if outcome.num_failed and not args.keep_going:
        print("%d trial rows failed; rerun with --keep-going to ignore"
              % outcome.num_failed, file=sys.stderr)
        return 1
    return 0


def _cmd_inspect(args) -> int:
    with open(args.csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            print("unrecognized columns in %s" % args.csv_path,
                  file=sys.stderr)
            return 1
        raw = list(reader)
    if not raw:
        print("no rows in %s" % args.csv_path, file=sys.stderr)
        return 1
    versions = {r["schema_version"] for r in raw}
    if versions != {str(SCHEMA_VERSION)}:
        print("schema version mismatch: file has %s, this tool reads %d"
              % (sorted(versions), SCHEMA_VERSION), file=sys.stderr)
        return 1
    rows = [
        SimpleNamespace(
            composition=r["composition"], sweep_value=float(r["sweep_value"]),
            method=r["method"], failed=r["failed"] == "1",
            **{c: float(r[c]) for c in _FLOAT_COLUMNS})
        for r in raw
    ]
    print(summarize(rows))
    num_failed = sum(r.failed for r in rows)
    print("%d rows, %d failed" % (len(rows), num_failed))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_inspect(args)
    except (OSError, RuntimeError, ValueError, KeyError,
            json.JSONDecodeError) as err:
        print("error: %s" % err, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
