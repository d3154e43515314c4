"""Command line front end: ``epi-lab <subcommand> --config FILE [--out PREFIX] [--seed N]``.

Exit codes: 0 success, 2 invalid config, 3 numerical failure, 4 unwritable
output path.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

from . import distributions as D
from .battery import run_battery
from .channel import ChannelError
from .epi import EpiInputError
from .pool import worker_count
from .quadrature import QuadratureError
from .reports import (
    EXPERIMENTS,
    NUMERICAL,
    ConfigError,
    NumericalFailure,
    UnwritablePathError,
    check_writable,
    emit_all,
    load_config,
    run,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PATH = 0, 2, 3, 4
BATTERY_COLUMNS = ("criterion", "name", "passed", "value", "threshold", "detail")


def _parser():
    p = argparse.ArgumentParser(prog="epi-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="subcommand")
    for name in EXPERIMENTS:
        aliases = [name.replace("_", "-")] if "_" in name else []
        s = sub.add_parser(name, aliases=aliases, help=f"run the {name} experiment")
        s.set_defaults(experiment=name)
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--out", help="output prefix (default: config 'output' or the experiment name)")
        s.add_argument("--seed", type=int, help="override the config seed")
    s = sub.add_parser("verify-all", aliases=["verify_all"], help="run the acceptance battery")
    s.set_defaults(experiment=None)
    s.add_argument("--config", help="optional JSON with a 'seed' field")
    s.add_argument("--out", default="verify-all", help="prefix for the CSV table")
    s.add_argument("--seed", type=int, help="seed for randomised probes (default 0)")
    s.add_argument("--strict", action="store_true", help="exit 1 when any criterion fails")
    return p


def render_battery(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BATTERY_COLUMNS)
    for r in results:
        w.writerow([r.id, r.name, "pass" if r.passed else "FAIL", repr(float(r.value)),
                    repr(float(r.threshold)), r.detail])
    return buf.getvalue()


def _battery_seed(args):
    if args.seed is not None:
        return args.seed
    if args.config:
        import json
        try:
            with open(args.config) as fh:
                seed = json.load(fh).get("seed", 0)
        except (OSError, ValueError, AttributeError) as exc:
            raise ConfigError("config", str(exc)) from None
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed", "must be a nonnegative integer")
        return seed
    return 0


def _verify_all(args, out):
    seed = _battery_seed(args)
    check_writable(args.out)
    results = run_battery(seed)
    table = render_battery(results)
    try:
        with open(args.out + ".csv", "w") as fh:
            fh.write(table)
    except OSError as exc:
        raise UnwritablePathError(f"cannot write {args.out}.csv: {exc.strerror}") from None
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.id:>2}  {r.name:<{width}}  {'pass' if r.passed else 'FAIL'}  {r.detail}", file=out)
    n = sum(r.passed for r in results)
    print(f"{n}/{len(results)} criteria passed; table written to {args.out}.csv", file=out)
    return EXIT_OK if (n == len(results) or not args.strict) else 1


def _experiment(args, out):
    cfg = load_config(args.config)
    if cfg.experiment != args.experiment:
        raise ConfigError("experiment", f"config says {cfg.experiment!r} but the subcommand is "
                                        f"{args.experiment!r}")
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed", "must be a nonnegative integer")
        cfg.seed = args.seed
        cfg.raw["seed"] = args.seed
    prefix = args.out or cfg.output or cfg.experiment
    check_writable(prefix)
    report = run(cfg)
    paths = emit_all(report, prefix)
    for k, v in report.summary.items():
        print(f"{k}: {v}", file=out)
    print("wrote " + ", ".join(paths), file=out)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out, err = sys.stdout, sys.stderr
    try:
        worker_count()
        if args.experiment is None:
            return _verify_all(args, out)
        return _experiment(args, out)
    except (ConfigError, D.DistributionError, ChannelError, EpiInputError) as exc:
        print(f"epi-lab: invalid config: {exc}", file=err)
        return EXIT_CONFIG
    except ValueError as exc:
        if "EPI_LAB_THREADS" in str(exc):
            print(f"epi-lab: invalid config: {exc}", file=err)
            return EXIT_CONFIG
        raise
    except (NumericalFailure, QuadratureError) + NUMERICAL as exc:
        print(f"epi-lab: {exc}", file=err)
        return EXIT_NUMERIC
    except UnwritablePathError as exc:
        print(f"epi-lab: {exc}", file=err)
        return EXIT_PATH


if __name__ == "__main__":
    sys.exit(main())
