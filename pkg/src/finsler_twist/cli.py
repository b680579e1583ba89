"""Command line entry point: ``finsler-twist run`` and ``finsler-twist verify``.

Exit status: 0 on pass, 1 when an acceptance check fails, 2 for usage or
configuration errors and 3 for numerical failures.
"""

import argparse
import json
import logging
import sys

from .config import ExperimentConfig
from .errors import ConfigError, DomainError, NumericalError, SpecError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


def _parser():
    from .experiments import EXPERIMENTS

    p = argparse.ArgumentParser(
        prog="finsler-twist",
        description="Twist maps realized as Finsler geodesic return maps.",
    )
    p.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment pipeline")
    run.add_argument("experiment", choices=EXPERIMENTS)
    run.add_argument("--config", help="JSON config file (defaults are used when omitted)")
    run.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override a config field by dotted path, e.g. --set grid.nx=64 (repeatable)",
    )
    run.add_argument("--out", help="output directory (overrides the config value)")

    ver = sub.add_parser("verify", help="run the acceptance suite")
    ver.add_argument(
        "--only", type=int, nargs="+", metavar="N", help="run only these criterion numbers"
    )
    ver.add_argument("--json", dest="json_path", help="also write the results to this file")
    return p


def _run(args):
    from .experiments import run_experiment

    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    cfg = cfg.with_overrides(args.overrides)
    report = run_experiment(args.experiment, cfg, args.out)
    print(json.dumps(report["metrics"], indent=2, sort_keys=True))
    print(f"{args.experiment}: {'PASS' if report['passed'] else 'FAIL'}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _verify(args):
    from .acceptance import run_all

    results = run_all(set(args.only) if args.only else None)
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    if args.json_path:
        rows = [
            {"number": r.number, "name": r.name, "passed": r.passed, "summary": r.summary,
             "seconds": r.seconds}
            for r in results
        ]
        with open(args.json_path, "w") as fh:
            json.dump(rows, fh, indent=2)
    return EXIT_OK if n_pass == len(results) else EXIT_FAIL


def main(argv=None):
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return _verify(args) if args.command == "verify" else _run(args)
    except (NumericalError, DomainError) as exc:
        # the message carries the operation, point and residual
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, SpecError, ValueError) as exc:
        # remaining ValueErrors are parameter checks of the library calls
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
