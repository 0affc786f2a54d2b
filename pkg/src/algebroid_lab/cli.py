"""Command-line interface.

    algebroid-lab check <scenario.json> [--tolerance R] [--samples N]
                        [--seed S] [--report json|text] [--out FILE]
                        [--timings]

Exit codes: 0 all checks pass, 1 any check fails or is inconclusive,
2 scenario/load errors or errored checks.  Flags override the scenario's
*defaults*; a tolerance, sample count or seed written on an individual
check always wins.
"""

from __future__ import annotations

import argparse
import sys

from .errors import AlgebroidLabError
from .kernel import backend_name
from .runner import report_json, report_text, run_checks
from .scenario import load_scenario


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="algebroid-lab",
        description="Verify Lie algebroid / Dirac-structure scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="run the checks in a scenario file")
    check.add_argument("scenario", help="path to a scenario JSON file")
    check.add_argument("--tolerance", type=float, default=None,
                       help="override the default check tolerance")
    check.add_argument("--samples", type=int, default=None,
                       help="override the default sample count")
    check.add_argument("--seed", type=int, default=None,
                       help="override the default sampling seed")
    check.add_argument("--report", choices=("json", "text"), default="json")
    check.add_argument("--out", default=None,
                       help="write the report to a file instead of stdout")
    check.add_argument("--timings", action="store_true",
                       help="include wall-clock times in the JSON report "
                            "(breaks byte-for-byte determinism)")

    sub.add_parser("backend", help="print the active evaluation backend")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "backend":
        print(backend_name())
        return 0

    try:
        sc = load_scenario(args.scenario)
    except (OSError, AlgebroidLabError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    overrides = {}
    if args.tolerance is not None:
        overrides["tolerance"] = args.tolerance
    if args.samples is not None:
        overrides["samples"] = args.samples
    if args.seed is not None:
        overrides["seed"] = args.seed

    reports, code = run_checks(sc, overrides)
    if args.report == "json":
        text = report_json(sc, reports, timings=args.timings)
    else:
        text = report_text(sc, reports)

    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
