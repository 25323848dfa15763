"""Command line front end.

Exit codes: 0 all enabled checks passed, 1 at least one check failed,
2 invalid input (schema, parameters, unreadable scenario), 3 runtime or
evaluation failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import EvaluationError, InvalidInputError, LyacertError
from .scenario import BUILTIN_SYSTEMS, TOOL_VERSION, run_scenario, validate_scenario

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_INVALID = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lyacert",
        description="Simulate dynamical systems and verify Lyapunov decay certificates along trajectories.",
    )
    parser.add_argument("--version", action="version", version=f"lyacert {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario file and write report.json + CSV artifacts")
    run_p.add_argument("scenario", help="path to a scenario TOML file")
    run_p.add_argument("--output-dir", default=None, help="override the scenario's output directory")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.add_argument("--dense-dt", type=float, default=None, help="override the dense output grid spacing")

    val_p = sub.add_parser("validate", help="validate a scenario file without running it")
    val_p.add_argument("scenario", help="path to a scenario TOML file")

    sub.add_parser("list-builtins", help="list built-in system ids")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "list-builtins":
            for bid in sorted(BUILTIN_SYSTEMS):
                print(f"{bid:28s} {BUILTIN_SYSTEMS[bid]}")
            return EXIT_OK
        if args.command == "validate":
            diags = validate_scenario(args.scenario)
            if diags:
                for d in diags:
                    print(f"invalid: {d}", file=sys.stderr)
                return EXIT_INVALID
            print(f"{args.scenario}: valid")
            return EXIT_OK
        report = run_scenario(
            args.scenario, output_dir=args.output_dir, seed=args.seed, dense_dt=args.dense_dt
        )
        print(f"report: {report.report_path}")
        for entry in report.data["trajectories"]:
            flags = entry["pass_flags"]
            failed = sorted(k for k, v in flags.items() if not v)
            status = "pass" if entry["passed"] else "FAIL (" + ", ".join(failed) + ")"
            print(f"trajectory {entry['index']}: {status}")
        cls = report.data.get("classification")
        if cls is not None:
            verdict = cls["report"]["verdict"]
            expected = cls["expected_verdict"]
            suffix = f" (expected {expected})" if expected else ""
            print(f"classification: {verdict}{suffix} -> {'pass' if cls['passed'] else 'FAIL'}")
        print(f"overall_pass: {str(report.overall_pass).lower()}")
        return EXIT_OK if report.overall_pass else EXIT_CHECK_FAILURE
    except InvalidInputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except EvaluationError as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except LyacertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
