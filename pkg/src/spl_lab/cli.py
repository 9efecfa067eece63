"""Command-line entry point: ``spl-lab run|validate|list-fixtures``.

Exit codes: 0 pass (or nothing to check), 1 an expectation failed,
2 the scenario is invalid, 3 the experiment raised at run time.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ValidationError
from .library import list_fixtures
from .scenario import FORMATS, emit_metrics, load_scenario, render, run_experiment

EXIT_PASS, EXIT_FAIL, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spl-lab", description="Run looped-dynamics experiments from scenario files.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario and emit its metrics")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--replicates", type=int, help="override the replicate count")
    run.add_argument("--out", help="write metrics here instead of stdout")
    run.add_argument("--format", choices=FORMATS, help="metrics format (default: scenario output format, else json)")
    val = sub.add_parser("validate", help="check a scenario without running it")
    val.add_argument("scenario")
    sub.add_parser("list-fixtures", help="list shipped fixture files")
    return p


def _err(msg: str) -> None:
    print(f"spl-lab: {msg}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-fixtures":
        for name in list_fixtures():
            print(name)
        return EXIT_PASS
    try:
        scenario = load_scenario(args.scenario)
        if args.command == "validate":
            print(f"ok {scenario.id} ({scenario.kind})")
            return EXIT_PASS
        scenario = scenario.with_overrides(args.seed, args.replicates)
    except ValidationError as exc:
        _err(f"invalid scenario: {exc}")
        return EXIT_INVALID
    fmt = args.format or scenario.output.get("format", "json")
    out = args.out or scenario.output.get("path")
    try:
        report = run_experiment(scenario)
        if out:
            emit_metrics(report, fmt, out)
        else:
            sys.stdout.write(render(report, fmt))
    except ValidationError as exc:
        _err(f"invalid scenario: {exc}")
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to one exit code
        _err(f"run failed: {exc}")
        return EXIT_RUNTIME
    for c in report.checks:
        if not c["passed"]:
            _err(f"expectation failed: {c['metric']} {c['op']} {c['value']} (observed {c['observed']})")
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
