# app/cli.py

"""
Command-line entry point: `amorna {check,infer,eval,embed,corpus}`.

Exit codes: 0 success, 2 parse error, 3 type error, 4 constraint not proven,
5 stuck, 6 fuel exhausted, 1 anything else.
"""

import argparse
import logging
import sys
from pathlib import Path

from app.core.config import configure_logging, settings
from app.schemas.report import Report
from app.services.internal import commands, report_service

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amorna", description="Checker and evaluator for amortized programs")
    parser.add_argument("--json", action="store_true", help="Print the report as JSON")
    parser.add_argument("--assume-constraints", action="store_true", default=None,
                        help="Accept constraints the solver cannot prove, with a warning")
    parser.add_argument("--solver", choices=["builtin", "external"], help="Entailment backend")
    parser.add_argument("--max-enum", type=int, help="Enumeration cap for the bounded oracle")
    parser.add_argument("--log-level", help="Logging level (default: LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, doc in (("check", "check declarations against their annotations"),
                      ("infer", "print minimal judgements")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("file", help="Source file, or - for standard input")

    p = sub.add_parser("eval", help="run a program's main item under a budget")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("file", nargs="?", help="Source file, or - for standard input")
    source.add_argument("-e", "--expr", help="Evaluate this term instead of a file")
    p.add_argument("--budget", default="0", help="Initial budget (integer or p/q)")
    p.add_argument("--fuel", type=int, help="Step limit (default: FUEL)")
    p.add_argument("--ledger", action="store_true", help="Record every tick")

    p = sub.add_parser("embed", help="re-check AARA fixtures through the typer")
    p.add_argument("file", help="Fixture JSON file, or - for standard input")
    p.add_argument("--cost-model", choices=["zero", "unit"], action="append",
                   help="Cost model (repeatable; default: COST_MODEL)")

    p = sub.add_parser("corpus", help="run the shipped golden suite")
    p.add_argument("directory", nargs="?", help="Corpus directory (default: the shipped corpus)")
    return parser


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def execute(args: argparse.Namespace) -> Report:
    cfg = settings.with_overrides(
        ASSUME_CONSTRAINTS=args.assume_constraints,
        SOLVER=args.solver,
        MAX_ENUM=args.max_enum,
    )
    match args.command:
        case "check" | "infer":
            return commands.run_command(args.command, _read(args.file), cfg, source=args.file)
        case "eval":
            text, source = (args.expr, "<expr>") if args.expr is not None else (_read(args.file), args.file)
            return commands.run_command(
                "eval", text, cfg, budget=args.budget, fuel=args.fuel, ledger=args.ledger, source=source
            )
        case "embed":
            return commands.run_command("embed", _read(args.file), cfg, models=args.cost_model, source=args.file)
        case "corpus":
            return commands.run_command("corpus", None, cfg, directory=args.directory)
    raise ValueError(f"unknown command {args.command}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        report = execute(args)
    except OSError as e:
        print(f"amorna: {e}", file=sys.stderr)
        return 1
    sys.stdout.write(report_service.render(report, as_json=args.json))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
