# app/services/internal/commands.py

"""
The five checker commands (check, infer, eval, embed, corpus), shared by the
command line and the HTTP routers. Each command starts its own naming session
so identical inputs give byte-identical reports.
"""

import json
import logging
from fractions import Fraction
from pathlib import Path

from pydantic import ValidationError

from app.core.config import Settings, settings as default_settings
from app.core.errors import AmornaError, ParseError
from app.schemas.report import Report, ReportItem, RunSummary, TickRow
from app.services.internal.aara import AaraFixture, CostModel, embed_fixture, fixtures
from app.services.internal.derivation import elaborate, validate_derivation
from app.services.internal.evaluator import Outcome, RunReport, run
from app.services.internal.parser import Declaration, SourceProgram, parse_program, parse_term
from app.services.internal.render import show_judgement, show_term
from app.services.internal.syntax import EMPTY, Term, new_session
from app.services.internal.typer import check, infer_trace

logger = logging.getLogger(__name__)

CORPUS_DIR = Path(__file__).resolve().parents[3] / "corpus"

_RUN_STATUS = {
    Outcome.VALUE: "success",
    Outcome.STUCK_TICK: "stuck",
    Outcome.STUCK_OTHER: "stuck",
    Outcome.FUEL_EXHAUSTED: "fuel",
}


def _status(error: AmornaError) -> str:
    return {2: "parse-error", 3: "type-error", 4: "constraint-unknown"}.get(error.code, "error")


def _program_or_term(text: str) -> tuple[SourceProgram | None, Term | None]:
    """A whole program, or failing that a single term; the program's error wins."""
    try:
        return parse_program(text), None
    except ParseError as program_error:
        try:
            return None, parse_term(text)
        except ParseError:
            raise program_error from None


def summarize_run(r: RunReport) -> RunSummary:
    return RunSummary(
        outcome=r.outcome.value,
        value=show_term(r.value) if r.value is not None else None,
        residual=str(r.residual) if r.residual is not None else None,
        stuck_at=show_term(r.stuck_at) if r.stuck_at is not None else None,
        budget=str(r.budget),
        ticks_consumed=str(r.ticks_consumed),
        ticks_released=str(r.ticks_released),
        peak_usage=str(r.peak_usage),
        steps=r.steps,
        ledger=[TickRow(step=t.step, amount=str(t.amount), budget_after=str(t.budget_after)) for t in r.ledger],
    )


# --- check ---


def check_declaration(program: SourceProgram, decl: Declaration, cfg: Settings) -> ReportItem:
    params, term, wanted = program.wanted(decl)
    item = ReportItem(name=str(decl.name), status="success", wanted=show_judgement(wanted))
    try:
        result = check(EMPTY, params, term, wanted, cfg)
    except AmornaError as e:
        item.status = _status(e)
        item.diagnostics.append(e.detail)
        return item
    item.diagnostics.extend(result.diagnostics)
    if result.judgement is not None:
        item.judgement = show_judgement(result.judgement)
    if not result.accepted:
        item.status = "constraint-unknown"
        return item
    try:
        item.derivation_nodes = validate_derivation(elaborate(result.trace), cfg)
        item.rules = sorted(set(result.trace.derivation.rules()))
    except AmornaError as e:
        item.status = _status(e)
        item.diagnostics.append(e.detail)
    return item


def check_source(text: str, cfg: Settings | None = None, source: str | None = None) -> Report:
    cfg = cfg or default_settings
    new_session()
    report = Report(command="check", source=source)
    try:
        program = parse_program(text)
    except ParseError as e:
        report.status = "parse-error"
        report.diagnostics.append(e.detail)
        return report
    for decl in program.declarations:
        item = report.add(check_declaration(program, decl, cfg))
        logger.info(f"TYPER: {item.name} -> {item.status}")
    return report


# --- infer ---


def infer_source(text: str, cfg: Settings | None = None, source: str | None = None) -> Report:
    cfg = cfg or default_settings
    new_session()
    report = Report(command="infer", source=source)
    try:
        program, term = _program_or_term(text)
    except ParseError as e:
        report.status = "parse-error"
        report.diagnostics.append(e.detail)
        return report
    targets: list[tuple[str, object, Term, object]] = []
    if program is not None:
        for decl in program.declarations:
            targets.append((str(decl.name), decl.params, program.closed(decl.term), decl.type))
        if program.entry is not None:
            targets.append(("main", EMPTY, program.entry, None))
    else:
        targets.append(("term", EMPTY, term, None))
    for name, gamma, e, expected in targets:
        item = ReportItem(name=name, status="success")
        try:
            trace = infer_trace(EMPTY, gamma, e, expected, cfg)
            item.judgement = show_judgement(trace.judgement)
            item.rules = sorted(set(trace.derivation.rules()))
        except AmornaError as exc:
            item.status = _status(exc)
            item.diagnostics.append(exc.detail)
        report.add(item)
    return report


# --- eval ---


def parse_budget(text: str | int | Fraction) -> Fraction:
    try:
        budget = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"budget must be a rational such as 3 or 1/2, got {text!r}") from None
    if budget < 0:
        raise ParseError(f"budget must be nonnegative, got {text}")
    return budget


def eval_source(
    text: str,
    budget: str | int | Fraction = 0,
    fuel: int | None = None,
    ledger: bool = False,
    cfg: Settings | None = None,
    source: str | None = None,
) -> Report:
    cfg = cfg or default_settings
    new_session()
    report = Report(command="eval", source=source)
    try:
        amount = parse_budget(budget)
        program, term = _program_or_term(text)
        if program is not None:
            if program.entry is None:
                raise ParseError("nothing to evaluate: the program has no `main` item")
            term = program.entry
    except ParseError as e:
        report.status = "parse-error"
        report.diagnostics.append(e.detail)
        return report
    r = run(term, amount, fuel=fuel or cfg.FUEL, record_ledger=ledger)
    report.add(ReportItem(name="main", status=_RUN_STATUS[r.outcome], run=summarize_run(r)))
    return report


# --- embed ---


def load_fixtures(text: str) -> list[AaraFixture]:
    try:
        data = json.loads(text)
        items = data if isinstance(data, list) else [data]
        return [AaraFixture.model_validate(item) for item in items]
    except (json.JSONDecodeError, ValidationError) as e:
        raise ParseError(f"not an AARA fixture file: {e}") from e


def embed_item(fixture: AaraFixture, model: str, cfg: Settings) -> ReportItem:
    item = ReportItem(name=f"{fixture.name} [{model}]", status="success")
    try:
        result = embed_fixture(fixture, CostModel.named(model), cfg)
    except AmornaError as e:
        item.status = _status(e)
        item.diagnostics.append(e.detail)
        return item
    item.wanted = show_judgement(result.wanted)
    if result.inferred is not None:
        item.judgement = show_judgement(result.inferred)
    item.diagnostics.extend(result.diagnostics)
    if not result.accepted:
        item.status = "constraint-unknown"
    return item


def embed_source(
    text: str, models: list[str] | None = None, cfg: Settings | None = None, source: str | None = None
) -> Report:
    cfg = cfg or default_settings
    new_session()
    report = Report(command="embed", source=source)
    try:
        loaded = load_fixtures(text)
    except ParseError as e:
        report.status = "parse-error"
        report.diagnostics.append(e.detail)
        return report
    for fixture in loaded:
        for model in models or [cfg.COST_MODEL]:
            report.add(embed_item(fixture, model, cfg))
    return report


# --- corpus ---


def _probe_item(name: str, probe, cfg: Settings) -> ReportItem:
    r = run(probe.term, probe.budget, fuel=cfg.FUEL)
    item = ReportItem(name=name, status="success", run=summarize_run(r))
    if r.outcome is not probe.expect:
        item.status = "error" if r.outcome is Outcome.VALUE else _RUN_STATUS[r.outcome]
        item.diagnostics.append(f"expected {probe.expect.value}, got {r.outcome.value}")
    elif probe.residual is not None and r.residual != probe.residual:
        item.status = "error"
        item.diagnostics.append(f"expected residual {probe.residual}, got {r.residual}")
    return item


def corpus(directory: str | Path | None = None, cfg: Settings | None = None) -> Report:
    """Checks every shipped declaration, runs every probe and embeds every AARA fixture."""
    cfg = cfg or default_settings
    root = Path(directory) if directory is not None else CORPUS_DIR
    report = Report(command="corpus", source=str(root))
    for path in sorted(root.glob("*.amor")):
        new_session()
        try:
            program = parse_program(path.read_text())
        except ParseError as e:
            report.add(ReportItem(name=path.name, status="parse-error", diagnostics=[e.detail]))
            continue
        for decl in program.declarations:
            item = check_declaration(program, decl, cfg)
            item.name = f"{path.stem}:{item.name}"
            report.add(item)
        for n, probe in enumerate(program.probes, start=1):
            report.add(_probe_item(f"{path.stem}:probe{n}", probe, cfg))
    new_session()
    for fixture in fixtures(root / "aara"):
        for model in fixture.models:
            item = embed_item(fixture, model, cfg)
            item.name = f"aara:{item.name}"
            report.add(item)
    logger.info(f"TYPER: corpus {report.passed} passed, {report.failed} failed")
    return report


def run_command(command: str, text: str | None = None, cfg: Settings | None = None, **options) -> Report:
    """Dispatches one command by name; `options` are the command's own flags."""
    match command:
        case "check":
            return check_source(text, cfg, options.get("source"))
        case "infer":
            return infer_source(text, cfg, options.get("source"))
        case "eval":
            return eval_source(
                text, options.get("budget", 0), options.get("fuel"), options.get("ledger", False), cfg,
                options.get("source"),
            )
        case "embed":
            return embed_source(text, options.get("models"), cfg, options.get("source"))
        case "corpus":
            return corpus(options.get("directory"), cfg)
    raise ValueError(f"unknown command {command}")
