# app/services/internal/evaluator.py

"""
Cost-aware small-step semantics over configurations <e, p>.

Evaluation is left-to-right call-by-value. The only rule that touches the
budget is ETick: `tick p e` fires when the budget stays nonnegative, so a
negative amount always fires and releases budget. The run driver adds fuel
and an observational tick ledger; the ledger never influences stepping.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from app.services.internal.syntax import (
    Abs,
    App,
    Con,
    Fix,
    Ident,
    IntLit,
    Let,
    Matd,
    Op,
    Pair,
    PotAbs,
    Proj1,
    Proj2,
    Term,
    Tick,
    Var,
    bool_value,
    fresh_name,
    free_vars,
    is_value,
    substitute,
)

logger = logging.getLogger(__name__)


class Outcome(str, Enum):
    VALUE = "Value"
    STUCK_TICK = "StuckTick"
    STUCK_OTHER = "StuckOther"
    FUEL_EXHAUSTED = "FuelExhausted"


@dataclass(frozen=True)
class Config:
    term: Term
    budget: Fraction

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError(f"budget must be nonnegative, got {self.budget}")


@dataclass(frozen=True)
class Next:
    config: Config
    rule: str
    tick: Fraction | None = None


@dataclass(frozen=True)
class Done:
    value: Term
    residual: Fraction


@dataclass(frozen=True)
class Stuck:
    kind: Outcome
    at: Term
    budget: Fraction


@dataclass(frozen=True)
class TickEvent:
    step: int
    amount: Fraction
    budget_after: Fraction


@dataclass
class RunReport:
    outcome: Outcome
    value: Term | None = None
    residual: Fraction | None = None
    stuck_at: Term | None = None
    budget: Fraction = Fraction(0)
    ticks_consumed: Fraction = Fraction(0)
    ticks_released: Fraction = Fraction(0)
    steps: int = 0
    peak_usage: Fraction = Fraction(0)
    ledger: list[TickEvent] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.outcome is Outcome.VALUE


# --- Primitive Operators ---


def apply_operator(name: str, values) -> Term:
    """Integer operators on literal values; `<` answers with the Bool encoding."""
    values = list(values)
    if len(values) != 2 or not all(isinstance(v, IntLit) for v in values):
        raise ValueError(f"operator {name} expects two integers")
    a, b = values[0].value, values[1].value
    match name:
        case "+":
            return IntLit(a + b)
        case "-":
            return IntLit(a - b)
        case "*":
            return IntLit(a * b)
        case "<":
            return bool_value(a < b)
    raise ValueError(f"unknown operator {name}")


# --- Closed Substitution ---


def instantiate(t: Term, mapping: dict[Ident, Term]) -> Term:
    """
    Simultaneous substitution of closed values into a program.

    Values never carry free variables, so no binder needs renaming; only the
    type annotations go through the general substitution.
    """
    if not mapping:
        return t
    match t:
        case Var(x):
            return mapping.get(x, t)
        case IntLit():
            return t
        case Op(name, args):
            return Op(name, tuple(instantiate(a, mapping) for a in args))
        case PotAbs(x, dom, body):
            return PotAbs(x, _annot(dom, mapping), instantiate(body, _without(mapping, x)))
        case Abs(x, ann, body):
            return Abs(x, _annot(ann, mapping), instantiate(body, _without(mapping, x)))
        case Fix(x, ann, body):
            return Fix(x, _annot(ann, mapping), instantiate(body, _without(mapping, x)))
        case App(fn, arg):
            return App(instantiate(fn, mapping), instantiate(arg, mapping))
        case Pair(l, r):
            return Pair(instantiate(l, mapping), instantiate(r, mapping))
        case Proj1(body):
            return Proj1(instantiate(body, mapping))
        case Proj2(body):
            return Proj2(instantiate(body, mapping))
        case Tick(amount, body):
            return Tick(amount, instantiate(body, mapping))
        case Let(x, bound, body):
            return Let(x, instantiate(bound, mapping), instantiate(body, _without(mapping, x)))
        case Con(ind, index, content, rec_args):
            return Con(
                ind,
                index,
                instantiate(content, mapping),
                tuple(instantiate(a, mapping) for a in rec_args),
            )
        case Matd(scrutinee, branches):
            new_branches = tuple(
                type(br)(br.index, br.binders, instantiate(br.body, _without(mapping, *br.binders)), br.name)
                for br in branches
            )
            return Matd(instantiate(scrutinee, mapping), new_branches)
    raise TypeError(f"instantiate: unsupported node {type(t).__name__}")


def _without(mapping: dict[Ident, Term], *names: Ident) -> dict[Ident, Term]:
    if not any(n in mapping for n in names):
        return mapping
    return {k: v for k, v in mapping.items() if k not in names}


def _annot(ann, mapping: dict[Ident, Term]):
    if ann is None:
        return None
    relevant = free_vars(ann)
    for x, v in mapping.items():
        if x in relevant:
            ann = substitute(ann, x, v)
    return ann


# --- One Step ---


class _StuckError(Exception):
    def __init__(self, kind: Outcome, at: Term):
        super().__init__(kind.value)
        self.kind = kind
        self.at = at


def step(c: Config) -> Next | Done | Stuck:
    """Applies the unique evaluation rule for the configuration."""
    if is_value(c.term):
        return Done(c.term, c.budget)
    try:
        term, budget, rule, tick = _reduce(c.term, c.budget)
    except _StuckError as exc:
        return Stuck(exc.kind, exc.at, c.budget)
    return Next(Config(term, budget), rule, tick)


def _reduce(t: Term, p: Fraction) -> tuple[Term, Fraction, str, Fraction | None]:
    match t:
        case Tick(amount, body):
            if p - amount < 0:
                raise _StuckError(Outcome.STUCK_TICK, t)
            return body, p - amount, "ETick", Fraction(amount)
        case App(fn, arg):
            if not is_value(fn):
                inner, q, rule, tick = _reduce(fn, p)
                return App(inner, arg), q, rule, tick
            if not is_value(arg):
                inner, q, rule, tick = _reduce(arg, p)
                return App(fn, inner), q, rule, tick
            if isinstance(fn, Abs):
                return instantiate(fn.body, {fn.binder: arg}), p, "EApp", None
            if isinstance(fn, PotAbs):
                return instantiate(fn.body, {fn.binder: arg}), p, "EPapp", None
            raise _StuckError(Outcome.STUCK_OTHER, t)
        case Proj1(body) | Proj2(body):
            if not is_value(body):
                inner, q, rule, tick = _reduce(body, p)
                return type(t)(inner), q, rule, tick
            if not isinstance(body, Pair):
                raise _StuckError(Outcome.STUCK_OTHER, t)
            if isinstance(t, Proj1):
                return body.left, p, "EProj1", None
            return body.right, p, "EProj2", None
        case Pair(l, r):
            if not is_value(l):
                inner, q, rule, tick = _reduce(l, p)
                return Pair(inner, r), q, rule, tick
            inner, q, rule, tick = _reduce(r, p)
            return Pair(l, inner), q, rule, tick
        case Op(name, args):
            for i, arg in enumerate(args):
                if not is_value(arg):
                    inner, q, rule, tick = _reduce(arg, p)
                    return Op(name, args[:i] + (inner,) + args[i + 1 :]), q, rule, tick
            try:
                return apply_operator(name, args), p, "EOp", None
            except ValueError:
                raise _StuckError(Outcome.STUCK_OTHER, t) from None
        case Fix(x, _, body):
            return instantiate(body, {x: t}), p, "EFix", None
        case Let(x, bound, body):
            if not is_value(bound):
                inner, q, rule, tick = _reduce(bound, p)
                return Let(x, inner, body), q, rule, tick
            return instantiate(body, {x: bound}), p, "ELet", None
        case Con(ind, index, content, rec_args):
            if not is_value(content):
                inner, q, rule, tick = _reduce(content, p)
                return Con(ind, index, inner, rec_args), q, rule, tick
            for i, arg in enumerate(rec_args):
                if not is_value(arg):
                    inner, q, rule, tick = _reduce(arg, p)
                    return Con(ind, index, content, rec_args[:i] + (inner,) + rec_args[i + 1 :]), q, rule, tick
            raise _StuckError(Outcome.STUCK_OTHER, t)
        case Matd(scrutinee, branches):
            if not is_value(scrutinee):
                inner, q, rule, tick = _reduce(scrutinee, p)
                return Matd(inner, branches), q, rule, tick
            if not isinstance(scrutinee, Con):
                raise _StuckError(Outcome.STUCK_OTHER, t)
            branch = t.branch_for(scrutinee.index)
            parts = (scrutinee.content,) + scrutinee.rec_args
            if branch is None or len(branch.binders) != len(parts):
                raise _StuckError(Outcome.STUCK_OTHER, t)
            return instantiate(branch.body, dict(zip(branch.binders, parts))), p, "ECase", None
    raise _StuckError(Outcome.STUCK_OTHER, t)


# --- Run Driver ---


def run(e: Term, budget, fuel: int | None = None, record_ledger: bool = False) -> RunReport:
    """Iterates `step` up to `fuel` times, keeping the tick ledger."""
    if fuel is None:
        from app.core.config import settings

        fuel = settings.FUEL
    initial = Fraction(budget)
    config = Config(e, initial)
    report = RunReport(outcome=Outcome.FUEL_EXHAUSTED, budget=initial)
    for _ in range(fuel + 1):
        result = step(config)
        if isinstance(result, Done):
            report.outcome = Outcome.VALUE
            report.value = result.value
            report.residual = result.residual
            report.budget = result.residual
            break
        if isinstance(result, Stuck):
            report.outcome = result.kind
            report.stuck_at = result.at
            report.budget = result.budget
            break
        if report.steps == fuel:
            report.stuck_at = config.term
            report.budget = config.budget
            break
        config = result.config
        report.steps += 1
        if result.tick is not None:
            if result.tick > 0:
                report.ticks_consumed += result.tick
            else:
                report.ticks_released -= result.tick
            report.peak_usage = max(report.peak_usage, initial - config.budget)
            if record_ledger:
                report.ledger.append(TickEvent(report.steps, result.tick, config.budget))
    logger.debug(
        f"EVAL: {report.outcome.value} after {report.steps} steps, "
        f"consumed={report.ticks_consumed} released={report.ticks_released} peak={report.peak_usage}"
    )
    return report


def desugar_tickl(p: int, e: Term) -> Term:
    """`tickl p e`: evaluate e first, then charge (or release) p."""
    x = fresh_name("v", free_vars(e))
    return App(Abs(x, None, Tick(p, Var(x))), e)
