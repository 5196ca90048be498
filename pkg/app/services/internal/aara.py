# app/services/internal/aara.py

"""
Bridge from classic linear AARA into the calculus.

Covers AARA types and terms, the potential Phi_x(A) a type attaches to a
variable, the translations of types, contexts and terms (with per-construct
cost constants), the sharing join, and `embed_check`, which re-checks a given
AARA judgement through the typer.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, fields, is_dataclass, replace
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

from lark import Lark, Transformer, v_args
from lark.exceptions import LarkError
from pydantic import BaseModel

from app.core.config import Settings, settings as default_settings
from app.core.errors import ParseError
from app.services.internal.judgement import Judgement, types_equal
from app.services.internal.potential import length
from app.services.internal.syntax import (
    EMPTY,
    UNIT_T,
    UNIT_V,
    ZERO,
    Abs,
    Add,
    App,
    ArrowT,
    Branch,
    Con,
    Ctx,
    Fix,
    Ident,
    IndT,
    IntLit,
    IntT,
    Let,
    Matd,
    Pair,
    PBranch,
    PotExpr,
    PrimRec,
    ProdT,
    Proj1,
    Proj2,
    Recur,
    Scale,
    Term,
    Tick,
    TypeExpr,
    Var,
    all_idents,
    const,
    fresh_name,
    list_type,
    sum_type,
)

logger = logging.getLogger(__name__)


# --- AARA Types ---


@dataclass(frozen=True)
class AUnit:
    pass


@dataclass(frozen=True)
class AInt:
    pass


@dataclass(frozen=True)
class AList:
    elem: AaraType
    p: Fraction


@dataclass(frozen=True)
class ASum:
    left: AaraType
    p_left: Fraction
    right: AaraType
    p_right: Fraction


@dataclass(frozen=True)
class AProd:
    left: AaraType
    right: AaraType


@dataclass(frozen=True)
class AFun:
    dom: AaraType
    p: Fraction
    codom: AaraType
    q: Fraction


type AaraType = AUnit | AInt | AList | ASum | AProd | AFun


@dataclass(frozen=True)
class NoJoin:
    reason: str


# --- AARA Terms ---


@dataclass(frozen=True)
class AVar:
    name: Ident


@dataclass(frozen=True)
class AUnitV:
    pass


@dataclass(frozen=True)
class ALet:
    name: Ident
    bound: AaraTerm
    body: AaraTerm


@dataclass(frozen=True)
class APair:
    elem: AaraType
    left: AaraTerm
    right: AaraTerm


@dataclass(frozen=True)
class ALetp:
    left: Ident
    right: Ident
    result: AaraType
    bound: AaraTerm
    body: AaraTerm


@dataclass(frozen=True)
class ALeft:
    sum: ASum
    body: AaraTerm


@dataclass(frozen=True)
class ARight:
    sum: ASum
    body: AaraTerm


@dataclass(frozen=True)
class ACaseSum:
    scrutinee: Ident
    left_name: Ident
    left_body: AaraTerm
    right_name: Ident
    right_body: AaraTerm


@dataclass(frozen=True)
class ANil:
    elem: AaraType


@dataclass(frozen=True)
class ACons:
    elem: AaraType
    head: Ident
    tail: Ident


@dataclass(frozen=True)
class ACaseList:
    scrutinee: Ident
    nil_body: AaraTerm
    head: Ident
    tail: Ident
    cons_body: AaraTerm


@dataclass(frozen=True)
class AApp:
    fn: Ident
    arg: Ident


@dataclass(frozen=True)
class AFunDef:
    name: Ident
    param: Ident
    annotation: AFun
    body: AaraTerm


@dataclass(frozen=True)
class ATick:
    amount: Fraction


@dataclass(frozen=True)
class AShare:
    name: Ident
    first: Ident
    second: Ident
    body: AaraTerm


type AaraTerm = (
    AVar | AUnitV | ALet | APair | ALetp | ALeft | ARight | ACaseSum | ANil | ACons
    | ACaseList | AApp | AFunDef | ATick | AShare
)


class CostModel(BaseModel):
    """Cost constants charged by the term translation, one per AARA construct."""

    c_var: int = 0
    c_Unit: int = 0
    c_Let1: int = 0
    c_Let2: int = 0
    c_Let3: int = 0
    c_left: int = 0
    c_right: int = 0
    c_CaseLeft: int = 0
    c_CaseRight: int = 0
    c_nil: int = 0
    c_cons: int = 0
    c_CaseNil: int = 0
    c_CaseCons: int = 0
    c_app: int = 0
    c_fun: int = 0

    @classmethod
    def zero(cls) -> CostModel:
        return cls()

    @classmethod
    def unit(cls) -> CostModel:
        return cls(**{name: 1 for name in cls.model_fields})

    @classmethod
    def named(cls, name: str) -> CostModel:
        if name == "unit":
            return cls.unit()
        if name == "zero":
            return cls.zero()
        raise ValueError(f"unknown cost model {name!r}")


# --- Potentials and Types ---


def _pot(q: Fraction) -> PotExpr:
    return const(q)


def phi_of_type(x: Ident | Term, a: AaraType) -> PotExpr:
    """The potential a value of AARA type a carries, as a function of the path x."""
    path = Var(x) if isinstance(x, Ident) else x
    avoid = all_idents(path)
    match a:
        case AUnit() | AInt() | AFun():
            return ZERO
        case AProd(left, right):
            return _sum(phi_of_type(Proj1(path), left), phi_of_type(Proj2(path), right))
        case AList(elem, p):
            head = fresh_name("x", avoid)
            tail = fresh_name("x", avoid | {head})
            inner = phi_of_type(head, elem)
            if inner == ZERO:
                # p per element: a multiple of the shipped length measure
                return ZERO if p == 0 else (length(path) if p == 1 else Scale(Fraction(p), length(path)))
            me = fresh_name("phi", avoid | {head, tail})
            unit = fresh_name("u", avoid | {head, tail, me})
            cons_body = _sum(_sum(inner, _pot(p)), Recur(me, Var(tail)))
            ind = list_type(translate_type(elem))
            branches = (PBranch(0, (unit,), ZERO, "nil"), PBranch(1, (head, tail), cons_body, "cons"))
            return PrimRec(me, path, branches, None, ind.signature())
        case ASum(left, p_left, right, p_right):
            me = fresh_name("phi", avoid)
            lx = fresh_name("x", avoid | {me})
            rx = fresh_name("x", avoid | {me, lx})
            branches = (
                PBranch(0, (lx,), _sum(phi_of_type(lx, left), _pot(p_left)), "left"),
                PBranch(1, (rx,), _sum(phi_of_type(rx, right), _pot(p_right)), "right"),
            )
            ind = sum_type(translate_type(left), translate_type(right))
            if all(b.body == ZERO for b in branches):
                return ZERO
            return PrimRec(me, path, branches, None, ind.signature())
    raise TypeError(f"phi_of_type: unsupported type {type(a).__name__}")


def _sum(a: PotExpr, b: PotExpr) -> PotExpr:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Add(a, b)


def translate_type(a: AaraType) -> TypeExpr:
    match a:
        case AUnit():
            return UNIT_T
        case AInt():
            return IntT()
        case AList(elem, _):
            return list_type(translate_type(elem))
        case ASum(left, _, right, _):
            return sum_type(translate_type(left), translate_type(right))
        case AProd(left, right):
            return ProdT(translate_type(left), translate_type(right))
        case AFun(dom, p, codom, q):
            x, y = Ident("x"), Ident("y")
            return ArrowT(
                x,
                _sum(_pot(p), phi_of_type(x, dom)),
                translate_type(dom),
                y,
                _sum(_pot(q), phi_of_type(y, codom)),
                translate_type(codom),
            )
    raise TypeError(f"translate_type: unsupported type {type(a).__name__}")


def translate_ctx(gamma: list[tuple[Ident, AaraType]]) -> tuple[Ctx, PotExpr]:
    """The potential-free context and the potential the AARA context carries."""
    ctx, total = EMPTY, ZERO
    for name, a in gamma:
        ctx = ctx.extend(name, translate_type(a))
        total = _sum(total, phi_of_type(name, a))
    return ctx, total


def share_join(a1: AaraType, a2: AaraType) -> AaraType | NoJoin:
    """Annotation-wise sum of two AARA types of the same shape."""
    match a1, a2:
        case AUnit(), AUnit():
            return a1
        case AInt(), AInt():
            return a1
        case AList(e1, p1), AList(e2, p2):
            elem = share_join(e1, e2)
            return elem if isinstance(elem, NoJoin) else AList(elem, p1 + p2)
        case ASum(l1, pl1, r1, pr1), ASum(l2, pl2, r2, pr2):
            left, right = share_join(l1, l2), share_join(r1, r2)
            for part in (left, right):
                if isinstance(part, NoJoin):
                    return part
            return ASum(left, pl1 + pl2, right, pr1 + pr2)
        case AProd(l1, r1), AProd(l2, r2):
            left, right = share_join(l1, l2), share_join(r1, r2)
            for part in (left, right):
                if isinstance(part, NoJoin):
                    return part
            return AProd(left, right)
        case AFun(), AFun():
            # functions carry no potential; sharing one needs identical annotations
            if types_equal(translate_type(a1), translate_type(a2)):
                return a1
            return NoJoin("function types with different annotations")
    return NoJoin(f"{type(a1).__name__} and {type(a2).__name__} have different shapes")


# --- Term Translation ---


def _rename(e, old: Ident, new: Ident):
    """Renames free occurrences of old in an AARA term."""
    if isinstance(e, Ident):
        return new if e == old else e
    if not is_dataclass(e):
        return e
    bound = _binders(e)
    if old in bound:
        # the binder shadows old in the body, but not in the bound expression
        if isinstance(e, (ALet, ALetp)):
            return replace(e, bound=_rename(e.bound, old, new))
        return e
    changes = {f.name: _rename(getattr(e, f.name), old, new) for f in fields(e)}
    return replace(e, **changes)


def _binders(e) -> set[Ident]:
    match e:
        case ALet(name, _, _):
            return {name}
        case ALetp(left, right, _, _, _):
            return {left, right}
        case ACaseList(_, _, head, tail, _):
            return {head, tail}
        case ACaseSum(_, ln, _, rn, _):
            return {ln, rn}
        case AFunDef(name, param, _, _):
            return {name, param}
        case AShare(_, first, second, _):
            return {first, second}
    return set()


def _dummy(t: TypeExpr) -> Term:
    """A closed value of t for branches that are never taken."""
    match t:
        case IntT():
            return IntLit(0)
        case ProdT(left, right):
            return Pair(_dummy(left), _dummy(right))
        case IndT(ctors):
            for index, ctor in enumerate(ctors):
                if ctor.copies == 0:
                    return Con(t, index, _dummy(ctor.content), ())
    raise ValueError("no canonical value for a function type")


class _Translation:
    def __init__(self, cm: CostModel, avoid):
        self.cm = cm
        self.avoid = set(avoid)

    def fresh(self, base: str) -> Ident:
        name = fresh_name(base, self.avoid)
        self.avoid.add(name)
        return name

    def tick(self, cost: int, e: Term) -> Term:
        return Tick(cost, e)

    def term(self, e: AaraTerm) -> Term:
        cm = self.cm
        match e:
            case AVar(x):
                return self.tick(cm.c_var, Var(x))
            case AUnitV():
                return self.tick(cm.c_Unit, UNIT_V)
            case ALet(x, bound, body):
                inner = Let(x, self.tick(cm.c_Let1, self.term(bound)), self.tick(cm.c_Let2, self.term(body)))
                return self.tick(cm.c_Let3, inner)
            case APair(elem, left, right):
                x1, x2, x3, n = (self.fresh("p") for _ in range(4))
                tail = ALet(n, ANil(elem), ALet(x3, ACons(elem, x2, n), ACons(elem, x1, x3)))
                return self.term(ALet(x1, left, ALet(x2, right, tail)))
            case ALetp(x1, x2, result, bound, body):
                x, rest, tail = self.fresh("p"), self.fresh("p"), self.fresh("p")
                dummy = _Opaque(_dummy(translate_type(result)))
                sugar = ALet(
                    x,
                    bound,
                    ACaseList(x, dummy, x1, rest, ACaseList(rest, dummy, x2, tail, body)),
                )
                return self.term(sugar)
            case ALeft(sum_t, body):
                ind = translate_type(sum_t)
                return self.tick(cm.c_left, Con(ind, 0, self.term(body), ()))
            case ARight(sum_t, body):
                ind = translate_type(sum_t)
                return self.tick(cm.c_right, Con(ind, 1, self.term(body), ()))
            case ACaseSum(x, ln, lbody, rn, rbody):
                return Matd(
                    Var(x),
                    (
                        Branch(0, (ln,), self.tick(cm.c_CaseLeft, self.term(lbody)), "left"),
                        Branch(1, (rn,), self.tick(cm.c_CaseRight, self.term(rbody)), "right"),
                    ),
                )
            case ANil(elem):
                return self.tick(cm.c_nil, Con(list_type(translate_type(elem)), 0, UNIT_V, ()))
            case ACons(elem, head, tail):
                ind = list_type(translate_type(elem))
                return self.tick(cm.c_cons, Con(ind, 1, Var(head), (Var(tail),)))
            case ACaseList(x, nil_body, head, tail, cons_body):
                u = self.fresh("u")
                return Matd(
                    Var(x),
                    (
                        Branch(0, (u,), self.tick(cm.c_CaseNil, self.term(nil_body)), "nil"),
                        Branch(1, (head, tail), self.tick(cm.c_CaseCons, self.term(cons_body)), "cons"),
                    ),
                )
            case AApp(f, x):
                return self.tick(cm.c_app, App(Var(f), Var(x)))
            case AFunDef(f, x, annotation, body):
                fn = Fix(f, translate_type(annotation), Abs(x, None, self.term(body)))
                return self.tick(cm.c_fun, fn)
            case ATick(q):
                return Tick(q, UNIT_V)
            case AShare(x, first, second, body):
                return self.term(_rename(_rename(body, first, x), second, x))
            case _Opaque(term):
                return term
        raise TypeError(f"translate_term: unsupported term {type(e).__name__}")


@dataclass(frozen=True)
class _Opaque:
    """An already translated term spliced into a desugared AARA term."""

    term: Term


def translate_term(e: AaraTerm, cm: CostModel | None = None) -> Term:
    """h(e): every construct wrapped in the tick its cost constant prescribes."""
    cm = cm or CostModel.zero()
    return _Translation(cm, _names(e)).term(e)


def _names(e) -> set[Ident]:
    found: set[Ident] = set()

    def walk(node):
        if isinstance(node, Ident):
            found.add(node)
        elif isinstance(node, tuple):
            for item in node:
                walk(item)
        elif is_dataclass(node):
            for f in fields(node):
                walk(getattr(node, f.name))

    walk(e)
    return found


# --- Fixture Syntax ---


@lru_cache(maxsize=1)
def _parser() -> Lark:
    grammar = (Path(__file__).parent / "grammars" / "aara.lark").read_text()
    return Lark(grammar, start=["start", "atype"], propagate_positions=True)


@v_args(inline=True)
class _ToAara(Transformer):
    def RAT(self, token):
        return Fraction(str(token))

    def NAME(self, token):
        return Ident(str(token))

    def unit_type(self):
        return AUnit()

    def int_type(self):
        return AInt()

    def list_type(self, p, elem):
        return AList(elem, p)

    def sum_type(self, left, p_left, right, p_right):
        return ASum(left, p_left, right, p_right)

    def prod_type(self, left, right):
        return AProd(left, right)

    def fun_type(self, dom, p, q, codom):
        return AFun(dom, p, codom, q)

    def var(self, name):
        return AVar(name)

    def unit(self):
        return AUnitV()

    def tick(self, amount):
        return ATick(amount)

    def app(self, fn, arg):
        return AApp(fn, arg)

    def nil(self, elem):
        return ANil(elem)

    def cons(self, elem, head, tail):
        return ACons(elem, head, tail)

    def left(self, sum_t, body):
        return ALeft(sum_t, body)

    def right(self, sum_t, body):
        return ARight(sum_t, body)

    def pair(self, elem, left, right):
        return APair(elem, left, right)

    def let(self, name, bound, body):
        return ALet(name, bound, body)

    def letp(self, x1, x2, result, bound, body):
        return ALetp(x1, x2, result, bound, body)

    def share(self, name, first, second, body):
        return AShare(name, first, second, body)

    def fun(self, name, param, annotation, body):
        if not isinstance(annotation, AFun):
            raise ParseError(f"fun {name} needs a function type")
        return AFunDef(name, param, annotation, body)

    def case_list(self, x, nil_body, head, tail, cons_body):
        return ACaseList(x, nil_body, head, tail, cons_body)

    def case_sum(self, x, ln, lbody, rn, rbody):
        return ACaseSum(x, ln, lbody, rn, rbody)


def _parse(text: str, start: str):
    try:
        tree = _parser().parse(text, start=start)
    except LarkError as e:
        line, column = getattr(e, "line", None), getattr(e, "column", None)
        raise ParseError(f"AARA {start}: {e}".splitlines()[0], line, column) from e
    return _ToAara().transform(tree)


def parse_aara_type(text: str) -> AaraType:
    return _parse(text, "atype")


def parse_aara_term(text: str) -> AaraTerm:
    return _parse(text, "start")


# --- Fixtures ---


class AaraFixture(BaseModel):
    """A trusted AARA judgement  context |-^p_q term : type, all in fixture syntax."""

    name: str
    context: list[tuple[str, str]] = []
    p: str = "0"
    q: str = "0"
    term: str
    type: str
    note: str = ""
    models: list[str] = ["zero", "unit"]

    def judgement(self):
        gamma = [(Ident(x), parse_aara_type(t)) for x, t in self.context]
        return gamma, Fraction(self.p), parse_aara_term(self.term), Fraction(self.q), parse_aara_type(self.type)


def fixtures(directory: str | Path | None = None) -> list[AaraFixture]:
    """Every `*.json` fixture under directory (default: the shipped corpus), sorted by name."""
    root = Path(directory) if directory is not None else Path(__file__).resolve().parents[3] / "corpus" / "aara"
    loaded = []
    for path in sorted(root.glob("*.json")):
        data = json.loads(path.read_text())
        items = data if isinstance(data, list) else [data]
        loaded.extend(AaraFixture.model_validate(item) for item in items)
    return loaded


# --- Embedding Check ---


@dataclass
class EmbedResult:
    accepted: bool
    term: Term
    wanted: Judgement
    inferred: Judgement | None
    diagnostics: list[str]


def embed_check(
    gamma: list[tuple[Ident, AaraType]],
    p: Fraction,
    e: AaraTerm,
    q: Fraction,
    a: AaraType,
    cm: CostModel | None = None,
    cfg: Settings | None = None,
) -> EmbedResult:
    """
    Checks . | Pure(gamma) | Phi(gamma) + p |- h(e) : [q + Phi_x(a)]_x Type(a)
    through the typer's feasibility test. The translated bindings sit in
    Gamma because h(e) uses them as program variables; Gamma carries no
    potential, so Phi(gamma) is the only potential they bring.
    """
    from app.services.internal.typer import check

    cfg = cfg or default_settings
    cm = cm or CostModel.named(cfg.COST_MODEL)
    ctx, phi = translate_ctx(gamma)
    term = translate_term(e, cm)
    x = fresh_name("x", all_idents(ctx, term))
    wanted = Judgement(
        EMPTY,
        ctx,
        _sum(phi, _pot(Fraction(p))),
        term,
        _sum(_pot(Fraction(q)), phi_of_type(x, a)),
        translate_type(a),
        x,
    )
    result = check(EMPTY, ctx, term, wanted, cfg)
    verdict = "accepted" if result.accepted else "rejected"
    logger.info(f"AARA: embedding {verdict}")
    return EmbedResult(result.accepted, term, wanted, result.judgement, result.diagnostics)


def embed_fixture(fixture: AaraFixture, cm: CostModel, cfg: Settings | None = None) -> EmbedResult:
    gamma, p, e, q, a = fixture.judgement()
    return embed_check(gamma, p, e, q, a, cm, cfg)
