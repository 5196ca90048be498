# app/services/internal/parser.py

"""
Parser for .amor source files.

The lark grammar (grammars/amor.lark) produces a raw tree in which names are
not yet resolved. A second pass resolves every name in scope order: bound
variables, earlier declarations, constructors of the shipped datatypes and
measures. The same pass makes term binders unique across the whole program,
so the typer never sees a binder shadow another.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

from lark import Lark, Transformer, v_args
from lark.exceptions import LarkError, VisitError

from app.core.errors import ParseError
from app.services.internal.evaluator import Outcome, instantiate
from app.services.internal.judgement import Judgement
from app.services.internal.potential import BUILTIN_MEASURES, apply_measure
from app.services.internal.render import DEFAULT_INDS
from app.services.internal.syntax import (
    BOOL_T,
    EMPTY,
    NAT_T,
    UNIT_T,
    UNIT_V,
    ZERO,
    Abs,
    Add,
    App,
    ArrowT,
    Branch,
    Con,
    Const,
    Ctor,
    Ctx,
    Fix,
    Ident,
    IndT,
    IntLit,
    IntT,
    Let,
    Matd,
    Max2,
    MaxOver,
    Min2,
    MinOver,
    Mul,
    Op,
    Pair,
    PBranch,
    PolyT,
    PosInf,
    PotAbs,
    PotExpr,
    Pow,
    PrimRec,
    ProdT,
    Proj1,
    Proj2,
    Recur,
    Ref,
    Scale,
    Sub,
    Term,
    Tick,
    TypeExpr,
    Var,
    all_idents,
    free_vars,
    list_type,
    list_value,
    sum_type,
    tree_type,
)

logger = logging.getLogger(__name__)

inline = v_args(inline=True)


# --- Program Structure ---


@dataclass(frozen=True)
class Declaration:
    name: Ident
    params: Ctx
    type: TypeExpr
    requires: PotExpr
    ensures: PotExpr
    ensures_binder: Ident
    term: Term
    line: int | None = None


@dataclass(frozen=True)
class Probe:
    term: Term
    budget: Fraction
    expect: Outcome
    residual: Fraction | None = None
    line: int | None = None


@dataclass
class SourceProgram:
    declarations: list[Declaration] = field(default_factory=list)
    probes: list[Probe] = field(default_factory=list)
    entry: Term | None = None
    measures: dict[str, PrimRec] = field(default_factory=dict)

    def declaration(self, name: str) -> Declaration:
        for decl in self.declarations:
            if decl.name.name == name:
                return decl
        raise KeyError(name)

    def closed(self, term: Term) -> Term:
        """Binds the declarations term uses (directly or not) with a chain of lets."""
        by_name = {d.name: d for d in self.declarations if not d.params}
        needed: set[Ident] = set()
        pending = [x for x in free_vars(term) if x in by_name]
        while pending:
            x = pending.pop()
            if x in needed:
                continue
            needed.add(x)
            pending.extend(y for y in free_vars(by_name[x].term) if y in by_name)
        for decl in reversed(self.declarations):
            if decl.name in needed:
                term = Let(decl.name, decl.term, term)
        return term

    def wanted(self, decl: Declaration) -> tuple[Ctx, Term, Judgement]:
        """The context, closed term and wanted judgement a declaration's annotation states."""
        term = self.closed(decl.term)
        j = Judgement(EMPTY, decl.params, decl.requires, term, decl.ensures, decl.type, decl.ensures_binder)
        return decl.params, term, j


# --- Raw Nodes ---


@dataclass(frozen=True)
class _Name:
    ident: Ident


@dataclass(frozen=True)
class _Call:
    ident: Ident
    args: tuple


@dataclass(frozen=True)
class _Con:
    name: str
    ind: IndT
    args: tuple


@dataclass(frozen=True)
class _List:
    items: tuple


@dataclass(frozen=True)
class _TickL:
    amount: Fraction | int
    body: object


@dataclass(frozen=True)
class _Pattern:
    name: str | None
    index: int | None
    binders: tuple[Ident, ...]


@dataclass(frozen=True)
class _Branch:
    pattern: _Pattern
    body: object


@dataclass(frozen=True)
class _PCall:
    ident: Ident
    arg: object


@dataclass(frozen=True)
class _PMatd:
    self_binder: Ident
    scrutinee: object
    branches: tuple


@dataclass(frozen=True)
class _Measure:
    name: Ident
    type: TypeExpr
    branches: tuple


@dataclass(frozen=True)
class _Def:
    name: Ident
    params: tuple
    type: TypeExpr
    requires: object
    ensures: object
    term: object
    line: int | None


@dataclass(frozen=True)
class _Probe:
    term: object
    bindings: tuple
    budget: Fraction
    expect: str
    residual: Fraction | None
    line: int | None


@dataclass(frozen=True)
class _Main:
    term: object


def _amount(q: Fraction):
    return int(q) if q.denominator == 1 else q


# --- Tree to Raw AST ---


class _ToRaw(Transformer):
    def NAME(self, token):
        text = str(token)
        if "#" in text:
            base, tag = text.split("#")
            return Ident(base, int(tag))
        return Ident(text)

    def INT(self, token):
        return int(token)

    def OUTCOME(self, token):
        return str(token)

    # --- Types ---

    @inline
    def arrow_type(self, f1, x, t1, f2, y, t2):
        return ArrowT(x, f1, t1, y, f2, t2)

    @inline
    def poly_type(self, x, dom, body):
        return PolyT(x, dom, body)

    @inline
    def list_t(self, elem):
        return list_type(elem)

    @inline
    def tree_t(self, elem):
        return tree_type(elem)

    @inline
    def sum_t(self, left, right):
        return sum_type(left, right)

    def int_t(self, _):
        return IntT()

    def unit_t(self, _):
        return UNIT_T

    def bool_t(self, _):
        return BOOL_T

    def nat_t(self, _):
        return NAT_T

    @inline
    def prod_t(self, left, right):
        return ProdT(left, right)

    def ind_t(self, ctors):
        return IndT(tuple(ctors))

    @inline
    def ctor_decl(self, name, content, copies):
        return Ctor(name.name, content, copies)

    # --- Terms ---

    @inline
    def name(self, ident):
        return _Name(ident)

    @inline
    def int(self, value):
        return IntLit(value)

    @inline
    def neg_int(self, value):
        return IntLit(-value)

    def unit(self, _):
        return UNIT_V

    @inline
    def pair(self, left, right):
        return Pair(left, right)

    def list_lit(self, items):
        return _List(tuple(i for i in items if i is not None))

    @inline
    def con_typed(self, ident, ind):
        return _Con(ident.name, ind, ())

    @inline
    def con_typed_call(self, ident, ind, *args):
        return _Con(ident.name, ind, args)

    @inline
    def call(self, ident, *args):
        return _Call(ident, args)

    @inline
    def app(self, fn, arg):
        return App(fn, arg)

    @inline
    def proj1(self, body):
        return Proj1(body)

    @inline
    def proj2(self, body):
        return Proj2(body)

    @inline
    def lt(self, a, b):
        return Op("<", (a, b))

    @inline
    def add(self, a, b):
        return Op("+", (a, b))

    @inline
    def sub(self, a, b):
        return Op("-", (a, b))

    @inline
    def mul(self, a, b):
        return Op("*", (a, b))

    @inline
    def abs(self, x, annotation, body):
        return Abs(x, annotation, body)

    @inline
    def pabs(self, x, dom, body):
        return PotAbs(x, dom, body)

    @inline
    def fix(self, x, annotation, body):
        return Fix(x, annotation, body)

    @inline
    def let(self, x, bound, body):
        return Let(x, bound, body)

    @inline
    def case(self, scrutinee, *branches):
        return Matd(scrutinee, branches)

    @inline
    def tick(self, amount, body):
        return Tick(_amount(amount), body)

    @inline
    def tickl(self, amount, body):
        return _TickL(_amount(amount), body)

    @inline
    def branch(self, pattern, body):
        return _Branch(pattern, body)

    @inline
    def named_pattern(self, ident, *binders):
        return _Pattern(ident.name, None, tuple(b for b in binders if b is not None))

    @inline
    def index_pattern(self, index, *binders):
        return _Pattern(None, index, tuple(b for b in binders if b is not None))

    @inline
    def pos_rat(self, n):
        return Fraction(n)

    @inline
    def pos_frac(self, n, d):
        return Fraction(n, d)

    @inline
    def neg_rat(self, n):
        return Fraction(-n)

    @inline
    def neg_frac(self, n, d):
        return Fraction(-n, d)

    @inline
    def rat(self, value):
        return value

    # --- Potentials ---

    @inline
    def pint(self, n):
        return Const(Fraction(n))

    @inline
    def pfrac(self, n, d):
        return Const(Fraction(n, d))

    @inline
    def pneg(self, n):
        return Const(Fraction(-n))

    @inline
    def pnegfrac(self, n, d):
        return Const(Fraction(-n, d))

    def pinf(self, _):
        return PosInf()

    @inline
    def pmin(self, a, b):
        return Min2(a, b)

    @inline
    def pmax(self, a, b):
        return Max2(a, b)

    @inline
    def pminover(self, x, dom, body):
        return MinOver(x, dom, body)

    @inline
    def pmaxover(self, x, dom, body):
        return MaxOver(x, dom, body)

    @inline
    def pmatd(self, me, scrutinee, *branches):
        return _PMatd(me, scrutinee, branches)

    @inline
    def pcall(self, ident, arg):
        return _PCall(ident, arg)

    @inline
    def pref(self, path):
        return Ref(path)

    @inline
    def path_var(self, ident):
        return Var(ident)

    @inline
    def path_proj1(self, body):
        return Proj1(body)

    @inline
    def path_proj2(self, body):
        return Proj2(body)

    @inline
    def padd(self, a, b):
        return Add(a, b)

    @inline
    def psub(self, a, b):
        return Sub(a, b)

    @inline
    def pmul(self, a, b):
        if isinstance(a, Const):
            return Scale(a.value, b)
        return Mul(a, b)

    @inline
    def ppow(self, base, k):
        return Pow(base, k)

    @inline
    def pbranch(self, pattern, body):
        return _Branch(pattern, body)

    # --- Items ---

    @inline
    def measure_decl(self, name, type_, *branches):
        return _Measure(name, type_, branches)

    def params(self, items):
        return tuple(items)

    @inline
    def param(self, name, type_):
        return (name, type_)

    def requires(self, items):
        return items[0] if items else None

    def ensures(self, items):
        return tuple(items) if items else None

    def ensures_binder(self, items):
        return items[0] if items else None

    @v_args(meta=True)
    def def_decl(self, meta, children):
        name, params, type_, requires, ensures, term = children
        return _Def(name, params, type_, requires, ensures, term, getattr(meta, "line", None))

    def probe_with(self, items):
        return tuple(items)

    @inline
    def binding(self, name, term):
        return (name, term)

    def residual(self, items):
        return items[0] if items else None

    @v_args(meta=True)
    def probe_decl(self, meta, children):
        term, bindings, budget, expect, residual = children
        return _Probe(term, bindings, budget, expect, residual, getattr(meta, "line", None))

    @inline
    def main_decl(self, term):
        return _Main(term)

    def start(self, items):
        return list(items)


@lru_cache(maxsize=1)
def _lark() -> Lark:
    grammar = (Path(__file__).parent / "grammars" / "amor.lark").read_text()
    return Lark(grammar, start=["start", "term", "type", "pot"], propagate_positions=True)


def _raw(text: str, start: str):
    try:
        tree = _lark().parse(text, start=start)
        return _ToRaw().transform(tree)
    except VisitError as e:
        raise ParseError(str(e.orig_exc)) from e
    except LarkError as e:
        line, column = getattr(e, "line", None), getattr(e, "column", None)
        raise ParseError(str(e).strip().splitlines()[0], line, column) from e


# --- Name Resolution ---

_OUTCOMES = {
    "value": Outcome.VALUE,
    "stuck_tick": Outcome.STUCK_TICK,
    "stuck_other": Outcome.STUCK_OTHER,
    "fuel": Outcome.FUEL_EXHAUSTED,
}


class _Resolver:
    def __init__(self, raw):
        self.avoid: set[Ident] = set(all_idents(tuple(raw) if isinstance(raw, list) else raw))
        self.taken: set[Ident] = set()
        self.measures: dict[str, PrimRec] = dict(BUILTIN_MEASURES)
        self.ctors: dict[str, tuple[IndT, int]] = {
            name: (ind, ind.index_of(name)) for name, ind in DEFAULT_INDS.items()
        }
        self.globals: dict[Ident, Ident] = {}
        self._collect_inds(raw)

    def _collect_inds(self, node) -> None:
        if isinstance(node, IndT):
            for index, ctor in enumerate(node.ctors):
                self.ctors.setdefault(ctor.name, (node, index))
        if isinstance(node, (list, tuple)):
            for item in node:
                self._collect_inds(item)
        elif hasattr(node, "__dataclass_fields__") and not isinstance(node, Ident):
            for name in node.__dataclass_fields__:
                self._collect_inds(getattr(node, name))

    def bind(self, x: Ident) -> Ident:
        """A program-wide unique name for a term binder written as x."""
        if x not in self.taken:
            self.taken.add(x)
            return x
        tag = x.tag + 1
        while Ident(x.name, tag) in self.taken or Ident(x.name, tag) in self.avoid:
            tag += 1
        new = Ident(x.name, tag)
        self.taken.add(new)
        return new

    # --- Constructors ---

    def con(self, name: str, ind: IndT | None, args: tuple, env) -> Con:
        if ind is None:
            if name not in self.ctors:
                raise ParseError(f"unknown constructor {name}")
            ind, index = self.ctors[name]
            if DEFAULT_INDS.get(name) != ind:
                raise ParseError(f"constructor {name} needs a type argument, as in {name}<T>(...)")
        else:
            try:
                index = ind.index_of(name)
            except KeyError:
                raise ParseError(f"{name} is not a constructor of the given type") from None
        ctor = ind.ctors[index]
        args = tuple(self.term(a, env) for a in args)
        if ind == UNIT_T and not args:
            return UNIT_V
        if len(args) == ctor.copies + 1:
            return Con(ind, index, args[0], args[1:])
        if len(args) == ctor.copies and ctor.content == UNIT_T:
            return Con(ind, index, UNIT_V, args)
        raise ParseError(f"{name} takes {ctor.copies + 1} arguments, got {len(args)}")

    def is_ctor(self, x: Ident, env) -> bool:
        return x not in env and x not in self.globals and x.tag == 0 and x.name in self.ctors

    def pattern(self, p: _Pattern, ind: IndT | None = None) -> tuple[int, tuple[Ident, ...], str]:
        if p.index is not None:
            return p.index, p.binders, ""
        if ind is not None:
            try:
                index = ind.index_of(p.name)
            except KeyError:
                raise ParseError(f"{p.name} is not a constructor of the measured type") from None
            owner = ind
        elif p.name in self.ctors:
            owner, index = self.ctors[p.name]
        else:
            raise ParseError(f"unknown constructor {p.name} in pattern")
        ctor = owner.ctors[index]
        binders = p.binders
        if len(binders) == ctor.copies:
            binders = (Ident("u"),) + binders
        if len(binders) != ctor.copies + 1:
            raise ParseError(f"pattern {p.name} binds {ctor.copies + 1} names")
        return index, binders, p.name

    # --- Terms ---

    def term(self, t, env: dict[Ident, Ident]) -> Term:
        match t:
            case _Name(x):
                if x in env:
                    return Var(env[x])
                if x in self.globals:
                    return Var(self.globals[x])
                if self.is_ctor(x, env):
                    return self.con(x.name, None, (), env)
                return Var(x)
            case _Call(f, args):
                if self.is_ctor(f, env):
                    return self.con(f.name, None, args, env)
                arg = args[0] if len(args) == 1 else _pair_all(args)
                return App(self.term(_Name(f), env), self.term(arg, env))
            case _Con(name, ind, args):
                return self.con(name, self.type(ind, env), args, env)
            case _List(items):
                terms = [self.term(i, env) for i in items]
                elem = terms[0].ind if terms and isinstance(terms[0], Con) else IntT()
                return list_value(terms, elem)
            case App(_Name(f), arg) if self.is_ctor(f, env):
                return self.con(f.name, None, (arg,), env)
            case App(fn, arg):
                return App(self.term(fn, env), self.term(arg, env))
            case Abs(x, annotation, body):
                new = self.bind(x)
                ann = None if annotation is None else self.type(annotation, env)
                return Abs(new, ann, self.term(body, {**env, x: new}))
            case PotAbs(x, dom, body):
                new = self.bind(x)
                return PotAbs(new, self.type(dom, env), self.term(body, {**env, x: new}))
            case Fix(x, annotation, body):
                new = self.bind(x)
                return Fix(new, self.type(annotation, env), self.term(body, {**env, x: new}))
            case Let(x, bound, body):
                new = self.bind(x)
                return Let(new, self.term(bound, env), self.term(body, {**env, x: new}))
            case Matd(scrutinee, branches):
                resolved = []
                for br in branches:
                    index, binders, name = self.pattern(br.pattern)
                    fresh = tuple(self.bind(b) for b in binders)
                    inner = {**env, **dict(zip(binders, fresh))}
                    resolved.append(Branch(index, fresh, self.term(br.body, inner), name))
                return Matd(self.term(scrutinee, env), tuple(resolved))
            case Tick(amount, body):
                return Tick(amount, self.term(body, env))
            case _TickL(amount, body):
                v = self.bind(Ident("v"))
                return App(Abs(v, None, Tick(amount, Var(v))), self.term(body, env))
            case Op(name, args):
                return Op(name, tuple(self.term(a, env) for a in args))
            case Pair(left, right):
                return Pair(self.term(left, env), self.term(right, env))
            case Proj1(body):
                return Proj1(self.term(body, env))
            case Proj2(body):
                return Proj2(self.term(body, env))
            case IntLit() | Con():
                return t
        raise ParseError(f"unexpected syntax {type(t).__name__}")

    # --- Types ---

    def type(self, t, env: dict[Ident, Ident]) -> TypeExpr:
        match t:
            case ArrowT(x, f1, t1, y, f2, t2):
                inner = {**env, x: x}
                outer = {**inner, y: y}
                return ArrowT(
                    x, self.pot(f1, inner, {}), self.type(t1, inner), y, self.pot(f2, outer, {}), self.type(t2, outer)
                )
            case PolyT(x, dom, body):
                return PolyT(x, self.type(dom, env), self.type(body, {**env, x: x}))
            case ProdT(left, right):
                return ProdT(self.type(left, env), self.type(right, env))
            case IndT(ctors):
                return IndT(tuple(Ctor(c.name, self.type(c.content, env), c.copies) for c in ctors))
            case IntT():
                return t
        raise ParseError(f"unexpected type syntax {type(t).__name__}")

    # --- Potentials ---

    def path(self, t, env) -> Term:
        match t:
            case Var(x):
                return Var(env.get(x, self.globals.get(x, x)))
            case Proj1(body):
                return Proj1(self.path(body, env))
            case Proj2(body):
                return Proj2(self.path(body, env))
        return self.term(t, env)

    def pot(self, f, env: dict[Ident, Ident], selfs: dict[Ident, Ident]) -> PotExpr:
        match f:
            case Const() | PosInf():
                return f
            case Ref(path):
                return Ref(self.path(path, env))
            case _PCall(x, arg):
                value = self.term(arg, env)
                if x in selfs:
                    return Recur(x, value)
                if x.name in self.measures:
                    return apply_measure(self.measures[x.name], value)
                raise ParseError(f"unknown measure {x}")
            case _PMatd(me, scrutinee, branches):
                return PrimRec(me, self.term(scrutinee, env), self.pbranches(branches, env, {**selfs, me: me}))
            case MinOver(x, dom, body) | MaxOver(x, dom, body):
                return type(f)(x, self.type(dom, env), self.pot(body, {**env, x: x}, selfs))
            case Add(a, b) | Sub(a, b) | Mul(a, b) | Min2(a, b) | Max2(a, b):
                return type(f)(self.pot(a, env, selfs), self.pot(b, env, selfs))
            case Scale(q, body):
                return Scale(q, self.pot(body, env, selfs))
            case Pow(base, k):
                return Pow(self.pot(base, env, selfs), k)
        raise ParseError(f"unexpected potential syntax {type(f).__name__}")

    def pbranches(self, branches, env, selfs, ind: IndT | None = None) -> tuple[PBranch, ...]:
        resolved = []
        for br in branches:
            index, binders, name = self.pattern(br.pattern, ind)
            inner = {**env, **{b: b for b in binders}}
            resolved.append(PBranch(index, binders, self.pot(br.body, inner, selfs), name))
        return tuple(resolved)

    # --- Items ---

    def measure(self, m: _Measure) -> PrimRec:
        ind = self.type(m.type, {})
        if not isinstance(ind, IndT):
            raise ParseError(f"measure {m.name} must be defined on an inductive type")
        me = m.name
        branches = self.pbranches(m.branches, {}, {me: me}, ind)
        template = PrimRec(me, Var(Ident("_")), branches, me.name, ind.signature())
        self.measures[me.name] = template
        return template

    def declaration(self, d: _Def) -> Declaration:
        env: dict[Ident, Ident] = {}
        params = EMPTY
        for x, t in d.params:
            new = self.bind(x)
            params = params.extend(new, self.type(t, env))
            env[x] = new
        declared = self.type(d.type, env)
        requires = ZERO if d.requires is None else self.pot(d.requires, env, {})
        if d.ensures is None:
            ensures, binder = ZERO, Ident("y")
        else:
            raw, binder = d.ensures
            binder = binder or Ident("y")
            ensures = self.pot(raw, {**env, binder: binder}, {})
        name = self.bind(d.name)
        inner = self.bind(d.name)
        term = self.term(d.term, {**env, d.name: inner})
        if inner in free_vars(term) or (not d.params and isinstance(term, (Abs, PotAbs))):
            term = Fix(inner, declared, term)
        if not d.params:
            self.globals[d.name] = name
        return Declaration(name, params, declared, requires, ensures, binder, term, d.line)

    def probe(self, p: _Probe, program: SourceProgram) -> Probe:
        target = p.term
        decl = None
        if isinstance(target, _Name):
            decl = next((d for d in program.declarations if d.name == target.ident and d.params), None)
        if decl is not None:
            term = decl.term
            names = {x.name: x for x, _ in decl.params}
        else:
            term = self.term(target, {})
            names = {x.name: x for x in free_vars(term)}
        mapping = {}
        for x, value in p.bindings:
            if x.name not in names:
                raise ParseError(f"probe binds {x}, which the probed term does not use")
            mapping[names[x.name]] = self.term(value, {})
        term = program.closed(instantiate(term, mapping) if mapping else term)
        return Probe(term, p.budget, _OUTCOMES[p.expect], p.residual, p.line)


def _pair_all(args: tuple):
    result = args[-1]
    for a in reversed(args[:-1]):
        result = Pair(a, result)
    return result


# --- Public Entry Points ---


def parse_program(text: str) -> SourceProgram:
    raw = _raw(text, "start")
    resolver = _Resolver(raw)
    program = SourceProgram()
    for item in raw:
        match item:
            case _Measure():
                template = resolver.measure(item)
                program.measures[template.name] = template
            case _Def():
                program.declarations.append(resolver.declaration(item))
            case _Probe():
                program.probes.append(resolver.probe(item, program))
            case _Main(term):
                program.entry = program.closed(resolver.term(term, {}))
    logger.debug(
        f"TYPER: parsed {len(program.declarations)} declarations, {len(program.probes)} probes"
    )
    return program


def parse_file(path: str | Path) -> SourceProgram:
    return parse_program(Path(path).read_text())


def parse_term(text: str) -> Term:
    raw = _raw(text, "term")
    return _Resolver(raw).term(raw, {})


def parse_type(text: str) -> TypeExpr:
    raw = _raw(text, "type")
    return _Resolver(raw).type(raw, {})


def parse_pot(text: str) -> PotExpr:
    raw = _raw(text, "pot")
    return _Resolver(raw).pot(raw, {}, {})
