# app/services/internal/syntax.py

"""
Abstract syntax of the calculus: identifiers, types, terms, potential
functions and contexts, together with the structural operations every other
service relies on (free variables, substitution, alpha-equivalence and the
fresh-name supply).

All nodes are frozen dataclasses, so they hash, compare structurally and can
be shared freely between checking sessions.
"""

from __future__ import annotations

import contextvars
import logging
from dataclasses import dataclass, field, fields, is_dataclass, replace
from enum import Enum
from fractions import Fraction

from app.core.errors import CaptureRisk

logger = logging.getLogger(__name__)


# --- Identifiers and the Fresh-Name Supply ---


@dataclass(frozen=True, order=True)
class Ident:
    name: str
    tag: int = 0

    def __str__(self) -> str:
        return self.name if self.tag == 0 else f"{self.name}#{self.tag}"


class NameSupply:
    """Monotone per-base counters; one supply per checking session."""

    def __init__(self):
        self._next: dict[str, int] = {}

    def fresh(self, base: str, avoid) -> Ident:
        tag = self._next.get(base, 0)
        while Ident(base, tag) in avoid:
            tag += 1
        self._next[base] = tag + 1
        return Ident(base, tag)


_supply: contextvars.ContextVar[NameSupply | None] = contextvars.ContextVar(
    "amorna_name_supply", default=None
)


def new_session() -> NameSupply:
    """Starts a fresh naming session for the current context."""
    supply = NameSupply()
    _supply.set(supply)
    return supply


def fresh_name(base: str, avoid=frozenset()) -> Ident:
    supply = _supply.get()
    if supply is None:
        supply = new_session()
    return supply.fresh(base, avoid)


# --- Types ---


@dataclass(frozen=True)
class IntT:
    pass


@dataclass(frozen=True)
class ProdT:
    left: TypeExpr
    right: TypeExpr


@dataclass(frozen=True)
class ArrowT:
    arg_binder: Ident
    arg_pot: PotExpr
    arg_type: TypeExpr
    res_binder: Ident
    res_pot: PotExpr
    res_type: TypeExpr


@dataclass(frozen=True)
class PolyT:
    binder: Ident
    domain: TypeExpr
    body: TypeExpr


@dataclass(frozen=True)
class Ctor:
    name: str
    content: TypeExpr
    copies: int


@dataclass(frozen=True)
class IndT:
    ctors: tuple[Ctor, ...]

    def index_of(self, name: str) -> int:
        for i, ctor in enumerate(self.ctors):
            if ctor.name == name:
                return i
        raise KeyError(name)

    def signature(self) -> tuple[tuple[str, int], ...]:
        return tuple((c.name, c.copies) for c in self.ctors)


type TypeExpr = IntT | ProdT | ArrowT | PolyT | IndT


# --- Terms ---


@dataclass(frozen=True)
class Var:
    ident: Ident


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class Op:
    name: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class PotAbs:
    binder: Ident
    domain: TypeExpr
    body: Term


@dataclass(frozen=True)
class Abs:
    binder: Ident
    annotation: TypeExpr | None
    body: Term


@dataclass(frozen=True)
class App:
    fn: Term
    arg: Term


@dataclass(frozen=True)
class Pair:
    left: Term
    right: Term


@dataclass(frozen=True)
class Proj1:
    body: Term


@dataclass(frozen=True)
class Proj2:
    body: Term


@dataclass(frozen=True)
class Fix:
    binder: Ident
    annotation: TypeExpr
    body: Term


@dataclass(frozen=True)
class Tick:
    amount: int
    body: Term


@dataclass(frozen=True)
class Let:
    binder: Ident
    bound: Term
    body: Term


@dataclass(frozen=True)
class Con:
    ind: IndT
    index: int
    content: Term
    rec_args: tuple[Term, ...]


@dataclass(frozen=True)
class Branch:
    index: int
    binders: tuple[Ident, ...]
    body: Term
    name: str = field(default="", compare=False)


@dataclass(frozen=True)
class Matd:
    scrutinee: Term
    branches: tuple[Branch, ...]

    def branch_for(self, index: int) -> Branch | None:
        for branch in self.branches:
            if branch.index == index:
                return branch
        return None


type Term = (
    Var | IntLit | Op | PotAbs | Abs | App | Pair | Proj1 | Proj2 | Fix | Tick
    | Let | Con | Matd
)

OPERATORS = ("+", "-", "*", "<")


# --- Potential Functions ---


@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class PosInf:
    pass


@dataclass(frozen=True)
class Ref:
    """An int-valued pre-value used as a number (a variable path in the common case)."""

    term: Term


@dataclass(frozen=True)
class Add:
    left: PotExpr
    right: PotExpr


@dataclass(frozen=True)
class Sub:
    left: PotExpr
    right: PotExpr


@dataclass(frozen=True)
class Scale:
    coef: Fraction
    body: PotExpr


@dataclass(frozen=True)
class Mul:
    left: PotExpr
    right: PotExpr


@dataclass(frozen=True)
class Pow:
    base: PotExpr
    exponent: int


@dataclass(frozen=True)
class PBranch:
    index: int
    binders: tuple[Ident, ...]
    body: PotExpr
    name: str = field(default="", compare=False)


@dataclass(frozen=True)
class PrimRec:
    self_binder: Ident
    scrutinee: Term
    branches: tuple[PBranch, ...]
    name: str | None = field(default=None, compare=False)
    signature: tuple[tuple[str, int], ...] = field(default=(), compare=False)

    def branch_for(self, index: int) -> PBranch | None:
        for branch in self.branches:
            if branch.index == index:
                return branch
        return None


@dataclass(frozen=True)
class Recur:
    """A structural self-call inside a PrimRec body."""

    fn: Ident
    arg: Term


@dataclass(frozen=True)
class MinOver:
    binder: Ident
    domain: TypeExpr
    body: PotExpr


@dataclass(frozen=True)
class MaxOver:
    binder: Ident
    domain: TypeExpr
    body: PotExpr


@dataclass(frozen=True)
class Min2:
    left: PotExpr
    right: PotExpr


@dataclass(frozen=True)
class Max2:
    left: PotExpr
    right: PotExpr


type PotExpr = (
    Const | PosInf | Ref | Add | Sub | Scale | Mul | Pow | PrimRec | Recur
    | MinOver | MaxOver | Min2 | Max2
)

ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def const(value) -> Const:
    return Const(Fraction(value))


def ref(x: Ident) -> Ref:
    return Ref(Var(x))


def pot_sum(*parts: PotExpr) -> PotExpr:
    """Left-nested sum that drops literal zeros."""
    kept = [p for p in parts if p != ZERO]
    if not kept:
        return ZERO
    total = kept[0]
    for part in kept[1:]:
        total = Add(total, part)
    return total


def pot_sub(left: PotExpr, right: PotExpr) -> PotExpr:
    return left if right == ZERO else Sub(left, right)


# --- Contexts ---


@dataclass(frozen=True)
class Ctx:
    """Ordered (Ident, TypeExpr) bindings, used for both Omega and Gamma."""

    bindings: tuple[tuple[Ident, TypeExpr], ...] = ()

    def __contains__(self, x: Ident) -> bool:
        return any(name == x for name, _ in self.bindings)

    def __iter__(self):
        return iter(self.bindings)

    def __len__(self) -> int:
        return len(self.bindings)

    def names(self) -> tuple[Ident, ...]:
        return tuple(name for name, _ in self.bindings)

    def lookup(self, x: Ident) -> TypeExpr | None:
        for name, ty in self.bindings:
            if name == x:
                return ty
        return None

    def extend(self, x: Ident, ty: TypeExpr) -> Ctx:
        if x in self:
            raise ValueError(f"duplicate binding for {x}")
        return Ctx(self.bindings + ((x, ty),))

    def remove(self, x: Ident) -> Ctx:
        return Ctx(tuple((n, t) for n, t in self.bindings if n != x))

    def merge(self, other: Ctx) -> Ctx:
        """Union preserving order; shared names keep the first binding."""
        merged = self
        for name, ty in other.bindings:
            if name not in merged:
                merged = merged.extend(name, ty)
        return merged


EMPTY = Ctx()


# --- Library Encodings ---

UNIT_T = IndT((Ctor("unit", IntT(), 0),))
UNIT_V = Con(UNIT_T, 0, IntLit(0), ())
BOOL_T = IndT((Ctor("false", UNIT_T, 0), Ctor("true", UNIT_T, 0)))
NAT_T = IndT((Ctor("zero", UNIT_T, 0), Ctor("succ", UNIT_T, 1)))


def list_type(elem: TypeExpr) -> IndT:
    return IndT((Ctor("nil", UNIT_T, 0), Ctor("cons", elem, 1)))


def tree_type(elem: TypeExpr) -> IndT:
    return IndT((Ctor("leaf", elem, 0), Ctor("node", UNIT_T, 2)))


def sum_type(left: TypeExpr, right: TypeExpr) -> IndT:
    return IndT((Ctor("left", left, 0), Ctor("right", right, 0)))


def bool_value(flag: bool) -> Con:
    return Con(BOOL_T, 1 if flag else 0, UNIT_V, ())


def nil(elem: TypeExpr) -> Con:
    return Con(list_type(elem), 0, UNIT_V, ())


def cons(elem: TypeExpr, head: Term, tail: Term) -> Con:
    return Con(list_type(elem), 1, head, (tail,))


def list_value(items, elem: TypeExpr = IntT()) -> Term:
    """Builds a list literal from Python ints (or ready-made terms)."""
    result: Term = nil(elem)
    for item in reversed(list(items)):
        head = IntLit(item) if isinstance(item, int) else item
        result = cons(elem, head, result)
    return result


def nat_value(n: int) -> Term:
    result: Term = Con(NAT_T, 0, UNIT_V, ())
    for _ in range(n):
        result = Con(NAT_T, 1, UNIT_V, (result,))
    return result


# --- Classification ---


class Kind(str, Enum):
    VALUE = "Value"
    PRE_VALUE = "PreValue"
    NEITHER = "Neither"


def is_value(t: Term) -> bool:
    match t:
        case IntLit() | Abs() | PotAbs():
            return True
        case Pair(l, r):
            return is_value(l) and is_value(r)
        case Con(_, _, content, rec_args):
            return is_value(content) and all(is_value(a) for a in rec_args)
    return False


def is_prevalue(t: Term) -> bool:
    match t:
        case Var() | IntLit() | Abs() | PotAbs():
            return True
        case Op(_, args):
            return all(is_prevalue(a) for a in args)
        case Pair(l, r):
            return is_prevalue(l) and is_prevalue(r)
        case Con(_, _, content, rec_args):
            return is_prevalue(content) and all(is_prevalue(a) for a in rec_args)
    return False


def classify_term(t: Term) -> Kind:
    if is_value(t):
        return Kind.VALUE
    if is_prevalue(t):
        return Kind.PRE_VALUE
    return Kind.NEITHER


def is_path(t: Term) -> bool:
    """A variable followed by projections."""
    while isinstance(t, (Proj1, Proj2)):
        t = t.body
    return isinstance(t, Var)


def path_root(t: Term) -> Ident | None:
    while isinstance(t, (Proj1, Proj2)):
        t = t.body
    return t.ident if isinstance(t, Var) else None


def reduce_path(t: Term) -> Term:
    """Pushes projections into pair pre-values: pi1 (a, b) becomes a."""
    match t:
        case Proj1(body):
            inner = reduce_path(body)
            return inner.left if isinstance(inner, Pair) else Proj1(inner)
        case Proj2(body):
            inner = reduce_path(body)
            return inner.right if isinstance(inner, Pair) else Proj2(inner)
    return t


# --- Generic Traversal ---


def _children(node):
    for f in fields(node):
        yield f, getattr(node, f.name)


def all_idents(*subjects) -> frozenset[Ident]:
    """Every identifier occurring anywhere, bound or free."""
    found: set[Ident] = set()

    def walk(x):
        if isinstance(x, Ident):
            found.add(x)
        elif isinstance(x, tuple):
            for item in x:
                walk(item)
        elif is_dataclass(x) and not isinstance(x, type):
            for _, value in _children(x):
                walk(value)

    for subject in subjects:
        walk(subject)
    return frozenset(found)


# --- Free Variables ---


def free_vars(s) -> frozenset[Ident]:
    """Free program variables of a type, term, potential or context."""
    match s:
        case None | IntT() | IntLit() | Const() | PosInf():
            return frozenset()
        case ProdT(l, r) | Pair(l, r) | App(l, r) | Add(l, r) | Sub(l, r) | Mul(l, r):
            return free_vars(l) | free_vars(r)
        case Min2(l, r) | Max2(l, r):
            return free_vars(l) | free_vars(r)
        case ArrowT(x, f1, t1, y, f2, t2):
            res = (free_vars(f2) | free_vars(t2)) - {y}
            return (free_vars(f1) | free_vars(t1) | res) - {x}
        case PolyT(x, dom, body) | MinOver(x, dom, body) | MaxOver(x, dom, body):
            return free_vars(dom) | (free_vars(body) - {x})
        case IndT(ctors):
            return frozenset().union(*(free_vars(c.content) for c in ctors))
        case Var(x):
            return frozenset({x})
        case Op(_, args):
            return frozenset().union(*(free_vars(a) for a in args))
        case PotAbs(x, _, body) | Abs(x, _, body) | Fix(x, _, body):
            return free_vars(body) - {x}
        case Proj1(body) | Proj2(body) | Tick(_, body) | Scale(_, body) | Pow(body, _):
            return free_vars(body)
        case Ref(term):
            return free_vars(term)
        case Let(x, bound, body):
            return free_vars(bound) | (free_vars(body) - {x})
        case Con(_, _, content, rec_args):
            return free_vars(content).union(*(free_vars(a) for a in rec_args))
        case Matd(scrutinee, branches):
            inner = (free_vars(b.body) - set(b.binders) for b in branches)
            return free_vars(scrutinee).union(*inner)
        case PrimRec(self_binder, scrutinee, branches):
            inner = (free_vars(b.body) - set(b.binders) - {self_binder} for b in branches)
            return free_vars(scrutinee).union(*inner)
        case Recur(fn, arg):
            return frozenset({fn}) | free_vars(arg)
        case Ctx(bindings):
            return frozenset().union(*(free_vars(t) for _, t in bindings))
    raise TypeError(f"free_vars: unsupported node {type(s).__name__}")


def type_free_vars(t: Term) -> frozenset[Ident]:
    """Identifiers free in the type and potential annotations embedded in a term."""
    match t:
        case Var() | IntLit():
            return frozenset()
        case Op(_, args):
            return frozenset().union(*(type_free_vars(a) for a in args))
        case PotAbs(x, dom, body):
            return free_vars(dom) | (type_free_vars(body) - {x})
        case Abs(x, ann, body):
            return free_vars(ann) | (type_free_vars(body) - {x})
        case Fix(x, ann, body):
            return free_vars(ann) | (type_free_vars(body) - {x})
        case App(l, r) | Pair(l, r):
            return type_free_vars(l) | type_free_vars(r)
        case Proj1(body) | Proj2(body) | Tick(_, body):
            return type_free_vars(body)
        case Let(x, bound, body):
            return type_free_vars(bound) | (type_free_vars(body) - {x})
        case Con(ind, _, content, rec_args):
            return free_vars(ind) | type_free_vars(content).union(
                *(type_free_vars(a) for a in rec_args)
            )
        case Matd(scrutinee, branches):
            inner = (type_free_vars(b.body) - set(b.binders) for b in branches)
            return type_free_vars(scrutinee).union(*inner)
    raise TypeError(f"type_free_vars: unsupported node {type(t).__name__}")


# --- Substitution ---


def rename(s, old: Ident, new: Ident):
    return substitute(s, old, Var(new))


def _freshen(binder: Ident, v_fvs, *scopes) -> Ident:
    avoid = set(v_fvs) | all_idents(*scopes) | {binder}
    return fresh_name(binder.name, avoid)


def _under(binder: Ident, body, x: Ident, v: Term, v_fvs, capture_ok: bool):
    """Substitutes under one binder, renaming it first if it would capture."""
    if binder == x:
        return binder, body
    if binder in v_fvs:
        if not capture_ok:
            raise CaptureRisk(f"binder {binder} occurs free in the substituted term")
        new = _freshen(binder, v_fvs, body, v)
        body = rename(body, binder, new)
        binder = new
    return binder, substitute(body, x, v)


def _under_many(binders: tuple[Ident, ...], body, x, v, v_fvs, capture_ok: bool):
    if x in binders:
        return binders, body
    renamed = []
    for b in binders:
        if b in v_fvs:
            if not capture_ok:
                raise CaptureRisk(f"binder {b} occurs free in the substituted term")
            new = _freshen(b, v_fvs, body, v, binders)
            body = rename(body, b, new)
            b = new
        renamed.append(b)
    return tuple(renamed), substitute(body, x, v)


def substitute(s, x: Ident, v: Term):
    """
    Capture-avoiding substitution of the pre-value `v` for `x`.

    Binders of types and potentials are renamed when they would capture a
    free variable of `v`; term binders raise CaptureRisk instead, since the
    caller is expected to substitute closed values into programs.
    """
    if x not in free_vars(s) and not isinstance(s, Ctx) and not _is_term(s):
        return s
    v_fvs = free_vars(v)
    sub = lambda node: substitute(node, x, v)  # noqa: E731
    match s:
        case None | IntT() | IntLit() | Const() | PosInf():
            return s
        case ProdT(l, r):
            return ProdT(sub(l), sub(r))
        case ArrowT(a, f1, t1, r, f2, t2):
            if a == x:
                return s
            if a in v_fvs:
                new = _freshen(a, v_fvs, s, v)
                f1, t1 = rename(f1, a, new), rename(t1, a, new)
                if r == a:
                    r = new
                f2, t2 = rename(f2, a, new), rename(t2, a, new)
                a = new
            f1, t1 = sub(f1), sub(t1)
            if r != x:
                if r in v_fvs:
                    new = _freshen(r, v_fvs, s, v, f2, t2)
                    f2, t2 = rename(f2, r, new), rename(t2, r, new)
                    r = new
                f2, t2 = sub(f2), sub(t2)
            return ArrowT(a, f1, t1, r, f2, t2)
        case PolyT(b, dom, body):
            b, body = _under(b, body, x, v, v_fvs, True)
            return PolyT(b, sub(dom), body)
        case IndT(ctors):
            return IndT(tuple(Ctor(c.name, sub(c.content), c.copies) for c in ctors))
        # terms
        case Var(y):
            return v if y == x else s
        case Op(name, args):
            return Op(name, tuple(sub(a) for a in args))
        case PotAbs(b, dom, body):
            b, body = _under(b, body, x, v, v_fvs, False)
            return PotAbs(b, sub(dom), body)
        case Abs(b, ann, body):
            new_ann = sub(ann)
            b, body = _under(b, body, x, v, v_fvs, False)
            return Abs(b, new_ann, body)
        case App(l, r):
            return App(sub(l), sub(r))
        case Pair(l, r):
            return Pair(sub(l), sub(r))
        case Proj1(body):
            return Proj1(sub(body))
        case Proj2(body):
            return Proj2(sub(body))
        case Fix(b, ann, body):
            new_ann = sub(ann)
            b, body = _under(b, body, x, v, v_fvs, False)
            return Fix(b, new_ann, body)
        case Tick(amount, body):
            return Tick(amount, sub(body))
        case Let(b, bound, body):
            new_bound = sub(bound)
            b, body = _under(b, body, x, v, v_fvs, False)
            return Let(b, new_bound, body)
        case Con(ind, index, content, rec_args):
            return Con(sub(ind), index, sub(content), tuple(sub(a) for a in rec_args))
        case Matd(scrutinee, branches):
            new_branches = []
            for br in branches:
                binders, body = _under_many(br.binders, br.body, x, v, v_fvs, False)
                new_branches.append(Branch(br.index, binders, body, br.name))
            return Matd(sub(scrutinee), tuple(new_branches))
        # potentials
        case Ref(term):
            return Ref(reduce_path(sub(term)))
        case Add(l, r):
            return Add(sub(l), sub(r))
        case Sub(l, r):
            return Sub(sub(l), sub(r))
        case Scale(coef, body):
            return Scale(coef, sub(body))
        case Mul(l, r):
            return Mul(sub(l), sub(r))
        case Pow(base, k):
            return Pow(sub(base), k)
        case Min2(l, r):
            return Min2(sub(l), sub(r))
        case Max2(l, r):
            return Max2(sub(l), sub(r))
        case MinOver(b, dom, body):
            b, body = _under(b, body, x, v, v_fvs, True)
            return MinOver(b, sub(dom), body)
        case MaxOver(b, dom, body):
            b, body = _under(b, body, x, v, v_fvs, True)
            return MaxOver(b, sub(dom), body)
        case PrimRec(me, scrutinee, branches, name, signature):
            new_scrutinee = reduce_path(sub(scrutinee))
            if me == x:
                return replace(s, scrutinee=new_scrutinee)
            if me in v_fvs:
                new = _freshen(me, v_fvs, s, v)
                branches = tuple(rename(b, me, new) for b in branches)
                me = new
            new_branches = []
            for br in branches:
                binders, body = _under_many(br.binders, br.body, x, v, v_fvs, True)
                new_branches.append(PBranch(br.index, binders, body, br.name))
            return PrimRec(me, new_scrutinee, tuple(new_branches), name, signature)
        case PBranch(index, binders, body, name):
            binders, body = _under_many(binders, body, x, v, v_fvs, True)
            return PBranch(index, binders, body, name)
        case Recur(fn, arg):
            if fn == x and isinstance(v, Var):
                fn = v.ident
            return Recur(fn, reduce_path(sub(arg)))
        case Ctx(bindings):
            return Ctx(tuple((n, sub(t)) for n, t in bindings if n != x))
    raise TypeError(f"substitute: unsupported node {type(s).__name__}")


def _is_term(s) -> bool:
    # annotations inside terms may mention x even when x is not a free program variable
    return isinstance(s, (PotAbs, Abs, Fix, Let, Con, Matd, App, Pair, Proj1, Proj2, Tick, Op))


def substitute_all(s, mapping: dict[Ident, Term]):
    """Sequential substitution; callers pass names that are fresh for each other."""
    for x, v in mapping.items():
        s = substitute(s, x, v)
    return s


# --- Alpha-Equivalence ---

_SCOPES = {
    PolyT: ("binder", ("domain",), ("body",)),
    PotAbs: ("binder", ("domain",), ("body",)),
    Abs: ("binder", ("annotation",), ("body",)),
    Fix: ("binder", ("annotation",), ("body",)),
    Let: ("binder", ("bound",), ("body",)),
    MinOver: ("binder", ("domain",), ("body",)),
    MaxOver: ("binder", ("domain",), ("body",)),
    PrimRec: ("self_binder", ("scrutinee",), ("branches",)),
}


class _Levels:
    def __init__(self):
        self.count = 0

    def next(self) -> int:
        self.count += 1
        return self.count


def alpha_eq(a, b) -> bool:
    """Structural equality up to consistent renaming of bound identifiers."""
    return _aeq(a, b, {}, {}, _Levels())


def _bind(ea: dict, eb: dict, xa: Ident, xb: Ident, levels: _Levels):
    level = levels.next()
    return {**ea, xa: level}, {**eb, xb: level}


def _aeq(a, b, ea: dict, eb: dict, levels: _Levels) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Ident):
        la, lb = ea.get(a), eb.get(b)
        if la is None and lb is None:
            return a == b
        return la == lb
    if isinstance(a, tuple):
        return len(a) == len(b) and all(_aeq(x, y, ea, eb, levels) for x, y in zip(a, b))
    if not is_dataclass(a):
        return a == b
    if isinstance(a, ArrowT):
        inner_a, inner_b = _bind(ea, eb, a.arg_binder, b.arg_binder, levels)
        if not _aeq(a.arg_pot, b.arg_pot, inner_a, inner_b, levels):
            return False
        if not _aeq(a.arg_type, b.arg_type, inner_a, inner_b, levels):
            return False
        res_a, res_b = _bind(inner_a, inner_b, a.res_binder, b.res_binder, levels)
        return _aeq(a.res_pot, b.res_pot, res_a, res_b, levels) and _aeq(
            a.res_type, b.res_type, res_a, res_b, levels
        )
    if isinstance(a, (Branch, PBranch)):
        if a.index != b.index or len(a.binders) != len(b.binders):
            return False
        for xa, xb in zip(a.binders, b.binders):
            ea, eb = _bind(ea, eb, xa, xb, levels)
        return _aeq(a.body, b.body, ea, eb, levels)
    scope = _SCOPES.get(type(a))
    if scope is not None:
        binder, outside, inside = scope
        for name in outside:
            if not _aeq(getattr(a, name), getattr(b, name), ea, eb, levels):
                return False
        ia, ib = _bind(ea, eb, getattr(a, binder), getattr(b, binder), levels)
        return all(_aeq(getattr(a, n), getattr(b, n), ia, ib, levels) for n in inside)
    for f in fields(a):
        if not f.compare:
            continue
        if not _aeq(getattr(a, f.name), getattr(b, f.name), ea, eb, levels):
            return False
    return True
