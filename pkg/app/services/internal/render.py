# app/services/internal/render.py

"""Surface-syntax printer. Everything it prints parses back to an alpha-equal AST."""

from __future__ import annotations

from fractions import Fraction

from app.services.internal.syntax import (
    BOOL_T,
    NAT_T,
    UNIT_T,
    UNIT_V,
    Abs,
    Add,
    App,
    ArrowT,
    Con,
    Const,
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
    PolyT,
    PosInf,
    PotAbs,
    Pow,
    PrimRec,
    ProdT,
    Proj1,
    Proj2,
    Recur,
    Ref,
    Scale,
    Sub,
    Tick,
    Var,
    list_type,
    sum_type,
    tree_type,
)

# Default type arguments: constructors of these datatypes print without `<...>`.
DEFAULT_INDS = {
    "unit": UNIT_T,
    "false": BOOL_T,
    "true": BOOL_T,
    "zero": NAT_T,
    "succ": NAT_T,
    "nil": list_type(IntT()),
    "cons": list_type(IntT()),
    "leaf": tree_type(IntT()),
    "node": tree_type(IntT()),
    "left": sum_type(IntT(), IntT()),
    "right": sum_type(IntT(), IntT()),
}


def show(node) -> str:
    if node is None:
        return "_"
    if isinstance(node, Ident):
        return str(node)
    if isinstance(node, Ctx):
        return show_ctx(node)
    if isinstance(node, (IntT, ProdT, ArrowT, PolyT, IndT)):
        return show_type(node)
    if isinstance(node, (Const, PosInf, Ref, Add, Sub, Scale, Mul, Pow, PrimRec, Recur, MinOver, MaxOver, Min2, Max2)):
        return show_pot(node)
    if hasattr(node, "in_pot") and hasattr(node, "term"):
        return show_judgement(node)
    if hasattr(node, "lhs") and hasattr(node, "rhs"):
        return show_query(node)
    return show_term(node)


def show_ctx(ctx: Ctx) -> str:
    if not ctx.bindings:
        return "."
    return ", ".join(f"{x} : {show_type(t)}" for x, t in ctx.bindings)


def show_judgement(j) -> str:
    return (
        f"{show_ctx(j.omega)} | {show_ctx(j.gamma)} | {show_pot(j.in_pot)} |- "
        f"{show_term(j.term)} : [{show_pot(j.out_pot)}]_{j.binder} {show_type(j.type)}"
    )


def show_query(q) -> str:
    relation = getattr(q.relation, "value", q.relation)
    return (
        f"{show_ctx(q.omega)} | {show_ctx(q.gamma)} |= "
        f"{show_pot(q.lhs)} {relation} {show_pot(q.rhs)}"
    )


# --- Types ---


def recognize(ind: IndT) -> str | None:
    if ind == UNIT_T:
        return "Unit"
    if ind == BOOL_T:
        return "Bool"
    if ind == NAT_T:
        return "Nat"
    names = tuple(c.name for c in ind.ctors)
    if names == ("nil", "cons") and ind == list_type(ind.ctors[1].content):
        return f"List {_type_arg(ind.ctors[1].content)}"
    if names == ("leaf", "node") and ind == tree_type(ind.ctors[0].content):
        return f"Tree {_type_arg(ind.ctors[0].content)}"
    if names == ("left", "right") and ind == sum_type(ind.ctors[0].content, ind.ctors[1].content):
        return f"Sum {_type_arg(ind.ctors[0].content)} {_type_arg(ind.ctors[1].content)}"
    return None


def _type_arg(t) -> str:
    text = show_type(t)
    if isinstance(t, IntT) or (isinstance(t, IndT) and " " not in text) or text.startswith("("):
        return text
    return f"({text})"


def show_type(t) -> str:
    match t:
        case IntT():
            return "int"
        case ProdT(l, r):
            return f"({show_type(l)} * {show_type(r)})"
        case ArrowT(x, f1, t1, y, f2, t2):
            arg = show_type(t1)
            if isinstance(t1, (ArrowT, PolyT)):
                arg = f"({arg})"
            return f"[{show_pot(f1)}]_{x} {arg} -> [{show_pot(f2)}]_{y} {show_type(t2)}"
        case PolyT(x, dom, body):
            return f"Poly {x} : {_type_arg(dom)}. {show_type(body)}"
        case IndT(ctors):
            known = recognize(t)
            if known is not None:
                return known
            parts = " | ".join(f"{c.name}({show_type(c.content)}, {c.copies})" for c in ctors)
            return f"ind{{{parts}}}"
    raise TypeError(f"show_type: unsupported node {type(t).__name__}")


# --- Terms ---


def _atomic(t) -> bool:
    return isinstance(t, (Var, IntLit, Pair, Con)) or (isinstance(t, IntLit) and t.value >= 0)


def _paren(t) -> str:
    text = show_term(t)
    if _atomic(t) and not (isinstance(t, IntLit) and t.value < 0):
        return text
    if text.startswith("(") and text.endswith(")") and _balanced(text[1:-1]):
        return text
    return f"({text})"


def _balanced(text: str) -> bool:
    depth = 0
    for ch in text:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def _list_items(t: Con):
    items = []
    while isinstance(t, Con) and t.ind == DEFAULT_INDS["cons"]:
        if t.index == 0 and t.content == UNIT_V:
            return items
        if t.index != 1:
            return None
        items.append(t.content)
        t = t.rec_args[0]
    return None


def show_con(t: Con) -> str:
    items = _list_items(t)
    if items is not None:
        return "[" + ", ".join(show_term(i) for i in items) + "]"
    if t == UNIT_V:
        return "unit"
    ctor = t.ind.ctors[t.index]
    head = ctor.name
    if DEFAULT_INDS.get(ctor.name) != t.ind:
        head = f"{ctor.name}<{show_type(t.ind)}>"
    args = []
    if not (ctor.content == UNIT_T and t.content == UNIT_V):
        args.append(show_term(t.content))
    args.extend(show_term(a) for a in t.rec_args)
    return f"{head}({', '.join(args)})" if args else head


def show_term(t) -> str:
    match t:
        case Var(x):
            return str(x)
        case IntLit(value):
            return str(value) if value >= 0 else f"({value})"
        case Op(name, (a, b)):
            return f"({_paren(a)} {name} {_paren(b)})"
        case Op(name, args):
            return f"{name}({', '.join(show_term(a) for a in args)})"
        case PotAbs(x, dom, body):
            return f"(Lam {x} : {_type_arg(dom)}. {show_term(body)})"
        case Abs(x, None, body):
            return f"(fun {x}. {show_term(body)})"
        case Abs(x, ann, body):
            return f"(fun {x} : {_type_arg(ann)}. {show_term(body)})"
        case App(fn, arg):
            head = show_term(fn) if isinstance(fn, (App, Var)) else _paren(fn)
            return f"{head} {_paren(arg)}"
        case Pair(l, r):
            return f"({show_term(l)}, {show_term(r)})"
        case Proj1(body):
            return f"pi1 {_paren(body)}"
        case Proj2(body):
            return f"pi2 {_paren(body)}"
        case Fix(x, ann, body):
            return f"(fix {x} : {_type_arg(ann)}. {show_term(body)})"
        case Tick(amount, body):
            return f"(tick {amount} {_paren(body)})"
        case Let(x, bound, body):
            return f"(let {x} = {show_term(bound)} in {show_term(body)})"
        case Con():
            return show_con(t)
        case Matd(scrutinee, branches):
            parts = []
            for br in branches:
                name = br.name or f"#{br.index}"
                parts.append(f"{name}({', '.join(str(b) for b in br.binders)}) => {show_term(br.body)}")
            return f"(case {show_term(scrutinee)} of {' | '.join(parts)})"
    raise TypeError(f"show_term: unsupported node {type(t).__name__}")


# --- Potentials ---


def _rational(q: Fraction) -> str:
    text = str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
    return f"({text})" if q < 0 else text


def _pot_atom(f) -> str:
    text = show_pot(f)
    if isinstance(f, (Const, PosInf, Ref, PrimRec, Recur, Min2, Max2, Pow)):
        return text
    return f"({text})"


def show_pot(f) -> str:
    match f:
        case Const(value):
            return _rational(value)
        case PosInf():
            return "inf"
        case Ref(term):
            return show_term(term)
        case Add(l, r):
            return f"{show_pot(l)} + {show_pot(r) if not isinstance(r, (Add, Sub)) else _pot_atom(r)}"
        case Sub(l, r):
            right = show_pot(r) if isinstance(r, (Const, Ref, PrimRec, Mul, Scale, Pow)) else _pot_atom(r)
            return f"{show_pot(l)} - {right}"
        case Scale(q, body):
            return f"{_rational(q)} * {_pot_atom(body) if isinstance(body, (Add, Sub)) else show_pot(body)}"
        case Mul(l, r):
            left = show_pot(l) if isinstance(l, (Mul, Pow)) else _pot_atom(l)
            return f"{left} * {_pot_atom(r)}"
        case Pow(base, k):
            return f"{_pot_atom(base)}^{k}"
        case PrimRec(me, scrutinee, branches, name, _):
            if name:
                return f"{name}({show_term(scrutinee)})"
            parts = []
            for br in branches:
                label = br.name or f"#{br.index}"
                parts.append(f"{label}({', '.join(str(b) for b in br.binders)}) => {show_pot(br.body)}")
            return f"matd {me}({show_term(scrutinee)}) {{ {' | '.join(parts)} }}"
        case Recur(fn, arg):
            return f"{fn}({show_term(arg)})"
        case MinOver(x, dom, body):
            return f"(minover {x} : {_type_arg(dom)}. {show_pot(body)})"
        case MaxOver(x, dom, body):
            return f"(maxover {x} : {_type_arg(dom)}. {show_pot(body)})"
        case Min2(l, r):
            return f"min({show_pot(l)}, {show_pot(r)})"
        case Max2(l, r):
            return f"max({show_pot(l)}, {show_pot(r)})"
    raise TypeError(f"show_pot: unsupported node {type(f).__name__}")
