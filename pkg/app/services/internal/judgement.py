# app/services/internal/judgement.py

"""
Typing judgements Omega | Gamma | f1 |- e : [f2]_x T, declarative derivation
nodes and the algorithmic trace the typer records while inferring.

Also holds the structural helpers both the typer and the derivation validator
need: type and potential equality, arrow opening and Omega erasure.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from app.core.config import Settings
from app.services.internal.potential import simplify
from app.services.internal.solver import EntailmentQuery, Proven, Relation, entails
from app.services.internal.syntax import (
    Abs,
    ArrowT,
    Con,
    Ctx,
    Ident,
    IndT,
    IntT,
    Op,
    Pair,
    PolyT,
    PotAbs,
    PotExpr,
    ProdT,
    Term,
    TypeExpr,
    all_idents,
    alpha_eq,
    fresh_name,
    free_vars,
    is_path,
    is_prevalue,
    rename,
    substitute,
)


@dataclass(frozen=True)
class Judgement:
    omega: Ctx
    gamma: Ctx
    in_pot: PotExpr
    term: Term
    out_pot: PotExpr
    type: TypeExpr
    binder: Ident


@dataclass
class DerivationNode:
    rule: str
    conclusion: Judgement
    premises: tuple[DerivationNode, ...] = ()
    side_conditions: tuple[EntailmentQuery, ...] = ()
    params: dict = field(default_factory=dict)

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)

    def rules(self) -> list[str]:
        """Rule names in pre-order."""
        out = [self.rule]
        for p in self.premises:
            out.extend(p.rules())
        return out


@dataclass
class Trace:
    """One algorithmic step, with the declarative derivation it elaborates to."""

    rule: str
    premises: tuple[Trace, ...]
    derivation: DerivationNode
    queries: tuple[EntailmentQuery, ...] = ()

    @property
    def judgement(self) -> Judgement:
        return self.derivation.conclusion


# --- Contexts ---


def with_binding(ctx: Ctx, x: Ident, t: TypeExpr) -> Ctx:
    return ctx if x in ctx else ctx.extend(x, t)


def domain(*ctxs: Ctx) -> set[Ident]:
    names: set[Ident] = set()
    for ctx in ctxs:
        names.update(ctx.names())
    return names


def unused(j: Judgement, x: Ident) -> bool:
    """TErase's condition: x is not needed by the rest of the judgement."""
    used = (
        free_vars(j.omega.remove(x))
        | free_vars(j.gamma)
        | free_vars(j.in_pot)
        | (free_vars(j.out_pot) - {j.binder})
        | (free_vars(j.type) - {j.binder})
    )
    return x not in used


def erase_unused(j: Judgement) -> Judgement:
    """Drops every Omega binding nothing else mentions; idempotent."""
    changed = True
    while changed:
        changed = False
        for name, _ in reversed(j.omega.bindings):
            if unused(j, name):
                j = replace(j, omega=j.omega.remove(name))
                changed = True
                break
    return j


# --- Equality ---


def normalize_type(t: TypeExpr) -> TypeExpr:
    match t:
        case ArrowT(a, f1, t1, r, f2, t2):
            return ArrowT(a, simplify(f1), normalize_type(t1), r, simplify(f2), normalize_type(t2))
        case ProdT(l, r):
            return ProdT(normalize_type(l), normalize_type(r))
        case PolyT(x, dom, body):
            return PolyT(x, normalize_type(dom), normalize_type(body))
    return t


def types_equal(a: TypeExpr, b: TypeExpr) -> bool:
    if isinstance(a, (IntT, IndT)) or isinstance(b, (IntT, IndT)):
        return a == b
    return alpha_eq(a, b) or alpha_eq(normalize_type(a), normalize_type(b))


def pot_equal(a: PotExpr, b: PotExpr, omega: Ctx, gamma: Ctx, cfg: Settings) -> bool:
    """Syntactic after simplification, else entailment in both directions."""
    if a == b:
        return True
    sa, sb = simplify(a), simplify(b)
    if sa == sb or alpha_eq(sa, sb):
        return True
    verdict = entails(EntailmentQuery(omega, gamma, sa, sb, Relation.EQ), cfg)
    return isinstance(verdict, Proven)


# --- Arrows ---


def open_arrow(a: ArrowT, x: Ident) -> tuple[PotExpr, TypeExpr, Ident, PotExpr, TypeExpr]:
    """
    Names the argument x. A result binder equal to the argument binder marks a
    function returning its argument, so the result takes the name x as well.
    """
    arg, res = a.arg_binder, a.res_binder
    f1, t1, f2, t2 = a.arg_pot, a.arg_type, a.res_pot, a.res_type
    if arg == x:
        return f1, t1, res, f2, t2
    f1, t1 = rename(f1, arg, x), rename(t1, arg, x)
    if res == arg:
        return f1, t1, x, rename(f2, arg, x), rename(t2, arg, x)
    if res == x:
        new = fresh_name(res.name, all_idents(a) | {x})
        f2, t2, res = rename(f2, res, new), rename(t2, res, new), new
    return f1, t1, res, rename(f2, arg, x), rename(t2, arg, x)


def instantiate_arrow(a: ArrowT, pv: Term) -> tuple[PotExpr, TypeExpr, Ident, PotExpr, TypeExpr]:
    """Substitutes the pre-value argument into the arrow's potentials and result type."""
    arg, res = a.arg_binder, a.res_binder
    f1, t1 = substitute(a.arg_pot, arg, pv), substitute(a.arg_type, arg, pv)
    f2, t2 = a.res_pot, a.res_type
    if res == arg:
        return f1, t1, res, f2, t2
    if res in free_vars(pv):
        new = fresh_name(res.name, all_idents(a, pv))
        f2, t2, res = rename(f2, res, new), rename(t2, res, new), new
    return f1, t1, res, substitute(f2, arg, pv), substitute(t2, arg, pv)


def freshen_arrow(a: ArrowT, avoid: set[Ident]) -> ArrowT:
    """Renames the arrow's binders away from avoid."""
    arg, res = a.arg_binder, a.res_binder
    f1, t1, f2, t2 = a.arg_pot, a.arg_type, a.res_pot, a.res_type
    taken = set(avoid) | all_idents(a)
    if arg in avoid:
        new = fresh_name(arg.name, taken)
        taken.add(new)
        f1, t1 = rename(f1, arg, new), rename(t1, arg, new)
        f2, t2 = rename(f2, arg, new), rename(t2, arg, new)
        if res == arg:
            res = new
        arg = new
    if res != arg and res in avoid:
        new = fresh_name(res.name, taken)
        f2, t2, res = rename(f2, res, new), rename(t2, res, new), new
    return ArrowT(arg, f1, t1, res, f2, t2)


def rename_result(d: DerivationNode, new: Ident) -> Judgement:
    j = d.conclusion
    return replace(
        j,
        out_pot=simplify(rename(j.out_pot, j.binder, new)),
        type=rename(j.type, j.binder, new),
        binder=new,
    )


def _first_order(t: Term) -> bool:
    match t:
        case Abs() | PotAbs():
            return False
        case Op(name, args):
            return name != "<" and all(_first_order(a) for a in args)
        case Pair(l, r):
            return _first_order(l) and _first_order(r)
        case Con(_, _, content, rec_args):
            return _first_order(content) and all(_first_order(a) for a in rec_args)
    return True


def instantiable(t: Term) -> bool:
    """Arguments the application rule substitutes directly: paths and first-order pre-values."""
    return is_path(t) or (is_prevalue(t) and _first_order(t))
