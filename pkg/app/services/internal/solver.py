# app/services/internal/solver.py

"""
Sound, incomplete entailment checker for Omega | Gamma |= f1 <= f2.

The difference rhs - lhs is unfolded and its Min/Max structure is lifted to
the top. Min nodes must hold on every side, Max nodes on one side, MinOver
binders become universally quantified variables and MaxOver binders are
instantiated with the smallest values of their domain. The remaining
polynomials over measure atoms are decided by their coefficients; when
that fails the checker splits an inductive variable into its constructors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from app.core.config import Settings, settings as default_settings
from app.core.errors import ConstraintUnknown, EnumerationOverflow
from app.services.internal.potential import (
    AtomTable,
    map_children,
    simplify,
    unfold,
)
from app.services.internal.syntax import (
    Add,
    Con,
    Const,
    Ctx,
    Ident,
    IndT,
    Max2,
    MaxOver,
    Min2,
    MinOver,
    Mul,
    Pair,
    PosInf,
    PotExpr,
    PrimRec,
    ProdT,
    Proj1,
    Proj2,
    Ref,
    Scale,
    Sub,
    TypeExpr,
    Var,
    ZERO,
    all_idents,
    alpha_eq,
    fresh_name,
    free_vars,
    path_root,
    rename,
    substitute,
)

logger = logging.getLogger(__name__)


class Relation(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="
    NONNEG = ">=0"


@dataclass(frozen=True)
class EntailmentQuery:
    omega: Ctx
    gamma: Ctx
    lhs: PotExpr
    rhs: PotExpr = ZERO
    relation: Relation = Relation.LE


@dataclass(frozen=True)
class Proven:
    witness: PotExpr


@dataclass(frozen=True)
class Unknown:
    reason: str


@dataclass(frozen=True)
class Refuted:
    counterexample: dict


@dataclass(frozen=True)
class Consistent:
    checked: int


type Verdict = Proven | Unknown | Refuted


# --- Lifting Min/Max to the Top ---


def _scale(q: Fraction, f: PotExpr) -> PotExpr:
    match f:
        case Min2(l, r):
            node = Min2 if q >= 0 else Max2
            return node(_scale(q, l), _scale(q, r))
        case Max2(l, r):
            node = Max2 if q >= 0 else Min2
            return node(_scale(q, l), _scale(q, r))
        case MinOver(x, dom, body):
            node = MinOver if q >= 0 else MaxOver
            return node(x, dom, _scale(q, body))
        case MaxOver(x, dom, body):
            node = MaxOver if q >= 0 else MinOver
            return node(x, dom, _scale(q, body))
        case PosInf() if q > 0:
            return f
    if q == 1:
        return f
    if q == 0:
        return ZERO
    return Scale(q, f)


def _is_choice(f: PotExpr) -> bool:
    return isinstance(f, (Min2, Max2, MinOver, MaxOver))


def _add(a: PotExpr, b: PotExpr) -> PotExpr:
    if _is_choice(b) and not _is_choice(a):
        a, b = b, a
    match a:
        case Min2(l, r) | Max2(l, r):
            return type(a)(_add(l, b), _add(r, b))
        case MinOver(x, dom, body) | MaxOver(x, dom, body):
            if x in free_vars(b):
                new = fresh_name(x.name, all_idents(a, b))
                body, x = rename(body, x, new), new
            return type(a)(x, dom, _add(body, b))
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Add(a, b)


def lift(f: PotExpr) -> PotExpr:
    """Pulls Min/Max nodes above sums, rational scalings and constant products."""
    match f:
        case Add(l, r):
            return _add(lift(l), lift(r))
        case Sub(l, r):
            return _add(lift(l), _scale(Fraction(-1), lift(r)))
        case Scale(q, body):
            return _scale(q, lift(body))
        case Mul(l, r):
            left, right = lift(l), lift(r)
            for factor, other in ((left, right), (right, left)):
                k = simplify(factor)
                if isinstance(k, Const):
                    return _scale(k.value, other)
            return Mul(left, right)
        case Min2() | Max2() | MinOver() | MaxOver():
            return map_children(f, lift)
    return f


# --- Search State ---


@dataclass
class _Search:
    depth: int
    splits: list[int]
    failures: list[str] = field(default_factory=list)

    def fail(self, reason: str) -> bool:
        self.failures.append(reason)
        return False


def _show(f) -> str:
    from app.services.internal.render import show

    return show(f)


# --- Decision Procedure ---


def _binder_inside(f) -> bool:
    """Whether a MinOver/MaxOver sits where lifting could not reach it."""
    if isinstance(f, (MinOver, MaxOver)):
        return True
    if isinstance(f, (PrimRec, Ref)):
        return False
    if isinstance(f, tuple):
        return any(_binder_inside(item) for item in f)
    if hasattr(f, "__dataclass_fields__"):
        return any(_binder_inside(getattr(f, name)) for name in f.__dataclass_fields__)
    return False


def _leaf(d: PotExpr, search: _Search) -> bool:
    if _binder_inside(d):
        return search.fail(f"Min/Max binder left inside {_show(d)}")
    normal = simplify(d)
    if isinstance(normal, PosInf):
        return True
    table = AtomTable()
    expr = table.to_sympy(normal)
    if expr is None:
        return search.fail(f"non-polynomial residue {_show(normal)}")
    if table.coefficients_nonneg(expr):
        return True
    return search.fail(f"normal form {_show(normal)} may be negative")


def _expand_products(d: PotExpr, env: dict[Ident, TypeExpr]) -> tuple[PotExpr, dict]:
    """Replaces product-typed roots of projection paths by pairs of fresh variables."""
    while True:
        target = None
        for root in sorted(_projected_roots(d), key=str):
            if isinstance(env.get(root), ProdT):
                target = root
                break
        if target is None:
            return d, env
        prod = env[target]
        avoid = all_idents(d) | set(env)
        left = fresh_name(f"{target.name}_1", avoid)
        right = fresh_name(f"{target.name}_2", avoid | {left})
        d = substitute(d, target, Pair(Var(left), Var(right)))
        env = {k: v for k, v in env.items() if k != target}
        env[left], env[right] = prod.left, prod.right


def _projected_roots(f) -> set[Ident]:
    found: set[Ident] = set()

    def walk(node):
        if isinstance(node, (Proj1, Proj2)):
            root = path_root(node)
            if root is not None:
                found.add(root)
            return
        if isinstance(node, tuple):
            for item in node:
                walk(item)
        elif hasattr(node, "__dataclass_fields__"):
            for name in node.__dataclass_fields__:
                walk(getattr(node, name))

    walk(f)
    return found


def _split_candidates(d: PotExpr, env: dict[Ident, TypeExpr]) -> list[Ident]:
    roots: set[Ident] = set()

    def walk(node):
        if isinstance(node, PrimRec):
            root = path_root(node.scrutinee)
            if root is not None and isinstance(env.get(root), IndT):
                roots.add(root)
        if isinstance(node, tuple):
            for item in node:
                walk(item)
        elif hasattr(node, "__dataclass_fields__"):
            for name in node.__dataclass_fields__:
                walk(getattr(node, name))

    walk(d)
    return sorted(roots, key=str)


def _minimal_values(dom: TypeExpr) -> list:
    from app.services.internal.oracle import enumerate_values

    try:
        return list(enumerate_values(dom, 0, (0,), limit=4))
    except EnumerationOverflow:
        return []


def _witnesses(dom: TypeExpr, env: dict[Ident, TypeExpr]) -> list:
    """Variables of the domain type first, then the smallest values."""
    same = [Var(y) for y, t in sorted(env.items(), key=lambda item: str(item[0])) if alpha_eq(t, dom)]
    return same + _minimal_values(dom)


def _prove(d: PotExpr, env: dict[Ident, TypeExpr], search: _Search) -> bool:
    d, env = _expand_products(lift(unfold(d)), env)
    d = lift(unfold(d))
    match d:
        case PosInf():
            return True
        case Min2(l, r):
            return _prove(l, env, search) and _prove(r, env, search)
        case MinOver(x, dom, body):
            new = fresh_name(x.name, all_idents(d) | set(env))
            return _prove(rename(body, x, new), {**env, new: dom}, search)
        case Max2(l, r):
            quick = _Search(0, [0], search.failures)
            if _prove(l, env, quick) or _prove(r, env, quick):
                return True
        case MaxOver(x, dom, body):
            quick = _Search(0, [0], search.failures)
            for witness in _witnesses(dom, env):
                if _prove(substitute(body, x, witness), env, quick):
                    return True
        case _:
            if _leaf(d, search):
                return True
    return _split(d, env, search)


def _split(d: PotExpr, env: dict[Ident, TypeExpr], search: _Search) -> bool:
    for var in _split_candidates(d, env):
        if search.splits[0] <= 0:
            return search.fail("case-split budget exhausted")
        search.splits[0] -= 1
        ind = env[var]
        branches = []
        for index, ctor in enumerate(ind.ctors):
            avoid = all_idents(d) | set(env)
            x0 = fresh_name(f"{var.name}_{ctor.name}", avoid)
            rec = []
            for _ in range(ctor.copies):
                rec.append(fresh_name(f"{var.name}_{ctor.name}", avoid | {x0, *rec}))
            value = Con(ind, index, Var(x0), tuple(Var(r) for r in rec))
            inner = {k: v for k, v in env.items() if k != var}
            inner[x0] = ctor.content
            for r in rec:
                inner[r] = ind
            branches.append((substitute(d, var, value), inner))
        open_branches = [
            (bd, benv) for bd, benv in branches if not _prove(bd, benv, _Search(0, [0], []))
        ]
        depth = search.depth
        if len(open_branches) > 1:
            if depth <= 0:
                search.fail(f"case split on {var} needs more depth")
                continue
            depth -= 1
        child = _Search(depth, search.splits, search.failures)
        if all(_prove(bd, benv, child) for bd, benv in open_branches):
            logger.debug(f"SOLVER: closed by case split on {var}")
            return True
    return False


def _env(q: EntailmentQuery) -> dict[Ident, TypeExpr]:
    env = {x: t for x, t in q.omega}
    env.update({x: t for x, t in q.gamma})
    return env


def _differences(q: EntailmentQuery) -> list[PotExpr]:
    match q.relation:
        case Relation.LE:
            return [Sub(q.rhs, q.lhs)]
        case Relation.GE:
            return [Sub(q.lhs, q.rhs)]
        case Relation.EQ:
            return [Sub(q.rhs, q.lhs), Sub(q.lhs, q.rhs)]
    return [q.lhs]


def entails_builtin(q: EntailmentQuery, cfg: Settings | None = None) -> Proven | Unknown:
    cfg = cfg or default_settings
    search = _Search(cfg.CASE_SPLIT_DEPTH, [cfg.CASE_SPLIT_CAP])
    differences = _differences(q)
    for d in differences:
        if not _prove(d, _env(q), search):
            reason = search.failures[0] if search.failures else "no proof found"
            logger.debug(f"SOLVER: unknown {_show(q.lhs)} {q.relation.value} {_show(q.rhs)}: {reason}")
            return Unknown(reason)
    return Proven(simplify(differences[0]))


def entails(q: EntailmentQuery, cfg: Settings | None = None) -> Proven | Unknown:
    """Decides the query with the configured solver; never answers Refuted."""
    cfg = cfg or default_settings
    if cfg.SOLVER == "external":
        from app.services.internal.external_solver import solve

        return solve(q, cfg)
    return entails_builtin(q, cfg)


def discharge(
    q: EntailmentQuery,
    rule: str,
    cfg: Settings | None = None,
    diagnostics: list[str] | None = None,
) -> Proven | Unknown:
    """
    Requires a Proven verdict. Unknown raises ConstraintUnknown, or is
    recorded as a warning when constraints are assumed.
    """
    cfg = cfg or default_settings
    verdict = entails(q, cfg)
    if isinstance(verdict, Proven):
        return verdict
    if cfg.ASSUME_CONSTRAINTS:
        from app.services.internal.render import show_query

        message = f"{rule}: assumed {show_query(q)} ({verdict.reason})"
        logger.warning(f"SOLVER: {message}")
        if diagnostics is not None:
            diagnostics.append(message)
        return verdict
    raise ConstraintUnknown(q, verdict.reason, rule)
