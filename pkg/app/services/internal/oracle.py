# app/services/internal/oracle.py

"""
Bounded-enumeration oracle for entailment queries.

Only a testing aid: it searches every instantiation up to a size bound, so
Consistent proves nothing beyond that bound. A value's size counts its
constructors with recursive positions (list length, tree nodes).
"""

from __future__ import annotations

import itertools
import logging
from fractions import Fraction
from functools import lru_cache

from app.core.config import Settings, settings as default_settings
from app.core.errors import EnumerationOverflow, UnboundVariable, UnresolvedBinder
from app.services.internal.potential import INF, eval_potential
from app.services.internal.solver import (
    Consistent,
    EntailmentQuery,
    Refuted,
    Relation,
)
from app.services.internal.syntax import (
    Add,
    Con,
    IndT,
    IntLit,
    IntT,
    Max2,
    MaxOver,
    Min2,
    MinOver,
    Mul,
    Pair,
    Pow,
    ProdT,
    Ref,
    Scale,
    Sub,
    TypeExpr,
    free_vars,
)

logger = logging.getLogger(__name__)


# --- Value Enumeration ---


@lru_cache(maxsize=4096)
def _sized_values(t: TypeExpr, bound: int, ints: tuple[int, ...]) -> tuple[tuple[object, int], ...]:
    """Every (value, size) of type t with size <= bound."""
    match t:
        case IntT():
            return tuple((IntLit(i), 0) for i in ints)
        case ProdT(l, r):
            out = []
            for lv, ls in _sized_values(l, bound, ints):
                for rv, rs in _sized_values(r, bound - ls, ints):
                    out.append((Pair(lv, rv), ls + rs))
            return tuple(out)
        case IndT(ctors):
            out = []
            for index, ctor in enumerate(ctors):
                own = 1 if ctor.copies else 0
                if own > bound:
                    continue
                for content, cs in _sized_values(ctor.content, bound - own, ints):
                    for rec, rs in _rec_args(t, ctor.copies, bound - own - cs, ints):
                        out.append((Con(t, index, content, rec), own + cs + rs))
            return tuple(out)
    raise EnumerationOverflow(f"values of {type(t).__name__} cannot be enumerated")


def _rec_args(ind: IndT, copies: int, bound: int, ints) -> list[tuple[tuple, int]]:
    if copies == 0:
        return [((), 0)]
    out = []
    for head, hs in _sized_values(ind, bound, ints):
        for tail, ts in _rec_args(ind, copies - 1, bound - hs, ints):
            out.append(((head,) + tail, hs + ts))
    return out


def enumerate_values(t: TypeExpr, size_bound: int, ints=(0,), limit: int | None = None):
    """Yields the values of t up to the size bound, smallest first."""
    values = sorted(_sized_values(t, size_bound, tuple(ints)), key=lambda item: item[1])
    for count, (value, _) in enumerate(values):
        if limit is not None and count >= limit:
            return
        yield value


# --- Bounded Evaluation ---


def _has_binders(f) -> bool:
    return any(isinstance(node, (MinOver, MaxOver)) for node in _nodes(f))


def _nodes(f):
    yield f
    if isinstance(f, tuple):
        for item in f:
            yield from _nodes(item)
    elif hasattr(f, "__dataclass_fields__"):
        for name in f.__dataclass_fields__:
            yield from _nodes(getattr(f, name))


def evaluate_bounded(f, env: dict, size_bound: int, ints) -> Fraction | float:
    """eval_potential, with MinOver/MaxOver ranging over values up to the bound."""
    if not _has_binders(f):
        return eval_potential(f, env)
    match f:
        case MinOver(x, dom, body) | MaxOver(x, dom, body):
            results = [
                evaluate_bounded(body, {**env, x: v}, size_bound, ints)
                for v in enumerate_values(dom, size_bound, ints)
            ]
            if not results:
                raise UnresolvedBinder(f"empty domain for {x}")
            return min(results) if isinstance(f, MinOver) else max(results)
        case Add(l, r):
            return evaluate_bounded(l, env, size_bound, ints) + evaluate_bounded(r, env, size_bound, ints)
        case Sub(l, r):
            left = evaluate_bounded(l, env, size_bound, ints)
            return INF if left == INF else left - evaluate_bounded(r, env, size_bound, ints)
        case Scale(q, body):
            value = evaluate_bounded(body, env, size_bound, ints)
            return Fraction(0) if q == 0 or value == 0 else q * value
        case Mul(l, r):
            a = evaluate_bounded(l, env, size_bound, ints)
            b = evaluate_bounded(r, env, size_bound, ints)
            return Fraction(0) if a == 0 or b == 0 else a * b
        case Pow(base, k):
            return evaluate_bounded(base, env, size_bound, ints) ** k if k else Fraction(1)
        case Min2(l, r):
            return min(evaluate_bounded(l, env, size_bound, ints), evaluate_bounded(r, env, size_bound, ints))
        case Max2(l, r):
            return max(evaluate_bounded(l, env, size_bound, ints), evaluate_bounded(r, env, size_bound, ints))
    raise UnresolvedBinder("a Min/Max binder sits inside a measure body")


def _holds(relation: Relation, lhs, rhs) -> bool:
    match relation:
        case Relation.LE:
            return lhs <= rhs
        case Relation.GE:
            return lhs >= rhs
        case Relation.EQ:
            return lhs == rhs
    return lhs >= 0


# --- Oracle ---


def oracle(
    q: EntailmentQuery, size_bound: int | None = None, cfg: Settings | None = None
) -> Consistent | Refuted:
    """Searches for an instantiation violating the query; raises EnumerationOverflow past MAX_ENUM."""
    cfg = cfg or default_settings
    bound = cfg.ORACLE_SIZE_BOUND if size_bound is None else size_bound
    sides = (q.lhs, q.rhs)
    # payloads only matter when some potential reads an integer
    uses_ints = any(isinstance(node, Ref) for node in _nodes(sides))
    ints = tuple(range(cfg.ORACLE_INT_LOW, cfg.ORACLE_INT_HIGH + 1)) if uses_ints else (0,)

    env_types = {x: t for x, t in q.omega}
    env_types.update({x: t for x, t in q.gamma})
    names = sorted(free_vars(q.lhs) | free_vars(q.rhs), key=str)
    domains = []
    for x in names:
        if x not in env_types:
            raise UnboundVariable(f"{x} is not bound by the query contexts")
        domains.append(_sized_values(env_types[x], bound, ints))

    total = 1
    for domain in domains:
        total *= max(len(domain), 1)
        if total > cfg.MAX_ENUM:
            raise EnumerationOverflow(f"more than {cfg.MAX_ENUM} instantiations")

    checked = 0
    for combo in itertools.product(*domains):
        env = {x: value for x, (value, _) in zip(names, combo)}
        lhs = evaluate_bounded(q.lhs, env, bound, ints)
        rhs = evaluate_bounded(q.rhs, env, bound, ints)
        checked += 1
        if not _holds(q.relation, lhs, rhs):
            logger.debug(f"SOLVER: oracle refuted after {checked} instantiations")
            return Refuted(env)
    return Consistent(checked)
