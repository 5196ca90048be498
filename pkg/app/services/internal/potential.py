# app/services/internal/potential.py

"""
Potential functions: well-formedness, evaluation on values, substitution and
simplification to a normal form over measure atoms.

The normal form of an arithmetic potential is a sum of rational multiples of
monomials whose factors are measure atoms (a PrimRec on a symbolic path) and
int-valued variable paths. It is computed with sympy polynomials and turned
back into a PotExpr with a deterministic term order.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import sympy as sp

from app.core.errors import UnboundVariable, UnresolvedBinder, WfError
from app.services.internal.syntax import (
    NAT_T,
    Add,
    Con,
    Const,
    Ctx,
    Ident,
    IndT,
    IntLit,
    IntT,
    Max2,
    MaxOver,
    Min2,
    MinOver,
    Mul,
    Op,
    Pair,
    PBranch,
    PotExpr,
    PosInf,
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
    TypeExpr,
    Var,
    ZERO,
    all_idents,
    fresh_name,
    free_vars,
    is_value,
    list_type,
    reduce_path,
    rename,
    substitute,
    tree_type,
)

logger = logging.getLogger(__name__)

INF = math.inf

type Extended = Fraction | float
type MeasureEnv = dict[Ident, Term]


# --- Shipped Measures ---


def _length_template() -> PrimRec:
    me, x0, x1 = Ident("length"), Ident("x0"), Ident("x1")
    return PrimRec(
        me,
        Var(Ident("_")),
        (
            PBranch(0, (x0,), ZERO),
            PBranch(1, (x0, x1), Add(Const(Fraction(1)), Recur(me, Var(x1)))),
        ),
        name="length",
        signature=list_type(IntT()).signature(),
    )


def _nat_template() -> PrimRec:
    me, x0, x1 = Ident("nat"), Ident("x0"), Ident("x1")
    return PrimRec(
        me,
        Var(Ident("_")),
        (
            PBranch(0, (x0,), ZERO),
            PBranch(1, (x0, x1), Add(Const(Fraction(1)), Recur(me, Var(x1)))),
        ),
        name="nat",
        signature=NAT_T.signature(),
    )


def _size_template() -> PrimRec:
    me, x0, x1, x2 = Ident("size"), Ident("x0"), Ident("x1"), Ident("x2")
    body = Add(Add(Const(Fraction(1)), Recur(me, Var(x1))), Recur(me, Var(x2)))
    return PrimRec(
        me,
        Var(Ident("_")),
        (PBranch(0, (x0,), ZERO), PBranch(1, (x0, x1, x2), body)),
        name="size",
        signature=tree_type(IntT()).signature(),
    )


BUILTIN_MEASURES: dict[str, PrimRec] = {
    "length": _length_template(),
    "nat": _nat_template(),
    "size": _size_template(),
}


def apply_measure(template: PrimRec, scrutinee: Term) -> PrimRec:
    return replace(template, scrutinee=scrutinee)


def length(t: Term | Ident) -> PrimRec:
    return apply_measure(BUILTIN_MEASURES["length"], Var(t) if isinstance(t, Ident) else t)


def nat(t: Term | Ident) -> PrimRec:
    return apply_measure(BUILTIN_MEASURES["nat"], Var(t) if isinstance(t, Ident) else t)


# --- Generic Helpers ---


def map_children(f: PotExpr, fn) -> PotExpr:
    match f:
        case Add(l, r):
            return Add(fn(l), fn(r))
        case Sub(l, r):
            return Sub(fn(l), fn(r))
        case Mul(l, r):
            return Mul(fn(l), fn(r))
        case Min2(l, r):
            return Min2(fn(l), fn(r))
        case Max2(l, r):
            return Max2(fn(l), fn(r))
        case Scale(q, body):
            return Scale(q, fn(body))
        case Pow(base, k):
            return Pow(fn(base), k)
        case MinOver(x, dom, body):
            return MinOver(x, dom, fn(body))
        case MaxOver(x, dom, body):
            return MaxOver(x, dom, fn(body))
        case PrimRec():
            return replace(
                f, branches=tuple(PBranch(b.index, b.binders, fn(b.body), b.name) for b in f.branches)
            )
    return f


def substitute_simultaneous(s, mapping: dict[Ident, Term]):
    """Substitutes every key at once, so values never see each other's keys."""
    if not mapping:
        return s
    avoid = set(all_idents(s, *mapping.values())) | set(mapping)
    temps = {}
    for x in mapping:
        tmp = fresh_name(f"{x.name}'", avoid)
        avoid.add(tmp)
        temps[x] = tmp
        s = rename(s, x, tmp)
    for x, v in mapping.items():
        s = substitute(s, temps[x], v)
    return s


def subst_potential(f: PotExpr, x: Ident, pv: Term) -> PotExpr:
    """Re-roots every path at x onto the pre-value pv, pushing projections into pairs."""
    return substitute(f, x, pv)


# --- Types of Pre-Values in Potentials ---


def _ctx_lookup(omega: Ctx, gamma: Ctx, x: Ident) -> TypeExpr | None:
    found = gamma.lookup(x)
    return found if found is not None else omega.lookup(x)


def prevalue_type(t: Term, omega: Ctx, gamma: Ctx) -> TypeExpr | None:
    match t:
        case Var(x):
            return _ctx_lookup(omega, gamma, x)
        case IntLit():
            return IntT()
        case Op(name, args):
            if name == "<":
                return None
            if all(isinstance(prevalue_type(a, omega, gamma), IntT) for a in args):
                return IntT()
            return None
        case Proj1(body):
            inner = prevalue_type(body, omega, gamma)
            return inner.left if isinstance(inner, ProdT) else None
        case Proj2(body):
            inner = prevalue_type(body, omega, gamma)
            return inner.right if isinstance(inner, ProdT) else None
        case Pair(l, r):
            lt, rt = prevalue_type(l, omega, gamma), prevalue_type(r, omega, gamma)
            return ProdT(lt, rt) if lt is not None and rt is not None else None
        case Con(ind, _, _, _):
            return ind
    return None


# --- Well-Formedness ---


def wf_potential(omega: Ctx, gamma: Ctx, f: PotExpr) -> None:
    """Raises WfError unless f is derivable by the potential-function rules."""
    _wf(omega, gamma, f, ())


def _show(f) -> str:
    from app.services.internal.render import show

    return show(f)


def _wf(omega: Ctx, gamma: Ctx, f: PotExpr, recursion: tuple) -> None:
    match f:
        case Const() | PosInf():
            return
        case Ref(term):
            if not isinstance(prevalue_type(term, omega, gamma), IntT):
                raise WfError("PInt", _show(f), "not an int-typed variable of the contexts")
        case Add(l, r) | Sub(l, r) | Min2(l, r) | Max2(l, r):
            _wf(omega, gamma, l, recursion)
            _wf(omega, gamma, r, recursion)
        case Scale(_, body):
            _wf(omega, gamma, body, recursion)
        case Mul(l, r):
            shared = free_vars(l) & free_vars(r)
            if shared:
                names = ", ".join(sorted(str(x) for x in shared))
                raise WfError("POp-Non-Linear", _show(f), f"factors share {names}")
            _wf(omega, gamma, l, recursion)
            _wf(omega, gamma, r, recursion)
        case Pow(base, k):
            if k < 0:
                raise WfError("POp-Non-Linear", _show(f), "negative exponent")
            _wf(omega, gamma, base, recursion)
        case MinOver(x, dom, body) | MaxOver(x, dom, body):
            _wf(omega.remove(x).extend(x, dom), gamma.remove(x), body, recursion)
        case PrimRec(me, scrutinee, branches):
            ind = prevalue_type(scrutinee, omega, gamma)
            if not isinstance(ind, IndT):
                raise WfError("PCons", _show(f), "scrutinee is not an inductive value")
            if f.signature and f.signature != ind.signature():
                raise WfError("PCons", _show(f), "measure does not match the datatype")
            if sorted(b.index for b in branches) != list(range(len(ind.ctors))):
                raise WfError("PCons", _show(f), "one branch per constructor is required")
            for branch in branches:
                ctor = ind.ctors[branch.index]
                if len(branch.binders) != 1 + ctor.copies:
                    raise WfError("PCons", _show(f), f"{ctor.name} binds {1 + ctor.copies} names")
                inner = omega
                for b in branch.binders:
                    inner = inner.remove(b)
                inner = inner.extend(branch.binders[0], ctor.content)
                for b in branch.binders[1:]:
                    inner = inner.extend(b, ind)
                g = gamma
                for b in branch.binders:
                    g = g.remove(b)
                _wf(inner, g, branch.body, recursion + ((me, branch.binders[1:]),))
        case Recur(fn, arg):
            for me, allowed in reversed(recursion):
                if me == fn:
                    if not (isinstance(arg, Var) and arg.ident in allowed):
                        raise WfError("PCons", _show(f), "recursion must descend structurally")
                    return
            raise WfError("PCons", _show(f), f"{fn} is not an enclosing measure")
        case _:
            raise WfError("PConst", _show(f), "unknown potential form")


# --- Evaluation ---


def _eval_term(t: Term, env: MeasureEnv) -> Term:
    match t:
        case Var(x):
            if x not in env:
                raise UnboundVariable(f"{x} is not bound in the measure environment")
            return env[x]
        case IntLit():
            return t
        case Op(name, args):
            values = [_eval_term(a, env) for a in args]
            from app.services.internal.evaluator import apply_operator

            return apply_operator(name, values)
        case Proj1(body):
            inner = _eval_term(body, env)
            return inner.left
        case Proj2(body):
            inner = _eval_term(body, env)
            return inner.right
        case Pair(l, r):
            return Pair(_eval_term(l, env), _eval_term(r, env))
        case Con(ind, i, content, rec_args):
            return Con(ind, i, _eval_term(content, env), tuple(_eval_term(a, env) for a in rec_args))
    if is_value(t):
        return t
    raise UnboundVariable(f"cannot evaluate {t!r} inside a potential")


def _mul(a: Extended, b: Extended) -> Extended:
    if a == 0 or b == 0:
        return Fraction(0)
    return a * b


def eval_potential(f: PotExpr, env: MeasureEnv | None = None) -> Extended:
    """Evaluates f to a rational or +inf; env binds every free variable to a value."""
    return _eval(f, dict(env or {}), {})


def _eval(f: PotExpr, env: MeasureEnv, frames: dict) -> Extended:
    match f:
        case Const(value):
            return value
        case PosInf():
            return INF
        case Ref(term):
            value = _eval_term(term, env)
            if not isinstance(value, IntLit):
                raise UnboundVariable(f"{_show(f)} does not evaluate to an integer")
            return Fraction(value.value)
        case Add(l, r):
            return _eval(l, env, frames) + _eval(r, env, frames)
        case Sub(l, r):
            left = _eval(l, env, frames)
            return INF if left == INF else left - _eval(r, env, frames)
        case Scale(q, body):
            return _mul(q, _eval(body, env, frames))
        case Mul(l, r):
            return _mul(_eval(l, env, frames), _eval(r, env, frames))
        case Pow(base, k):
            value = _eval(base, env, frames)
            return value**k if k else Fraction(1)
        case Min2(l, r):
            return min(_eval(l, env, frames), _eval(r, env, frames))
        case Max2(l, r):
            return max(_eval(l, env, frames), _eval(r, env, frames))
        case MinOver() | MaxOver():
            raise UnresolvedBinder(f"{_show(f)} must be simplified away before evaluation")
        case PrimRec():
            return _eval_primrec(f, _eval_term(f.scrutinee, env), env, frames)
        case Recur(fn, arg):
            if fn not in frames:
                raise UnboundVariable(f"{fn} is not an enclosing measure")
            return _eval_primrec(frames[fn], _eval_term(arg, env), env, frames)
    raise TypeError(f"eval_potential: unsupported node {type(f).__name__}")


def _eval_primrec(prim: PrimRec, value: Term, env: MeasureEnv, frames: dict) -> Extended:
    if not isinstance(value, Con):
        raise UnboundVariable(f"measure {prim.name or prim.self_binder} applied to a non-constructor")
    branch = prim.branch_for(value.index)
    if branch is None:
        raise UnboundVariable(f"measure {prim.name or prim.self_binder} has no branch {value.index}")
    inner = dict(env)
    for binder, part in zip(branch.binders, (value.content,) + value.rec_args):
        inner[binder] = part
    return _eval(branch.body, inner, {**frames, prim.self_binder: prim})


# --- Unfolding ---


def _tie(body: PotExpr, prim: PrimRec) -> PotExpr:
    """Replaces self-calls of prim in body by prim applied to the call's argument."""
    match body:
        case Recur(fn, arg) if fn == prim.self_binder:
            return replace(prim, scrutinee=arg)
        case PrimRec() if body.self_binder == prim.self_binder:
            return body
    return map_children(body, lambda child: _tie(child, prim))


def _ref_arith(t: Term) -> PotExpr:
    t = reduce_path(t)
    match t:
        case IntLit(value):
            return Const(Fraction(value))
        case Op("+", (a, b)):
            return Add(_ref_arith(a), _ref_arith(b))
        case Op("-", (a, b)):
            return Sub(_ref_arith(a), _ref_arith(b))
        case Op("*", (a, b)):
            return Mul(_ref_arith(a), _ref_arith(b))
    return Ref(t)


def unfold(f: PotExpr) -> PotExpr:
    """Unfolds every PrimRec whose scrutinee is a constructor pre-value."""
    match f:
        case Ref(term):
            return _ref_arith(term)
        case PrimRec(_, scrutinee, _) if isinstance(reduce_path(scrutinee), Con):
            value = reduce_path(scrutinee)
            branch = f.branch_for(value.index)
            if branch is None:
                return f
            body = _tie(branch.body, f)
            parts = (value.content,) + value.rec_args
            body = substitute_simultaneous(body, dict(zip(branch.binders, parts)))
            return unfold(body)
        case PrimRec():
            if all(_norm(unfold(b.body)) == ZERO for b in f.branches):
                return ZERO
            scrutinee = reduce_path(f.scrutinee)
            return replace(f, scrutinee=scrutinee) if scrutinee != f.scrutinee else f
    return map_children(f, unfold)


# --- Structural Nonnegativity ---


def is_nonneg(f: PotExpr) -> bool:
    """Sufficient syntactic test that f is nonnegative under every instantiation."""
    match f:
        case Const(value):
            return value >= 0
        case PosInf() | Recur():
            return True
        case Ref():
            return False
        case Add(l, r) | Mul(l, r) | Min2(l, r):
            return is_nonneg(l) and is_nonneg(r)
        case Max2(l, r):
            return is_nonneg(l) or is_nonneg(r)
        case Scale(q, body):
            return q >= 0 and is_nonneg(body)
        case Pow(base, k):
            return k % 2 == 0 or is_nonneg(base)
        case MinOver(_, _, body) | MaxOver(_, _, body):
            return is_nonneg(body)
        case PrimRec():
            return all(is_nonneg(b.body) for b in f.branches)
        case Sub():
            return _poly_nonneg(f)
    return False


def _poly_nonneg(f: PotExpr) -> bool:
    table = AtomTable()
    expr = table.to_sympy(unfold(f))
    return expr is not None and table.coefficients_nonneg(expr)


# --- Canonical Atoms ---


def canonical(f: PotExpr, counter=None) -> PotExpr:
    """Renames every bound name of f to a positional name, so alpha-variants coincide."""
    counter = counter if counter is not None else itertools.count()
    match f:
        case PrimRec(me, scrutinee, branches, name, signature):
            new_me = Ident("%", next(counter))
            new_branches = []
            for branch in branches:
                body = rename(branch.body, me, new_me) if me != new_me else branch.body
                binders = []
                for b in branch.binders:
                    nb = Ident("%", next(counter))
                    body = rename(body, b, nb)
                    binders.append(nb)
                new_branches.append(PBranch(branch.index, tuple(binders), canonical(body, counter), branch.name))
            return PrimRec(new_me, scrutinee, tuple(new_branches), name, signature)
        case MinOver(x, dom, body) | MaxOver(x, dom, body):
            nb = Ident("%", next(counter))
            node = type(f)(nb, dom, canonical(rename(body, x, nb), counter))
            return node
    return map_children(f, lambda child: canonical(child, counter))


@dataclass
class AtomTable:
    """Maps measure atoms and int paths to sympy symbols."""

    symbols: dict[object, sp.Symbol] = field(default_factory=dict)
    atoms: dict[sp.Symbol, PotExpr] = field(default_factory=dict)
    nonneg: dict[sp.Symbol, bool] = field(default_factory=dict)

    def symbol_for(self, atom: PotExpr) -> sp.Symbol:
        if isinstance(atom, PrimRec):
            atom = replace(
                atom,
                branches=tuple(
                    PBranch(b.index, b.binders, _norm(b.body), b.name) for b in atom.branches
                ),
            )
            key = canonical(atom)
        else:
            key = atom
        symbol = self.symbols.get(key)
        if symbol is None:
            symbol = sp.Symbol(f"a{len(self.symbols)}")
            self.symbols[key] = symbol
            self.atoms[symbol] = atom
            self.nonneg[symbol] = isinstance(atom, PrimRec) and is_nonneg(atom)
        return symbol

    def roots(self, symbol: sp.Symbol) -> frozenset[Ident]:
        return free_vars(self.atoms[symbol])

    def to_sympy(self, f: PotExpr) -> sp.Expr | None:
        """Converts an unfolded arithmetic potential; None when it is not polynomial."""
        match f:
            case Const(value):
                return sp.Rational(value.numerator, value.denominator)
            case Ref():
                return self.symbol_for(f)
            case PrimRec():
                return self.symbol_for(f)
            case Add(l, r) | Sub(l, r) | Mul(l, r):
                left, right = self.to_sympy(l), self.to_sympy(r)
                if left is None or right is None:
                    return None
                if isinstance(f, Add):
                    return left + right
                if isinstance(f, Sub):
                    return left - right
                return left * right
            case Scale(q, body):
                inner = self.to_sympy(body)
                return None if inner is None else sp.Rational(q.numerator, q.denominator) * inner
            case Pow(base, k):
                inner = self.to_sympy(base)
                return None if inner is None else inner**k
        return None

    def terms(self, expr: sp.Expr) -> list[tuple[dict[sp.Symbol, int], Fraction]]:
        """Expanded (monomial, coefficient) pairs in a deterministic order."""
        expr = sp.expand(expr)
        gens = sorted(expr.free_symbols, key=lambda s: s.name)
        if not gens:
            value = sp.Rational(expr)
            return [({}, Fraction(int(value.p), int(value.q)))] if value != 0 else []
        poly = sp.Poly(expr, *gens)
        out = []
        for powers, coeff in poly.terms():
            rational = sp.Rational(coeff)
            monomial = {g: k for g, k in zip(gens, powers) if k}
            out.append((monomial, Fraction(int(rational.p), int(rational.q))))
        return sorted(out, key=lambda item: self._order_key(item[0]))

    def _order_key(self, monomial: dict[sp.Symbol, int]):
        from app.services.internal.render import show

        degree = sum(monomial.values())
        names = tuple(sorted((show(self.atoms[s]), k) for s, k in monomial.items()))
        return (degree == 0, -degree, names)

    def coefficients_nonneg(self, expr: sp.Expr) -> bool:
        """Every monomial is provably nonnegative: nonneg coefficient, signed factors squared."""
        for monomial, coeff in self.terms(expr):
            if coeff < 0:
                return False
            for symbol, k in monomial.items():
                if not self.nonneg[symbol] and k % 2:
                    return False
        return True

    def from_sympy(self, expr: sp.Expr) -> PotExpr:
        parts: list[PotExpr] = []
        for monomial, coeff in self.terms(expr):
            factors: list[PotExpr] = []
            for symbol, k in sorted(monomial.items(), key=lambda item: self._atom_name(item[0])):
                atom = self.atoms[symbol]
                factors.append(atom if k == 1 else Pow(atom, k))
            if not factors:
                parts.append(Const(coeff))
                continue
            product = factors[0]
            for extra in factors[1:]:
                product = Mul(product, extra)
            parts.append(product if coeff == 1 else Scale(coeff, product))
        if not parts:
            return ZERO
        total = parts[0]
        for part in parts[1:]:
            if isinstance(part, Scale) and part.coef < 0:
                total = Sub(total, part.body if part.coef == -1 else Scale(-part.coef, part.body))
            elif isinstance(part, Const) and part.value < 0:
                total = Sub(total, Const(-part.value))
            else:
                total = Add(total, part)
        return total

    def select(self, expr: sp.Expr, keep) -> PotExpr:
        """The monomials of expr accepted by keep(monomial, coefficient)."""
        chosen = sp.Integer(0)
        for monomial, coeff in self.terms(expr):
            if keep(monomial, coeff):
                term = sp.Rational(coeff.numerator, coeff.denominator)
                for symbol, k in monomial.items():
                    term *= symbol**k
                chosen += term
        return self.from_sympy(chosen)

    def _atom_name(self, symbol: sp.Symbol) -> str:
        from app.services.internal.render import show

        return show(self.atoms[symbol])


# --- Simplification ---


def _has_non_poly(f: PotExpr) -> bool:
    match f:
        case PosInf() | Min2() | Max2() | MinOver() | MaxOver() | Recur():
            return True
        case Add(l, r) | Sub(l, r) | Mul(l, r):
            return _has_non_poly(l) or _has_non_poly(r)
        case Scale(_, body) | Pow(body, _):
            return _has_non_poly(body)
    return False


def simplify(f: PotExpr) -> PotExpr:
    """
    Normal form used by the solver: constructor unfolding, polynomial
    normalization over measure atoms, +inf absorption and elimination of
    Min/Max binders that are unused or sit over nonnegative atoms.
    """
    return _norm(unfold(f))


def _norm(f: PotExpr) -> PotExpr:
    if not _has_non_poly(f):
        table = AtomTable()
        expr = table.to_sympy(f)
        return f if expr is None else table.from_sympy(expr)
    f = map_children(f, _norm)
    match f:
        case Add(PosInf(), _) | Add(_, PosInf()) | Sub(PosInf(), _):
            return PosInf()
        case Scale(q, PosInf()):
            return PosInf() if q > 0 else (ZERO if q == 0 else f)
        case Mul(PosInf(), Const(v)) | Mul(Const(v), PosInf()):
            return ZERO if v == 0 else (PosInf() if v > 0 else f)
        case Mul(PosInf(), PosInf()):
            return PosInf()
        case Min2(l, r):
            if isinstance(l, PosInf):
                return r
            if isinstance(r, PosInf):
                return l
            if isinstance(l, Const) and isinstance(r, Const):
                return l if l.value <= r.value else r
            if l == r:
                return l
            return f
        case Max2(l, r):
            if isinstance(l, PosInf) or isinstance(r, PosInf):
                return PosInf()
            if isinstance(l, Const) and isinstance(r, Const):
                return l if l.value >= r.value else r
            if l == r:
                return l
            return f
        case MinOver() | MaxOver():
            return eliminate_binder(f)
    return f


def eliminate_binder(f: MinOver | MaxOver) -> PotExpr:
    """
    Drops an unused binder. Over nonnegative atoms the binder is resolved by
    zeroing them. That is exact when every bound atom reaches 0 on some value
    of the domain (length at nil). For measures whose least value is positive,
    such as a leaf count, it is only a one-sided bound: below the true minimum
    for MinOver, above the true maximum for MaxOver. The checker places
    MinOver only in outputs and MaxOver only in borrowed amounts, where these
    bounds are sound. The solver refuses to decide a leaf that still holds a
    binder, so it never relies on the approximation.
    """
    x, body = f.binder, f.body
    if x not in free_vars(body):
        return body
    if isinstance(body, PosInf):
        return body
    if _has_non_poly(body):
        return f
    table = AtomTable()
    expr = table.to_sympy(body)
    if expr is None:
        return f
    bound = [s for s in expr.free_symbols if x in table.roots(s)]
    if any(not table.nonneg[s] for s in bound):
        return f
    minimize = isinstance(f, MinOver)
    collected = sp.Poly(sp.expand(expr), *sorted(bound, key=lambda s: s.name))
    for powers, coeff in collected.terms():
        if not any(powers):
            continue
        coeff_expr = coeff if minimize else -coeff
        if not table.coefficients_nonneg(coeff_expr):
            return f
    zeroed = sp.expand(expr).subs({s: 0 for s in bound})
    return table.from_sympy(zeroed)


def closed_value(f: PotExpr) -> Extended | None:
    """The value of a closed potential after simplification, or None."""
    try:
        return eval_potential(simplify(f), {})
    except (UnboundVariable, UnresolvedBinder):
        return None


def is_polynomial(f: PotExpr) -> bool:
    """No +inf, Min/Max or open recursion anywhere in f."""
    return not _has_non_poly(f)
