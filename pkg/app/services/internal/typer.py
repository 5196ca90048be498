# app/services/internal/typer.py

"""
Deterministic algorithmic typing with potential synthesis.

`infer` computes the minimal-input judgement of a term bottom-up. Every step
also builds the declarative derivation it stands for: borrowed potential
becomes a TRelax node, lowered outputs a TDrop node, and unused existentials
are erased where a lambda or fixpoint closes over them. Elaboration is then
just reading the derivation off the trace.

Expected types flow downwards (fixpoint and parameter annotations into
lambda bodies, argument types into lambdas applied on the spot); potentials
never do, they are only compared against the annotation at the lambda.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from app.core.config import Settings, settings as default_settings
from app.core.errors import ConstraintUnknown, TypingError
from app.services.internal.judgement import (
    DerivationNode,
    Judgement,
    Trace,
    domain,
    freshen_arrow,
    instantiable,
    instantiate_arrow,
    open_arrow,
    rename_result,
    types_equal,
    unused,
    with_binding,
)
from app.services.internal.potential import AtomTable, is_polynomial, simplify, unfold
from app.services.internal.render import show_judgement, show_term, show_type
from app.services.internal.solver import (
    EntailmentQuery,
    Proven,
    Relation,
    discharge,
    entails,
    lift,
)
from app.services.internal.syntax import (
    BOOL_T,
    EMPTY,
    OPERATORS,
    ZERO,
    Abs,
    Add,
    App,
    ArrowT,
    Con,
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
    Op,
    Pair,
    PBranch,
    PolyT,
    PosInf,
    PotAbs,
    PotExpr,
    PrimRec,
    ProdT,
    Proj1,
    Proj2,
    Sub,
    Term,
    Tick,
    TypeExpr,
    Var,
    all_idents,
    const,
    fresh_name,
    free_vars,
    pot_sum,
    reduce_path,
    rename,
    substitute,
    type_free_vars,
)

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    accepted: bool
    judgement: Judgement | None = None
    trace: Trace | None = None
    diagnostics: list[str] = field(default_factory=list)
    queries: tuple[EntailmentQuery, ...] = ()


# --- Small Helpers ---


def _binder_types(ind: IndT, index: int) -> tuple[TypeExpr, ...]:
    ctor = ind.ctors[index]
    return (ctor.content,) + (ind,) * ctor.copies


def _value_of(ind: IndT, index: int, binders: tuple[Ident, ...]) -> Con:
    return Con(ind, index, Var(binders[0]), tuple(Var(b) for b in binders[1:]))


def _leaves(f: PotExpr):
    match f:
        case Min2(l, r) | Max2(l, r):
            yield from _leaves(l)
            yield from _leaves(r)
        case MinOver(_, _, body) | MaxOver(_, _, body):
            yield from _leaves(body)
        case _:
            yield f


def _binder_part(f: PotExpr, b: Ident) -> PotExpr | None:
    """The positive monomials of the first polynomial piece of f that measure b."""
    for leaf in _leaves(lift(unfold(f))):
        if b not in free_vars(leaf) or not is_polynomial(leaf):
            continue
        table = AtomTable()
        expr = table.to_sympy(leaf)
        if expr is None:
            continue
        part = table.select(expr, lambda m, c: c > 0 and any(b in table.roots(s) for s in m))
        if part != ZERO:
            return part
    return None


def _constructor_argument(t, b: Ident) -> bool:
    """True when Var b appears directly as a constructor argument somewhere in t."""
    if isinstance(t, Con):
        if Var(b) in (t.content, *t.rec_args):
            return True
    if isinstance(t, tuple):
        return any(_constructor_argument(item, b) for item in t)
    if hasattr(t, "__dataclass_fields__") and not isinstance(t, (IndT, Ident)):
        return any(_constructor_argument(getattr(t, name), b) for name in t.__dataclass_fields__)
    return False


# --- The Typer ---


class Typer:
    """One inference session: settings, collected diagnostics and potential hints."""

    def __init__(self, cfg: Settings | None = None, reserved=frozenset()):
        self.cfg = cfg or default_settings
        self.diagnostics: list[str] = []
        # branch binder -> potential moved onto its occurrences as constructor argument
        self.hints: dict[Ident, PotExpr] = {}
        self.reserved: set[Ident] = set(reserved)

    # --- Names and Entailment ---

    def fresh(self, base: str, *scopes) -> Ident:
        name = fresh_name(base, self.reserved | all_idents(*scopes))
        self.reserved.add(name)
        return name

    def holds(self, omega: Ctx, gamma: Ctx, lhs, rhs=ZERO, relation=Relation.LE) -> bool:
        verdict = entails(EntailmentQuery(omega, gamma, lhs, rhs, relation), self.cfg)
        return isinstance(verdict, Proven)

    def require(self, omega: Ctx, gamma: Ctx, lhs, rhs, rule: str) -> EntailmentQuery:
        q = EntailmentQuery(omega, gamma, lhs, rhs)
        discharge(q, rule, self.cfg, self.diagnostics)
        return q

    def positive_part(self, omega: Ctx, gamma: Ctx, f: PotExpr) -> PotExpr:
        f = simplify(f)
        if f == ZERO:
            return ZERO
        if self.holds(omega, gamma, f, ZERO, Relation.NONNEG):
            return f
        if self.holds(omega, gamma, f, ZERO):
            return ZERO
        return Max2(f, ZERO)

    def max_of(self, omega: Ctx, gamma: Ctx, a: PotExpr, b: PotExpr) -> PotExpr:
        if self.holds(omega, gamma, a, b):
            return b
        if self.holds(omega, gamma, b, a):
            return a
        return Max2(a, b)

    def min_of(self, omega: Ctx, gamma: Ctx, a: PotExpr, b: PotExpr) -> PotExpr:
        if self.holds(omega, gamma, a, b):
            return a
        if self.holds(omega, gamma, b, a):
            return b
        return Min2(a, b)

    def fail(self, rule: str, e: Term, detail: str) -> TypingError:
        logger.info(f"TYPER-FAIL: {rule}: {detail}")
        return TypingError(rule, show_term(e), detail)

    # --- Declarative Building Blocks ---

    def relax(self, d: DerivationNode, amount: PotExpr) -> DerivationNode:
        amount = simplify(amount)
        if amount == ZERO:
            return d
        j = d.conclusion
        side = EntailmentQuery(j.omega, j.gamma, amount, ZERO, Relation.NONNEG)
        new = replace(
            j,
            in_pot=simplify(Add(j.in_pot, amount)),
            out_pot=simplify(Add(j.out_pot, amount)),
        )
        return DerivationNode("TRelax", new, (d,), (side,), {"amount": amount})

    def drop(self, d: DerivationNode, out: PotExpr) -> DerivationNode:
        j = d.conclusion
        out = simplify(out)
        if out == j.out_pot:
            return d
        side = EntailmentQuery(with_binding(j.omega, j.binder, j.type), j.gamma, out, j.out_pot)
        return DerivationNode("TDrop", replace(j, out_pot=out), (d,), (side,))

    def rename(self, d: DerivationNode, new: Ident) -> DerivationNode:
        if d.conclusion.binder == new:
            return d
        return DerivationNode("TRename", rename_result(d, new), (d,))

    def erase(self, d: DerivationNode, keep: Ctx) -> DerivationNode:
        """Erases the Omega entries outside keep that nothing mentions any more."""
        j = d.conclusion
        while True:
            target = next(
                (x for x, _ in reversed(j.omega.bindings) if x not in keep and unused(j, x)), None
            )
            if target is None:
                return d
            j = replace(j, omega=j.omega.remove(target))
            d = DerivationNode("TErase", j, (d,), (), {"erased": target})

    def forget_binder(self, d: DerivationNode) -> DerivationNode:
        """Lowers an output that talks about a result binder the conclusion is about to lose."""
        j = d.conclusion
        if j.binder in j.omega or j.binder in j.gamma or j.binder not in free_vars(j.out_pot):
            return d
        return self.drop(d, MinOver(j.binder, j.type, j.out_pot))

    @staticmethod
    def merged(omega: Ctx, *nodes: DerivationNode) -> Ctx:
        for node in nodes:
            omega = omega.merge(node.conclusion.omega)
        return omega

    # --- Entry ---

    def run(self, omega: Ctx, gamma: Ctx, e: Term, expected: TypeExpr | None = None) -> Trace:
        trace = self.infer(omega, gamma, e, expected)
        d = self.erase(trace.derivation, keep=omega)
        if d is not trace.derivation:
            trace = Trace("AErase", (trace,), d)
        logger.debug(f"TYPER: {show_judgement(trace.judgement)}")
        return trace

    def infer(self, omega: Ctx, gamma: Ctx, e: Term, want: TypeExpr | None = None) -> Trace:
        match e:
            case IntLit():
                trace = self._int(omega, gamma, e)
            case Var():
                trace = self._var(omega, gamma, e)
            case Op():
                trace = self._op(omega, gamma, e)
            case Abs():
                trace = self._abs(omega, gamma, e, want)
            case PotAbs():
                trace = self._pabs(omega, gamma, e, want)
            case Fix():
                trace = self._fix(omega, gamma, e)
            case App():
                trace = self._app(omega, gamma, e)
            case Pair():
                trace = self._pair(omega, gamma, e, want)
            case Proj1() | Proj2():
                trace = self._proj(omega, gamma, e)
            case Tick():
                trace = self._tick(omega, gamma, e, want)
            case Let():
                trace = self._let(omega, gamma, e, want)
            case Con():
                trace = self._con(omega, gamma, e)
            case Matd():
                trace = self._matd(omega, gamma, e, want)
            case _:
                raise TypingError("infer", repr(e), "unsupported term")
        found = trace.judgement.type
        if want is not None and not types_equal(found, want):
            raise self.fail(trace.rule, e, f"expected {show_type(want)}, found {show_type(found)}")
        return trace

    # --- Leaves ---

    def _int(self, omega: Ctx, gamma: Ctx, e: IntLit) -> Trace:
        j = Judgement(omega, gamma, ZERO, e, ZERO, IntT(), self.fresh("x", omega, gamma))
        return Trace("AInt", (), DerivationNode("TInt", j))

    def _var(self, omega: Ctx, gamma: Ctx, e: Var) -> Trace:
        t = gamma.lookup(e.ident)
        if t is None:
            raise self.fail("AVar", e, f"{e.ident} is not bound")
        j = Judgement(omega, gamma, ZERO, e, ZERO, t, e.ident)
        return Trace("AVar", (), DerivationNode("TVar", j))

    def _op(self, omega: Ctx, gamma: Ctx, e: Op) -> Trace:
        if e.name not in OPERATORS or len(e.args) != 2:
            raise self.fail("AOp", e, f"{e.name} is not a binary operator")
        traces = tuple(self.infer(omega, gamma, a, IntT()) for a in e.args)
        ds = tuple(self.forget_binder(t.derivation) for t in traces)
        omega_c = self.merged(omega, *ds)
        j = Judgement(
            omega_c,
            gamma,
            simplify(pot_sum(*(d.conclusion.in_pot for d in ds))),
            e,
            simplify(pot_sum(*(d.conclusion.out_pot for d in ds))),
            BOOL_T if e.name == "<" else IntT(),
            self.fresh("y", omega_c, gamma),
        )
        return Trace("AOp", traces, DerivationNode("TOp", j, ds))

    # --- Abstractions ---

    def _abs(self, omega: Ctx, gamma: Ctx, e: Abs, want, arg_type: TypeExpr | None = None) -> Trace:
        if isinstance(want, ArrowT):
            return self._abs_against(omega, gamma, e, want)
        x = e.binder
        t1 = e.annotation if e.annotation is not None else arg_type
        if t1 is None:
            raise self.fail("AAbs", e, f"parameter {x} needs a type annotation")
        if x in gamma:
            raise self.fail("AAbs", e, f"{x} shadows a variable in scope")
        inner = gamma.extend(x, t1)
        body = self.infer(omega, inner, e.body)
        d = body.derivation
        bj = d.conclusion
        if bj.binder != x and bj.binder in domain(bj.omega, inner):
            d = self.rename(d, self.fresh("y", bj.omega, inner, e))
        d = self.erase(d, keep=omega)
        pj = d.conclusion
        arrow = ArrowT(x, pj.in_pot, t1, pj.binder, pj.out_pot, pj.type)
        j = Judgement(pj.omega, gamma, ZERO, e, ZERO, arrow, self.fresh("z", pj.omega, gamma))
        return Trace("AAbs", (body,), DerivationNode("TAbs", j, (d,)))

    def _abs_against(self, omega: Ctx, gamma: Ctx, e: Abs, want: ArrowT) -> Trace:
        x = e.binder
        if x in gamma:
            raise self.fail("AAbs", e, f"{x} shadows a variable in scope")
        f1, t1, r, f2, t2 = open_arrow(want, x)
        if e.annotation is not None and not types_equal(e.annotation, t1):
            raise self.fail("AAbs", e, f"parameter annotation differs from {show_type(t1)}")
        inner = gamma.extend(x, t1)
        body = self.infer(omega, inner, e.body, t2)
        d = body.derivation
        if d.conclusion.binder != r:
            if r == x:
                raise self.fail("AAbs", e, "the annotation returns the argument, the body does not")
            if r in domain(d.conclusion.omega, inner):
                new = self.fresh(r.name, d.conclusion.omega, inner, want)
                f2, t2, r = rename(f2, r, new), rename(t2, r, new), new
            d = self.rename(d, r)
        bj = d.conclusion
        needs = self.require(bj.omega, inner, bj.in_pot, f1, "AAbs")
        gives = self.require(
            with_binding(bj.omega, r, t2), inner, Add(f2, bj.in_pot), Add(bj.out_pot, f1), "AAbs"
        )
        d = self.relax(d, Sub(f1, bj.in_pot))
        d = self.drop(d, f2)
        d = self.erase(d, keep=omega)
        pj = d.conclusion
        j = Judgement(pj.omega, gamma, ZERO, e, ZERO, want, self.fresh("z", pj.omega, gamma))
        return Trace("AAbs", (body,), DerivationNode("TAbs", j, (d,)), (needs, gives))

    def _closed_body(self, rule: str, e: Term, body: Trace) -> tuple[DerivationNode, tuple]:
        """Fixpoint and index-abstraction bodies: no input, output lowered to zero."""
        d = body.derivation
        bj = d.conclusion
        if simplify(bj.in_pot) != ZERO:
            raise self.fail(rule, e, "the body must be a value that needs no potential")
        queries = ()
        if simplify(bj.out_pot) != ZERO:
            ctx = with_binding(bj.omega, bj.binder, bj.type)
            queries = (self.require(ctx, bj.gamma, ZERO, bj.out_pot, rule),)
            d = self.drop(d, ZERO)
        return d, queries

    def _fix(self, omega: Ctx, gamma: Ctx, e: Fix) -> Trace:
        x, t = e.binder, e.annotation
        if x in gamma:
            raise self.fail("AFix", e, f"{x} shadows a variable in scope")
        if x in type_free_vars(e.body) | free_vars(t):
            raise self.fail("AFix", e, f"{x} occurs inside a type annotation")
        body = self.infer(omega, gamma.extend(x, t), e.body, t)
        d, queries = self._closed_body("AFix", e, body)
        d = self.erase(d, keep=omega)
        pj = d.conclusion
        j = Judgement(pj.omega, gamma, ZERO, e, ZERO, t, self.fresh("z", pj.omega, gamma))
        return Trace("AFix", (body,), DerivationNode("TFix", j, (d,)), queries)

    def _pabs(self, omega: Ctx, gamma: Ctx, e: PotAbs, want) -> Trace:
        x = e.binder
        if x in gamma:
            raise self.fail("APabs", e, f"{x} shadows a variable in scope")
        body_want = None
        if isinstance(want, PolyT):
            body_want = want.body if want.binder == x else rename(want.body, want.binder, x)
        body = self.infer(omega, gamma.extend(x, e.domain), e.body, body_want)
        d, queries = self._closed_body("APabs", e, body)
        d = self.erase(d, keep=omega)
        pj = d.conclusion
        poly = PolyT(x, e.domain, pj.type)
        j = Judgement(pj.omega, gamma, ZERO, e, ZERO, poly, self.fresh("z", pj.omega, gamma))
        return Trace("APabs", (body,), DerivationNode("TPabs", j, (d,)), queries)

    # --- Application ---

    def _app(self, omega: Ctx, gamma: Ctx, e: App) -> Trace:
        if isinstance(e.fn, Abs) and e.fn.annotation is None:
            arg = self.infer(omega, gamma, e.arg)
            fn = self._abs(omega, gamma, e.fn, None, arg_type=arg.judgement.type)
            return self._apply(omega, gamma, e, fn, arg)
        fn = self.infer(omega, gamma, e.fn)
        ft = fn.judgement.type
        if isinstance(ft, PolyT):
            return self._papp(omega, gamma, e, fn)
        if not isinstance(ft, ArrowT):
            raise self.fail("AApp", e, f"{show_type(ft)} is not a function type")
        arg = self.infer(omega, gamma, e.arg, ft.arg_type)
        return self._apply(omega, gamma, e, fn, arg)

    def _apply(self, omega: Ctx, gamma: Ctx, e: App, fn: Trace, arg: Trace) -> Trace:
        fd = self.forget_binder(fn.derivation)
        ad = arg.derivation
        fj, aj = fd.conclusion, ad.conclusion
        arrow = fj.type
        if not types_equal(aj.type, arrow.arg_type):
            raise self.fail(
                "AApp", e, f"argument has type {show_type(aj.type)}, expected {show_type(arrow.arg_type)}"
            )
        omega_c = self.merged(omega, fd, ad)
        avoid = domain(omega_c, gamma) | all_idents(e.arg)

        if instantiable(e.arg):
            pv = reduce_path(e.arg)
            arrow = freshen_arrow(arrow, avoid)
            f3, _, r, f4, t2 = instantiate_arrow(arrow, pv)
            f6 = substitute(aj.out_pot, aj.binder, pv)
            ctx = omega_c
            params = {"mode": "instantiate", "value": pv}
            gap_of = lambda gap: gap  # noqa: E731
        else:
            x = self.fresh("x", omega_c, gamma, e)
            arrow = freshen_arrow(arrow, avoid | {x})
            f3, t1, r, f4, t2 = open_arrow(arrow, x)
            f6 = rename(aj.out_pot, aj.binder, x)
            ctx = omega_c.extend(x, t1)
            params = {"mode": "exists", "binder": x}
            gap_of = lambda gap: MaxOver(x, t1, gap)  # noqa: E731

        have = Add(fj.out_pot, f6)
        if self.holds(ctx, gamma, f3, have):
            rule, borrow = "AAppp", ZERO
        else:
            rule, borrow = "AAppn", self.positive_part(omega_c, gamma, gap_of(Sub(f3, have)))
        fd = self.relax(fd, borrow)
        f2 = fd.conclusion.out_pot
        side = EntailmentQuery(ctx, gamma, f3, Add(f2, f6))
        j = Judgement(
            ctx,
            gamma,
            simplify(Add(fd.conclusion.in_pot, aj.in_pot)),
            e,
            simplify(Add(Sub(Add(f2, f6), f3), f4)),
            t2,
            r,
        )
        return Trace(rule, (fn, arg), DerivationNode("TApp", j, (fd, ad), (side,), params))

    def _papp(self, omega: Ctx, gamma: Ctx, e: App, fn: Trace) -> Trace:
        fd = self.forget_binder(fn.derivation)
        fj = fd.conclusion
        poly = fj.type
        if not instantiable(e.arg):
            raise self.fail("APapp", e, "the index must be a first-order pre-value")
        arg = self.infer(omega, gamma, e.arg, poly.domain)
        d, queries = self._closed_body("APapp", e, arg)
        pv = reduce_path(e.arg)
        omega_c = self.merged(omega, fd, d)
        j = Judgement(
            omega_c,
            gamma,
            fj.in_pot,
            e,
            fj.out_pot,
            substitute(poly.body, poly.binder, pv),
            self.fresh("w", omega_c, gamma),
        )
        node = DerivationNode("TPapp", j, (fd, d), (), {"value": pv})
        return Trace("APapp", (fn, arg), node, queries)

    # --- Pairs ---

    def _pair(self, omega: Ctx, gamma: Ctx, e: Pair, want) -> Trace:
        wl, wr = (want.left, want.right) if isinstance(want, ProdT) else (None, None)
        left = self.infer(omega, gamma, e.left, wl)
        right = self.infer(omega, gamma, e.right, wr)
        ld, rd = left.derivation, right.derivation
        lj, rj = ld.conclusion, rd.conclusion
        omega_c = self.merged(omega, ld, rd)
        x = self.fresh("x", omega_c, gamma)
        out = Add(
            substitute(lj.out_pot, lj.binder, Proj1(Var(x))),
            substitute(rj.out_pot, rj.binder, Proj2(Var(x))),
        )
        j = Judgement(
            omega_c,
            gamma,
            simplify(Add(lj.in_pot, rj.in_pot)),
            e,
            simplify(out),
            ProdT(lj.type, rj.type),
            x,
        )
        return Trace("APair", (left, right), DerivationNode("TPair", j, (ld, rd)))

    def _proj(self, omega: Ctx, gamma: Ctx, e: Proj1 | Proj2) -> Trace:
        first = isinstance(e, Proj1)
        rule = "AProj1" if first else "AProj2"
        inner = self.infer(omega, gamma, e.body)
        d = inner.derivation
        pj = d.conclusion
        if not isinstance(pj.type, ProdT):
            raise self.fail(rule, e, f"{show_type(pj.type)} is not a product")
        here, other = (pj.type.left, pj.type.right) if first else (pj.type.right, pj.type.left)
        x = pj.binder
        y = self.fresh("y", pj.omega, gamma)
        out = pj.out_pot
        if x in free_vars(out):
            z = self.fresh("z", pj.omega, gamma)
            pair = Pair(Var(y), Var(z)) if first else Pair(Var(z), Var(y))
            out = simplify(MinOver(z, other, substitute(out, x, pair)))
        path = Proj1(Var(x)) if first else Proj2(Var(x))
        side = EntailmentQuery(
            with_binding(pj.omega, x, pj.type), gamma, substitute(out, y, path), pj.out_pot
        )
        j = Judgement(pj.omega, gamma, pj.in_pot, e, out, here, y)
        return Trace(rule, (inner,), DerivationNode("TProj1" if first else "TProj2", j, (d,), (side,)))

    # --- Ticks and Lets ---

    def _tick(self, omega: Ctx, gamma: Ctx, e: Tick, want) -> Trace:
        body = self.infer(omega, gamma, e.body, want)
        d = body.derivation
        p = e.amount
        if p >= 0:
            rule, name = "ATickp", "TTickp"
        else:
            rule, name = "ATickn", "TTickn"
            bj = d.conclusion
            after = simplify(Add(bj.in_pot, const(p)))
            if not self.holds(bj.omega, gamma, ZERO, after):
                # releasing more than the body needs: the surplus stays as output
                if self.holds(bj.omega, gamma, after, ZERO):
                    d = self.relax(d, Sub(ZERO, after))
                else:
                    d = self.relax(d, Max2(Sub(ZERO, after), ZERO))
        dj = d.conclusion
        j = replace(dj, term=e, in_pot=simplify(Add(dj.in_pot, const(p))))
        return Trace(rule, (body,), DerivationNode(name, j, (d,)))

    def _let(self, omega: Ctx, gamma: Ctx, e: Let, want) -> Trace:
        x = e.binder
        if x in gamma:
            raise self.fail("ALet", e, f"{x} shadows a variable in scope")
        bound = self.infer(omega, gamma, e.bound)
        ad = bound.derivation
        aj = ad.conclusion
        inner = gamma.extend(x, aj.type)
        body = self.infer(omega, inner, e.body, want)
        bd = body.derivation
        bj = bd.conclusion
        omega_c = self.merged(omega, ad, bd)
        have = rename(aj.out_pot, aj.binder, x)
        if not self.holds(omega_c, inner, bj.in_pot, have):
            ad = self.relax(
                ad, self.positive_part(omega_c, gamma, MaxOver(x, aj.type, Sub(bj.in_pot, have)))
            )
            have = rename(ad.conclusion.out_pot, aj.binder, x)
        side = EntailmentQuery(omega_c, inner, bj.in_pot, have)
        j = Judgement(
            omega_c.extend(x, aj.type),
            gamma,
            ad.conclusion.in_pot,
            e,
            simplify(Add(Sub(have, bj.in_pot), bj.out_pot)),
            bj.type,
            bj.binder,
        )
        return Trace("ALet", (bound, body), DerivationNode("TLet", j, (ad, bd), (side,)))

    # --- Constructors ---

    def _con_arg(self, omega: Ctx, gamma: Ctx, arg: Term, want: TypeExpr) -> Trace:
        if isinstance(arg, Var) and arg.ident in self.hints:
            base = self._var(omega, gamma, arg)
            d = self.relax(base.derivation, self.hints[arg.ident])
            return Trace("AVar", (), d)
        return self.infer(omega, gamma, arg, want)

    def _con(self, omega: Ctx, gamma: Ctx, e: Con) -> Trace:
        ind = e.ind
        if not 0 <= e.index < len(ind.ctors):
            raise self.fail("ACons", e, "unknown constructor")
        ctor = ind.ctors[e.index]
        if len(e.rec_args) != ctor.copies:
            raise self.fail("ACons", e, f"{ctor.name} takes {ctor.copies} recursive arguments")
        traces = (self._con_arg(omega, gamma, e.content, ctor.content),) + tuple(
            self._con_arg(omega, gamma, a, ind) for a in e.rec_args
        )
        for trace, t in zip(traces, _binder_types(ind, e.index)):
            if not types_equal(trace.judgement.type, t):
                raise self.fail("ACons", e, f"{show_type(trace.judgement.type)} where {show_type(t)} is expected")
        ds = tuple(t.derivation for t in traces)
        omega_c = self.merged(omega, *ds)
        scope = (omega_c, gamma, e)
        y = self.fresh("y", *scope)
        branches = []
        for index, k in enumerate(ind.ctors):
            binders = tuple(self.fresh("b", *scope) for _ in range(1 + k.copies))
            if index == e.index:
                parts = [rename(d.conclusion.out_pot, d.conclusion.binder, b) for d, b in zip(ds, binders)]
                body = simplify(pot_sum(*parts))
            else:
                body = PosInf()
            branches.append(PBranch(index, binders, body, k.name))
        out = simplify(PrimRec(self.fresh("me", *scope), Var(y), tuple(branches), None, ind.signature()))
        value_ctx = omega_c
        for d in ds:
            value_ctx = with_binding(value_ctx, d.conclusion.binder, d.conclusion.type)
        built = Con(ind, e.index, Var(ds[0].conclusion.binder), tuple(Var(d.conclusion.binder) for d in ds[1:]))
        side = EntailmentQuery(
            value_ctx, gamma, substitute(out, y, built), pot_sum(*(d.conclusion.out_pot for d in ds))
        )
        j = Judgement(
            omega_c, gamma, simplify(pot_sum(*(d.conclusion.in_pot for d in ds))), e, out, ind, y
        )
        return Trace("ACons", traces, DerivationNode("TCons", j, ds, (side,)))

    # --- Pattern Matching ---

    def _matd(self, omega: Ctx, gamma: Ctx, e: Matd, want) -> Trace:
        scr = e.scrutinee
        on_var = isinstance(scr, Var) and scr.ident in gamma
        head = self._var(omega, gamma, scr) if on_var else self.infer(omega, gamma, scr)
        ind = head.judgement.type
        if not isinstance(ind, IndT):
            raise self.fail("ADes", e, f"{show_type(ind)} is not an inductive type")
        if sorted(b.index for b in e.branches) != list(range(len(ind.ctors))):
            raise self.fail("ADes", e, "every constructor needs exactly one branch")
        trace, needs = self._des(omega, gamma, e, want, head, on_var)
        new = {b: f for b, f in needs.items() if b not in self.hints}
        if not new:
            return trace
        saved = self.hints
        self.hints = {**saved, **new}
        try:
            retry, left = self._des(omega, gamma, e, want, head, on_var)
        except (TypingError, ConstraintUnknown) as exc:
            logger.debug(f"TYPER: retry with moved potential failed: {exc}")
            return trace
        finally:
            self.hints = saved
        if len(left) < len(needs):
            logger.debug(f"TYPER: moved potential onto {', '.join(str(b) for b in new)}")
            return retry
        return trace

    def _des(self, omega: Ctx, gamma: Ctx, e: Matd, want, head: Trace, on_var: bool):
        hd = head.derivation
        hj = hd.conclusion
        ind, x = hj.type, hj.binder

        arms = []
        for br in e.branches:
            types = _binder_types(ind, br.index)
            if len(br.binders) != len(types):
                raise self.fail("ADes", e, f"{ind.ctors[br.index].name} binds {len(types)} names")
            g = gamma
            for b, t in zip(br.binders, types):
                if b in g:
                    raise self.fail("ADes", e, f"{b} shadows a variable in scope")
                g = g.extend(b, t)
            trace = self.infer(omega, g, br.body, want)
            avail = simplify(substitute(hj.out_pot, x, _value_of(ind, br.index, br.binders)))
            arms.append((br, types, g, trace, avail))

        omega_c = self.merged(omega, hd, *(arm[3].derivation for arm in arms))
        if on_var:
            bodies = []
            for br, _, g, trace, avail in arms:
                tj = trace.judgement
                extra = self.positive_part(tj.omega, g, Sub(tj.in_pot, avail))
                bodies.append(PBranch(br.index, br.binders, extra, ind.ctors[br.index].name))
            borrow = ZERO
            if any(b.body != ZERO for b in bodies):
                borrow = PrimRec(self.fresh("me", omega_c, gamma, e), Var(x), tuple(bodies), None, ind.signature())
        else:
            borrow = ZERO
            for br, types, _, trace, avail in arms:
                tj = trace.judgement
                gap = Sub(tj.in_pot, avail)
                for b, t in reversed(list(zip(br.binders, types))):
                    gap = MaxOver(b, t, gap)
                part = self.positive_part(tj.omega, gamma, gap)
                borrow = part if borrow == ZERO else self.max_of(omega_c, gamma, borrow, part)
        hd = self.relax(hd, borrow)

        y = self.fresh("y", omega_c, gamma, e)
        prepared, outs, needs = [], [], {}
        for br, types, g, trace, _ in arms:
            avail = simplify(substitute(hd.conclusion.out_pot, x, _value_of(ind, br.index, br.binders)))
            d = trace.derivation
            d = self.relax(d, Sub(avail, d.conclusion.in_pot))
            d = self.rename(d, y)
            out = d.conclusion.out_pot
            for b in br.binders:
                if b in free_vars(out) and _constructor_argument(br.body, b):
                    part = _binder_part(out, b)
                    if part is not None:
                        needs[b] = part
            for b, t in reversed(list(zip(br.binders, types))):
                out = MinOver(b, t, out)
            prepared.append((br, d))
            outs.append(simplify(out))

        result_type = prepared[0][1].conclusion.type
        for br, d in prepared:
            if not types_equal(d.conclusion.type, result_type):
                raise self.fail("ADes", e, "branches disagree on the result type")
            if set(br.binders) & free_vars(d.conclusion.type):
                raise self.fail("ADes", e, "the result type mentions a branch binder")
        out_ctx = with_binding(omega_c, y, result_type)
        out = outs[0]
        for other in outs[1:]:
            out = self.min_of(out_ctx, gamma, out, other)

        premises = (hd,) + tuple(self.drop(d, out) for _, d in prepared)
        j = Judgement(omega_c, gamma, hd.conclusion.in_pot, e, out, result_type, y)
        trace = Trace("ADes", (head,) + tuple(arm[3] for arm in arms), DerivationNode("TDes", j, premises))
        return trace, needs


# --- Public Operations ---


def infer_trace(
    omega: Ctx, gamma: Ctx, e: Term, expected: TypeExpr | None = None, cfg: Settings | None = None
) -> Trace:
    typer = Typer(cfg, reserved=all_idents(omega, gamma, e, expected))
    return typer.run(omega, gamma, e, expected)


def infer(
    omega: Ctx, gamma: Ctx, e: Term, expected: TypeExpr | None = None, cfg: Settings | None = None
) -> Judgement:
    """The minimal-input judgement for e; raises TypingError or ConstraintUnknown."""
    return infer_trace(omega, gamma, e, expected, cfg).judgement


def check(omega: Ctx, gamma: Ctx, e: Term, wanted: Judgement, cfg: Settings | None = None) -> CheckResult:
    """
    Feasibility of a wanted judgement: the wanted input must cover the inferred
    one, and what it saves must pay for any output the inference cannot give.
    """
    cfg = cfg or default_settings
    typer = Typer(cfg, reserved=all_idents(omega, gamma, e, wanted))
    try:
        trace = typer.run(omega, gamma, e, wanted.type)
    except ConstraintUnknown as exc:
        return CheckResult(False, diagnostics=[*typer.diagnostics, exc.detail])
    j = trace.judgement
    y, want_out = wanted.binder, wanted.out_pot
    if j.binder in domain(j.omega, j.gamma):
        # the result is that variable: the wanted output talks about it
        if y != j.binder:
            want_out, y = rename(want_out, y, j.binder), j.binder
    elif y != j.binder and y in domain(j.omega, j.gamma):
        new = typer.fresh(y.name, j.omega, j.gamma)
        want_out, y = rename(want_out, y, new), new
    got_out = rename(j.out_pot, j.binder, y) if j.binder != y else j.out_pot
    queries = (
        EntailmentQuery(j.omega, j.gamma, j.in_pot, wanted.in_pot),
        EntailmentQuery(
            with_binding(j.omega, y, j.type),
            j.gamma,
            Add(j.in_pot, want_out),
            Add(got_out, wanted.in_pot),
        ),
    )
    diagnostics = list(typer.diagnostics)
    for q in queries:
        try:
            discharge(q, "check", cfg, diagnostics)
        except ConstraintUnknown as exc:
            logger.info(f"TYPER-FAIL: {exc.detail}")
            return CheckResult(False, j, trace, [*diagnostics, exc.detail], queries)
    return CheckResult(True, j, trace, diagnostics, queries)


def wanted(
    term: Term,
    in_pot: PotExpr,
    out_pot: PotExpr,
    type_: TypeExpr,
    binder: Ident,
    omega: Ctx = EMPTY,
    gamma: Ctx = EMPTY,
) -> Judgement:
    return Judgement(omega, gamma, in_pot, term, out_pot, type_, binder)
