# app/services/internal/derivation.py

"""
Elaboration of algorithmic traces into declarative derivations, and an
independent checker for declarative derivations.

The checker recomputes every conclusion from its premises and re-proves the
side conditions itself; the queries recorded on a node are never trusted.
"""

import logging

from app.core.config import Settings, settings as default_settings
from app.core.errors import RuleViolation
from app.services.internal.judgement import (
    DerivationNode,
    Judgement,
    Trace,
    domain,
    instantiable,
    instantiate_arrow,
    open_arrow,
    pot_equal,
    types_equal,
    unused,
    with_binding,
)
from app.services.internal.potential import simplify
from app.services.internal.render import show_pot, show_query, show_term
from app.services.internal.solver import EntailmentQuery, Proven, Relation, entails
from app.services.internal.syntax import (
    BOOL_T,
    ZERO,
    Abs,
    Add,
    App,
    ArrowT,
    Con,
    Ctx,
    Fix,
    IndT,
    IntLit,
    IntT,
    Let,
    Matd,
    Op,
    Pair,
    PolyT,
    PotAbs,
    ProdT,
    Proj1,
    Proj2,
    Sub,
    Tick,
    Var,
    const,
    free_vars,
    pot_sum,
    reduce_path,
    rename,
    substitute,
    type_free_vars,
)

logger = logging.getLogger(__name__)


def elaborate(trace: Trace) -> DerivationNode:
    """The declarative derivation a trace stands for."""
    return trace.derivation


# --- Checking Context ---


class _Checker:
    def __init__(self, cfg: Settings):
        self.cfg = cfg
        self.checked = 0

    def violation(self, node: DerivationNode, detail: str) -> RuleViolation:
        logger.info(f"TYPER-FAIL: {node.rule} at `{show_term(node.conclusion.term)}`: {detail}")
        return RuleViolation(node.rule, f"at `{show_term(node.conclusion.term)}`: {detail}")

    def need(self, node: DerivationNode, ok: bool, detail: str) -> None:
        if not ok:
            raise self.violation(node, detail)

    def same_pot(self, node, a, b, omega: Ctx, gamma: Ctx, what: str) -> None:
        if not pot_equal(a, b, omega, gamma, self.cfg):
            raise self.violation(node, f"{what}: {show_pot(simplify(a))} differs from {show_pot(simplify(b))}")

    def same_type(self, node, a, b, what: str) -> None:
        self.need(node, types_equal(a, b), f"{what} does not match")

    def entailed(self, node, q: EntailmentQuery) -> None:
        verdict = entails(q, self.cfg)
        if isinstance(verdict, Proven):
            return
        if self.cfg.ASSUME_CONSTRAINTS:
            logger.warning(f"SOLVER: {node.rule}: assumed {show_query(q)} ({verdict.reason})")
            return
        raise self.violation(node, f"side condition {show_query(q)} not proven ({verdict.reason})")

    def zero(self, node, j: Judgement, what: str) -> None:
        self.same_pot(node, j.in_pot, ZERO, j.omega, j.gamma, f"{what} input")
        self.same_pot(node, j.out_pot, ZERO, with_binding(j.omega, j.binder, j.type), j.gamma, f"{what} output")

    def fresh_binder(self, node, j: Judgement, *premises: Judgement) -> None:
        names = domain(j.omega, j.gamma)
        for p in premises:
            names |= domain(p.omega, p.gamma)
        self.need(node, j.binder not in names, f"result binder {j.binder} is not fresh")

    # --- Walk ---

    def check(self, node: DerivationNode) -> None:
        for premise in node.premises:
            self.check(premise)
        self.checked += 1
        j = node.conclusion
        if node.rule != "TErase":
            for p in node.premises:
                missing = set(p.conclusion.omega.names()) - set(j.omega.names())
                self.need(node, not missing, f"premise existentials {sorted(map(str, missing))} are lost")
        handler = getattr(self, f"rule_{node.rule}", None)
        if handler is None:
            raise RuleViolation(node.rule, "unknown rule")
        handler(node, j, [p.conclusion for p in node.premises])

    # --- Leaves ---

    def rule_TInt(self, node, j, ps):
        self.need(node, isinstance(j.term, IntLit) and not ps, "expects an integer literal")
        self.same_type(node, j.type, IntT(), "type")
        self.zero(node, j, "literal")
        self.fresh_binder(node, j)

    def rule_TVar(self, node, j, ps):
        self.need(node, isinstance(j.term, Var) and not ps, "expects a variable")
        x = j.term.ident
        t = j.gamma.lookup(x)
        self.need(node, t is not None, f"{x} is not in Gamma")
        self.need(node, j.binder == x, "the binder of a variable is the variable")
        self.same_type(node, j.type, t, "type")
        self.zero(node, j, "variable")

    def rule_TOp(self, node, j, ps):
        e = j.term
        self.need(node, isinstance(e, Op) and len(ps) == len(e.args), "premises do not match the operands")
        for p, arg in zip(ps, e.args):
            self.need(node, p.term == arg and p.gamma == j.gamma, "premise is not about the operand")
            self.same_type(node, p.type, IntT(), "operand type")
            if p.binder not in domain(p.omega, p.gamma):
                self.need(node, p.binder not in free_vars(p.out_pot), "operand output names its result")
        self.same_pot(node, j.in_pot, pot_sum(*(p.in_pot for p in ps)), j.omega, j.gamma, "input")
        self.same_pot(node, j.out_pot, pot_sum(*(p.out_pot for p in ps)), j.omega, j.gamma, "output")
        self.same_type(node, j.type, BOOL_T if e.name == "<" else IntT(), "type")
        self.fresh_binder(node, j)

    # --- Abstractions ---

    def rule_TAbs(self, node, j, ps):
        e = j.term
        self.need(node, isinstance(e, Abs) and len(ps) == 1, "expects a lambda")
        (p,) = ps
        self.need(node, isinstance(j.type, ArrowT), "type is not an arrow")
        x = e.binder
        t1 = p.gamma.lookup(x)
        self.need(node, t1 is not None and p.gamma.remove(x) == j.gamma, "body context is not Gamma plus the parameter")
        self.need(node, p.term == e.body, "premise is not about the body")
        if e.annotation is not None:
            self.same_type(node, e.annotation, t1, "parameter annotation")
        f1, a1, r, f2, t2 = open_arrow(j.type, x)
        self.same_type(node, a1, t1, "argument type")
        self.same_pot(node, f1, p.in_pot, p.omega, p.gamma, "argument potential")
        if r != p.binder:
            self.need(node, r != x, "the arrow returns the argument, the body does not")
            f2, t2 = rename(f2, r, p.binder), rename(t2, r, p.binder)
        self.same_pot(node, f2, p.out_pot, with_binding(p.omega, p.binder, p.type), p.gamma, "result potential")
        self.same_type(node, t2, p.type, "result type")
        self.zero(node, j, "lambda")
        self.fresh_binder(node, j)

    def _closed(self, node, j, p, binder, what):
        self.need(node, p.gamma.lookup(binder) is not None and p.gamma.remove(binder) == j.gamma, f"{what} context is wrong")
        self.zero(node, p, what)
        self.zero(node, j, what)
        self.fresh_binder(node, j)

    def rule_TFix(self, node, j, ps):
        e = j.term
        self.need(node, isinstance(e, Fix) and len(ps) == 1, "expects a fixpoint")
        (p,) = ps
        self.need(node, p.term == e.body, "premise is not about the body")
        self.need(node, e.binder not in type_free_vars(e.body) | free_vars(e.annotation), "recursive name inside an annotation")
        self.same_type(node, p.gamma.lookup(e.binder), e.annotation, "recursive binding")
        self.same_type(node, p.type, e.annotation, "body type")
        self.same_type(node, j.type, e.annotation, "type")
        self._closed(node, j, p, e.binder, "fixpoint body")

    def rule_TPabs(self, node, j, ps):
        e = j.term
        self.need(node, isinstance(e, PotAbs) and len(ps) == 1, "expects an index abstraction")
        (p,) = ps
        self.need(node, p.term == e.body, "premise is not about the body")
        self.same_type(node, p.gamma.lookup(e.binder), e.domain, "index binding")
        self.same_type(node, j.type, PolyT(e.binder, e.domain, p.type), "type")
        self._closed(node, j, p, e.binder, "index body")

    # --- Application ---

    def rule_TPapp(self, node, j, ps):
        e = j.term
        self.need(node, isinstance(e, App) and len(ps) == 2, "expects an index application")
        fn, arg = ps
        self.need(node, fn.term == e.fn and arg.term == e.arg, "premises are not about the parts")
        self.need(node, isinstance(fn.type, PolyT), "function is not index-polymorphic")
        pv = node.params.get("value")
        self.need(node, instantiable(e.arg) and reduce_path(e.arg) == pv, "index value does not match")
        self.same_type(node, arg.type, fn.type.domain, "index type")
        self.zero(node, arg, "index")
        self.same_type(node, j.type, substitute(fn.type.body, fn.type.binder, pv), "type")
        self.same_pot(node, j.in_pot, fn.in_pot, j.omega, j.gamma, "input")
        self.same_pot(node, j.out_pot, fn.out_pot, j.omega, j.gamma, "output")

    def rule_TApp(self, node, j, ps):
        e = j.term
        self.need(node, isinstance(e, App) and len(ps) == 2, "expects an application")
        fn, arg = ps
        self.need(node, fn.term == e.fn and arg.term == e.arg, "premises are not about the parts")
        self.need(node, fn.gamma == j.gamma and arg.gamma == j.gamma, "premise contexts differ")
        self.need(node, isinstance(fn.type, ArrowT), "function type is not an arrow")
        if fn.binder not in domain(fn.omega, fn.gamma):
            self.need(node, fn.binder not in free_vars(fn.out_pot), "function output names its result")
        mode = node.params.get("mode")
        if mode == "exists":
            x = node.params["binder"]
            self.need(node, j.omega.lookup(x) is not None, f"{x} is not an existential")
            self.need(
                node,
                x not in domain(fn.omega, fn.gamma) | domain(arg.omega, arg.gamma),
                f"{x} is not fresh for the premises",
            )
            f3, t1, r, f4, t2 = open_arrow(fn.type, x)
            self.same_type(node, j.omega.lookup(x), arg.type, "existential type")
            f6 = rename(arg.out_pot, arg.binder, x)
            carry = x
        elif mode == "instantiate":
            pv = node.params.get("value")
            self.need(node, instantiable(e.arg) and reduce_path(e.arg) == pv, "argument value does not match")
            f3, t1, r, f4, t2 = instantiate_arrow(fn.type, pv)
            f6 = substitute(arg.out_pot, arg.binder, pv)
            carry = None
        else:
            raise self.violation(node, f"unknown application mode {mode!r}")
        self.same_type(node, t1, arg.type, "argument type")
        if r == carry:
            self.need(node, j.binder == x, "a returned argument keeps its name")
        elif r != j.binder:
            self.need(node, j.binder not in domain(j.omega, j.gamma), "result binder is not fresh")
            f4, t2 = rename(f4, r, j.binder), rename(t2, r, j.binder)
        else:
            self.need(node, r not in domain(j.omega, j.gamma), "result binder is not fresh")
        self.entailed(node, EntailmentQuery(j.omega, j.gamma, f3, Add(fn.out_pot, f6)))
        self.same_pot(node, j.in_pot, Add(fn.in_pot, arg.in_pot), j.omega, j.gamma, "input")
        out_ctx = with_binding(j.omega, j.binder, j.type)
        self.same_pot(node, j.out_pot, Add(Sub(Add(fn.out_pot, f6), f3), f4), out_ctx, j.gamma, "output")
        self.same_type(node, j.type, t2, "result type")

    # --- Pairs ---

    def rule_TPair(self, node, j, ps):
        e = j.term
        self.need(node, isinstance(e, Pair) and len(ps) == 2, "expects a pair")
        left, right = ps
        self.need(node, left.term == e.left and right.term == e.right, "premises are not about the components")
        self.fresh_binder(node, j, left, right)
        x = j.binder
        out = Add(
            substitute(left.out_pot, left.binder, Proj1(Var(x))),
            substitute(right.out_pot, right.binder, Proj2(Var(x))),
        )
        self.same_type(node, j.type, ProdT(left.type, right.type), "type")
        self.same_pot(node, j.in_pot, Add(left.in_pot, right.in_pot), j.omega, j.gamma, "input")
        self.same_pot(node, j.out_pot, out, with_binding(j.omega, x, j.type), j.gamma, "output")

    def _proj(self, node, j, ps, first: bool):
        e = j.term
        self.need(node, isinstance(e, Proj1 if first else Proj2) and len(ps) == 1, "expects a projection")
        (p,) = ps
        self.need(node, p.term == e.body, "premise is not about the pair")
        self.need(node, isinstance(p.type, ProdT), "premise is not a product")
        self.same_type(node, j.type, p.type.left if first else p.type.right, "type")
        self.fresh_binder(node, j, p)
        self.same_pot(node, j.in_pot, p.in_pot, j.omega, j.gamma, "input")
        path = Proj1(Var(p.binder)) if first else Proj2(Var(p.binder))
        ctx = with_binding(p.omega, p.binder, p.type)
        self.entailed(node, EntailmentQuery(ctx, j.gamma, substitute(j.out_pot, j.binder, path), p.out_pot))

    def rule_TProj1(self, node, j, ps):
        self._proj(node, j, ps, True)

    def rule_TProj2(self, node, j, ps):
        self._proj(node, j, ps, False)

    # --- Ticks and Lets ---

    def _tick(self, node, j, ps, positive: bool):
        e = j.term
        self.need(node, isinstance(e, Tick) and len(ps) == 1, "expects a tick")
        self.need(node, (e.amount >= 0) == positive, "tick sign does not match the rule")
        (p,) = ps
        self.need(node, p.term == e.body, "premise is not about the body")
        self.need(node, p.binder == j.binder and p.omega == j.omega, "result changed across a tick")
        self.same_type(node, j.type, p.type, "type")
        self.same_pot(node, j.in_pot, Add(p.in_pot, const(e.amount)), j.omega, j.gamma, "input")
        self.same_pot(node, j.out_pot, p.out_pot, with_binding(j.omega, j.binder, j.type), j.gamma, "output")

    def rule_TTickp(self, node, j, ps):
        self._tick(node, j, ps, True)

    def rule_TTickn(self, node, j, ps):
        self._tick(node, j, ps, False)

    def rule_TLet(self, node, j, ps):
        e = j.term
        self.need(node, isinstance(e, Let) and len(ps) == 2, "expects a let")
        bound, body = ps
        x = e.binder
        self.need(node, bound.term == e.bound and body.term == e.body, "premises are not about the parts")
        self.need(node, bound.gamma == j.gamma, "bound expression context differs")
        self.need(node, body.gamma == j.gamma.extend(x, bound.type), "body context is not Gamma plus the binder")
        self.need(node, j.omega.lookup(x) is not None, f"{x} is not recorded as an existential")
        have = rename(bound.out_pot, bound.binder, x)
        inner = j.omega.remove(x)
        self.entailed(node, EntailmentQuery(inner, body.gamma, body.in_pot, have))
        self.same_pot(node, j.in_pot, bound.in_pot, j.omega, j.gamma, "input")
        out_ctx = with_binding(j.omega, j.binder, j.type)
        self.same_pot(node, j.out_pot, Add(Sub(have, body.in_pot), body.out_pot), out_ctx, j.gamma, "output")
        self.need(node, j.binder == body.binder, "binder differs from the body's")
        self.same_type(node, j.type, body.type, "type")

    # --- Constructors ---

    def rule_TCons(self, node, j, ps):
        e = j.term
        self.need(node, isinstance(e, Con) and len(ps) == 1 + len(e.rec_args), "premises do not match the arguments")
        ctor = e.ind.ctors[e.index]
        for p, arg, t in zip(ps, (e.content, *e.rec_args), (ctor.content,) + (e.ind,) * ctor.copies):
            self.need(node, p.term == arg and p.gamma == j.gamma, "premise is not about an argument")
            self.same_type(node, p.type, t, "argument type")
        self.same_type(node, j.type, e.ind, "type")
        self.fresh_binder(node, j, *ps)
        self.same_pot(node, j.in_pot, pot_sum(*(p.in_pot for p in ps)), j.omega, j.gamma, "input")
        ctx = j.omega
        for p in ps:
            ctx = with_binding(ctx, p.binder, p.type)
        built = Con(e.ind, e.index, Var(ps[0].binder), tuple(Var(p.binder) for p in ps[1:]))
        lhs = substitute(j.out_pot, j.binder, built)
        self.entailed(node, EntailmentQuery(ctx, j.gamma, lhs, pot_sum(*(p.out_pot for p in ps))))

    def rule_TDes(self, node, j, ps):
        e = j.term
        self.need(node, isinstance(e, Matd) and len(ps) == 1 + len(e.branches), "premises do not match the branches")
        head, arms = ps[0], ps[1:]
        ind = head.type
        self.need(node, head.term == e.scrutinee and isinstance(ind, IndT), "scrutinee is not inductive")
        self.need(
            node,
            sorted(b.index for b in e.branches) == list(range(len(ind.ctors))),
            "branches are not exhaustive",
        )
        self.same_pot(node, j.in_pot, head.in_pot, j.omega, j.gamma, "input")
        x = head.binder
        out_ctx = with_binding(j.omega, j.binder, j.type)
        for br, arm in zip(e.branches, arms):
            ctor = ind.ctors[br.index]
            types = (ctor.content,) + (ind,) * ctor.copies
            self.need(node, len(br.binders) == len(types) and arm.term == br.body, "branch premise is wrong")
            g = j.gamma
            for b, t in zip(br.binders, types):
                g = g.extend(b, t)
            self.need(node, arm.gamma == g, "branch context is not Gamma plus the binders")
            value = Con(ind, br.index, Var(br.binders[0]), tuple(Var(b) for b in br.binders[1:]))
            self.same_pot(node, arm.in_pot, substitute(head.out_pot, x, value), j.omega, g, "branch input")
            self.need(node, arm.binder == j.binder, "branches disagree on the result binder")
            self.same_type(node, arm.type, j.type, "branch type")
            self.same_pot(node, arm.out_pot, j.out_pot, out_ctx.merge(arm.omega), g, "branch output")
            self.need(
                node,
                not set(br.binders) & (free_vars(j.out_pot) | free_vars(j.type)),
                "result mentions a branch binder",
            )

    # --- Structural ---

    def _unchanged(self, node, j, p, what):
        self.need(node, p.term == j.term and p.gamma == j.gamma, f"{what} changed the term")
        self.need(node, p.binder == j.binder, f"{what} changed the binder")
        self.same_type(node, j.type, p.type, "type")

    def rule_TRelax(self, node, j, ps):
        (p,) = ps
        self._unchanged(node, j, p, "relaxation")
        amount = node.params.get("amount", ZERO)
        self.entailed(node, EntailmentQuery(j.omega, j.gamma, amount, ZERO, Relation.NONNEG))
        self.same_pot(node, j.in_pot, Add(p.in_pot, amount), j.omega, j.gamma, "input")
        out_ctx = with_binding(j.omega, j.binder, j.type)
        self.same_pot(node, j.out_pot, Add(p.out_pot, amount), out_ctx, j.gamma, "output")

    def rule_TDrop(self, node, j, ps):
        (p,) = ps
        self._unchanged(node, j, p, "weakening")
        self.same_pot(node, j.in_pot, p.in_pot, j.omega, j.gamma, "input")
        out_ctx = with_binding(j.omega, j.binder, j.type)
        self.entailed(node, EntailmentQuery(out_ctx, j.gamma, j.out_pot, p.out_pot))

    def rule_TRename(self, node, j, ps):
        (p,) = ps
        self.need(node, p.term == j.term and p.gamma == j.gamma, "renaming changed the term")
        self.need(node, j.binder not in domain(j.omega, j.gamma), "new binder is not fresh")
        self.same_pot(node, j.in_pot, p.in_pot, j.omega, j.gamma, "input")
        out_ctx = with_binding(j.omega, j.binder, j.type)
        self.same_pot(node, j.out_pot, rename(p.out_pot, p.binder, j.binder), out_ctx, j.gamma, "output")
        self.same_type(node, j.type, rename(p.type, p.binder, j.binder), "type")

    def rule_TErase(self, node, j, ps):
        (p,) = ps
        x = node.params.get("erased")
        self.need(node, x in p.omega and j.omega == p.omega.remove(x), f"erases something other than {x}")
        self.need(node, unused(p, x), f"{x} is still in use")
        self._unchanged(node, j, p, "erasure")
        self.need(node, j.in_pot == p.in_pot and j.out_pot == p.out_pot, "erasure changed a potential")


def validate_derivation(d: DerivationNode, cfg: Settings | None = None) -> int:
    """Checks every rule instance of d; returns the number of nodes checked."""
    checker = _Checker(cfg or default_settings)
    checker.check(d)
    logger.debug(f"TYPER: validated {checker.checked} rule instances")
    return checker.checked
