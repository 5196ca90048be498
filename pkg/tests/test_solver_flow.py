# tests/test_solver_flow.py

import json
from fractions import Fraction

import httpx
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from app.core.errors import ConstraintUnknown, EnumerationOverflow
from app.services.internal.external_solver import build_payload, solve
from app.services.internal.oracle import enumerate_values, oracle
from app.services.internal.potential import apply_measure, closed_value, length
from app.services.internal.solver import (
    Consistent,
    EntailmentQuery,
    Proven,
    Refuted,
    Relation,
    Unknown,
    discharge,
    entails,
)
from app.services.internal.syntax import (
    EMPTY,
    ZERO,
    Add,
    Const,
    Ident,
    IntLit,
    IntT,
    Max2,
    MaxOver,
    Min2,
    MinOver,
    Mul,
    Scale,
    Sub,
    Var,
    cons,
    list_type,
    tree_type,
)

from conftest import corpus_program

x, y, w, x0, x1 = Ident("x"), Ident("y"), Ident("w"), Ident("x0"), Ident("x1")
LIST = list_type(IntT())
GAMMA = EMPTY.extend(x, LIST).extend(y, LIST)
WIDE = GAMMA.extend(x0, IntT()).extend(x1, LIST)


def c(q) -> Const:
    return Const(Fraction(q))


def le(lhs, rhs, gamma=GAMMA) -> EntailmentQuery:
    return EntailmentQuery(EMPTY, gamma, lhs, rhs, Relation.LE)


# --- Built-in Procedure ---


def test_constant_slack_is_proven():
    assert isinstance(entails(le(length(x), Add(length(x), c(1)))), Proven)


def test_tail_is_shorter_than_the_cons():
    gamma = EMPTY.extend(x0, IntT()).extend(x1, LIST)
    q = le(length(x1), length(cons(IntT(), Var(x0), Var(x1))), gamma)
    assert isinstance(entails(q), Proven)


def test_fixed_upper_bound_on_a_length_is_unknown():
    assert isinstance(entails(le(length(x), c(5))), Unknown)


def test_witness_is_the_normalized_difference():
    verdict = entails(le(length(x), Add(length(x), c(2))))
    assert closed_value(verdict.witness) == 2


def test_equalities_need_both_directions():
    same = EntailmentQuery(EMPTY, GAMMA, Scale(Fraction(2), length(x)), Add(length(x), length(x)), Relation.EQ)
    assert isinstance(entails(same), Proven)
    off = EntailmentQuery(EMPTY, GAMMA, length(x), Add(length(x), c(1)), Relation.EQ)
    assert isinstance(entails(off), Unknown)


def test_discharge_raises_on_unknown(cfg):
    with pytest.raises(ConstraintUnknown) as info:
        discharge(le(length(x), c(5)), "test", cfg)
    assert info.value.code == 4


def test_discharge_records_assumptions(cfg):
    lenient = cfg.with_overrides(ASSUME_CONSTRAINTS=True)
    notes: list[str] = []
    verdict = discharge(le(length(x), c(5)), "test", lenient, notes)
    assert isinstance(verdict, Unknown)
    assert notes and "assumed" in notes[0]


# --- Bounded Oracle ---


def test_oracle_refutes_a_fixed_bound_with_a_six_element_list():
    verdict = oracle(le(length(x), c(5), EMPTY.extend(x, LIST)), size_bound=7)
    assert isinstance(verdict, Refuted)
    counterexample = verdict.counterexample[x]
    size = 0
    while counterexample.index == 1:
        size += 1
        counterexample = counterexample.rec_args[0]
    assert size == 6


def test_oracle_accepts_nonnegativity_of_a_length():
    assert isinstance(oracle(le(ZERO, length(x)), size_bound=4), Consistent)


def test_oracle_confirms_the_append_application_premise():
    q = le(length(x), Scale(Fraction(4), length(x)), EMPTY.extend(x, LIST))
    assert isinstance(oracle(q, size_bound=5), Consistent)


def test_oracle_respects_the_enumeration_cap(cfg):
    tight = cfg.with_overrides(MAX_ENUM=3)
    with pytest.raises(EnumerationOverflow):
        oracle(le(length(x), length(y)), size_bound=5, cfg=tight)


def test_enumeration_is_smallest_first():
    values = list(enumerate_values(LIST, 3))
    assert len(values) == 4
    assert values[0].index == 0


# --- Soundness Against the Oracle ---


@st.composite
def provable_queries(draw):
    """lhs <= lhs + slack, where the slack is a polynomial with nonnegative coefficients."""
    coef = st.fractions(min_value=0, max_value=4, max_denominator=4)
    lhs = Add(Scale(draw(coef), length(x)), Const(draw(coef)))
    slack = Add(
        Mul(Scale(draw(coef), length(x)), length(y)),
        Add(Scale(draw(coef), length(y)), Const(draw(coef))),
    )
    if draw(st.booleans()):
        lhs = Add(lhs, Scale(draw(coef), length(y)))
        slack = Add(slack, Scale(draw(coef), length(y)))
    return le(lhs, Add(lhs, slack))


@st.composite
def false_queries(draw):
    """rhs < lhs somewhere: a positive constant is taken away from the right side."""
    coef = st.fractions(min_value=0, max_value=4, max_denominator=4)
    gap = draw(st.fractions(min_value=Fraction(1, 4), max_value=3, max_denominator=4))
    base = Add(Scale(draw(coef), length(x)), Scale(draw(coef), length(y)))
    return le(Add(base, Const(gap)), base)


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(provable_queries())
def test_proven_entailments_survive_the_oracle(q):
    verdict = entails(q)
    assert isinstance(verdict, Proven)
    assert isinstance(oracle(q, size_bound=5), Consistent)


@settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(false_queries())
def test_false_entailments_are_never_proven(q):
    assert not isinstance(entails(q), Proven)
    assert isinstance(oracle(q, size_bound=5), Refuted)


@st.composite
def measure_queries(draw):
    """True entailments that need constructor unfolding, Min/Max lifting or a MaxOver witness."""
    coef = st.fractions(min_value=0, max_value=3, max_denominator=4)
    k, slack, base = draw(coef), draw(coef), draw(coef)
    match draw(st.sampled_from(["cons", "nested", "max", "min", "over"])):
        case "cons":
            lhs = Add(Scale(k, length(x1)), Const(base))
            rhs = Add(Scale(k, length(cons(IntT(), Var(x0), Var(x1)))), Const(base - k + slack))
        case "nested":
            two = cons(IntT(), IntLit(0), cons(IntT(), Var(x0), Var(x1)))
            lhs = Add(Scale(k, length(x1)), Const(2 * k))
            rhs = Add(Scale(k, length(two)), Const(slack))
        case "max":
            lhs = Scale(k, Max2(length(x), length(y)))
            rhs = Add(Scale(k, Add(length(x), length(y))), Const(slack))
        case "min":
            lhs = Scale(k, Min2(length(x), length(y)))
            rhs = Add(Scale(k, length(y)), Const(slack))
        case _:
            lhs = MaxOver(w, LIST, Sub(Scale(k, length(x)), length(w)))
            rhs = Add(Scale(k, length(x)), Const(slack))
    return le(lhs, rhs, WIDE)


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(measure_queries())
def test_measure_reasoning_is_proven_and_survives_the_oracle(q):
    verdict = entails(q)
    assert isinstance(verdict, Proven), verdict
    assert isinstance(oracle(q, size_bound=5), Consistent)


@st.composite
def potentials(draw, nonneg: bool = False):
    low = 0 if nonneg else -3
    coef = st.fractions(min_value=low, max_value=3, max_denominator=4)
    atoms = [length(x), length(y), Mul(length(x), length(y))]
    f = Const(draw(coef))
    for atom in draw(st.lists(st.sampled_from(atoms), max_size=3)):
        f = Add(f, Scale(draw(coef), atom))
    if not nonneg and draw(st.booleans()):
        # a minimum with a nonnegative weight lifts to the top of both sides
        weight = draw(st.fractions(min_value=0, max_value=3, max_denominator=4))
        f = Add(f, Scale(weight, Min2(length(x), Scale(Fraction(2), length(y)))))
    return f


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(potentials())
def test_entailment_is_reflexive(f):
    assert isinstance(entails(le(f, f)), Proven)
    assert isinstance(entails(EntailmentQuery(EMPTY, GAMMA, f, f, Relation.EQ)), Proven)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(potentials(), potentials(nonneg=True), potentials(nonneg=True))
def test_entailment_is_transitive(a, first, second):
    b = Add(a, first)
    top = Add(b, second)
    assert isinstance(entails(le(a, b)), Proven)
    assert isinstance(entails(le(b, top)), Proven)
    assert isinstance(entails(le(a, top)), Proven)


# --- Binders Under Products ---


def test_constant_factor_lets_a_binder_lift():
    inner = MaxOver(w, LIST, Sub(length(x), length(w)))
    assert isinstance(entails(le(Mul(c(2), inner), Scale(Fraction(2), length(x)))), Proven)
    assert isinstance(entails(le(Mul(inner, c(3)), Scale(Fraction(3), length(x)))), Proven)


def test_binder_under_a_variable_product_is_unknown():
    inner = MaxOver(w, LIST, Sub(length(x), length(w)))
    verdict = entails(le(Mul(length(y), inner), Mul(length(y), length(x))))
    assert isinstance(verdict, Unknown)
    assert "binder" in verdict.reason


def test_positive_minimum_under_a_product_is_not_zeroed():
    tree = tree_type(IntT())
    t = Ident("t")
    leaves = apply_measure(corpus_program("tree_size").measures["leaves"], Var(t))
    q = le(Mul(length(y), MinOver(t, tree, leaves)), ZERO, EMPTY.extend(y, LIST))
    assert not isinstance(entails(q), Proven)
    assert isinstance(oracle(q, size_bound=3), Refuted)


# --- External Solver ---


def external(cfg, handler):
    remote = cfg.with_overrides(SOLVER="external", EXTERNAL_SOLVER_URL="http://solver.test/entails")
    return remote, httpx.Client(transport=httpx.MockTransport(handler))


def test_external_request_carries_the_rendered_query(cfg):
    seen = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        return httpx.Response(200, text="proven\n")

    q = le(length(x), Add(length(x), c(1)))
    remote, client = external(cfg, handler)
    verdict = solve(q, remote, client)
    assert isinstance(verdict, Proven)
    assert closed_value(verdict.witness) == 1
    assert seen[0].method == "POST"
    assert str(seen[0].url) == "http://solver.test/entails"
    assert json.loads(seen[0].content) == build_payload(q)
    assert set(build_payload(q)) == {"relation", "omega", "gamma", "lhs", "rhs"}


def test_external_unknown_keeps_its_reason(cfg):
    remote, client = external(cfg, lambda request: httpx.Response(200, text="unknown nonlinear\nextra"))
    assert solve(le(length(x), c(5)), remote, client) == Unknown("nonlinear")


@pytest.mark.parametrize("reply", ["", "maybe", "PROVEN"])
def test_external_unrecognized_verdicts_are_unknown(cfg, reply):
    remote, client = external(cfg, lambda request: httpx.Response(200, text=reply))
    assert isinstance(solve(le(length(x), c(5)), remote, client), Unknown)


def test_external_server_errors_are_unknown(cfg):
    remote, client = external(cfg, lambda request: httpx.Response(500, text="proven"))
    verdict = solve(le(length(x), Add(length(x), c(1))), remote, client)
    assert isinstance(verdict, Unknown)
    assert "500" in verdict.reason


def test_external_transport_failures_are_unknown(cfg):
    def handler(request: httpx.Request) -> httpx.Response:
        raise httpx.ConnectError("connection refused", request=request)

    remote, client = external(cfg, handler)
    verdict = solve(le(length(x), Add(length(x), c(1))), remote, client)
    assert isinstance(verdict, Unknown)
    assert "unreachable" in verdict.reason


def test_external_solver_without_a_url_is_unknown(cfg):
    remote = cfg.with_overrides(SOLVER="external")
    assert remote.EXTERNAL_SOLVER_URL is None
    assert isinstance(entails(le(length(x), Add(length(x), c(1))), remote), Unknown)
