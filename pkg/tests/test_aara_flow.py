# tests/test_aara_flow.py

from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from app.services.internal.aara import (
    AaraFixture,
    ACons,
    AFun,
    AInt,
    AList,
    AProd,
    AShare,
    ASum,
    ATick,
    AUnit,
    AVar,
    CostModel,
    NoJoin,
    embed_check,
    embed_fixture,
    fixtures,
    parse_aara_term,
    parse_aara_type,
    phi_of_type,
    share_join,
    translate_ctx,
    translate_term,
    translate_type,
)
from app.services.internal.oracle import enumerate_values
from app.services.internal.potential import eval_potential, length
from app.services.internal.syntax import (
    EMPTY,
    UNIT_T,
    UNIT_V,
    ZERO,
    ArrowT,
    Con,
    Ident,
    IntT,
    Proj1,
    Scale,
    Tick,
    Var,
    alpha_eq,
    free_vars,
    list_type,
    list_value,
)

x, a, b = Ident("x"), Ident("a"), Ident("b")
LIST = list_type(IntT())

FIXTURES = fixtures()


# --- Potentials of AARA Types ---


def test_functions_carry_no_potential():
    assert phi_of_type(x, AFun(AInt(), Fraction(1), AInt(), Fraction(0))) == ZERO


def test_unit_lists_carry_one_unit_per_cell():
    value = list_value([UNIT_V] * 3, UNIT_T)
    assert eval_potential(phi_of_type(x, AList(AUnit(), Fraction(1))), {x: value}) == 3


def test_products_read_the_first_component_only():
    phi = phi_of_type(x, AProd(AList(AInt(), Fraction(1)), AUnit()))
    assert phi == length(Proj1(Var(x)))


# --- Types and Contexts ---


def test_list_types_translate_to_the_list_encoding():
    assert translate_type(AList(AInt(), Fraction(4))) == LIST
    assert translate_type(AUnit()) == UNIT_T


def test_append_type_asks_for_one_unit_per_cell():
    arrow = translate_type(AFun(AList(AInt(), Fraction(1)), Fraction(0), AList(AInt(), Fraction(0)), Fraction(0)))
    expected = ArrowT(a, length(a), LIST, b, ZERO, LIST)
    assert alpha_eq(arrow, expected)


def test_empty_context_carries_nothing():
    assert translate_ctx([]) == (EMPTY, ZERO)


def test_context_potential_sums_the_bindings():
    ctx, phi = translate_ctx([(x, AList(AInt(), Fraction(2)))])
    assert ctx == EMPTY.extend(x, LIST)
    assert phi == Scale(Fraction(2), length(x))


def test_function_bindings_add_no_potential():
    f = Ident("f")
    _, phi = translate_ctx([(f, AFun(AInt(), Fraction(3), AInt(), Fraction(0)))])
    assert phi == ZERO


# --- Term Translation ---


def test_explicit_ticks_carry_over():
    assert translate_term(ATick(Fraction(2))) == Tick(Fraction(2), UNIT_V)


def test_free_variables_cost_c_var():
    assert translate_term(AVar(x), CostModel.zero()) == Tick(0, Var(x))
    assert translate_term(AVar(x), CostModel.unit()) == Tick(1, Var(x))


def test_sharing_eliminates_both_copies():
    term = translate_term(AShare(x, a, b, ACons(AInt(), a, b)))
    assert free_vars(term) == {x}
    assert isinstance(term.body, Con)


def test_unit_model_charges_every_construct():
    unit = CostModel.unit()
    assert all(getattr(unit, name) == 1 for name in CostModel.model_fields)
    with pytest.raises(ValueError):
        CostModel.named("quadratic")


# --- Sharing ---


def test_join_adds_annotations():
    assert share_join(AList(AInt(), Fraction(1)), AList(AInt(), Fraction(2))) == AList(AInt(), Fraction(3))


def test_join_with_zero_annotations_is_identity():
    t = AList(AInt(), Fraction(5))
    assert share_join(t, AList(AInt(), Fraction(0))) == t


def test_join_of_different_shapes_fails():
    assert isinstance(share_join(AList(AInt(), Fraction(1)), AUnit()), NoJoin)


annotations = st.fractions(min_value=0, max_value=3, max_denominator=2)

shapes = st.recursive(
    st.sampled_from([("unit",), ("int",)]),
    lambda sub: st.one_of(
        sub.map(lambda s: ("list", s)),
        st.tuples(sub, sub).map(lambda lr: ("sum", *lr)),
        st.tuples(sub, sub).map(lambda lr: ("prod", *lr)),
    ),
    max_leaves=3,
)


@st.composite
def annotated(draw, shape):
    match shape:
        case ("unit",):
            return AUnit()
        case ("int",):
            return AInt()
        case ("list", elem):
            return AList(draw(annotated(elem)), draw(annotations))
        case ("sum", left, right):
            return ASum(draw(annotated(left)), draw(annotations), draw(annotated(right)), draw(annotations))
    _, left, right = shape
    return AProd(draw(annotated(left)), draw(annotated(right)))


@st.composite
def same_shape_pairs(draw):
    shape = draw(shapes)
    return draw(annotated(shape)), draw(annotated(shape))


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(same_shape_pairs())
def test_sharing_splits_potential_exactly(pair):
    first, second = pair
    joined = share_join(first, second)
    assert not isinstance(joined, NoJoin)
    assert alpha_eq(translate_type(joined), translate_type(first))
    assert alpha_eq(translate_type(joined), translate_type(second))
    phis = [phi_of_type(x, t) for t in (first, second, joined)]
    for v in enumerate_values(translate_type(joined), 5, limit=40):
        left, right, both = (eval_potential(phi, {x: v}) for phi in phis)
        assert both == left + right


# --- Fixture Syntax ---


def test_fixture_types_parse():
    assert parse_aara_type("L^2(int)") == AList(AInt(), Fraction(2))
    assert parse_aara_type("L^0(int) -[2/0]-> unit") == AFun(AList(AInt(), Fraction(0)), Fraction(2), AUnit(), Fraction(0))


def test_fixture_terms_parse():
    assert parse_aara_term("tick 2") == ATick(Fraction(2))
    assert parse_aara_term("share x as a, b in a") == AShare(x, a, b, AVar(a))


# --- Embedding ---


def test_shipped_fixtures_cover_the_core_constructs():
    both = {f.name for f in FIXTURES if {"zero", "unit"} <= set(f.models)}
    assert len(both) >= 6
    assert {"var", "unit", "tick", "cons", "append", "share"} <= both


@pytest.mark.parametrize(
    "fixture, model",
    [(f, m) for f in FIXTURES for m in f.models],
    ids=lambda v: v.name if isinstance(v, AaraFixture) else v,
)
def test_fixture_embeds(fixture, model, cfg):
    result = embed_fixture(fixture, CostModel.named(model), cfg)
    assert result.accepted, result.diagnostics


def test_variable_without_its_cost_is_rejected(cfg):
    result = embed_check([(x, AInt())], Fraction(0), AVar(x), Fraction(0), AInt(), CostModel.unit(), cfg)
    assert not result.accepted


def test_first_order_append_with_unit_costs(cfg):
    fixture = next(f for f in FIXTURES if f.name == "append")
    result = embed_fixture(fixture, CostModel.unit(), cfg)
    assert result.accepted
    assert result.inferred is not None


def test_embedded_bindings_are_program_variables(cfg):
    gamma = [(x, AList(AInt(), Fraction(1)))]
    result = embed_check(gamma, Fraction(0), AVar(x), Fraction(0), AList(AInt(), Fraction(0)), CostModel.zero(), cfg)
    assert result.accepted, result.diagnostics
    assert result.wanted.omega == EMPTY
    assert result.wanted.gamma == EMPTY.extend(x, LIST)
    assert result.wanted.in_pot == length(x)
