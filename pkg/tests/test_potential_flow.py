# tests/test_potential_flow.py

from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from app.core.errors import UnresolvedBinder, WfError
from app.services.internal.oracle import enumerate_values
from app.services.internal.potential import (
    apply_measure,
    eval_potential,
    is_nonneg,
    length,
    nat,
    simplify,
    subst_potential,
    wf_potential,
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
    Pair,
    Pow,
    Proj1,
    Ref,
    Scale,
    Sub,
    Var,
    cons,
    list_type,
    list_value,
    nat_value,
    tree_type,
)

from conftest import corpus_program

x, y, w = Ident("x"), Ident("y"), Ident("w")
x0, x1 = Ident("x0"), Ident("x1")
LIST = list_type(IntT())
SMALL_LISTS = list(enumerate_values(LIST, 6))


def same(a, b) -> bool:
    return simplify(Sub(a, b)) == ZERO


# --- Well-Formedness ---


def test_constants_are_well_formed_anywhere():
    wf_potential(EMPTY, EMPTY.extend(x, IntT()), Const(Fraction(5)))


def test_length_of_a_list_variable_is_well_formed():
    wf_potential(EMPTY, EMPTY.extend(x, LIST), length(x))


def test_unbound_int_reference_is_rejected():
    with pytest.raises(WfError) as info:
        wf_potential(EMPTY, EMPTY, Ref(Var(y)))
    assert info.value.rule == "PInt"


def test_measure_on_an_int_is_rejected():
    with pytest.raises(WfError) as info:
        wf_potential(EMPTY, EMPTY.extend(x, IntT()), length(x))
    assert info.value.rule == "PCons"


def test_products_must_not_share_variables():
    with pytest.raises(WfError):
        wf_potential(EMPTY, EMPTY.extend(x, LIST), Mul(length(x), length(x)))
    wf_potential(EMPTY, EMPTY.extend(x, LIST).extend(y, LIST), Mul(length(x), length(y)))


# --- Evaluation ---


def test_length_of_a_two_element_list():
    assert eval_potential(length(list_value([1, 2]))) == 2


def test_constants_evaluate_to_themselves():
    assert eval_potential(Const(Fraction(7, 2)), {x: list_value([])}) == Fraction(7, 2)


def test_sorting_bound_at_three():
    n = Ident("n")
    bound = Scale(Fraction(1, 2), Add(Pow(length(n), 2), Scale(Fraction(3), length(n))))
    assert eval_potential(bound, {n: list_value([3, 2, 1])}) == 9


def test_nat_measure_counts_successors():
    i = Ident("i")
    assert eval_potential(nat(i), {i: nat_value(4)}) == 4


def test_int_references_read_the_environment():
    assert eval_potential(Add(Ref(Var(x)), Const(Fraction(1))), {x: IntLit(3)}) == 4


def test_binders_must_be_simplified_before_evaluation():
    with pytest.raises(UnresolvedBinder):
        eval_potential(MinOver(x, LIST, Add(length(x), length(y))), {y: list_value([1])})


@settings(max_examples=40)
@given(st.lists(st.integers(min_value=0, max_value=3), max_size=8))
def test_length_matches_python_len(items):
    assert eval_potential(length(x), {x: list_value(items)}) == len(items)


# --- Substitution ---


def test_instantiating_a_local_binder():
    assert subst_potential(length(w), w, Var(x)) == length(x)


def test_substitution_skips_absent_variables():
    f = Add(length(y), Const(Fraction(2)))
    assert subst_potential(f, x, list_value([1])) == f


def test_pair_paths_are_rerooted():
    z = Ident("z")
    f = length(Proj1(Var(z)))
    pair = Pair(Var(x), Var(y))
    assert subst_potential(f, z, pair) == length(x)


@settings(max_examples=30)
@given(st.lists(st.integers(min_value=0, max_value=3), max_size=5))
def test_substitution_commutes_with_evaluation(items):
    value = list_value(items)
    f = Add(Scale(Fraction(2), length(w)), Const(Fraction(1)))
    assert eval_potential(subst_potential(f, w, value)) == eval_potential(f, {w: value})


# --- Simplification ---


def test_unused_binder_is_dropped():
    assert same(simplify(MinOver(x, LIST, length(y))), length(y))


def test_length_of_a_cons_unfolds():
    assert same(length(cons(IntT(), Var(x0), Var(x1))), Add(Const(Fraction(1)), length(x1)))


def test_minimum_over_lists_is_the_nil_witness():
    assert simplify(MinOver(x, LIST, length(x))) == ZERO


def test_maximum_keeps_an_upper_bound_over_nonnegative_atoms():
    f = simplify(MaxOver(x, LIST, Sub(length(y), length(x))))
    assert same(f, length(y))


def test_polynomials_normalize():
    f = Add(Scale(Fraction(1, 2), length(x)), Scale(Fraction(1, 2), length(x)))
    assert same(f, length(x))
    assert simplify(Sub(length(x), length(x))) == ZERO


def test_structural_nonnegativity():
    assert is_nonneg(Add(length(x), Const(Fraction(1))))
    assert not is_nonneg(Sub(Const(Fraction(0)), length(x)))


def test_maximum_over_lists_is_exact_at_nil():
    body = Sub(Scale(Fraction(2), length(y)), length(x))
    f = simplify(MaxOver(x, LIST, body))
    for ys in SMALL_LISTS:
        best = max(eval_potential(body, {x: xs, y: ys}) for xs in SMALL_LISTS)
        assert eval_potential(f, {y: ys}) == best


def test_binders_over_leaf_counts_are_bounded_on_the_safe_side():
    tree = tree_type(IntT())
    t = Ident("t")
    count = apply_measure(corpus_program("tree_size").measures["leaves"], Var(t))
    trees = list(enumerate_values(tree, 4))
    fewest = min(eval_potential(count, {t: v}) for v in trees)
    assert fewest == 1
    assert eval_potential(simplify(MinOver(t, tree, count))) <= fewest
    gap = Sub(length(y), count)
    high = simplify(MaxOver(t, tree, gap))
    for ys in SMALL_LISTS:
        assert eval_potential(high, {y: ys}) >= max(eval_potential(gap, {t: v, y: ys}) for v in trees)


# --- Normal Forms Preserve Meaning ---

ATOMS = (length(x), length(y), length(cons(IntT(), IntLit(0), Var(x))))


@st.composite
def potentials(draw, depth: int = 3):
    if depth == 0 or draw(st.booleans()):
        if draw(st.booleans()):
            return Const(draw(st.fractions(min_value=-3, max_value=3, max_denominator=3)))
        return draw(st.sampled_from(ATOMS))
    left = draw(potentials(depth - 1))
    match draw(st.sampled_from(["add", "sub", "scale", "mul", "pow", "min", "max"])):
        case "add":
            return Add(left, draw(potentials(depth - 1)))
        case "sub":
            return Sub(left, draw(potentials(depth - 1)))
        case "scale":
            return Scale(draw(st.fractions(min_value=-2, max_value=2, max_denominator=2)), left)
        case "mul":
            return Mul(left, draw(potentials(depth - 1)))
        case "pow":
            return Pow(left, draw(st.integers(min_value=0, max_value=2)))
        case "min":
            return Min2(left, draw(potentials(depth - 1)))
    return Max2(left, draw(potentials(depth - 1)))


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(potentials())
def test_simplify_agrees_with_evaluation_on_every_small_list(f):
    normal = simplify(f)
    for xs in SMALL_LISTS:
        for ys in SMALL_LISTS:
            env = {x: xs, y: ys}
            assert eval_potential(normal, env) == eval_potential(f, env)
