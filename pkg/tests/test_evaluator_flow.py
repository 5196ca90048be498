# tests/test_evaluator_flow.py

import itertools
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from app.services.internal.evaluator import (
    Config,
    Done,
    Next,
    Outcome,
    Stuck,
    desugar_tickl,
    run,
    step,
)
from app.services.internal.syntax import (
    Abs,
    App,
    Branch,
    Ident,
    IntLit,
    IntT,
    Let,
    Matd,
    Op,
    Pair,
    Proj1,
    Proj2,
    Tick,
    Var,
    cons,
    list_type,
    list_value,
    nat_value,
    nil,
)

from conftest import call, instance

LIST = list_type(IntT())


# --- Single Steps ---


def test_affordable_tick_finishes_in_one_step():
    report = run(Tick(1, IntLit(0)), 1)
    assert report.outcome is Outcome.VALUE
    assert report.residual == 0
    assert report.steps == 1


def test_projection_of_a_pair_value():
    result = step(Config(Proj1(Pair(IntLit(1), IntLit(2))), Fraction(3)))
    assert isinstance(result, Next)
    assert result.config == Config(IntLit(1), Fraction(3))


def test_unaffordable_tick_is_stuck():
    result = step(Config(Tick(1, IntLit(0)), Fraction(0)))
    assert isinstance(result, Stuck)
    assert result.kind is Outcome.STUCK_TICK


def test_values_are_done():
    assert step(Config(IntLit(4), Fraction(2))) == Done(IntLit(4), Fraction(2))


def test_negative_budgets_are_rejected():
    with pytest.raises(ValueError):
        Config(IntLit(0), Fraction(-1))


def test_applying_a_number_is_stuck_other():
    assert run(App(IntLit(1), IntLit(2)), 0).outcome is Outcome.STUCK_OTHER


def test_operators_compute():
    report = run(Op("+", (IntLit(2), Op("*", (IntLit(3), IntLit(4))))), 0)
    assert report.value == IntLit(14)


def test_fuel_bounds_the_run():
    term = Tick(0, Tick(0, Tick(0, IntLit(0))))
    report = run(term, 0, fuel=1)
    assert report.outcome is Outcome.FUEL_EXHAUSTED
    assert report.steps == 1


# --- Released Ticks ---


def test_tickl_is_an_application_of_a_releasing_abstraction():
    body = IntLit(5)
    desugared = desugar_tickl(-1, body)
    match desugared:
        case App(Abs(v, None, Tick(-1, Var(w))), arg):
            assert v == w and arg == body
        case _:
            pytest.fail(f"unexpected shape {desugared!r}")


def test_tickl_zero_keeps_the_budget():
    report = run(desugar_tickl(0, IntLit(3)), 2)
    assert report.value == IntLit(3)
    assert report.residual == 2


def test_ledger_records_charges_and_releases(load):
    program = load("traverse")
    report = run(call(program, "traverse", list_value([1, 2])), 2, record_ledger=True)
    assert [e.amount for e in report.ledger] == [1, 1, -1, -1]
    assert report.ledger[1].budget_after == 0
    assert report.ticks_released == 2


# --- Corpus Programs ---


def test_append_charges_once_per_cell(load):
    program = load("append")
    report = run(call(program, "append", list_value([1]), list_value([2])), 1, fuel=1000)
    assert report.outcome is Outcome.VALUE
    assert report.value == list_value([1, 2])
    assert report.residual == 0
    assert report.ticks_consumed == 1


@pytest.mark.parametrize("n", range(1, 9))
def test_app_par_costs_twice_the_first_list(load, n):
    program = load("app_par")
    term = instance(program, "app_par", l1=list_value(range(1, n + 1)), l2=list_value([]), l3=list_value([]))
    report = run(term, 2 * n)
    assert report.outcome is Outcome.VALUE
    assert report.residual == 0
    assert report.ticks_consumed == 2 * n
    assert report.value == Pair(list_value(range(1, n + 1)), list_value(range(1, n + 1)))
    assert run(term, 2 * n - 1).outcome is Outcome.STUCK_TICK


@pytest.mark.parametrize("n", range(1, 9))
def test_traverse_gives_back_what_it_holds(load, n):
    program = load("traverse")
    term = call(program, "traverse", list_value(range(1, n + 1)))
    report = run(term, n)
    assert report.outcome is Outcome.VALUE
    assert report.residual == n
    assert report.peak_usage == n
    assert run(term, n - 1).outcome is Outcome.STUCK_TICK


@pytest.mark.parametrize("a, b", list(itertools.product(range(6), repeat=2)))
def test_map_append_costs_the_product(load, a, b):
    program = load("map_append")
    inner = [list_value([k]) for k in range(b)]
    term = instance(program, "map_append", l1=list_value(range(a)), l2=list_value(inner, LIST))
    report = run(term, a * b)
    assert report.outcome is Outcome.VALUE
    assert report.ticks_consumed == a * b
    assert report.residual == 0


@pytest.mark.parametrize("n", range(1, 7))
def test_insertion_sort_bound_is_tight_on_reversed_input(load, n):
    program = load("insertion_sort")
    term = call(program, "sort", nat_value(0), list_value(range(n, 0, -1)))
    bound = Fraction(n * n + 3 * n, 2)
    report = run(term, bound)
    assert report.outcome is Outcome.VALUE
    assert report.value == list_value(range(1, n + 1))
    assert report.ticks_consumed == bound
    assert run(term, bound - 1).outcome is Outcome.STUCK_TICK


def test_tree_sum_charges_inner_nodes(load):
    program = load("tree_size")
    tree = program.probes[0].term
    report = run(tree, 2)
    assert report.value == IntLit(6)
    assert report.residual == 0


# --- Random Programs ---

y, u, h, tl = Ident("y"), Ident("u"), Ident("h"), Ident("tl")
amounts = st.integers(min_value=-2, max_value=2)
budgets = st.fractions(min_value=0, max_value=4, max_denominator=2)
FUEL = 200


def _case(scrutinee, amount: int):
    arms = (Branch(0, (u,), IntLit(0)), Branch(1, (h, tl), Tick(amount, Var(h))))
    return Matd(scrutinee, arms)


def _extend(sub):
    return st.one_of(
        st.tuples(amounts, sub).map(lambda a: Tick(a[0], a[1])),
        st.tuples(sub, sub).map(lambda a: Op("+", a)),
        st.tuples(sub, sub).map(lambda a: Pair(*a)),
        sub.map(Proj1),
        sub.map(Proj2),
        st.tuples(sub, sub).map(lambda a: Let(y, a[0], Op("+", (Var(y), a[1])))),
        st.tuples(amounts, sub).map(lambda a: App(Abs(y, None, Tick(a[0], Var(y))), a[1])),
        st.tuples(sub, amounts).map(lambda a: _case(cons(IntT(), a[0], nil(IntT())), a[1])),
        st.tuples(sub, amounts).map(lambda a: _case(a[0], a[1])),
    )


terms = st.recursive(st.integers(min_value=-2, max_value=3).map(IntLit), _extend, max_leaves=8)


def trace(e, budget):
    """Every configuration of a run, up to the fuel limit, and the last step result."""
    config = Config(e, Fraction(budget))
    configs = [config]
    for _ in range(FUEL):
        result = step(config)
        if not isinstance(result, Next):
            return configs, result
        config = result.config
        configs.append(config)
    return configs, None


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(terms, budgets, budgets)
def test_more_budget_takes_the_same_step(e, p, extra):
    small = step(Config(e, p))
    large = step(Config(e, p + extra))
    match small:
        case Next(config, rule, tick):
            assert large == Next(Config(config.term, config.budget + extra), rule, tick)
        case Done(value, residual):
            assert large == Done(value, residual + extra)
        case Stuck(Outcome.STUCK_OTHER, at, _):
            assert large == Stuck(Outcome.STUCK_OTHER, at, p + extra)


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(terms, budgets, budgets)
def test_more_budget_ends_with_the_surplus(e, p, extra):
    small = run(e, p, fuel=FUEL)
    if small.outcome is not Outcome.VALUE:
        return
    large = run(e, p + extra, fuel=FUEL)
    assert large.outcome is Outcome.VALUE
    assert large.value == small.value
    assert large.residual == small.residual + extra
    assert large.steps == small.steps


@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(terms, budgets)
def test_every_configuration_has_exactly_one_successor(e, p):
    configs, last = trace(e, p)
    for config in configs:
        assert step(config) == step(config)
    assert run(e, p, fuel=FUEL) == run(e, p, fuel=FUEL)
    if last is not None:
        assert step(configs[-1]) == last


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(terms, budgets)
def test_budget_never_goes_negative(e, p):
    configs, last = trace(e, p)
    assert all(config.budget >= 0 for config in configs)
    match last:
        case Done(_, residual):
            assert residual >= 0
        case Stuck(Outcome.STUCK_TICK, Tick(amount, _), budget):
            assert budget - amount < 0
    report = run(e, p, fuel=FUEL, record_ledger=True)
    assert all(event.budget_after >= 0 for event in report.ledger)
