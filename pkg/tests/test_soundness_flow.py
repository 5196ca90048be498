# tests/test_soundness_flow.py

"""
Running any well-typed closed program with the budget its inferred input
potential asks for never gets stuck on a tick, and leaves at least the
inferred output potential of the value it returns.
"""

from functools import lru_cache

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from app.services.internal.evaluator import Outcome, run
from app.services.internal.parser import SourceProgram, parse_program
from app.services.internal.potential import closed_value, eval_potential
from app.services.internal.syntax import (
    EMPTY,
    UNIT_V,
    App,
    Con,
    IntLit,
    IntT,
    Let,
    Pair,
    Var,
    fresh_name,
    list_value,
    nat_value,
    tree_type,
)
from app.services.internal.typer import infer

from conftest import CORPUS_FILES, corpus_program, corpus_source

TREE = tree_type(IntT())
LIBRARY = ("append", "traverse", "insertion_sort", "tree_size")


@lru_cache(maxsize=1)
def library() -> SourceProgram:
    return parse_program("\n".join(corpus_source(name) for name in LIBRARY))


def assert_sound(term):
    j = infer(EMPTY, EMPTY, term)
    budget = closed_value(j.in_pot)
    assert budget is not None, j.in_pot
    report = run(term, budget)
    assert report.outcome is Outcome.VALUE, report.outcome
    leftover = eval_potential(j.out_pot, {j.binder: report.value})
    assert report.residual >= leftover


# --- Corpus Probes ---


def probes():
    for name in CORPUS_FILES:
        for n, probe in enumerate(corpus_program(name).probes):
            if probe.expect is Outcome.VALUE:
                yield name, n


@pytest.mark.parametrize("name, index", list(probes()))
def test_corpus_probe_runs_on_its_inferred_budget(name, index):
    assert_sound(corpus_program(name).probes[index].term)


# --- Random Compositions ---


ints = st.integers(min_value=-3, max_value=3)
lists = st.lists(ints, max_size=4).map(list_value)


def _leaf(v: int) -> Con:
    return Con(TREE, 0, IntLit(v), ())


trees = st.recursive(
    ints.map(_leaf),
    lambda sub: st.tuples(sub, sub).map(lambda lr: Con(TREE, 1, UNIT_V, lr)),
    max_leaves=5,
)


@st.composite
def compositions(draw):
    program = library()

    def fn(name: str):
        return Var(program.declaration(name).name)

    def apply(name: str, *args):
        term = fn(name)
        for a in args:
            term = App(term, a)
        return term

    choice = draw(st.sampled_from(["append", "traverse", "sort", "then", "tree_sum", "count_leaves", "pair"]))
    match choice:
        case "append":
            term = apply("append", draw(lists), draw(lists))
        case "traverse":
            term = apply("traverse", draw(lists))
        case "sort":
            term = apply("sort", nat_value(0), draw(lists))
        case "then":
            t = fresh_name("t", {d.name for d in program.declarations})
            term = Let(t, apply("traverse", draw(lists)), apply("append", Var(t), draw(lists)))
        case "tree_sum" | "count_leaves":
            term = apply(choice, draw(trees))
        case _:
            term = Pair(apply("append", draw(lists), draw(lists)), apply("traverse", draw(lists)))
    return program.closed(term)


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(compositions())
def test_random_compositions_are_sound(term):
    assert_sound(term)
