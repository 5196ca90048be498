# tests/test_parser_flow.py

from fractions import Fraction

import pytest

from app.core.errors import ParseError
from app.services.internal.evaluator import Outcome
from app.services.internal.parser import parse_program, parse_pot, parse_term, parse_type
from app.services.internal.potential import length
from app.services.internal.render import show_judgement, show_pot, show_term, show_type
from app.services.internal.syntax import (
    NAT_T,
    UNIT_V,
    ZERO,
    Abs,
    ArrowT,
    Fix,
    Ident,
    IntLit,
    IntT,
    Matd,
    Pair,
    Scale,
    Tick,
    alpha_eq,
    list_type,
    list_value,
)

from conftest import CORPUS_FILES, corpus_program, corpus_source

LIST = list_type(IntT())


# --- Programs ---


def test_empty_source_is_an_empty_program():
    program = parse_program("")
    assert program.declarations == [] and program.probes == []
    assert program.entry is None


def test_append_listing_is_one_fixpoint():
    program = corpus_program("append")
    assert len(program.declarations) == 1
    decl = program.declaration("append")
    assert isinstance(decl.term, Fix)
    assert isinstance(decl.type, ArrowT)


def test_probes_carry_budgets_and_expectations():
    probes = corpus_program("append").probes
    assert [p.budget for p in probes] == [1, 3, 2]
    assert [p.expect for p in probes] == [Outcome.VALUE, Outcome.VALUE, Outcome.STUCK_TICK]
    assert probes[0].residual == 0


def test_parameters_and_requirements():
    decl = corpus_program("app_par").declaration("app_par")
    assert [x.name for x, _ in decl.params] == ["l1", "l2", "l3"]
    assert decl.requires != ZERO


def test_measures_are_collected():
    program = corpus_program("tree_size")
    assert "leaves" in program.measures


def test_main_item_is_closed_over_declarations():
    source = corpus_source("append") + "\nmain append [1, 2] [3];\n"
    entry = parse_program(source).entry
    assert entry is not None
    assert show_term(entry).startswith("(let append")


def test_parameterless_functions_keep_their_annotation():
    decl = corpus_program("curry").declaration("curry")
    assert isinstance(decl.term, Fix)
    assert decl.term.annotation == decl.type


@pytest.mark.parametrize("name", CORPUS_FILES)
def test_corpus_files_parse(name):
    assert corpus_program(name).declarations


# --- Terms, Types and Potentials ---


def test_list_literal():
    assert parse_term("[1, 2]") == list_value([1, 2])


def test_nested_list_literal_takes_its_element_type():
    term = parse_term("[[1], [2, 3]]")
    assert term.ind == list_type(LIST)


def test_pairs_and_ticks():
    assert parse_term("(1, 2)") == Pair(IntLit(1), IntLit(2))
    assert parse_term("tick 2 0") == Tick(2, IntLit(0))
    assert parse_term("tick -1 0") == Tick(-1, IntLit(0))


def test_bare_unit_and_nat_constructors():
    assert parse_term("unit") == UNIT_V
    assert parse_term("zero").ind == NAT_T


def test_case_on_a_list():
    term = parse_term("fun x : List int. case x of nil(u) => 0 | cons(h, t) => h")
    assert isinstance(term, Abs)
    assert isinstance(term.body, Matd)
    assert [b.name for b in term.body.branches] == ["nil", "cons"]


def test_type_syntax():
    assert parse_type("List int") == LIST
    arrow = parse_type("[length(x)]_x List int -> [0]_y List int")
    assert alpha_eq(arrow, ArrowT(Ident("a"), length(Ident("a")), LIST, Ident("b"), ZERO, LIST))


def test_potential_syntax():
    f = parse_pot("1/2 * length(x)")
    assert f == Scale(Fraction(1, 2), length(Ident("x")))


def test_syntax_errors_carry_a_position():
    with pytest.raises(ParseError) as info:
        parse_program("def f : int =\n  ;")
    assert info.value.code == 2
    assert info.value.line == 2


def test_unknown_constructor_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_program("def f : List int = cons(1);")


# --- Rendering ---


def test_unit_renders_as_its_constructor():
    assert show_term(UNIT_V) == "unit"


def test_render_list_and_arrow():
    assert show_term(list_value([1, 2])) == "[1, 2]"
    arrow = ArrowT(Ident("x"), length(Ident("x")), LIST, Ident("y"), ZERO, LIST)
    assert show_type(arrow) == "[length(x)]_x List int -> [0]_y List int"


def test_render_rationals():
    assert show_pot(Scale(Fraction(1, 2), length(Ident("z")))) == "1/2 * length(z)"


def test_traverse_round_trips():
    decl = corpus_program("traverse").declaration("traverse")
    assert alpha_eq(parse_term(show_term(decl.term)), decl.term)


@pytest.mark.parametrize("name", CORPUS_FILES)
def test_declaration_types_round_trip(name):
    for decl in corpus_program(name).declarations:
        assert alpha_eq(parse_type(show_type(decl.type)), decl.type)


def test_judgement_rendering_mentions_every_part():
    program = corpus_program("append")
    _, _, want = program.wanted(program.declaration("append"))
    text = show_judgement(want)
    assert "|-" in text and "List int" in text
