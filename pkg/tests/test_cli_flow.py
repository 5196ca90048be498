# tests/test_cli_flow.py

import json

import pytest

from app.cli import main
from app.services.internal.commands import CORPUS_DIR

from conftest import write

APPEND = str(CORPUS_DIR / "append.amor")


# --- check ---


def test_check_accepts_append(capsys):
    assert main(["check", APPEND]) == 0
    out = capsys.readouterr().out
    assert "status: success" in out
    assert "[append] success" in out


def test_syntax_error_exits_two(tmp_path, capsys):
    path = write(tmp_path, "broken.amor", "def f : int = ;")
    assert main(["check", path]) == 2
    assert "parse-error" in capsys.readouterr().out


def test_type_error_exits_three(tmp_path):
    path = write(tmp_path, "bad.amor", "def f : int = fun x. x;")
    assert main(["check", path]) == 3


def test_unprovable_annotation_exits_four(tmp_path):
    source = "def f : [0]_x List int -> [0]_y List int = fun x. tick 1 x;"
    path = write(tmp_path, "greedy.amor", source)
    assert main(["check", path]) == 4


def test_assumed_constraints_are_reported_not_failed(tmp_path, capsys):
    source = "def f : [0]_x List int -> [0]_y List int = fun x. tick 1 x;"
    path = write(tmp_path, "greedy.amor", source)
    assert main(["--assume-constraints", "check", path]) == 0
    assert "assumed" in capsys.readouterr().out


def test_missing_file_exits_one(tmp_path, capsys):
    assert main(["check", str(tmp_path / "absent.amor")]) == 1
    assert "amorna:" in capsys.readouterr().err


# --- infer ---


def test_infer_prints_the_append_type(capsys):
    assert main(["infer", APPEND]) == 0
    out = capsys.readouterr().out
    assert "length(" in out
    assert "List int -> [0]_" in out


def test_infer_accepts_a_bare_term(tmp_path, capsys):
    path = write(tmp_path, "term.amor", "tick 2 7")
    assert main(["--json", "infer", path]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["items"][0]["judgement"].startswith(". | . | 2 |-")


# --- eval ---


def test_unaffordable_tick_exits_five(capsys):
    assert main(["eval", "-e", "tick 1 0", "--budget", "0"]) == 5
    out = capsys.readouterr().out
    assert "StuckTick" in out


def test_affordable_tick_leaves_the_rest(capsys):
    assert main(["--json", "eval", "-e", "tick 1 0", "--budget", "3/2"]) == 0
    run = json.loads(capsys.readouterr().out)["items"][0]["run"]
    assert run["outcome"] == "Value"
    assert run["residual"] == "1/2"


def test_fuel_exhaustion_exits_six():
    assert main(["eval", "-e", "tick 0 tick 0 tick 0 0", "--fuel", "1"]) == 6


def test_eval_runs_the_main_item(tmp_path, capsys):
    source = (CORPUS_DIR / "traverse.amor").read_text() + "\nmain traverse [1, 2];\n"
    path = write(tmp_path, "walk.amor", source)
    assert main(["--json", "eval", path, "--budget", "2", "--ledger"]) == 0
    run = json.loads(capsys.readouterr().out)["items"][0]["run"]
    assert run["residual"] == "2"
    assert run["peak_usage"] == "2"
    assert [row["amount"] for row in run["ledger"]] == ["1", "1", "-1", "-1"]


def test_bad_budget_is_a_parse_error():
    assert main(["eval", "-e", "0", "--budget", "-1"]) == 2


def test_program_without_main_cannot_run():
    assert main(["eval", APPEND]) == 2


# --- embed ---


def test_embed_runs_both_cost_models(capsys):
    path = str(CORPUS_DIR / "aara" / "basics.json")
    assert main(["--json", "embed", path, "--cost-model", "zero", "--cost-model", "unit"]) == 0
    report = json.loads(capsys.readouterr().out)
    names = [item["name"] for item in report["items"]]
    assert "var [zero]" in names and "var [unit]" in names


def test_embed_rejects_malformed_fixtures(tmp_path):
    path = write(tmp_path, "bad.json", '{"name": "x"}')
    assert main(["embed", path]) == 2


# --- corpus ---


@pytest.mark.slow
def test_corpus_command_passes(capsys):
    assert main(["--json", "corpus"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["failed"] == 0
    assert report["passed"] > 0
