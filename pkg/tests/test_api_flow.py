# tests/test_api_flow.py

import json

import pytest

from conftest import corpus_source

API = "/api/v1"


def test_health_check(client):
    response = client.get("/")
    assert response.status_code == 200
    assert response.json() == {"status": "ok", "project": "amorna"}


# --- Typing ---


def test_check_append(client):
    response = client.post(f"{API}/check", json={"source": corpus_source("append"), "name": "append.amor"})
    assert response.status_code == 200
    body = response.json()
    assert body["exit_code"] == 0
    report = body["report"]
    assert report["command"] == "check"
    assert report["source"] == "append.amor"
    assert [item["name"] for item in report["items"]] == ["append"]
    assert report["items"][0]["derivation_nodes"] > 0
    assert "status: success" in body["text"]


def test_check_reports_type_errors(client):
    response = client.post(f"{API}/check", json={"source": "def f : int = fun x. x;"})
    assert response.status_code == 200
    body = response.json()
    assert body["exit_code"] == 3
    assert body["report"]["status"] == "type-error"
    assert body["report"]["failed"] == 1


def test_check_honours_assumed_constraints(client):
    source = "def f : [0]_x List int -> [0]_y List int = fun x. tick 1 x;"
    strict = client.post(f"{API}/check", json={"source": source}).json()
    lenient = client.post(f"{API}/check", json={"source": source, "assume_constraints": True}).json()
    assert strict["exit_code"] == 4
    assert lenient["exit_code"] == 0
    assert any("assumed" in d for d in lenient["report"]["items"][0]["diagnostics"])


def test_infer_a_term(client):
    response = client.post(f"{API}/infer", json={"source": "tick 2 7"})
    item = response.json()["report"]["items"][0]
    assert item["name"] == "term"
    assert item["judgement"].startswith(". | . | 2 |-")
    assert "TTickp" in item["rules"]


def test_syntax_errors_are_reported(client):
    body = client.post(f"{API}/infer", json={"source": "def ;"}).json()
    assert body["exit_code"] == 2
    assert body["report"]["diagnostics"]


def test_flags_are_validated(client):
    response = client.post(f"{API}/check", json={"source": "", "max_enum": 0})
    assert response.status_code == 422


# --- Evaluation ---


def test_eval_with_enough_budget(client):
    body = client.post(f"{API}/eval", json={"source": "tick 1 0", "budget": "1"}).json()
    assert body["exit_code"] == 0
    run = body["report"]["items"][0]["run"]
    assert run["value"] == "0"
    assert run["residual"] == "0"


def test_eval_without_budget_is_stuck(client):
    body = client.post(f"{API}/eval", json={"source": "tick 1 0"}).json()
    assert body["exit_code"] == 5
    assert body["report"]["items"][0]["run"]["outcome"] == "StuckTick"


def test_eval_records_the_ledger(client):
    source = corpus_source("traverse") + "\nmain traverse [1, 2, 3];\n"
    body = client.post(f"{API}/eval", json={"source": source, "budget": "3", "ledger": True}).json()
    run = body["report"]["items"][0]["run"]
    assert len(run["ledger"]) == 6
    assert run["peak_usage"] == "3"


@pytest.mark.parametrize("budget", ["-1", "one", "1/0"])
def test_bad_budget_is_unprocessable(client, budget):
    response = client.post(f"{API}/eval", json={"source": "0", "budget": budget})
    assert response.status_code == 422
    detail = response.json()["detail"]
    assert detail["code"] == 2
    assert "budget" in detail["detail"]


# --- AARA ---


def test_embed_a_fixture(client):
    fixture = {"name": "tick", "p": "2", "term": "tick 2", "type": "unit"}
    body = client.post(f"{API}/embed", json={"fixtures": [fixture], "cost_model": "unit"}).json()
    assert body["exit_code"] == 0
    assert [item["name"] for item in body["report"]["items"]] == ["tick [unit]"]


def test_embed_rejects_underfunded_fixtures(client):
    fixture = {"name": "greedy", "p": "1", "term": "tick 2", "type": "unit"}
    body = client.post(f"{API}/embed", json={"fixtures": [fixture], "cost_model": "zero"}).json()
    assert body["exit_code"] != 0
    assert body["report"]["failed"] == 1


# --- Corpus ---


@pytest.mark.slow
def test_corpus_endpoint(client):
    body = client.get(f"{API}/corpus").json()
    assert body["exit_code"] == 0
    report = body["report"]
    assert report["failed"] == 0
    assert json.dumps(report)
