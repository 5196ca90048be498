# tests/conftest.py

from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from app.core.config import settings
from app.main import app
from app.services.internal.commands import CORPUS_DIR
from app.services.internal.evaluator import instantiate
from app.services.internal.parser import SourceProgram, parse_program
from app.services.internal.syntax import App, Var, new_session

# --- Configuration ---
CORPUS_FILES = sorted(p.stem for p in CORPUS_DIR.glob("*.amor"))


@pytest.fixture(autouse=True)
def session():
    """Every test starts from a fresh naming session."""
    return new_session()


@pytest.fixture
def cfg():
    return settings


@pytest.fixture
def client():
    with TestClient(app) as c:
        yield c


def corpus_source(name: str) -> str:
    return (CORPUS_DIR / f"{name}.amor").read_text()


def corpus_program(name: str) -> SourceProgram:
    return parse_program(corpus_source(name))


@pytest.fixture
def load():
    """Loads a shipped corpus program by file stem."""
    return corpus_program


def call(program: SourceProgram, name: str, *args):
    """The closed term applying a parameter-less declaration to argument terms."""
    term = Var(program.declaration(name).name)
    for a in args:
        term = App(term, a)
    return program.closed(term)


def instance(program: SourceProgram, name: str, **values):
    """The closed body of a declaration with parameters, at the given values."""
    decl = program.declaration(name)
    mapping = {x: values[x.name] for x, _ in decl.params}
    return program.closed(instantiate(decl.term, mapping))


def write(tmp_path: Path, name: str, text: str) -> str:
    path = tmp_path / name
    path.write_text(text)
    return str(path)
