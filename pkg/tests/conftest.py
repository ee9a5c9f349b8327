from __future__ import annotations

from pathlib import Path

import pytest

from flowlet.gen import Generator
from flowlet.modules import FileSystemView
from flowlet.parser import parse
from flowlet.rename import alpha_rename

CORPUS = Path(__file__).parent / "corpus"
ACCEPTANCE_LINES: list[str] = []  # filled by the acceptance suite, echoed in the summary


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def load_corpus(name: str) -> FileSystemView:
    root = CORPUS / name
    return FileSystemView({p.name: p.read_text() for p in sorted(root.glob("*.fc"))})


def program(source: str, file: str = "t.fc"):
    return alpha_rename(parse(source, file))


def generate(source: str, refinements: bool = True) -> Generator:
    g = Generator(refinements=refinements)
    g.gen_program(program(source))
    return g


def errors_of(source: str, refinements: bool = True) -> list:
    return generate(source, refinements).graph.consistency_errors()


@pytest.fixture
def basics() -> FileSystemView:
    return load_corpus("basics")


@pytest.fixture
def unions() -> FileSystemView:
    return load_corpus("unions")


CHAIN = {
    "a.fc": 'var n = 1;\nmodule.exports = { f: (x: number) => x + n, tag: "a" };\n',
    "b.fc": 'var a = require("./a");\nvar y = a.f(2);\nmodule.exports = { g: a.f, tag: a.tag };\n',
    "c.fc": 'var b = require("./b");\nvar z = b.g(3);\nmodule.exports = { h: b.tag };\n',
}


def chain_project() -> dict[str, str]:
    """C imports B imports A."""
    return dict(CHAIN)
