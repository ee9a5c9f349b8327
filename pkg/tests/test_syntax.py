from __future__ import annotations

from dataclasses import fields, is_dataclass

import pytest
from hypothesis import given, settings, strategies as st

from conftest import program
from flowlet.fuzz import random_program
from flowlet.parser import ParseError, parse, parse_expr
from flowlet.rename import UnboundVariable, alpha_rename, hoisted_locals, local_decls
from flowlet.syntax import (
    Arrow,
    Call,
    Const,
    ExprStmt,
    If,
    Not,
    PredTest,
    RecordLit,
    Var,
    VarDecl,
    children,
    dump_ast,
    pretty,
    walk,
)
from flowlet.types import FieldEq, IsNull, Nullish, TypeofIs


def test_var_decl():
    p = parse("var x = 0;", "t.fc")
    assert p.statements == (VarDecl("x", Const("number", 0)),)


def test_function_sugar_desugars_to_arrow():
    p = parse("function pipe(x, f) { f(x); }", "t.fc")
    (decl,) = p.statements
    assert decl == VarDecl(
        "pipe",
        Arrow(("x", "f"), ExprStmt(Call(Var("f"), (Var("x"),))), Const("undefined")),
    )


def test_parse_error_points_at_offending_token():
    with pytest.raises(ParseError) as exc:
        parse("var y = ;", "t.fc")
    assert exc.value.span.line == 1
    assert exc.value.span.col == 9


def test_predicate_forms():
    assert parse_expr('x.kind === "cons"') == PredTest("x", FieldEq("kind", "cons"))
    assert parse_expr('typeof x === "string"') == PredTest("x", TypeofIs("string"))
    assert parse_expr("x === null") == PredTest("x", IsNull())
    assert parse_expr("x != null") == Not(PredTest("x", Nullish()))


def test_bare_variable_condition_is_a_var():
    p = parse("var x = 1; if (x) { x; } else { }", "t.fc")
    assert isinstance(p.statements[1], If)
    assert p.statements[1].cond == Var("x")


def test_cons_without_trailing_semicolon():
    src = 'var cons = (head, tail) => {\n  return { kind: "cons", head, tail };\n}\nvar z = 1;'
    p = parse(src, "t.fc")
    assert isinstance(p.statements[0].value, Arrow)
    assert isinstance(p.statements[0].value.ret, RecordLit)


def test_duplicate_record_fields_rejected():
    with pytest.raises(ParseError):
        parse("var r = { a: 1, a: 2 };", "t.fc")


def test_every_node_has_a_span():
    p = parse(open_corpus("basics/list.fc"), "list.fc")
    for s in p.statements:
        for node in walk(s):
            assert node.span is not None


def open_corpus(rel: str) -> str:
    from conftest import CORPUS

    return (CORPUS / rel).read_text()


# --- renaming ---------------------------------------------------------------


def test_sibling_locals_get_distinct_names():
    p = program("var f = () => { var t = 1; return t; };\nvar g = () => { var t = 2; return t; };")
    names = [n.name for s in p.statements for n in walk(s) if isinstance(n, VarDecl)]
    assert len([n for n in names if n.startswith("t#")]) == 2
    assert len(set(names)) == len(names)


def test_rename_is_idempotent():
    p = program("var x = 1; var f = (x) => { var y = x; return y; }; f(x);")
    assert alpha_rename(p) == p


def test_unbound_variable_reported():
    with pytest.raises(UnboundVariable) as exc:
        program("x + 1;")
    assert exc.value.name == "x"
    errors = []
    alpha_rename(parse("x + y;", "t.fc"), errors)
    assert [e.name for e in errors] == ["x", "y"]


# --- locals -----------------------------------------------------------------


def test_locals_examples():
    assert set(hoisted_locals(parse("var a = 1; var b = 2;", "t").body)) == {"a", "b"}
    assert set(hoisted_locals(parse("var c = 1; if (c) { var z = 1; } else { }", "t").body)) == {"c", "z"}
    assert set(hoisted_locals(parse("var f = (x) => { var w = 1; return w; };", "t").body)) == {"f"}


def brute_force_locals(s) -> set:
    out = set()

    def go(n):
        if isinstance(n, VarDecl):
            out.add(n.name)
        if isinstance(n, Arrow):
            return
        for c in children(n):
            go(c)

    go(s)
    return out


seeds = st.integers(min_value=0, max_value=10_000)


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_locals_match_brute_force(seed):
    p = parse(pretty(random_program(seed, size=8)), "g.fc")
    assert set(local_decls(p.body)) == brute_force_locals(p.body)
    for node in walk(p.body):
        if isinstance(node, Arrow):
            assert set(local_decls(node.body)) == brute_force_locals(node.body)


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_pretty_parse_round_trip(seed):
    printed = pretty(random_program(seed, size=8))
    again = pretty(parse(printed, "g.fc"))
    assert again == printed
    assert pretty(parse(again, "g.fc")) == again


def erase_ids(node):
    """The tree with every identifier blanked out."""
    if isinstance(node, tuple):
        return tuple(erase_ids(x) for x in node)
    if not is_dataclass(node):
        return node
    out = [type(node).__name__]
    for f in fields(node):
        if f.name in ("span", "param_spans", "file"):
            continue
        v = getattr(node, f.name)
        if f.name in ("name", "params"):
            v = "_" if isinstance(v, str) else tuple("_" for _ in v)
        out.append(erase_ids(v))
    return tuple(out)


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_renaming_preserves_structure(seed):
    raw = parse(pretty(random_program(seed, size=8)), "g.fc")
    renamed = alpha_rename(raw)
    assert erase_ids(raw.statements) == erase_ids(renamed.statements)
    binders = []
    for s in renamed.statements:
        for n in walk(s):
            if isinstance(n, Arrow):
                binders.extend(n.params)
    decls = {n.name for s in renamed.statements for n in walk(s) if isinstance(n, VarDecl)}
    assert len(binders) == len(set(binders))
    assert not decls & set(binders)


def test_dump_ast_is_canonical_json():
    import json

    out = dump_ast(parse("var x = 0;", "t.fc"))
    data = json.loads(out)
    assert data["kind"] == "Program"
    assert data["children"][0]["kind"] == "VarDecl"
    assert data["children"][0]["span"] == {"line": 1, "col": 1, "start": 0, "end": 10}
    assert out == dump_ast(parse("var x = 0;", "t.fc"))
