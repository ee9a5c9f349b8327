from __future__ import annotations

from hypothesis import given, settings, strategies as st

from conftest import program
from flowlet.fuzz import random_source
from flowlet.interp import (
    NULL,
    UNDEFINED,
    OutOfFuel,
    RecordVal,
    Stuck,
    Value,
    eval_base_pred,
    load,
    run_program,
    step,
    well_formed,
)
from flowlet.solver import check_pred
from flowlet.types import Base, FieldEq, Falsy, IsNull, IsUndefined, Neg, Nullish, RecordT, Truthy, TypeofIs


def run(source: str, fuel: int = 10_000):
    return run_program(program(source), fuel)


def test_values():
    assert str(run("1 + 2;")) == "Value(3)"
    assert str(run('"a" + "b";')) == 'Value("ab")'
    assert str(run("var r = { f: 1 }; r.f = 2; r.f;")) == "Value(2)"
    assert str(run("var f = (x) => x; f(null);")) == "Value(null)"


def test_basic_corpus_runs(basics):
    assert isinstance(run(basics.read("list.fc")), Value)
    assert str(run(basics.read("list.fc"))) == "Value(13)"
    assert isinstance(run(basics.read("merge.fc")), Value)
    stuck = run(basics.read("havoc.fc"))
    assert isinstance(stuck, Stuck) and stuck.span.line == 6
    stuck = run(basics.read("pipe.fc"))
    assert isinstance(stuck, Stuck) and stuck.kind == "NotAFunction"


def test_closures_see_assignments_to_captured_variables():
    assert str(run("var x = 1; var set = () => { x = 2; }; set(); x;")) == "Value(2)"


def test_stuck_forms():
    assert run("var x = 1; x.f;").kind == "NoSuchField"
    assert run("var r = {}; r.f;").kind == "NoSuchField"
    assert run("var f = (a) => a; f(1, 2);").kind == "ArityMismatch"


def test_divergence_runs_out_of_fuel():
    assert run("var f = () => f(); f();", fuel=500) == OutOfFuel(500)


def test_runtime_predicates():
    rec = RecordVal({"kind": "a"})
    assert eval_base_pred(rec, FieldEq("kind", "a")) and not eval_base_pred(rec, FieldEq("kind", "b"))
    assert eval_base_pred(0, Falsy()) and eval_base_pred("", Neg(Truthy()))
    assert eval_base_pred(NULL, Nullish()) and eval_base_pred(NULL, IsNull()) and not eval_base_pred(NULL, IsUndefined())
    assert eval_base_pred(NULL, TypeofIs("object")) and eval_base_pred(UNDEFINED, TypeofIs("undefined"))


scalars = st.one_of(
    st.integers(-3, 3),
    st.sampled_from(["", "a", "b"]),
    st.booleans(),
    st.just(NULL),
    st.just(UNDEFINED),
)
heap_values = st.one_of(scalars, st.dictionaries(st.sampled_from(["kind", "f"]), scalars, max_size=2).map(RecordVal))
predicates = st.sampled_from(
    [Truthy(), Falsy(), Nullish(), IsNull(), IsUndefined(), TypeofIs("number"), TypeofIs("string"), TypeofIs("object"), FieldEq("kind", "a")]
)


def static_type(hv):
    """The singleton literal type describing a runtime value."""
    if hv is NULL:
        return Base("null")
    if hv is UNDEFINED:
        return Base("void")
    if isinstance(hv, bool):
        return Base("bool", hv)
    if isinstance(hv, int):
        return Base("num", hv)
    if isinstance(hv, str):
        return Base("string", hv)
    return RecordT(tuple(sorted((k, static_type(v)) for k, v in hv.fields.items())))


@given(heap_values, predicates, st.booleans())
def test_static_predicates_cover_runtime_predicates(hv, p, negate):
    q = Neg(p) if negate else p
    if eval_base_pred(hv, q):
        assert check_pred(static_type(hv), q)


@given(st.integers(0, 100_000))
@settings(max_examples=40, deadline=None)
def test_every_step_keeps_the_machine_well_formed(seed):
    m = load(program(random_source(seed), "g.fc"))
    for _ in range(2_000):
        assert well_formed(m)
        if step(m) is not None:
            break
