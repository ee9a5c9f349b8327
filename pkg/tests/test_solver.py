from __future__ import annotations

import random

from hypothesis import given, settings, strategies as st

from conftest import errors_of, generate, program
from flowlet.fuzz import random_source
from flowlet.gen import Generator
from flowlet.naive import graph_signature, naive_close
from flowlet.solver import ConstraintGraph, check_pred
from flowlet.types import (
    ArrowT,
    Base,
    EMPTY,
    FieldEq,
    Flow,
    GetUse,
    Neg,
    Nullish,
    PredUse,
    RecordT,
    ToVar,
    Truthy,
    TypeofIs,
)


def fuzz_log(seed: int, size: int = 6):
    g = Generator()
    g.gen_program(program(random_source(seed, size=size), "g.fc"))
    return g


def test_check_pred_examples():
    assert check_pred(Base("num", 0), Neg(Truthy()))
    assert not check_pred(Base("num", 1), Neg(Truthy()))
    assert check_pred(Base("num"), Truthy()) and check_pred(Base("num"), Neg(Truthy()))
    assert check_pred(Base("null"), Nullish()) and check_pred(Base("void"), Nullish())
    assert not check_pred(RecordT(()), Nullish())
    assert check_pred(ArrowT((), EMPTY, Base("void")), TypeofIs("function"))
    assert check_pred(Base("null"), TypeofIs("object"))
    rec = RecordT((("kind", Base("string", "a")),))
    assert check_pred(rec, FieldEq("kind", "a")) and not check_pred(rec, FieldEq("kind", "b"))
    assert check_pred(rec, Neg(FieldEq("kind", "b")))
    assert not check_pred(Base("num"), FieldEq("kind", "a"))


def test_basic_corpus_verdicts(basics):
    verdicts = {f: [e.reason for e in errors_of(basics.read(f))] for f in basics.paths()}
    assert verdicts == {
        "havoc.fc": ["NotARecord"],
        "list.fc": [],
        "merge.fc": [],
        "pipe.fc": ["NotAFunction"],
        "pipe_guarded.fc": [],
    }


def test_havoc_contains_null_into_kind_read(basics):
    g = generate(basics.read("havoc.fc"))
    closed = g.graph.closed_constraints()
    hits = [c for c in closed if isinstance(c.use, GetUse) and c.use.field == "kind" and c.lhs == Base("null", None, c.lhs.span)]
    assert hits
    assert hits[0].use.span.line == 6


def test_merge_has_no_inconsistent_form(basics):
    g = generate(basics.read("merge.fc"))
    assert g.graph.consistency_errors() == []
    assert naive_close(g.log).verdict()


def _filter_graph(kind_value: str, pred):
    g = ConstraintGraph()
    k, v, o = g.fresh.tvar(), g.fresh.tvar(), g.fresh.tvar()
    g.add_constraint(Flow(Base("string", kind_value), ToVar(k)))
    g.add_constraint(Flow(RecordT((("kind", k),)), ToVar(v)))
    g.add_constraint(Flow(v, PredUse(pred, o)))
    return g, o


def test_positive_field_hole_is_concretized():
    g, o = _filter_graph("b", FieldEq("kind", "a"))
    assert g.lit_lowers(o) == []
    g, o = _filter_graph("a", FieldEq("kind", "a"))
    assert len(g.lit_lowers(o)) == 1
    g, o = _filter_graph("b", Neg(FieldEq("kind", "a")))
    assert len(g.lit_lowers(o)) == 1


def test_negative_hole_is_not_concretized():
    # a parameter hole cannot be filled, so a function passes a field test only by its own shape
    g = ConstraintGraph()
    p, v, o = g.fresh.tvar(), g.fresh.tvar(), g.fresh.tvar()
    g.add_constraint(Flow(Base("string", "a"), ToVar(p)))
    g.add_constraint(Flow(ArrowT((p,), EMPTY, Base("void")), ToVar(v)))
    g.add_constraint(Flow(v, PredUse(FieldEq("kind", "a"), o)))
    assert g.lit_lowers(o) == []


def test_late_lower_bound_retries_concretization():
    g = ConstraintGraph()
    k, v, o = g.fresh.tvar(), g.fresh.tvar(), g.fresh.tvar()
    g.add_constraint(Flow(RecordT((("kind", k),)), ToVar(v)))
    g.add_constraint(Flow(v, PredUse(FieldEq("kind", "a"), o)))
    assert g.lit_lowers(o) == []
    g.add_constraint(Flow(Base("string", "a"), ToVar(k)))
    assert len(g.lit_lowers(o)) == 1


@given(st.integers(0, 10_000), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_closure_is_confluent(seed, order_seed):
    log = fuzz_log(seed).log
    shuffled = list(log)
    random.Random(order_seed).shuffle(shuffled)
    g = ConstraintGraph()
    for c in shuffled:
        g.add_constraint(c)
    assert graph_signature(g) == naive_close(log).signature()


@given(st.integers(0, 10_000), st.integers(1, 50))
@settings(max_examples=40, deadline=None)
def test_adding_constraints_is_monotone(seed, cut):
    log = fuzz_log(seed).log
    cut = min(cut, len(log))
    g = ConstraintGraph()
    for c in log[:cut]:
        g.add_constraint(c)
    before = graph_signature(g)
    for c in log[cut:]:
        g.add_constraint(c)
    after = graph_signature(g)
    assert not (before - after)


@given(st.integers(0, 100_000))
@settings(max_examples=60, deadline=None)
def test_optimized_and_naive_closure_agree(seed):
    g = fuzz_log(seed)
    assert graph_signature(g.graph) == naive_close(g.log).signature()


def test_join_lhs_is_split():
    g = ConstraintGraph()
    a, o = g.fresh.tvar(), g.fresh.tvar()
    from flowlet.types import Join

    g.add_constraint(Flow(Join(Base("num"), Base("null")), ToVar(a)))
    g.add_constraint(Flow(a, GetUse("f", o)))
    reasons = sorted(i.reason for i in g.consistency_errors())
    assert reasons == ["NotARecord", "NotARecord"]
