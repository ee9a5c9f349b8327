from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from flowlet.checker import check_project
from flowlet.fuzz import random_diamond
from flowlet.modules import (
    FileSystemView,
    ResolveError,
    compile_file,
    extract_signature,
    instantiate,
    link_file,
    new_graph,
    resolve_module,
    strongly_connected,
)
from flowlet.types import Base, RecordT, ToVar


def sig_of(source: str, file: str = "m.fc"):
    cf = compile_file(file, source)
    return extract_signature(cf.graph, file, cf.export_type)


def test_resolution_probes_in_order():
    fs = FileSystemView({"lib/a.fc": "", "lib/b": "", "main.fc": ""})
    probes: list = []
    assert resolve_module(fs, "main.fc", "./lib/a", probes) == "lib/a.fc"
    assert probes == ["lib/a", "lib/a.fc"]
    with pytest.raises(ResolveError):
        resolve_module(fs, "lib/a.fc", "./b")  # exists, but is not a module file
    assert resolve_module(fs, "lib/a.fc", "../main") == "main.fc"
    with pytest.raises(ResolveError) as info:
        resolve_module(fs, "main.fc", "./missing")
    assert info.value.probed == ["missing", "missing.fc"]
    with pytest.raises(ResolveError):
        resolve_module(fs, "main.fc", "lib/a")


def test_compile_examples():
    cf = compile_file("m.fc", 'var x = require("./a"); var y = require("./a"); module.exports = { kind: "nil" };')
    assert list(cf.imports) == ["./a"]
    sig = sig_of('module.exports = { kind: "nil" };')
    assert sig.text == 'export {kind: t0}\n"nil" <= t0\n'
    assert sig_of("var x = 1;").text == "export void\n"


def test_unannotated_parameter_needs_annotation():
    sig = sig_of("module.exports = (x) => x;")
    assert sig.open_vars and sig.required_annotations
    assert sig.required_annotations[0].col == 19


def test_annotated_parameter_is_recorded():
    sig = sig_of("module.exports = (x: string) => x;")
    assert not sig.required_annotations
    assert [str(a) for _, a in sig.annotated] == ["string"]


def test_hash_is_stable_and_canonical():
    a = sig_of("var q = 7; module.exports = { f: 1, g: \"s\" };")
    b = sig_of("var r = 8; var q = 7; module.exports = { g: \"s\", f: 1 };")
    assert a.hash == b.hash and a.text == b.text
    c = sig_of("module.exports = { f: 1, g: 2 };")
    assert c.hash != a.hash


def test_signature_ignores_literal_spans():
    a = sig_of('module.exports = { k: "x" };')
    b = sig_of('\n\n   module.exports = { k:   "x" };')
    assert a.hash == b.hash


def test_strongly_connected_orders_dependencies_first():
    edges = {"a": ["b"], "b": ["c"], "c": ["b"], "d": []}
    comps = strongly_connected(["a", "b", "c", "d"], edges)
    assert sorted(map(sorted, comps)) == [["a"], ["b", "c"], ["d"]]
    pos = {f: i for i, c in enumerate(comps) for f in c}
    assert pos["b"] < pos["a"] and pos["c"] < pos["a"]


def test_instantiation_seals_imported_classes():
    sig = sig_of('module.exports = { k: "x" };')
    g = new_graph()
    rec = instantiate(g, sig, None)
    assert isinstance(rec, RecordT)
    g.flow(Base("num"), ToVar(rec.get("k")))
    assert [i.reason for i in g.consistency_errors()] == ["Incompatible"]
    assert {str(lit) for lit in g.lit_lowers(rec.get("k"))} == {'"x"'}


def test_annotated_import_checks_arguments():
    files = {
        "a.fc": "module.exports = (x: string) => x;",
        "b.fc": 'var a = require("./a"); a(1); a("ok");',
    }
    errs = check_project(FileSystemView(files)).errors()
    assert [(e.file, e.code, e.span.line) for e in errs] == [("b.fc", "E_INCOMPATIBLE", 1)]


def test_cycle_members_share_a_graph():
    files = {
        "a.fc": 'var b = require("./b"); module.exports = { n: 1, g: () => b.m };',
        "b.fc": 'var a = require("./a"); module.exports = { m: "s", h: () => a.n.q };',
    }
    errs = check_project(FileSystemView(files)).errors()
    assert [(e.file, e.code) for e in errs] == [("b.fc", "E_NOT_A_RECORD")]


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_diamond_hash_is_link_order_independent(seed):
    files = random_diamond(seed)
    res = check_project(FileSystemView(files))
    sigs = {"./b": res.results["b.fc"].signature, "./c": res.results["c.fc"].signature}
    hashes = {res.results["a.fc"].signature.hash}
    for order in (["./b", "./c"], ["./c", "./b"]):
        hashes.add(link_file(compile_file("a.fc", files["a.fc"]), sigs, order).hash)
    assert len(hashes) == 1
