from __future__ import annotations

from hypothesis import given, settings, strategies as st

from conftest import chain_project
from flowlet.checker import check_project
from flowlet.fuzz import change_sequence, random_dag, render_project
from flowlet.modules import FileSystemView
from flowlet.server import ChangeSet, apply_changes, dependents, init_server


def apply(st_, files: dict, **changes):
    st_.fs.files = dict(files)
    return apply_changes(st_, ChangeSet.of(**changes))


def test_empty_project():
    s = init_server(FileSystemView({}))
    assert s.errors() == [] and s.results == {}
    s, re = apply(s, {})
    assert re == set()


def test_init_equals_adding_everything():
    files = chain_project()
    cold = init_server(FileSystemView(dict(files)))
    warm, re = apply(init_server(FileSystemView({})), files, added=list(files))
    assert re == set(files)
    assert warm.snapshot() == cold.snapshot()


def test_chain_body_edit_rechecks_only_the_edited_file():
    files = chain_project()
    s = init_server(FileSystemView(dict(files)))
    files["a.fc"] = files["a.fc"].replace("var n = 1;", "var n = 1;\nvar unused = 5;")
    s, re = apply(s, files, modified=["a.fc"])
    assert re == {"a.fc"}


def test_chain_signature_edit_rechecks_the_chain():
    files = chain_project()
    s = init_server(FileSystemView(dict(files)))
    files["a.fc"] = files["a.fc"].replace('tag: "a"', 'tag: "b"')
    s, re = apply(s, files, modified=["a.fc"])
    assert re == {"a.fc", "b.fc", "c.fc"}


def test_deleting_a_dependency_reports_unresolved():
    files = chain_project()
    s = init_server(FileSystemView(dict(files)))
    del files["a.fc"]
    s, re = apply(s, files, deleted=["a.fc"])
    assert re == {"b.fc", "c.fc"}
    assert [e.code for e in s.errors()][:1] == ["E_UNRESOLVED_MODULE"]
    assert s.snapshot() == init_server(FileSystemView(dict(files))).snapshot()


def test_adding_a_file_that_a_reference_now_resolves_to():
    files = {"b.fc": 'var a = require("./a");\nmodule.exports = { x: a.v };\n'}
    s = init_server(FileSystemView(dict(files)))
    assert [e.code for e in s.errors()] == ["E_UNRESOLVED_MODULE"]
    files["a.fc"] = "module.exports = { v: 1 };\n"
    s, re = apply(s, files, added=["a.fc"])
    assert re == {"a.fc", "b.fc"} and s.errors() == []


def oracle_dependents(specs, f):
    importers = {g: {h for h, s in specs.items() if g in s.deps} for g in specs}
    direct = importers[f]
    seen, work = set(direct), list(direct)
    while work:
        for h in importers[work.pop()]:
            if h not in seen:
                seen.add(h)
                work.append(h)
    return direct, seen - direct - {f}


@given(st.integers(0, 10_000), st.integers(2, 50))
@settings(max_examples=25, deadline=None)
def test_dependents_match_reachability(seed, n):
    specs = random_dag(seed, n)
    s = init_server(FileSystemView(render_project(specs)))
    for f in specs:
        assert dependents(s, f) == oracle_dependents(specs, f)


@given(st.integers(0, 10_000))
@settings(max_examples=5, deadline=None)
def test_random_change_sequences_match_a_cold_check(seed):
    specs = random_dag(seed, 12)
    s = init_server(FileSystemView(render_project(specs)))
    for ev, now in change_sequence(seed, specs, 20):
        s.fs.files = render_project(now)
        s, _ = apply_changes(s, ChangeSet.from_json(ev))
    cold = check_project(FileSystemView(dict(s.fs.files)))
    assert s.dumps() == cold.dumps()
    assert s.hashes() == cold.hashes()
