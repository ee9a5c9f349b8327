from __future__ import annotations

import io
import json
import subprocess
import sys

import pytest

from conftest import CORPUS, chain_project
from flowlet.cli import STATE_FILE, run_cli


def cli(*argv):
    out = io.StringIO()
    code = run_cli(list(map(str, argv)), out)
    return code, out.getvalue()


@pytest.fixture
def chain(tmp_path):
    for name, src in chain_project().items():
        (tmp_path / name).write_text(src)
    return tmp_path


def test_check_reports_json_and_exit_status():
    code, out = cli("check", CORPUS / "basics")
    data = json.loads(out)
    assert code == 1 and data["schema"] == "1" and data["files"] == 5
    assert [(e["file"], e["code"]) for e in data["errors"]] == [
        ("havoc.fc", "E_NOT_A_RECORD"),
        ("pipe.fc", "E_NOT_A_FUNCTION"),
    ]


def test_check_pretty_and_ablation():
    code, out = cli("check", CORPUS / "basics", "--pretty")
    assert "pipe.fc:2:23: E_NOT_A_FUNCTION" in out and "    see pipe.fc:5:15" in out and out.rstrip().endswith("2 error(s) in 5 file(s)")
    _, out = cli("check", CORPUS / "basics", "--no-refinements")
    assert len(json.loads(out)["errors"]) > 2


def test_clean_and_empty_projects_exit_zero(chain, tmp_path_factory):
    assert cli("check", chain)[0] == 0
    assert cli("check", tmp_path_factory.mktemp("empty"))[0] == 0


def test_usage_errors():
    assert cli("frobnicate")[0] == 2
    assert cli("check", "/nonexistent/dir")[0] == 2
    assert cli("check", CORPUS / "basics", "--workers", "0")[0] == 2
    assert cli("eval", "/nonexistent.fc")[0] == 2


def test_output_is_worker_independent(monkeypatch):
    outs = {cli("check", CORPUS / "basics", "--workers", w)[1] for w in (1, 2, 4, 8)}
    monkeypatch.setenv("FLOWLET_WORKERS", "3")
    outs.add(cli("check", CORPUS / "basics")[1])
    assert len(outs) == 1
    monkeypatch.setenv("FLOWLET_WORKERS", "many")
    assert cli("check", CORPUS / "basics")[0] == 2


def test_eval():
    assert cli("eval", CORPUS / "basics" / "list.fc") == (0, "Value(13)\n")
    code, out = cli("eval", CORPUS / "basics" / "havoc.fc")
    assert code == 1 and out.startswith("Stuck(NoSuchField")


def test_eval_follows_requires(chain):
    (chain / "main.fc").write_text('var c = require("./c");\nc.h;\n')
    assert cli("eval", chain / "main.fc") == (0, 'Value("a")\n')


def test_dumps(chain):
    code, out = cli("dump-ast", chain / "a.fc")
    assert code == 0 and json.loads(out)
    code, out = cli("--dump-constraints", chain / "a.fc")
    assert code == 0 and "<=" in out
    code, out = cli("dump-graph", chain / "a.fc")
    assert code == 0 and out.startswith("digraph")
    code, out = cli("dump-signature", chain / "a.fc", "--pretty")
    assert code == 0 and out.startswith("export {") and "hash " in out


def test_server_round_trip(chain):
    code, out = cli("server", chain, "--status")
    assert code == 0 and json.loads(out)["error_count"] == 0
    assert (chain / STATE_FILE).exists()
    (chain / "a.fc").write_text((chain / "a.fc").read_text().replace('tag: "a"', "tag: 1"))
    cs = chain / "changes.json"
    cs.write_text(json.dumps({"modified": ["a.fc"]}))
    code, out = cli("server", chain, "--apply", cs)
    assert code == 0 and json.loads(out)["rechecked"] == ["a.fc", "b.fc", "c.fc"]
    (chain / "b.fc").write_text((chain / "b.fc").read_text() + "a.tag.f;\n")
    cs.write_text(json.dumps({"modified": ["b.fc"]}))
    code, out = cli("server", chain, "--apply", cs)
    assert code == 1 and json.loads(out)["error_count"] == 1
    code, out = cli("server", chain, "--status")
    assert code == 1 and json.loads(out)["files"]["b.fc"][0]["code"] == "E_NOT_A_RECORD"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "flowlet", "check", str(CORPUS / "unions")], capture_output=True, text=True)
    assert proc.returncode == 1
    codes = [e["code"] for e in json.loads(proc.stdout)["errors"]]
    assert codes == ["E_AMBIGUOUS_UNION", "E_INCOMPATIBLE"]
