"""Command-line entry point.

Exit status: 0 when there is nothing to report, 1 on type errors (or a stuck
evaluation), 2 on usage errors, 3 on internal errors.
"""

from __future__ import annotations

import argparse
import json
import os
import pickle
import sys
import traceback
from pathlib import Path
from typing import Optional

from .checker import check_project
from .interp import Stuck, run_program
from .modules import FileSystemView, MODULE_EXT, ResolveError, resolve_module
from .parser import ParseError, parse
from .rename import UnboundVariable, alpha_rename
from .scheduler import DEFAULT_BUCKET
from .server import ChangeSet, ServerState, apply_changes, init_server
from .syntax import dump_ast

EXIT_OK, EXIT_ERRORS, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
STATE_FILE = ".flowlet-server"


class UsageError(Exception):
    pass


def load_tree(root: Path) -> FileSystemView:
    """Every .fc file under ``root``, keyed by its relative posix path."""
    if not root.is_dir():
        raise UsageError(f"{root} is not a directory")
    files = {}
    for path in sorted(root.rglob("*" + MODULE_EXT)):
        rel = path.relative_to(root)
        if any(part.startswith(".") for part in rel.parts):
            continue
        files[rel.as_posix()] = path.read_text(encoding="utf-8")
    return FileSystemView(files)


def default_workers() -> int:
    raw = os.environ.get("FLOWLET_WORKERS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"FLOWLET_WORKERS must be an integer, got {raw!r}")
    if n < 1:
        raise UsageError("FLOWLET_WORKERS must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flowlet", description="Flow-sensitive type checker for FlowCore")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--no-refinements", action="store_true", help="disable environment refinement")
        p.add_argument("--pretty", action="store_true", help="human-readable output")

    p = sub.add_parser("check", help="check every .fc file under a directory")
    p.add_argument("root")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--bucket", type=int, default=DEFAULT_BUCKET)
    common(p)

    p = sub.add_parser("server", help="incremental checking state kept between invocations")
    p.add_argument("root")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--status", action="store_true")
    group.add_argument("--apply", metavar="CHANGESET")
    p.add_argument("--state", default=None, help=f"state file (default ROOT/{STATE_FILE})")
    p.add_argument("--workers", type=int, default=None)
    common(p)

    p = sub.add_parser("eval", help="run a program")
    p.add_argument("file")
    p.add_argument("--fuel", type=int, default=10_000)

    for name in ("dump-ast", "dump-constraints", "dump-graph", "dump-signature"):
        p = sub.add_parser(name)
        p.add_argument("file")
        common(p)
    return ap


def run_cli(argv: Optional[list[str]] = None, out=None) -> int:
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] in ("--dump-ast", "--dump-constraints", "--dump-graph", "--dump-signature"):
        argv[0] = argv[0][2:]
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"flowlet: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


def _workers(args) -> int:
    n = args.workers if args.workers is not None else default_workers()
    if n < 1:
        raise UsageError("--workers must be at least 1")
    return n


def cmd_check(args, out) -> int:
    if args.bucket < 1:
        raise UsageError("--bucket must be at least 1")
    fs = load_tree(Path(args.root))
    res = check_project(fs, workers=_workers(args), bucket=args.bucket, refinements=not args.no_refinements)
    errors = res.errors()
    if args.pretty:
        for e in errors:
            print(e.pretty(), file=out)
        print(f"{len(errors)} error(s) in {len(res.results)} file(s)", file=out)
    else:
        print(res.dumps(), file=out)
    return EXIT_ERRORS if errors else EXIT_OK


def cmd_server(args, out) -> int:
    root = Path(args.root)
    state_path = Path(args.state) if args.state else root / STATE_FILE
    st: Optional[ServerState] = None
    if state_path.exists():
        st = pickle.loads(state_path.read_bytes())
        if st.refinements != (not args.no_refinements):
            st = None
    if st is None:
        st = init_server(load_tree(root), workers=_workers(args), refinements=not args.no_refinements)
    if args.apply:
        try:
            data = json.loads(Path(args.apply).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read change set: {exc}")
        ch = ChangeSet.from_json(data)
        for f in ch.added | ch.modified:
            path = root / f
            if path.exists():
                st.fs.files[f] = path.read_text(encoding="utf-8")
        for f in ch.deleted:
            st.fs.files.pop(f, None)
        st, rechecked = apply_changes(st, ch)
        payload = {"schema": "1", "rechecked": sorted(rechecked), "error_count": len(st.errors())}
    else:
        payload = st.status_json()
    st.fs.log.clear()
    state_path.write_bytes(pickle.dumps(st))
    if args.pretty and not args.apply:
        for e in st.errors():
            print(e.pretty(), file=out)
        print(f"{len(st.errors())} error(s)", file=out)
    else:
        print(json.dumps(payload, sort_keys=True, indent=2 if args.pretty else None), file=out)
    return EXIT_ERRORS if st.errors() else EXIT_OK


def _read_program(path: str):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{path}: no such file")
    return p.read_text(encoding="utf-8")


def _parsed(path: str, file_id: Optional[str] = None):
    try:
        return alpha_rename(parse(_read_program(path), file_id or path))
    except ParseError as exc:
        raise UsageError(f"{exc.span}: parse error: {exc.message}")
    except UnboundVariable as exc:
        raise UsageError(str(exc))


def cmd_eval(args, out) -> int:
    path = Path(args.file)
    prog = _parsed(args.file, path.name)
    fs = load_tree(path.parent)

    def loader(ref: str, importer: Optional[str]):
        try:
            target = resolve_module(fs, importer or path.name, ref)
        except ResolveError as exc:
            raise LookupError(str(exc))
        return target, alpha_rename(parse(fs.read(target), target))

    outcome = run_program(prog, fuel=args.fuel, loader=loader)
    print(str(outcome), file=out)
    return EXIT_ERRORS if isinstance(outcome, Stuck) else EXIT_OK


def cmd_dump_ast(args, out) -> int:
    try:
        prog = parse(_read_program(args.file), args.file)
    except ParseError as exc:
        raise UsageError(f"{exc.span}: parse error: {exc.message}")
    print(dump_ast(prog) if not args.pretty else json.dumps(json.loads(dump_ast(prog)), indent=2, sort_keys=True), file=out)
    return EXIT_OK


def _generated(args):
    from .gen import Generator

    g = Generator(refinements=not args.no_refinements)
    g.gen_program(_parsed(args.file))
    return g


def cmd_dump_constraints(args, out) -> int:
    g = _generated(args)
    for c in g.log:
        print(str(c), file=out)
    return EXIT_OK


def cmd_dump_graph(args, out) -> int:
    g = _generated(args)
    g.graph.consistency_errors()
    out.write(g.graph.to_dot())
    return EXIT_OK


def cmd_dump_signature(args, out) -> int:
    path = Path(args.file)
    _read_program(args.file)
    root = path.parent
    res = check_project(load_tree(root), refinements=not args.no_refinements)
    sig = res.results[path.name].signature
    out.write(sig.text)
    if args.pretty:
        print(f"hash {sig.hash:016x}", file=out)
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "server": cmd_server,
    "eval": cmd_eval,
    "dump-ast": cmd_dump_ast,
    "dump-constraints": cmd_dump_constraints,
    "dump-graph": cmd_dump_graph,
    "dump-signature": cmd_dump_signature,
}


def main() -> None:
    sys.exit(run_cli())
