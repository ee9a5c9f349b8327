"""Project checking: parse stage, dependency condensation, and linked checking.

The parse stage is a static map over files.  The check stage walks the
condensation of the dependency graph with dynamic dispatch: a strongly
connected component is checked (compiled into one shared graph and linked)
once the signatures of everything it depends on are in the shared table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .modules import (
    FileSystemView,
    ModuleSignature,
    ResolveError,
    compile_program,
    extract_signature,
    instantiate,
    new_graph,
    requires,
    resolve_module,
    strongly_connected,
    unknown_signature,
)
from .parser import ParseError, parse
from .rename import alpha_rename
from .scheduler import MASTER, DEFAULT_BUCKET, DynamicNext, SharedTable, StaticNext, TaskSpec, run_parallel
from .solver import REASON_CODES
from .spans import NO_SPAN, Span
from .syntax import Program
from .types import ToVar

SCHEMA = "1"


@dataclass(frozen=True)
class ErrorReport:
    file: str
    span: Span
    code: str
    message: str
    trace: tuple[Span, ...] = ()

    def sort_key(self) -> tuple:
        s = self.span
        return (self.file, s.start, s.end, s.line, s.col, self.code, self.message, self.trace)

    def to_json(self) -> dict:
        return {
            "file": self.file,
            "span": self.span.to_json(),
            "code": self.code,
            "message": self.message,
            "trace": [{"file": t.file, **t.to_json()} for t in self.trace],
        }

    def pretty(self) -> str:
        out = f"{self.file}:{self.span.line}:{self.span.col}: {self.code}: {self.message}"
        for t in self.trace:
            out += f"\n    see {t}"
        return out


@dataclass(frozen=True)
class ScannedFile:
    file: str
    program: Optional[Program]  # renamed; None when parsing or renaming failed
    errors: tuple[ErrorReport, ...]
    deps: tuple  # (ref, resolved file or None) per distinct ref
    probes: tuple[str, ...]

    def dep_files(self) -> list[str]:
        return sorted({f for _, f in self.deps if f is not None})


@dataclass(frozen=True)
class FileResult:
    file: str
    errors: tuple[ErrorReport, ...]
    signature: ModuleSignature


def scan_file(fs: FileSystemView, file: str) -> ScannedFile:
    """Parse, rename and resolve the module references of one file."""
    try:
        raw = parse(fs.read(file), file)
    except ParseError as exc:
        return ScannedFile(file, None, (ErrorReport(file, exc.span, "E_PARSE", exc.message),), (), ())
    return resolve_scan(fs, file, raw)


def resolve_scan(fs: FileSystemView, file: str, raw: Program) -> ScannedFile:
    unbound: list = []
    program = alpha_rename(raw, unbound)
    errors = [ErrorReport(file, e.span or NO_SPAN, "E_UNBOUND", f"unbound variable {e.name}") for e in unbound]
    probes: list[str] = []
    deps = []
    seen = set()
    for r in requires(program):
        try:
            target = resolve_module(fs, file, r.ref, probes)
        except ResolveError as exc:
            target = None
            errors.append(ErrorReport(file, r.span, "E_UNRESOLVED_MODULE", str(exc)))
        if r.ref not in seen:
            seen.add(r.ref)
            deps.append((r.ref, target))
    return ScannedFile(file, None if unbound else program, tuple(errors), tuple(deps), tuple(probes))


def rescan(fs: FileSystemView, scan: ScannedFile) -> ScannedFile:
    """Re-resolve the references of an unchanged file."""
    if scan.program is None and any(e.code == "E_PARSE" for e in scan.errors):
        return scan
    return scan_file(fs, scan.file)


def report_inconsistency(inc) -> ErrorReport:
    span = inc.span
    trace = []
    if inc.origin is not None and inc.origin != span:
        trace.append(inc.origin)
    trace.extend(s for s in inc.related if s not in trace)
    return ErrorReport(span.file, span, REASON_CODES[inc.reason], inc.message(), tuple(trace))


def check_unit(scans: list[ScannedFile], dep_sigs: dict, refinements: bool = True) -> dict[str, FileResult]:
    """Check one strongly connected component against its dependencies' signatures."""
    unit = {s.file for s in scans}
    graph = new_graph()
    compiled = {}
    for s in sorted(scans, key=lambda s: s.file):
        if s.program is not None:
            compiled[s.file] = compile_program(s.program, graph, refinements)
    for f, cf in compiled.items():
        scan = next(s for s in scans if s.file == f)
        for ref, target in scan.deps:
            var = cf.imports[ref]
            if target is None:
                continue
            if target in unit:
                if target in compiled:
                    graph.flow(compiled[target].export_type, ToVar(var))
            else:
                graph.flow(instantiate(graph, dep_sigs[target], cf.import_spans.get(ref)), ToVar(var))
    per_file: dict[str, list] = {s.file: list(s.errors) for s in scans}
    for inc in graph.consistency_errors():
        rep = report_inconsistency(inc)
        per_file.setdefault(rep.file, []).append(rep)
    out = {}
    for s in scans:
        cf = compiled.get(s.file)
        sig = extract_signature(graph, s.file, cf.export_type) if cf is not None else unknown_signature(s.file)
        for span in sig.required_annotations:
            per_file[s.file].append(
                ErrorReport(s.file, span, "E_ANNOTATION_REQUIRED", "exported function parameter needs a type annotation")
            )
        errs = tuple(sorted(set(per_file[s.file]), key=ErrorReport.sort_key))
        out[s.file] = FileResult(s.file, errs, sig)
    return out


def components(scans: dict[str, ScannedFile]) -> tuple[list[tuple[str, ...]], dict]:
    """SCCs of the dependency graph (dependencies first) and their dependency map."""
    edges = {f: scans[f].dep_files() for f in sorted(scans)}
    comps = [tuple(c) for c in strongly_connected(sorted(scans), edges)]
    owner = {f: c for c in comps for f in c}
    deps = {c: {owner[d] for f in c for d in edges[f] if d in owner and owner[d] != c} for c in comps}
    return comps, deps


@dataclass
class CheckResult:
    results: dict[str, FileResult]
    scans: dict[str, ScannedFile] = field(default_factory=dict)
    dispatch_log: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    def errors(self) -> list[ErrorReport]:
        return sorted((e for r in self.results.values() for e in r.errors), key=ErrorReport.sort_key)

    def to_json(self) -> dict:
        return {"schema": SCHEMA, "errors": [e.to_json() for e in self.errors()], "files": len(self.results)}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def hashes(self) -> dict[str, int]:
        return {f: r.signature.hash for f, r in sorted(self.results.items())}


def check_project(
    fs: FileSystemView,
    workers: int = 1,
    bucket: int = DEFAULT_BUCKET,
    refinements: bool = True,
    table: Optional[SharedTable] = None,
) -> CheckResult:
    files = fs.paths()
    scans: dict[str, ScannedFile] = run_parallel(
        TaskSpec(
            job=lambda batch: {f: scan_file(fs, f) for f in batch},
            merge=_union,
            neutral={},
            next=StaticNext(files, bucket),
        ),
        workers,
    )
    comps, comp_deps = components(scans)
    own_table = table is None
    table = SharedTable() if own_table else table
    dyn = DynamicNext(comp_deps, bucket)

    def job(batch: list) -> dict:
        out = {}
        for comp in batch:
            needed = {d for f in comp for d in scans[f].dep_files() if d not in comp}
            sigs = {}
            for d in needed:
                sig = table.get(("sig", d))
                if sig is None:
                    raise RuntimeError(f"signature of {d} read before it was published")
                sigs[d] = sig
            res = check_unit([scans[f] for f in comp], sigs, refinements)
            for f, r in res.items():
                table.put(("sig", f), r.signature)
            out.update(res)
        return out

    results = run_parallel(TaskSpec(job, _union, {}, dyn, dyn.completed), workers)
    if own_table:
        for f in files:
            table.remove(("sig", f), MASTER)
    return CheckResult(dict(sorted(results.items())), scans, dyn.log, dyn.violations)


def _union(acc: dict, part: dict) -> dict:
    acc.update(part)
    return acc
