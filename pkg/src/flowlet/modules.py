"""Module resolution, per-file compilation, linking and signatures.

A file is compiled with every ``require("m")`` typed by a fresh variable.
Linking instantiates each dependency's signature in the file's graph and
flows the dependency's export into the import variable.  The signature of a
file is the part of its closed graph reachable from the export type through
literal lower bounds, with the variables renumbered canonically.

Signature variables are instantiated *sealed* in dependents: a literal that
is not already represented by the signature's bounds may not flow into them
(it is reported as incompatible instead).  Annotated variables are
instantiated as the dependent's own annotation classes.  Both keep a
signature closed under linking.
"""

from __future__ import annotations

import hashlib
import heapq
import posixpath
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .gen import Generator
from .parser import parse
from .rename import alpha_rename
from .solver import ConstraintGraph
from .spans import Span
from .syntax import Program, Require, walk
from .types import (
    EMPTY,
    ArrowT,
    Base,
    FreshSource,
    Join,
    RecordT,
    ToVar,
    TypeVar,
)

MODULE_EXT = ".fc"


# --- resolution -----------------------------------------------------------


class ResolveError(Exception):
    def __init__(self, ref: str, probed: list[str]) -> None:
        super().__init__(f"cannot resolve module {ref!r} (looked for {', '.join(probed) or 'nothing'})")
        self.ref = ref
        self.probed = probed


@dataclass
class FileSystemView:
    """A snapshot of the checked files; every existence probe is logged."""

    files: dict[str, str] = field(default_factory=dict)
    log: list[str] = field(default_factory=list)

    def exists(self, path: str) -> bool:
        self.log.append(path)
        return path in self.files

    def read(self, path: str) -> str:
        return self.files[path]

    def paths(self) -> list[str]:
        return sorted(p for p in self.files if p.endswith(MODULE_EXT))


def resolve_module(fs: FileSystemView, importer: str, ref: str, probes: Optional[list] = None) -> str:
    """Resolve a relative reference against the importing file's directory."""
    probed: list[str] = []
    if ref.startswith("./") or ref.startswith("../"):
        base = posixpath.normpath(posixpath.join(posixpath.dirname(importer), ref))
        candidates = [base] if base.endswith(MODULE_EXT) else [base, base + MODULE_EXT]
        for path in candidates:
            probed.append(path)
            if fs.exists(path) and path.endswith(MODULE_EXT):
                if probes is not None:
                    probes.extend(probed)
                return path
    if probes is not None:
        probes.extend(probed)
    raise ResolveError(ref, probed)


def requires(p: Program) -> list:
    """Require nodes of a program, in source order."""
    return [n for s in p.statements for n in walk(s) if isinstance(n, Require)]


# --- compilation ----------------------------------------------------------


@dataclass
class CompiledFile:
    file: str
    program: Program
    export_type: object
    imports: dict  # ref -> TypeVar
    import_spans: dict  # ref -> span of its first require
    generator: Generator

    @property
    def graph(self) -> ConstraintGraph:
        return self.generator.graph


def compile_file(file: str, source: str, graph: Optional[ConstraintGraph] = None, refinements: bool = True) -> CompiledFile:
    """Parse, rename and generate one file.  ParseError/UnboundVariable propagate."""
    p = alpha_rename(parse(source, file))
    return compile_program(p, graph, refinements)


def compile_program(p: Program, graph: Optional[ConstraintGraph] = None, refinements: bool = True) -> CompiledFile:
    g = Generator(graph, refinements=refinements)
    spans = {}
    for r in requires(p):
        spans.setdefault(r.ref, r.span)
        if r.ref not in g.imports:
            g.imports[r.ref] = g.fresh.tvar(r.span)
    export, _env = g.gen_program(p)
    return CompiledFile(p.file, p, export, g.imports, spans, g)


# --- signatures -----------------------------------------------------------


@dataclass(frozen=True)
class AnnotationRequired:
    spans: tuple[Span, ...]


@dataclass(frozen=True)
class ModuleSignature:
    """Canonical signature: variables are ``TypeVar(k)`` numbered by traversal."""

    file: str
    export: object
    lowers: tuple  # (k, literal) pairs: the signature constraints lit <= t_k
    annotated: tuple  # (k, annotation) pairs
    open_vars: tuple  # k of unannotated negative variables
    required_annotations: tuple[Span, ...]
    text: str
    hash: int

    @property
    def sig_constraints(self) -> tuple:
        return tuple((lit, ToVar(TypeVar(k))) for k, lit in self.lowers)


def unknown_signature(file: str) -> ModuleSignature:
    """Stand-in for a file whose own checking failed before an export type existed."""
    text = "export t0\nt0 unknown\n"
    return ModuleSignature(file, TypeVar(0), (), (), (0,), (), text, _hash(text))


_KEY_DEPTH = 6


class _SignatureWalk:
    def __init__(self, graph: ConstraintGraph) -> None:
        self.g = graph
        self.numbers: dict = {}  # class root -> k
        self.lowers: list = []
        self.annotated: list = []
        self.open: list = []
        self.required: list[Span] = []
        self.paths: dict = {}  # class root -> least access path from the export

    def index_paths(self, export_type) -> None:
        """Least access path of every reachable class, as a structural tie-breaker.

        Literals with equal structural keys may still differ in which other
        exports share their variables; the least path from the export tells
        them apart without depending on insertion order.
        """
        heap = [((), 0, export_type)]
        tick = 1
        while heap:
            path, _, t = heapq.heappop(heap)
            steps = []
            if isinstance(t, Join):
                steps = [(path, x) for x in _join_parts(t)]
            elif isinstance(t, TypeVar):
                root = self.g.find(t)
                if root in self.paths:
                    continue
                self.paths[root] = path
                if not self.g.is_resolved(root):
                    steps = [(path + (self.lkey(lit, (root,)),), lit) for lit in self.lits(root)]
            elif isinstance(t, RecordT):
                steps = [(path + ("." + f,), v) for f, v in t.fields]
            elif isinstance(t, ArrowT):
                steps = [(path + (f"p{i}",), p) for i, p in enumerate(t.params)]
                steps.append((path + ("r",), t.ret))
            for p, x in steps:
                heapq.heappush(heap, (p, tick, x))
                tick += 1

    def tiebreak(self, t) -> tuple:
        if isinstance(t, TypeVar):
            return (self.paths.get(self.g.find(t), ()),)
        if isinstance(t, RecordT):
            return tuple(self.tiebreak(v) for _, v in t.fields)
        if isinstance(t, ArrowT):
            return tuple(self.tiebreak(p) for p in t.params) + (self.tiebreak(t.ret),)
        if isinstance(t, Join):
            return tuple(sorted(self.tiebreak(x) for x in _join_parts(t)))
        return ()

    # structural keys order literals independently of variable ids
    def vkey(self, v, stack: tuple, negative: bool = False) -> str:
        root = self.g.find(v)
        if self.g.is_resolved(root):
            return f"<{self.g.resolved_annotation(root)}>"
        if negative:
            return "?"
        if root in stack:
            return f"^{len(stack) - stack.index(root)}"
        if len(stack) >= _KEY_DEPTH:
            return "..."
        keys = sorted({self.lkey(lit, stack + (root,)) for lit in self.lits(root)})
        return "(" + "|".join(keys) + ")"

    def lkey(self, lit, stack: tuple) -> str:
        if isinstance(lit, Base):
            return _base_text(lit)
        if isinstance(lit, RecordT):
            return "{" + ", ".join(f"{f}: {self.vkey(v, stack)}" for f, v in lit.fields) + "}"
        if isinstance(lit, ArrowT):
            params = ", ".join(self.vkey(p, stack, negative=True) for p in lit.params)
            return f"({params}) => {self.tkey(lit.ret, stack)}"
        raise TypeError(lit)

    def tkey(self, t, stack: tuple) -> str:
        if isinstance(t, Join):
            return "(" + "|".join(sorted({self.tkey(x, stack) for x in (t.left, t.right)})) + ")"
        if isinstance(t, TypeVar):
            return self.vkey(t, stack)
        return self.lkey(t, stack)

    def lits(self, root) -> list:
        return [lit for lit in self.g.lit_lowers(root) if isinstance(lit, (Base, RecordT, ArrowT))]

    # canonical renumbering
    def var(self, v, negative: bool = False) -> TypeVar:
        root = self.g.find(v)
        if root in self.numbers:
            return TypeVar(self.numbers[root])
        k = self.numbers[root] = len(self.numbers)
        if self.g.is_resolved(root):
            self.annotated.append((k, self.g.resolved_annotation(root)))
        elif negative:
            self.open.append(k)
            if getattr(v, "span", None) is not None:
                self.required.append(v.span)
        else:
            lits = sorted(self.lits(root), key=lambda lit: (self.lkey(lit, (root,)), self.tiebreak(lit)))
            seen = set()
            for lit in lits:
                c = self.lit(lit)
                if c not in seen:
                    seen.add(c)
                    self.lowers.append((k, c))
        return TypeVar(k)

    def lit(self, lit):
        if isinstance(lit, Base):
            return Base(lit.kind, lit.value)
        if isinstance(lit, RecordT):
            return RecordT(tuple((f, self.var(v)) for f, v in lit.fields))
        if isinstance(lit, ArrowT):
            params = tuple(self.var(p, negative=True) for p in lit.params)
            return ArrowT(params, EMPTY, self.type(lit.ret))
        raise TypeError(lit)

    def type(self, t):
        if isinstance(t, Join):
            parts = sorted(_join_parts(t), key=lambda x: (self.tkey(x, ()), self.tiebreak(x)))
            out = self.type(parts[0])
            for x in parts[1:]:
                out = Join(out, self.type(x))
            return out
        if isinstance(t, TypeVar):
            return self.var(t)
        return self.lit(t)


def _join_parts(t) -> list:
    if isinstance(t, Join):
        return _join_parts(t.left) + _join_parts(t.right)
    return [t]


def _base_text(b: Base) -> str:
    return str(Base(b.kind, b.value))


def extract_signature(graph: ConstraintGraph, file: str, export_type) -> ModuleSignature:
    """Walk the closed graph from the export type through literal lower bounds."""
    w = _SignatureWalk(graph)
    w.index_paths(export_type)
    export = w.type(export_type)
    text = serialize(export, w.lowers, w.annotated, w.open)
    return ModuleSignature(
        file,
        export,
        tuple(w.lowers),
        tuple(w.annotated),
        tuple(w.open),
        tuple(sorted(set(w.required))),
        text,
        _hash(text),
    )


def render_sig_type(t) -> str:
    if isinstance(t, TypeVar):
        return f"t{t.id}"
    if isinstance(t, Join):
        return f"{render_sig_type(t.left)} | {render_sig_type(t.right)}"
    if isinstance(t, Base):
        return _base_text(t)
    if isinstance(t, RecordT):
        return "{" + ", ".join(f"{f}: {render_sig_type(v)}" for f, v in t.fields) + "}"
    if isinstance(t, ArrowT):
        return "(" + ", ".join(render_sig_type(p) for p in t.params) + ") => " + render_sig_type(t.ret)
    raise TypeError(t)


def serialize(export, lowers, annotated, open_vars) -> str:
    """The canonical text a signature hash is computed over."""
    lines = [f"export {render_sig_type(export)}"]
    for k, a in annotated:
        lines.append(f"t{k} : {a}")
    for k in open_vars:
        lines.append(f"t{k} unknown")
    for k, lit in lowers:
        lines.append(f"{render_sig_type(lit)} <= t{k}")
    return "\n".join(lines) + "\n"


def _hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big")


def signature_hash(sig: ModuleSignature) -> int:
    return _hash(sig.text)


def instantiate(graph: ConstraintGraph, sig: ModuleSignature, span: Optional[Span]):
    """Copy a signature into ``graph``; returns the instantiated export type.

    Literal spans are replaced by the import site so that errors stay stable
    when only the dependency's body changes.
    """
    vars_: dict[int, TypeVar] = {}
    annotated = dict(sig.annotated)
    open_vars = set(sig.open_vars)

    def var(k: int) -> TypeVar:
        v = vars_.get(k)
        if v is None:
            if k in annotated:
                v = graph.resolved_var(annotated[k])
            else:
                v = graph.fresh.tvar(span)
                if k not in open_vars:
                    graph.seal(v)
            vars_[k] = v
        return v

    def conv(t):
        if isinstance(t, TypeVar):
            return var(t.id)
        if isinstance(t, Join):
            return Join(conv(t.left), conv(t.right))
        if isinstance(t, Base):
            return Base(t.kind, t.value, span)
        if isinstance(t, RecordT):
            return RecordT(tuple((f, conv(v)) for f, v in t.fields), span)
        if isinstance(t, ArrowT):
            return ArrowT(tuple(conv(p) for p in t.params), graph.escape, conv(t.ret), span)
        raise TypeError(t)

    export = conv(sig.export)
    for k, lit in sig.lowers:
        graph.add_lower(var(k), conv(lit))
    return export


def link_file(cf: CompiledFile, deps: dict, order: Optional[list[str]] = None) -> ModuleSignature:
    """Link a compiled file against dependency signatures (ref -> signature or None).

    ``order`` fixes the sequence in which imports are instantiated; the result
    must not depend on it.
    """
    g = cf.graph
    for ref in order if order is not None else sorted(cf.imports):
        sig = deps.get(ref)
        if sig is not None:
            g.flow(instantiate(g, sig, cf.import_spans.get(ref)), ToVar(cf.imports[ref]))
    return extract_signature(g, cf.file, cf.export_type)


# --- dependency graph -----------------------------------------------------


def strongly_connected(nodes: Iterable, edges: dict) -> list[list]:
    """Tarjan's algorithm, iteratively.  Components come out dependencies-first."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    out: list[list] = []
    counter = 0
    for start in nodes:
        if start in index:
            continue
        work = [(start, iter(edges.get(start, ())))]
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack.add(start)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(edges.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


def new_graph() -> ConstraintGraph:
    return ConstraintGraph(FreshSource())
