"""FlowCore abstract syntax, a canonical pretty-printer and the JSON AST dump."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from typing import Iterator, Optional, Union

from .annotations import Annotation
from .spans import Span
from .types import (
    BasePred,
    Falsy,
    FieldEq,
    IsNull,
    IsUndefined,
    Nullish,
    Truthy,
    TypeofIs,
    render_number,
)

SpanField = field(default=None, compare=False, repr=False)


# --- expressions ----------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class Const:
    """kind is one of number, string, boolean, null, undefined."""

    kind: str
    value: object = None
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class Assign:
    name: str
    value: "Expr"
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class Arrow:
    params: tuple[str, ...]
    body: "Stmt"
    ret: "Expr"
    annots: tuple[Optional[Annotation], ...] = ()
    span: Optional[Span] = SpanField
    param_spans: tuple[Span, ...] = field(default=(), compare=False, repr=False)

    def annot(self, i: int) -> Optional[Annotation]:
        return self.annots[i] if i < len(self.annots) else None


@dataclass(frozen=True)
class Call:
    callee: "Expr"
    args: tuple["Expr", ...]
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class RecordLit:
    fields: tuple[tuple[str, "Expr"], ...]
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class FieldRead:
    obj: "Expr"
    field: str
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class FieldWrite:
    obj: "Expr"
    field: str
    value: "Expr"
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class PredTest:
    name: str
    pred: BasePred
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class Not:
    inner: "Expr"
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class Require:
    """``require("./m")``: the export of another module."""

    ref: str
    span: Optional[Span] = SpanField


Expr = Union[Var, Const, Assign, Arrow, Call, RecordLit, FieldRead, FieldWrite, PredTest, And, Or, Not, BinOp, Require]


# --- statements -----------------------------------------------------------


@dataclass(frozen=True)
class ExprStmt:
    expr: Expr
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class VarDecl:
    name: str
    value: Expr
    annot: Optional[Annotation] = None
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Stmt"
    orelse: "Stmt"
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class Seq:
    first: "Stmt"
    second: "Stmt"
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class Skip:
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class Return:
    """Only produced transiently by the parser; bodies store their return in Arrow.ret."""

    expr: Expr
    span: Optional[Span] = SpanField


@dataclass(frozen=True)
class Export:
    """``module.exports = e;`` at the top level of a file."""

    expr: Expr
    span: Optional[Span] = SpanField


Stmt = Union[ExprStmt, VarDecl, If, Seq, Skip, Return, Export]


@dataclass(frozen=True)
class Program:
    statements: tuple[Stmt, ...]
    file: str = "<input>"

    @property
    def body(self) -> Stmt:
        return seq(self.statements)


def seq(stmts, span: Optional[Span] = None) -> Stmt:
    """Right-nested sequence; an empty sequence is a Skip carrying ``span``."""
    stmts = [s for s in stmts if not isinstance(s, Skip)]
    if not stmts:
        return Skip(span)
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out, cover(s.span, out.span))
    return out


def cover(a: Optional[Span], b: Optional[Span]) -> Optional[Span]:
    """The span from the start of ``a`` to the end of ``b``."""
    if a is None or b is None:
        return a or b
    return Span(a.file, a.start, max(a.end, b.end), a.line, a.col)


def flatten(s: Stmt) -> list[Stmt]:
    if isinstance(s, Seq):
        return flatten(s.first) + flatten(s.second)
    if isinstance(s, Skip):
        return []
    return [s]


# --- traversal ------------------------------------------------------------

NODE_TYPES = (
    Var, Const, Assign, Arrow, Call, RecordLit, FieldRead, FieldWrite, PredTest, And, Or, Not, BinOp,
    Require, ExprStmt, VarDecl, If, Seq, Skip, Return, Export,
)


def children(node) -> Iterator:
    for f in fields(node):
        if f.name in ("span", "param_spans", "annots", "annot"):
            continue
        v = getattr(node, f.name)
        if isinstance(v, NODE_TYPES):
            yield v
        elif isinstance(v, tuple):
            for item in v:
                if isinstance(item, NODE_TYPES):
                    yield item
                elif isinstance(item, tuple) and len(item) == 2 and isinstance(item[1], NODE_TYPES):
                    yield item[1]


def walk(node) -> Iterator:
    yield node
    for c in children(node):
        yield from walk(c)


def node_count(p: Program) -> int:
    return sum(1 for s in p.statements for _ in walk(s))


# --- printing -------------------------------------------------------------


def quote(s: str) -> str:
    return json.dumps(s)


def pred_source(name: str, pred: BasePred) -> str:
    if isinstance(pred, Truthy):
        return f"!!{name}"
    if isinstance(pred, Falsy):
        return f"!{name}"
    if isinstance(pred, Nullish):
        return f"{name} == null"
    if isinstance(pred, IsNull):
        return f"{name} === null"
    if isinstance(pred, IsUndefined):
        return f"{name} === undefined"
    if isinstance(pred, TypeofIs):
        return f"typeof {name} === {quote(pred.kind)}"
    if isinstance(pred, FieldEq):
        return f"{name}.{pred.field} === {quote(pred.value)}"
    raise TypeError(pred)


# binding strength used to decide parenthesization
_PREC = {Assign: 1, FieldWrite: 1, Arrow: 1, Or: 2, And: 3, PredTest: 4, BinOp: 5, Not: 6}


def _prec(e: Expr) -> int:
    return _PREC.get(type(e), 10)


def print_expr(e: Expr, min_prec: int = 0) -> str:
    text = _print_expr(e)
    return f"({text})" if _prec(e) < min_prec else text


def _print_expr(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Const):
        if e.kind == "number":
            return render_number(e.value)
        if e.kind == "string":
            return quote(e.value)
        if e.kind == "boolean":
            return "true" if e.value else "false"
        return e.kind
    if isinstance(e, Assign):
        return f"{e.name} = {print_expr(e.value, 1)}"
    if isinstance(e, Arrow):
        params = []
        for i, p in enumerate(e.params):
            a = e.annot(i)
            params.append(f"{p}: {a}" if a is not None else p)
        body = "".join(f" {line.strip()}" for line in print_stmts(flatten(e.body), 0))
        return f"({', '.join(params)}) => {{{body} return {print_expr(e.ret, 1)}; }}"
    if isinstance(e, Call):
        args = ", ".join(print_expr(a, 1) for a in e.args)
        return f"{print_expr(e.callee, 10)}({args})"
    if isinstance(e, RecordLit):
        if not e.fields:
            return "{}"
        return "{ " + ", ".join(f"{f}: {print_expr(v, 1)}" for f, v in e.fields) + " }"
    if isinstance(e, FieldRead):
        return f"{print_expr(e.obj, 10)}.{e.field}"
    if isinstance(e, FieldWrite):
        return f"{print_expr(e.obj, 10)}.{e.field} = {print_expr(e.value, 1)}"
    if isinstance(e, PredTest):
        return pred_source(e.name, e.pred)
    if isinstance(e, And):
        return f"{print_expr(e.left, 3)} && {print_expr(e.right, 4)}"
    if isinstance(e, Or):
        return f"{print_expr(e.left, 2)} || {print_expr(e.right, 3)}"
    if isinstance(e, Not):
        return f"!{print_expr(e.inner, 6)}"
    if isinstance(e, BinOp):
        return f"{print_expr(e.left, 5)} {e.op} {print_expr(e.right, 6)}"
    if isinstance(e, Require):
        return f"require({quote(e.ref)})"
    raise TypeError(e)


def print_stmts(stmts: list[Stmt], indent: int) -> list[str]:
    out: list[str] = []
    for s in stmts:
        out.extend(print_stmt(s, indent))
    return out


def print_stmt(s: Stmt, indent: int = 0) -> list[str]:
    pad = "  " * indent
    if isinstance(s, Seq):
        return print_stmts(flatten(s), indent)
    if isinstance(s, Skip):
        return [pad + ";"]
    if isinstance(s, ExprStmt):
        text = print_expr(s.expr)
        # a leading "{" or "(" would be misread as a block or an arrow
        if text.startswith("{") or text.startswith("("):
            text = f"({text})" if text.startswith("{") else text
        return [pad + text + ";"]
    if isinstance(s, VarDecl):
        ann = f": {s.annot}" if s.annot is not None else ""
        return [f"{pad}var {s.name}{ann} = {print_expr(s.value, 1)};"]
    if isinstance(s, If):
        lines = [f"{pad}if ({print_expr(s.cond)}) {{"]
        lines += print_stmts(flatten(s.then), indent + 1)
        lines.append(f"{pad}}} else {{")
        lines += print_stmts(flatten(s.orelse), indent + 1)
        lines.append(f"{pad}}}")
        return lines
    if isinstance(s, Return):
        return [f"{pad}return {print_expr(s.expr, 1)};"]
    if isinstance(s, Export):
        return [f"{pad}module.exports = {print_expr(s.expr, 1)};"]
    raise TypeError(s)


def pretty(p: Program) -> str:
    return "\n".join(print_stmts(list(p.statements), 0)) + "\n"


# --- JSON dump ------------------------------------------------------------


def to_json(node) -> dict:
    """Canonical JSON for a node: kind, scalar attributes, children, span."""
    if isinstance(node, Program):
        return {"kind": "Program", "file": node.file, "children": [to_json(s) for s in node.statements]}
    out: dict = {"kind": type(node).__name__}
    for f in fields(node):
        if f.name in ("span", "param_spans"):
            continue
        v = getattr(node, f.name)
        if isinstance(v, NODE_TYPES) or (isinstance(v, tuple) and v and not isinstance(v[0], str)
                                         and f.name not in ("annots",)):
            continue
        if f.name == "pred":
            out["pred"] = str(v)
        elif f.name in ("annot", "annots"):
            if f.name == "annot" and v is not None:
                out["annot"] = str(v)
            elif f.name == "annots" and any(a is not None for a in v):
                out["annots"] = [None if a is None else str(a) for a in v]
        elif isinstance(v, tuple):
            out[f.name] = list(v)
        else:
            out[f.name] = v
    if isinstance(node, RecordLit):
        out["fields"] = [f for f, _ in node.fields]
    out["children"] = [to_json(c) for c in children(node)]
    span = getattr(node, "span", None)
    out["span"] = span.to_json() if span is not None else None
    return out


def dump_ast(p: Program) -> str:
    return json.dumps(to_json(p), sort_keys=True, separators=(",", ":"))
