"""Alpha-renaming so every definition point binds a unique identifier, and hoisting."""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from .spans import Span
from .syntax import (
    And,
    Arrow,
    Assign,
    BinOp,
    Call,
    Const,
    Export,
    Expr,
    ExprStmt,
    FieldRead,
    FieldWrite,
    If,
    Not,
    Or,
    PredTest,
    Program,
    RecordLit,
    Require,
    Return,
    Seq,
    Skip,
    Stmt,
    Var,
    VarDecl,
)


class UnboundVariable(Exception):
    def __init__(self, name: str, span: Optional[Span]) -> None:
        super().__init__(f"{span}: unbound variable {name}")
        self.name = name
        self.span = span


def local_decls(s: Stmt) -> dict[str, VarDecl]:
    """First VarDecl of each local of an arrow body, in order, not entering nested arrows."""
    out: dict[str, VarDecl] = {}

    def go(s: Stmt) -> None:
        if isinstance(s, VarDecl):
            out.setdefault(s.name, s)
        elif isinstance(s, Seq):
            go(s.first)
            go(s.second)
        elif isinstance(s, If):
            go(s.then)
            go(s.orelse)

    go(s)
    return out


def hoisted_locals(s: Stmt) -> list[str]:
    """The identifiers declared by ``var`` in an arrow body (hoisted to the body's scope)."""
    return list(local_decls(s))


def base_name(name: str) -> str:
    return name.split("#", 1)[0]


class _Renamer:
    def __init__(self, errors: Optional[list]) -> None:
        self.counters: dict[str, int] = {}
        self.scopes: list[dict[str, str]] = []
        self.errors = errors

    def fresh(self, name: str) -> str:
        base = base_name(name)
        k = self.counters.get(base, 0) + 1
        self.counters[base] = k
        return f"{base}#{k}"

    def lookup(self, name: str, span: Optional[Span]) -> str:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        err = UnboundVariable(name, span)
        if self.errors is None:
            raise err
        self.errors.append(err)
        return name

    def program(self, p: Program) -> Program:
        body_names = [n for s in p.statements for n in hoisted_locals(s)]
        self.scopes.append({n: self.fresh(n) for n in dict.fromkeys(body_names)})
        stmts = tuple(self.stmt(s) for s in p.statements)
        self.scopes.pop()
        return Program(stmts, p.file)

    def stmt(self, s: Stmt) -> Stmt:
        if isinstance(s, ExprStmt):
            return replace(s, expr=self.expr(s.expr))
        if isinstance(s, VarDecl):
            return replace(s, name=self.lookup(s.name, s.span), value=self.expr(s.value))
        if isinstance(s, If):
            return replace(s, cond=self.expr(s.cond), then=self.stmt(s.then), orelse=self.stmt(s.orelse))
        if isinstance(s, Seq):
            return replace(s, first=self.stmt(s.first), second=self.stmt(s.second))
        if isinstance(s, Skip):
            return s
        if isinstance(s, (Return, Export)):
            return replace(s, expr=self.expr(s.expr))
        raise TypeError(s)

    def expr(self, e: Expr) -> Expr:
        if isinstance(e, Var):
            return replace(e, name=self.lookup(e.name, e.span))
        if isinstance(e, (Const, Require)):
            return e
        if isinstance(e, Assign):
            return replace(e, name=self.lookup(e.name, e.span), value=self.expr(e.value))
        if isinstance(e, Arrow):
            scope = {p: self.fresh(p) for p in e.params}
            for n in hoisted_locals(e.body):
                if n not in scope:
                    scope[n] = self.fresh(n)
            self.scopes.append(scope)
            try:
                params = tuple(scope[p] for p in e.params)
                return replace(e, params=params, body=self.stmt(e.body), ret=self.expr(e.ret))
            finally:
                self.scopes.pop()
        if isinstance(e, Call):
            return replace(e, callee=self.expr(e.callee), args=tuple(self.expr(a) for a in e.args))
        if isinstance(e, RecordLit):
            return replace(e, fields=tuple((f, self.expr(v)) for f, v in e.fields))
        if isinstance(e, FieldRead):
            return replace(e, obj=self.expr(e.obj))
        if isinstance(e, FieldWrite):
            return replace(e, obj=self.expr(e.obj), value=self.expr(e.value))
        if isinstance(e, PredTest):
            return replace(e, name=self.lookup(e.name, e.span))
        if isinstance(e, (And, Or)):
            return replace(e, left=self.expr(e.left), right=self.expr(e.right))
        if isinstance(e, Not):
            return replace(e, inner=self.expr(e.inner))
        if isinstance(e, BinOp):
            return replace(e, left=self.expr(e.left), right=self.expr(e.right))
        raise TypeError(e)


def alpha_rename(p: Program, errors: Optional[list] = None) -> Program:
    """Give every VarDecl/parameter binding a unique ``name#k`` identifier.

    Unbound uses raise UnboundVariable, or are appended to ``errors`` (and left
    as is) when a list is supplied.
    """
    return _Renamer(errors).program(p)
