"""Recursive-descent parser for the concrete ``.fc`` syntax."""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass
from typing import Optional

from .annotations import Annotation, ArrowA, BaseA, MaybeA, RecordA, UnionA
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
    Skip,
    Stmt,
    Var,
    VarDecl,
    flatten,
    seq,
    walk,
)
from .types import FieldEq, IsNull, IsUndefined, Nullish, TypeofIs

RET_NAME = "$ret"


class ParseError(Exception):
    def __init__(self, message: str, span: Span) -> None:
        super().__init__(f"{span}: {message}")
        self.message = message
        self.span = span


@dataclass(frozen=True)
class Token:
    kind: str  # num, str, name, punct, eof
    text: str
    start: int
    end: int
    value: object = None


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*|/\*.*?\*/)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<str>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<name>[A-Za-z_$][A-Za-z0-9_$]*(?:\#\d+)?)
  | (?P<punct>===|!==|==|!=|=>|&&|\|\||[(){},;.:=+!?|])
    """,
    re.VERBOSE | re.DOTALL,
)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "0": "\0", "\\": "\\", '"': '"', "'": "'"}

TYPEOF_NAMES = {"number", "string", "boolean", "function", "object", "undefined"}


def _unescape(body: str) -> str:
    out, i = [], 0
    while i < len(body):
        c = body[i]
        if c == "\\" and i + 1 < len(body):
            out.append(_ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


class _Source:
    def __init__(self, text: str, file: str) -> None:
        self.text = text
        self.file = file
        self.line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def span(self, start: int, end: int) -> Span:
        line = bisect.bisect_right(self.line_starts, start) - 1
        return Span(self.file, start, end, line + 1, start - self.line_starts[line] + 1)


def tokenize(src: _Source) -> list[Token]:
    text, pos, toks = src.text, 0, []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", src.span(pos, pos + 1))
        kind = m.lastgroup
        if kind != "ws":
            tok_text = m.group()
            value = None
            if kind == "num":
                value = float(tok_text) if "." in tok_text else int(tok_text)
            elif kind == "str":
                value = _unescape(tok_text[1:-1])
            toks.append(Token(kind, tok_text, m.start(), m.end(), value))
        pos = m.end()
    toks.append(Token("eof", "", len(text), len(text)))
    return toks


@dataclass(frozen=True)
class _TypeofOperand:
    name: str
    span: Span


class Parser:
    def __init__(self, text: str, file: str) -> None:
        self.src = _Source(text, file)
        self.toks = tokenize(self.src)
        self.i = 0
        self.aliases: dict[str, Annotation] = {}
        self.depth = 0  # arrow nesting, for module.exports placement
        self.saw_export = False

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "name") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, message: str, tok: Optional[Token] = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, self.src.span(tok.start, max(tok.end, tok.start + 1)))

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def name(self) -> Token:
        if self.tok.kind != "name":
            found = self.tok.text or "end of input"
            raise self.error(f"expected identifier, found {found!r}")
        return self.advance()

    def span_from(self, start: int) -> Span:
        end = self.toks[self.i - 1].end if self.i > 0 else start
        return self.src.span(start, max(end, start))

    # -- program and statements

    def program(self) -> Program:
        stmts = []
        while self.tok.kind != "eof":
            stmts.extend(self.statement(top=True))
        for s in stmts:
            for node in walk(s):
                if isinstance(node, Return):
                    raise ParseError("return outside of a function", node.span)
        return Program(tuple(s for s in stmts if not isinstance(s, Skip)), self.src.file)

    def statement(self, top: bool = False) -> list[Stmt]:
        start = self.tok.start
        if self.at("var"):
            self.advance()
            name = self.name()
            annot = None
            if self.at(":"):
                self.advance()
                annot = self.annotation()
            if self.at("="):
                self.advance()
                value = self.expression()
            else:
                value = Const("undefined", None, self.span_from(start))
            self.terminator()
            return [VarDecl(name.text, value, annot, self.span_from(start))]
        if self.at("function"):
            self.advance()
            name = self.name()
            fn = self.arrow_rest(start, block_required=True)
            return [VarDecl(name.text, fn, None, self.span_from(start))]
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            then_start = self.toks[self.i].start
            then = seq(self.statement(), self.span_from(then_start))
            orelse: Stmt = Skip(self.src.span(self.toks[self.i - 1].end, self.toks[self.i - 1].end))
            if self.at("else"):
                self.advance()
                else_start = self.toks[self.i].start
                orelse = seq(self.statement(), self.span_from(else_start))
            return [If(cond, then, orelse, self.span_from(start))]
        if self.at("return"):
            self.advance()
            if self.at(";"):
                value: Expr = Const("undefined", None, self.span_from(start))
            else:
                value = self.expression()
            self.expect(";")
            return [Return(value, self.span_from(start))]
        if self.at("type") and self.peek().kind == "name" and self.peek(2).text == "=":
            self.advance()
            alias = self.name()
            self.expect("=")
            self.aliases[alias.text] = self.annotation()
            self.expect(";")
            return []
        if self.at("module") and self.peek().text == "." and self.peek(2).text == "exports":
            self.advance()
            self.advance()
            self.advance()
            if not top or self.depth:
                raise self.error("module.exports must be assigned at the top level")
            if self.saw_export:
                raise self.error("duplicate module.exports assignment")
            self.saw_export = True
            self.expect("=")
            value = self.expression()
            self.expect(";")
            return [Export(value, self.span_from(start))]
        if self.at("{"):
            self.advance()
            out: list[Stmt] = []
            while not self.at("}"):
                if self.tok.kind == "eof":
                    raise self.error("expected '}'")
                out.extend(self.statement(top=top))
            self.advance()
            return out
        if self.at(";"):
            self.advance()
            return []
        e = self.expression()
        self.terminator()
        return [ExprStmt(e, self.span_from(start))]

    def terminator(self) -> None:
        """Require ``;``, except directly after a block-bodied arrow (``var f = () => {...}``)."""
        if self.at(";"):
            self.advance()
        elif not (self.i > 0 and self.toks[self.i - 1].text == "}" and self.toks[self.i - 1].kind == "punct"):
            self.expect(";")

    # -- arrows

    def arrow_rest(self, start: int, block_required: bool) -> Arrow:
        """Parse ``(params) => body`` (or ``(params) { body }`` for ``function``)."""
        self.expect("(")
        params, annots, pspans = [], [], []
        while not self.at(")"):
            p = self.name()
            if p.text in params:
                raise self.error(f"duplicate parameter {p.text}", p)
            params.append(p.text)
            pspans.append(self.src.span(p.start, p.end))
            if self.at(":"):
                self.advance()
                annots.append(self.annotation())
            else:
                annots.append(None)
            if not self.at(")"):
                self.expect(",")
        self.advance()
        if not block_required:
            self.expect("=>")
        self.depth += 1
        try:
            if self.at("{"):
                self.advance()
                stmts: list[Stmt] = []
                while not self.at("}"):
                    if self.tok.kind == "eof":
                        raise self.error("expected '}'")
                    stmts.extend(self.statement())
                self.advance()
                body, ret = desugar_returns(stmts, self.span_from(start))
            elif block_required:
                raise self.error("expected '{'")
            else:
                ret_start = self.toks[self.i].start
                ret = self.assignment()
                body = Skip(self.src.span(ret_start, ret_start))
        finally:
            self.depth -= 1
        annots_t = tuple(annots) if any(a is not None for a in annots) else ()
        return Arrow(tuple(params), body, ret, annots_t, self.span_from(start), tuple(pspans))

    def looks_like_arrow(self) -> bool:
        if self.tok.kind == "name" and self.peek().text == "=>":
            return True
        if not self.at("("):
            return False
        depth, k = 0, self.i
        while k < len(self.toks):
            t = self.toks[k]
            if t.kind == "punct" and t.text == "(":
                depth += 1
            elif t.kind == "punct" and t.text == ")":
                depth -= 1
                if depth == 0:
                    nxt = self.toks[k + 1] if k + 1 < len(self.toks) else None
                    return nxt is not None and nxt.text == "=>"
            elif t.kind == "eof":
                return False
            k += 1
        return False

    # -- expressions

    def expression(self) -> Expr:
        return self.assignment()

    def assignment(self) -> Expr:
        start = self.tok.start
        if self.looks_like_arrow():
            if self.tok.kind == "name":
                return self.single_param_arrow(start)
            return self.arrow_rest(start, block_required=False)
        left = self.or_expr()
        if self.at("="):
            eq_tok = self.advance()
            value = self.assignment()
            if isinstance(left, Var):
                return Assign(left.name, value, self.span_from(start))
            if isinstance(left, FieldRead):
                return FieldWrite(left.obj, left.field, value, self.span_from(start))
            raise self.error("invalid assignment target", eq_tok)
        return left

    def single_param_arrow(self, start: int) -> Arrow:
        p = self.advance()
        self.expect("=>")
        self.depth += 1
        try:
            if self.at("{"):
                self.advance()
                stmts: list[Stmt] = []
                while not self.at("}"):
                    if self.tok.kind == "eof":
                        raise self.error("expected '}'")
                    stmts.extend(self.statement())
                self.advance()
                body, ret = desugar_returns(stmts, self.span_from(start))
            else:
                ret_start = self.toks[self.i].start
                ret = self.assignment()
                body = Skip(self.src.span(ret_start, ret_start))
        finally:
            self.depth -= 1
        return Arrow((p.text,), body, ret, (), self.span_from(start), (self.src.span(p.start, p.end),))

    def or_expr(self) -> Expr:
        start = self.tok.start
        left = self.and_expr()
        while self.at("||"):
            self.advance()
            right = self.and_expr()
            left = Or(left, right, self.span_from(start))
        return left

    def and_expr(self) -> Expr:
        start = self.tok.start
        left = self.equality()
        while self.at("&&"):
            self.advance()
            right = self.equality()
            left = And(left, right, self.span_from(start))
        return left

    def equality(self) -> Expr:
        start = self.tok.start
        left = self.additive()
        if self.tok.kind == "punct" and self.tok.text in ("===", "!==", "==", "!="):
            op_tok = self.advance()
            right = self.additive()
            span = self.span_from(start)
            test = self.classify_test(left, op_tok, right, span)
            return Not(test, span) if op_tok.text.startswith("!") else test
        if isinstance(left, _TypeofOperand):
            raise ParseError("typeof must be compared against a string", left.span)
        return left

    def classify_test(self, left, op_tok: Token, right, span: Span) -> PredTest:
        strict = len(op_tok.text) == 3
        if isinstance(left, _TypeofOperand):
            if isinstance(right, Const) and right.kind == "string" and right.value in TYPEOF_NAMES:
                return PredTest(left.name, TypeofIs(right.value), span)
            raise ParseError("typeof must be compared against a typeof name", span)
        if isinstance(left, FieldRead) and isinstance(left.obj, Var):
            if isinstance(right, Const) and right.kind == "string" and strict:
                return PredTest(left.obj.name, FieldEq(left.field, right.value), span)
        if isinstance(left, Var) and isinstance(right, Const):
            if right.kind == "null":
                return PredTest(left.name, IsNull() if strict else Nullish(), span)
            if right.kind == "undefined":
                return PredTest(left.name, IsUndefined() if strict else Nullish(), span)
        raise self.error(
            "unsupported comparison: expected x.f === \"s\", typeof x === \"k\", or x == null", op_tok
        )

    def additive(self) -> Expr:
        start = self.tok.start
        left = self.unary()
        while self.at("+"):
            self.advance()
            right = self.unary()
            if isinstance(left, _TypeofOperand) or isinstance(right, _TypeofOperand):
                raise self.error("typeof is only allowed in comparisons")
            left = BinOp("+", left, right, self.span_from(start))
        return left

    def unary(self):
        start = self.tok.start
        if self.at("!"):
            self.advance()
            inner = self.unary()
            if isinstance(inner, _TypeofOperand):
                raise self.error("typeof is only allowed in comparisons")
            return Not(inner, self.span_from(start))
        if self.at("typeof"):
            self.advance()
            name = self.name()
            return _TypeofOperand(name.text, self.span_from(start))
        return self.postfix()

    def postfix(self) -> Expr:
        start = self.tok.start
        e = self.primary()
        while True:
            if self.at("."):
                self.advance()
                f = self.name()
                e = FieldRead(e, f.text, self.span_from(start))
            elif self.at("("):
                self.advance()
                args = []
                while not self.at(")"):
                    args.append(self.assignment())
                    if not self.at(")"):
                        self.expect(",")
                self.advance()
                e = Call(e, tuple(args), self.span_from(start))
            else:
                return e

    def primary(self) -> Expr:
        t = self.tok
        start = t.start
        if t.kind == "num":
            self.advance()
            return Const("number", t.value, self.span_from(start))
        if t.kind == "str":
            self.advance()
            return Const("string", t.value, self.span_from(start))
        if t.kind == "name":
            if t.text in ("true", "false"):
                self.advance()
                return Const("boolean", t.text == "true", self.span_from(start))
            if t.text in ("null", "undefined"):
                self.advance()
                return Const(t.text, None, self.span_from(start))
            if t.text == "require" and self.peek().text == "(":
                self.advance()
                self.advance()
                ref = self.tok
                if ref.kind != "str":
                    raise self.error("require expects a string literal")
                self.advance()
                self.expect(")")
                return Require(ref.value, self.span_from(start))
            if t.text in ("var", "function", "if", "else", "return", "typeof"):
                raise self.error(f"unexpected keyword {t.text!r}")
            self.advance()
            return Var(t.text, self.span_from(start))
        if self.at("("):
            self.advance()
            e = self.expression()
            self.expect(")")
            return e
        if self.at("{"):
            self.advance()
            fields: list[tuple[str, Expr]] = []
            seen = set()
            while not self.at("}"):
                f = self.name()
                if f.text in seen:
                    raise self.error(f"duplicate field {f.text}", f)
                seen.add(f.text)
                if self.at(":"):
                    self.advance()
                    fields.append((f.text, self.assignment()))
                else:
                    fields.append((f.text, Var(f.text, self.src.span(f.start, f.end))))
                if not self.at("}"):
                    self.expect(",")
            self.advance()
            return RecordLit(tuple(fields), self.span_from(start))
        found = t.text or "end of input"
        raise self.error(f"expected expression, found {found!r}")

    # -- annotations

    def annotation(self) -> Annotation:
        if self.at("|"):
            self.advance()
        first = self.maybe_annotation()
        if self.at("|"):
            self.advance()
            return UnionA(first, self.annotation())
        return first

    def maybe_annotation(self) -> Annotation:
        if self.at("?"):
            self.advance()
            return MaybeA(self.maybe_annotation())
        return self.primary_annotation()

    def primary_annotation(self) -> Annotation:
        t = self.tok
        if t.kind == "str":
            self.advance()
            return BaseA("string", t.value)
        if t.kind == "num":
            self.advance()
            return BaseA("num", t.value)
        if self.at("{"):
            self.advance()
            fields = []
            seen = set()
            while not self.at("}"):
                f = self.name()
                if f.text in seen:
                    raise self.error(f"duplicate field {f.text}", f)
                seen.add(f.text)
                self.expect(":")
                fields.append((f.text, self.annotation()))
                if not self.at("}"):
                    if self.at(";"):
                        self.advance()
                    else:
                        self.expect(",")
            self.advance()
            return RecordA(tuple(fields))
        if self.at("("):
            if self.looks_like_arrow():
                self.advance()
                params = []
                while not self.at(")"):
                    if self.tok.kind == "name" and self.peek().text == ":":
                        self.advance()
                        self.advance()
                    params.append(self.annotation())
                    if not self.at(")"):
                        self.expect(",")
                self.advance()
                self.expect("=>")
                return ArrowA(tuple(params), self.maybe_annotation_or_union_tail())
            self.advance()
            inner = self.annotation()
            self.expect(")")
            return inner
        if t.kind == "name":
            simple = {
                "number": BaseA("num"), "string": BaseA("string"), "boolean": BaseA("bool"),
                "void": BaseA("void"), "undefined": BaseA("void"), "null": BaseA("null"),
                "true": BaseA("bool", True), "false": BaseA("bool", False),
            }
            if t.text in simple:
                self.advance()
                return simple[t.text]
            if t.text in self.aliases:
                self.advance()
                return self.aliases[t.text]
            raise self.error(f"unknown type {t.text!r}")
        found = t.text or "end of input"
        raise self.error(f"expected type, found {found!r}")

    def maybe_annotation_or_union_tail(self) -> Annotation:
        # function return types bind tighter than union: (a) => b | c means ((a) => b) | c
        return self.maybe_annotation()


def desugar_returns(stmts: list[Stmt], span: Span) -> tuple[Stmt, Expr]:
    """Split a function body into (statement, returned expression).

    A body whose only return is its last statement maps directly.  Otherwise the
    returns are rewritten into assignments to a hoisted ``$ret`` local, pushing
    the statements that follow an ``if`` into both branches so that nothing runs
    after a return.
    """
    stmts = [s for s in stmts if not isinstance(s, Skip)]
    if not any(_has_return(s) for s in stmts):
        return seq(stmts, span), Const("undefined", None, span)
    if isinstance(stmts[-1], Return) and not any(_has_return(s) for s in stmts[:-1]):
        return seq(stmts[:-1], stmts[-1].span), stmts[-1].expr
    decl = VarDecl(RET_NAME, Const("undefined", None, span), None, span)
    body = [decl] + _tail(stmts)
    return seq(body, span), Var(RET_NAME, span)


def _has_return(s: Stmt) -> bool:
    if isinstance(s, Return):
        return True
    if isinstance(s, If):
        return any(_has_return(x) for x in flatten(s.then) + flatten(s.orelse))
    return False


def _tail(stmts: list[Stmt]) -> list[Stmt]:
    if not stmts:
        return []
    s, rest = stmts[0], stmts[1:]
    if isinstance(s, Return):
        return [ExprStmt(Assign(RET_NAME, s.expr, s.span), s.span)]
    if isinstance(s, If) and _has_return(s):
        then = _tail(flatten(s.then) + rest)
        orelse = _tail(flatten(s.orelse) + rest)
        return [If(s.cond, seq(then, s.then.span), seq(orelse, s.orelse.span), s.span)]
    return [s] + _tail(rest)


def parse(source: str, file: str = "<input>") -> Program:
    return Parser(source, file).program()


def parse_expr(source: str, file: str = "<input>") -> Expr:
    p = Parser(source, file)
    e = p.expression()
    if p.tok.kind != "eof":
        raise p.error("unexpected trailing input")
    return e
