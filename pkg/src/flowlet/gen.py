"""Flow-sensitive constraint generation for expressions and statements.

Every constraint is inserted into the graph as soon as it is produced, so the
graph stays closed while the program is walked.  ``refinements=False`` turns
off environment refinement and the predicate filters of ``&&``/``||`` (the
ablation switch).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .rename import UnboundVariable, hoisted_locals, local_decls
from .solver import ConstraintGraph
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
from .types import (
    EMPTY,
    P_EMPTY,
    ArrowT,
    Base,
    CallUse,
    Effect,
    Entry,
    Env,
    Falsy,
    Flow,
    GetUse,
    HavocEntry,
    HavocUse,
    Join,
    NameEffect,
    PAnd,
    PEmpty,
    PExclude,
    PNot,
    POr,
    PSingle,
    PlusLeft,
    PredMap,
    PredUse,
    RecordT,
    SetUse,
    ToVar,
    Truthy,
    Type,
    TypeVar,
    effect_without,
    ejoin,
    eliminate_not,
    erase_env,
    exclude,
    join_env,
    negate_predmap,
)

CONST_KINDS = {"number": "num", "string": "string", "boolean": "bool", "null": "null", "undefined": "void"}


@dataclass(frozen=True)
class ExprResult:
    type: Type
    effect: Effect
    predmap: PredMap
    env: Env
    constraints: tuple[Flow, ...] = ()


@dataclass(frozen=True)
class StmtResult:
    effect: Effect
    env: Env
    constraints: tuple[Flow, ...] = ()


class Generator:
    def __init__(
        self,
        graph: Optional[ConstraintGraph] = None,
        refinements: bool = True,
        imports: Optional[dict[str, TypeVar]] = None,
    ) -> None:
        self.graph = graph or ConstraintGraph()
        self.fresh = self.graph.fresh
        self.refinements = refinements
        self.imports = dict(imports or {})
        self.log: list[Flow] = []
        self.export_type: Optional[Type] = None
        self.export_span: Optional[Span] = None

    def emit(self, lhs, use) -> None:
        c = Flow(lhs, use)
        self.log.append(c)
        self.graph.add_constraint(c)

    # -- environment operations

    def widen_env(self, env: Env) -> tuple[Env, tuple[Flow, ...]]:
        mark = len(self.log)
        out = {}
        for name, e in env.items():
            beta = self.fresh.tvar()
            self.emit(e.specific, ToVar(beta))
            self.emit(beta, ToVar(e.general))
            out[name] = Entry(beta, e.general)
        return Env(out), tuple(self.log[mark:])

    def refine_env(self, env: Env, p: PredMap) -> tuple[Env, tuple[Flow, ...]]:
        mark = len(self.log)
        out = self._refine(env, eliminate_not(p)) if self.refinements else env
        return out, tuple(self.log[mark:])

    def _refine(self, env: Env, p: PredMap) -> Env:
        if isinstance(p, PEmpty):
            return env
        if isinstance(p, PSingle):
            entry = env.get(p.name)
            if entry is None:
                return env
            beta = self.fresh.tvar()
            self.emit(entry.specific, PredUse(p.pred, beta))
            return env.update(p.name, beta)
        if isinstance(p, PAnd):
            return self._refine(self._refine(env, p.left), p.right)
        if isinstance(p, POr):
            return join_env(self._refine(env, p.left), self._refine(env, p.right))
        if isinstance(p, PExclude):
            refined = self._refine(env, p.inner)
            widened, _ = self.widen_env(refined)
            entries = tuple(
                HavocEntry(name, widened.get(name).specific, env.get(name).specific) for name in widened
            )
            self.emit(p.effect, HavocUse(entries, "refine"))
            return widened
        if isinstance(p, PNot):
            return self._refine(env, negate_predmap(p.inner))
        raise TypeError(p)

    # -- expressions

    def gen_expr(self, env: Env, e: Expr) -> ExprResult:
        mark = len(self.log)
        t, eff, pm, out = self._expr(env, e)
        return ExprResult(t, eff, pm, out, tuple(self.log[mark:]))

    def _lookup(self, env: Env, name: str, span) -> Entry:
        entry = env.get(name)
        if entry is None:
            raise UnboundVariable(name, span)
        return entry

    def _expr(self, env: Env, e: Expr):
        if isinstance(e, Const):
            return Base(CONST_KINDS[e.kind], e.value, e.span), EMPTY, P_EMPTY, env
        if isinstance(e, Var):
            entry = self._lookup(env, e.name, e.span)
            return entry.specific, EMPTY, PSingle(e.name, Truthy()), env
        if isinstance(e, Assign):
            t, eff, pm, env1 = self._expr(env, e.value)
            entry = self._lookup(env1, e.name, e.span)
            self.emit(t, ToVar(entry.general, e.span))
            x = NameEffect(e.name)
            return t, ejoin(eff, x), exclude(pm, x), env1.update(e.name, t)
        if isinstance(e, Arrow):
            return self._arrow(env, e), EMPTY, P_EMPTY, env
        if isinstance(e, Call):
            t1, eff, _pm, cur = self._expr(env, e.callee)
            args = []
            for a in e.args:
                ta, ea, _pa, cur = self._expr(cur, a)
                args.append(ta)
                eff = ejoin(eff, ea)
            widened, _ = self.widen_env(cur)
            beta, nu = self.fresh.tvar(e.span), self.fresh.evar()
            entries = tuple(HavocEntry(n, en.specific, en.general) for n, en in widened.items())
            self.emit(nu, HavocUse(entries, "call", e.span))
            self.emit(t1, CallUse(tuple(args), nu, beta, e.span))
            return beta, ejoin(eff, nu), P_EMPTY, widened
        if isinstance(e, RecordLit):
            cur, eff, fields = env, EMPTY, []
            for name, v in e.fields:
                tv, ev, _pv, cur = self._expr(cur, v)
                alpha = self.fresh.tvar(v.span)
                self.emit(tv, ToVar(alpha, v.span))
                fields.append((name, alpha))
                eff = ejoin(eff, ev)
            return RecordT(tuple(fields), e.span), eff, P_EMPTY, cur
        if isinstance(e, FieldRead):
            t, eff, _pm, env1 = self._expr(env, e.obj)
            beta = self.fresh.tvar(e.span)
            self.emit(t, GetUse(e.field, beta, e.span))
            return beta, eff, P_EMPTY, env1
        if isinstance(e, FieldWrite):
            t1, e1, _p1, env1 = self._expr(env, e.obj)
            t2, e2, _p2, env2 = self._expr(env1, e.value)
            self.emit(t1, SetUse(e.field, t2, e.span))
            return t2, ejoin(e1, e2), P_EMPTY, env2
        if isinstance(e, PredTest):
            self._lookup(env, e.name, e.span)
            return Base("bool", None, e.span), EMPTY, PSingle(e.name, e.pred), env
        if isinstance(e, (And, Or)):
            return self._logical(env, e)
        if isinstance(e, Not):
            _t, eff, pm, env1 = self._expr(env, e.inner)
            return Base("bool", None, e.span), eff, PNot(pm), env1
        if isinstance(e, BinOp):
            if e.op != "+":
                raise ValueError(f"unsupported operator {e.op}")
            t1, e1, _p1, env1 = self._expr(env, e.left)
            t2, e2, _p2, env2 = self._expr(env1, e.right)
            beta = self.fresh.tvar(e.span)
            self.emit(t1, PlusLeft(t2, beta, e.span))
            return beta, ejoin(e1, e2), P_EMPTY, env2
        if isinstance(e, Require):
            var = self.imports.get(e.ref)
            if var is None:
                var = self.imports[e.ref] = self.fresh.tvar(e.span)
            return var, EMPTY, P_EMPTY, env
        raise TypeError(e)

    def _logical(self, env: Env, e):
        t1, e1, p1, env1 = self._expr(env, e.left)
        is_and = isinstance(e, And)
        right_env = self._refine_maybe(env1, p1 if is_and else negate_predmap(p1))
        t2, e2, p2, env2 = self._expr(right_env, e.right)
        alpha = self.fresh.tvar(e.left.span)
        if self.refinements:
            # the left operand is the result only when it is falsy (&&) or truthy (||)
            self.emit(t1, PredUse(Falsy() if is_and else Truthy(), alpha, e.left.span))
        else:
            self.emit(t1, ToVar(alpha, e.left.span))
        if is_and:
            pm = PAnd(exclude(p1, e2), p2)
            short = self._refine_maybe(env1, negate_predmap(p1))
        else:
            pm = POr(exclude(p1, e2), p2)
            short = self._refine_maybe(env1, p1)
        return Join(alpha, t2), ejoin(e1, e2), pm, join_env(short, env2)

    def _refine_maybe(self, env: Env, p: PredMap) -> Env:
        return self._refine(env, eliminate_not(p)) if self.refinements else env

    def _arrow(self, env: Env, e: Arrow) -> ArrowT:
        inner = erase_env(env)
        params = []
        for i, p in enumerate(e.params):
            span = e.param_spans[i] if i < len(e.param_spans) else e.span
            alpha = self.fresh.tvar(span)
            a = e.annot(i)
            if a is not None:
                self.graph.resolve(alpha, a, span)
            inner = inner.extend(p, Entry(alpha, alpha))
            params.append(alpha)
        local_names = [n for n in hoisted_locals(e.body) if n not in e.params]
        inner = self._hoist(inner, e.body, local_names, e.span)
        s_eff, body_env = self._stmt(inner, e.body)
        t, r_eff, _pm, _env = self._expr(body_env, e.ret)
        effect = effect_without(ejoin(s_eff, r_eff), set(e.params) | set(local_names))
        return ArrowT(tuple(params), effect, t, e.span)

    def _hoist(self, env: Env, body: Stmt, names: list[str], fallback: Optional[Span]) -> Env:
        decls = local_decls(body)
        for n in names:
            d = decls.get(n)
            span = d.span if d is not None else fallback
            alpha = self.fresh.tvar(span)
            if d is not None and d.annot is not None:
                self.graph.resolve(alpha, d.annot, span)
            env = env.extend(n, Entry(Base("void", None, span), alpha))
        return env

    # -- statements

    def gen_stmt(self, env: Env, s: Stmt) -> StmtResult:
        mark = len(self.log)
        eff, out = self._stmt(env, s)
        return StmtResult(eff, out, tuple(self.log[mark:]))

    def _stmt(self, env: Env, s: Stmt) -> tuple[Effect, Env]:
        if isinstance(s, ExprStmt):
            _t, eff, _pm, out = self._expr(env, s.expr)
            return eff, out
        if isinstance(s, VarDecl):
            _t, eff, _pm, out = self._expr(env, Assign(s.name, s.value, s.span))
            return eff, out
        if isinstance(s, If):
            _t, eff, pm, env1 = self._expr(env, s.cond)
            then_env = self._refine_maybe(env1, pm)
            else_env = self._refine_maybe(env1, negate_predmap(pm))
            e1, out1 = self._stmt(then_env, s.then)
            e2, out2 = self._stmt(else_env, s.orelse)
            return ejoin(eff, e1, e2), join_env(out1, out2)
        if isinstance(s, Seq):
            e1, env1 = self._stmt(env, s.first)
            e2, env2 = self._stmt(env1, s.second)
            return ejoin(e1, e2), env2
        if isinstance(s, Skip):
            return EMPTY, env
        if isinstance(s, Export):
            t, eff, _pm, out = self._expr(env, s.expr)
            self.export_type = t
            self.export_span = s.span
            return eff, out
        if isinstance(s, Return):
            raise ValueError("return statements must be folded into their arrow")
        raise TypeError(s)

    # -- programs

    def gen_program(self, p: Program) -> tuple[Type, Env]:
        """Generate a whole file: top-level declarations are hoisted like locals of a body."""
        body = p.body
        env = self._hoist(Env(), body, hoisted_locals(body), None)
        _eff, out = self._stmt(env, body)
        export = self.export_type if self.export_type is not None else Base("void")
        return export, out
