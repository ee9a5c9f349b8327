"""The constraint graph: closed-form propagation over union-find classes of unknowns.

Every unknown (type or effect variable) belongs to one class.  A class keeps the
literal lower bounds that reached it and the uses it flows into; adding either
side immediately pushes the cross product through the propagation rules, so
the graph is closed whenever ``add_constraint`` returns.  Transitive edges
between variables are stored as ``ToVar`` uses and are never materialized.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import annotations as ann
from .spans import NO_SPAN, Span
from .types import (
    LIT_TYPES,
    AnnotUse,
    ArrowT,
    Base,
    CallUse,
    EffectJoin,
    EffectVar,
    EmptyEffect,
    FieldEq,
    Flow,
    FreshSource,
    GetUse,
    HavocUse,
    Join,
    NameEffect,
    Neg,
    PlusLeft,
    PlusRight,
    PolarityContext,
    PredUse,
    RecordT,
    SetUse,
    ToEVar,
    ToVar,
    Truthy,
    TypeVar,
    TYPE_USES,
    EFFECT_USES,
    IsNull,
    IsUndefined,
    Nullish,
    TypeofIs,
    Falsy,
    pred_base,
)

REASON_CODES = {
    "NotAFunction": "E_NOT_A_FUNCTION",
    "MissingField": "E_MISSING_FIELD",
    "NotARecord": "E_NOT_A_RECORD",
    "ArityMismatch": "E_ARITY",
    "BadOperand": "E_BAD_OPERAND",
    "Incompatible": "E_INCOMPATIBLE",
    "AmbiguousUnion": "E_AMBIGUOUS_UNION",
}


@dataclass(frozen=True)
class Inconsistency:
    lhs: object  # the offending literal
    use: object
    reason: str
    detail: str = ""
    related: tuple[Span, ...] = ()

    @property
    def span(self) -> Span:
        return getattr(self.use, "span", None) or NO_SPAN

    @property
    def origin(self) -> Optional[Span]:
        return getattr(self.lhs, "span", None)

    def sort_key(self) -> tuple:
        return (self.span, self.origin or NO_SPAN, self.reason, self.detail, str(self.lhs), str(self.use))

    def message(self) -> str:
        if self.reason == "NotAFunction":
            return f"{describe(self.lhs)} is called, but it is not a function"
        if self.reason == "MissingField":
            return f"field {self.detail} is read or written, but {describe(self.lhs)} has no such field"
        if self.reason == "NotARecord":
            return f"field {self.detail} is accessed on {describe(self.lhs)}, which is not a record"
        if self.reason == "ArityMismatch":
            return f"function called with the wrong number of arguments ({self.detail})"
        if self.reason == "BadOperand":
            return f"operand of + is {describe(self.lhs)}; {self.detail}"
        if self.reason == "AmbiguousUnion":
            return f"cannot decide which union member {describe(self.lhs)} matches; {self.detail}"
        return f"{describe(self.lhs)} is incompatible with {self.detail}"


def describe(lit) -> str:
    if isinstance(lit, Base):
        if lit.kind == "void":
            return "undefined"
        return str(lit) if lit.singleton or lit.kind == "null" else f"a {lit.kind}"
    if isinstance(lit, ArrowT):
        return "a function"
    if isinstance(lit, RecordT):
        return "a record {" + ", ".join(f for f, _ in lit.fields) + "}"
    return str(lit)


# --- predicate checks -----------------------------------------------------


def truthiness(lit) -> Optional[bool]:
    """Static truthiness of a literal: True, False, or None when both are possible."""
    if isinstance(lit, Base):
        if lit.kind in ("void", "null"):
            return False
        if not lit.singleton:
            return None
        if lit.kind == "num":
            return lit.value != 0
        if lit.kind == "string":
            return lit.value != ""
        return bool(lit.value)
    return True


_TYPEOF = {"num": "number", "string": "string", "bool": "boolean", "void": "undefined", "null": "object"}


def typeof_kind(lit) -> str:
    if isinstance(lit, Base):
        return _TYPEOF[lit.kind]
    return "function" if isinstance(lit, ArrowT) else "object"


def check_pred(lit, q) -> bool:
    """May some value described by ``lit`` satisfy predicate ``q``?

    Record field tests look at the field's type only when it is a literal
    (that is, after concretization); a variable field is undecided and fails,
    to be retried once the field's lower bounds are substituted in.
    """
    neg = isinstance(q, Neg)
    p = pred_base(q)
    if isinstance(p, (Truthy, Falsy)):
        t = truthiness(lit)
        want = isinstance(p, Truthy) != neg
        return t is None or t == want
    if isinstance(p, FieldEq):
        if not isinstance(lit, RecordT):
            return neg
        ft = lit.get(p.field)
        if ft is None:
            return neg
        if isinstance(ft, Base) and ft.kind == "string":
            if not ft.singleton:
                return True
            return (ft.value == p.value) != neg
        if isinstance(ft, LIT_TYPES):
            return neg
        return False
    if isinstance(p, Nullish):
        hit = isinstance(lit, Base) and lit.kind in ("void", "null")
    elif isinstance(p, IsNull):
        hit = isinstance(lit, Base) and lit.kind == "null"
    elif isinstance(p, IsUndefined):
        hit = isinstance(lit, Base) and lit.kind == "void"
    elif isinstance(p, TypeofIs):
        hit = typeof_kind(lit) == p.kind
    else:
        raise TypeError(p)
    return hit != neg


# --- the graph ------------------------------------------------------------


@dataclass
class ClassState:
    root: object
    lowers: dict = field(default_factory=dict)  # ordered set of literals (or effect names)
    uppers: dict = field(default_factory=dict)  # ordered set of uses
    watchers: list = field(default_factory=list)  # (record literal, field, PredUse)
    resolved: object = None  # an Annotation when the class is declared
    resolved_span: Optional[Span] = None
    sealed: bool = False
    members: list = field(default_factory=list)


class ConstraintGraph:
    def __init__(self, fresh: Optional[FreshSource] = None, trace: bool = False) -> None:
        self.fresh = fresh or FreshSource()
        self.parent: dict = {}
        self.classes: dict = {}
        self.worklist: deque = deque()
        self.processed: set = set()
        self.lit_flows: list[Flow] = []  # every literal-to-use constraint derived, in order
        self.inconsistencies: list[Inconsistency] = []
        self.concretized: list = []
        self.pending_unions: list = []
        self.escape = self.fresh.evar()
        self._realized: dict = {}
        self._resolved_vars: dict = {}
        self._draining = False
        self.trace = trace
        self.firings: list[str] = []

    # -- union-find

    def find(self, v):
        parent = self.parent
        root = v
        while parent.get(root, root) != root:
            root = parent[root]
        while v != root:
            nxt = parent[v]
            parent[v] = root
            v = nxt
        return root

    def state(self, v) -> ClassState:
        root = self.find(v)
        st = self.classes.get(root)
        if st is None:
            st = self.classes[root] = ClassState(root, members=[root])
        return st

    def peek(self, v) -> ClassState:
        """The class of ``v`` without registering it (queries must not mutate)."""
        root = self.find(v)
        return self.classes.get(root) or ClassState(root, members=[root])

    def unify(self, a, b) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        sa, sb = self.state(ra), self.state(rb)
        if (len(sa.members), -_vid(ra)) < (len(sb.members), -_vid(rb)):
            sa, sb = sb, sa
        big, small = sa, sb
        self.parent[small.root] = big.root
        self.classes.pop(small.root, None)
        old_big_lowers, old_big_uppers = list(big.lowers), list(big.uppers)
        old_big_watchers = list(big.watchers)
        big.members.extend(small.members)
        if self.trace:
            self.firings.append(f"unify {ra} {rb}")
        for u in small.uppers:
            if not _self_edge(self, u, big.root):
                big.uppers.setdefault(u, None)
        big.watchers.extend(small.watchers)
        big.sealed = big.sealed or small.sealed
        if big.resolved is None and small.resolved is not None:
            big.resolved, big.resolved_span = small.resolved, small.resolved_span
            unchecked = old_big_lowers
        elif big.resolved is not None:
            unchecked = list(small.lowers)
        else:
            unchecked = []
        for lit in small.lowers:
            big.lowers.setdefault(lit, None)
        if big.resolved is not None:
            for lit in unchecked:
                self._push(lit, AnnotUse(big.resolved, big.resolved_span))
        for lit in small.lowers:
            for u in old_big_uppers:
                self._push(lit, u)
            for rec, fname, use in old_big_watchers:
                self._concretize(rec, fname, lit, use)
        for lit in old_big_lowers:
            for u in small.uppers:
                self._push(lit, u)
            for rec, fname, use in small.watchers:
                self._concretize(rec, fname, lit, use)
        self._drain()

    # -- public construction API

    def add_constraint(self, c: Flow) -> None:
        if not isinstance(c.use, TYPE_USES + EFFECT_USES):
            raise TypeError(f"right-hand side must be a use, got {c.use!r}")
        self._push(c.lhs, c.use)
        self._drain()

    def flow(self, lhs, use) -> None:
        self.add_constraint(Flow(lhs, use))

    def resolve(self, var: TypeVar, a, span: Optional[Span] = None) -> None:
        """Declare ``var`` to have annotation ``a``: its values are the annotation's."""
        st = self.state(var)
        if st.resolved is not None:
            raise ValueError(f"{var} is already resolved")
        st.resolved, st.resolved_span = a, span
        old = list(st.lowers)
        for lit in self.realize(a):
            if lit not in st.lowers:
                st.lowers[lit] = None
                for u in list(st.uppers):
                    self._push(lit, u)
                for rec, fname, use in list(st.watchers):
                    self._concretize(rec, fname, lit, use)
        for lit in old:
            self._push(lit, AnnotUse(a, span))
        self._drain()

    def seal(self, var: TypeVar) -> None:
        self.state(var).sealed = True

    def add_lower(self, var: TypeVar, lit) -> None:
        """Seed a literal lower bound directly (used when instantiating signatures)."""
        st = self.state(var)
        if lit in st.lowers:
            return
        st.lowers[lit] = None
        for u in list(st.uppers):
            self._push(lit, u)
        for rec, fname, use in list(st.watchers):
            self._concretize(rec, fname, lit, use)
        self._drain()

    def realize(self, a) -> list:
        """The literals standing for the values of annotation ``a``."""
        hit = self._realized.get(a)
        if hit is not None:
            return hit
        a = ann.desugar(a)
        if isinstance(a, ann.BaseA):
            out = [Base(a.kind, a.value)]
        elif isinstance(a, ann.RecordA):
            out = [RecordT(tuple((f, self.resolved_var(fa)) for f, fa in a.fields))]
        elif isinstance(a, ann.ArrowA):
            params = tuple(self.resolved_var(p) for p in a.params)
            out = [ArrowT(params, self.escape, self.resolved_var(a.ret))]
        elif isinstance(a, ann.UnionA):
            out = list(dict.fromkeys(self.realize(a.left) + self.realize(a.right)))
        else:
            raise TypeError(a)
        self._realized[a] = out
        return out

    def resolved_var(self, a) -> TypeVar:
        v = self._resolved_vars.get(a)
        if v is None:
            v = self._resolved_vars[a] = self.fresh.tvar()
            self.resolve(v, a)
        return v

    # -- queries

    def is_resolved(self, v) -> bool:
        return self.peek(v).resolved is not None

    def resolved_annotation(self, v):
        return self.peek(v).resolved

    def lit_lowers(self, v) -> list:
        return list(self.peek(v).lowers)

    def uppers_of(self, v) -> list:
        return list(self.peek(v).uppers)

    def render_class(self, v) -> str:
        st = self.peek(v)
        if st.resolved is not None:
            return f"<{st.resolved}>"
        return f"c{_vid(st.root)}"

    def settle(self) -> None:
        """Decide deferred union-annotation checks; may add constraints."""
        while self.pending_unions:
            batch, self.pending_unions = self.pending_unions, []
            for lit, a, span in batch:
                outcome = ann.speculate_lit(self, lit, a.left, a.right)
                use = AnnotUse(a, span)
                if isinstance(outcome, ann.Chosen):
                    self._push(lit, AnnotUse(outcome.branch, span))
                    self._drain()
                elif isinstance(outcome, ann.Ambiguous):
                    spans = tuple(sorted({v.span for v in outcome.condition_vars if getattr(v, "span", None)}))
                    where = ", ".join(str(s) for s in spans) or "the unannotated definitions involved"
                    self._inconsistent(lit, use, "AmbiguousUnion", f"annotate {where}", spans)
                else:
                    self._inconsistent(lit, use, "Incompatible", str(a))

    def consistency_errors(self) -> list[Inconsistency]:
        self.settle()
        return sorted(self.inconsistencies, key=Inconsistency.sort_key)

    def closed_constraints(self) -> list[Flow]:
        """Every derived literal-to-use constraint plus the stored variable-to-use edges."""
        out = list(self.lit_flows)
        for root, st in self.classes.items():
            for member in st.members:
                for u in st.uppers:
                    out.append(Flow(member, u))
        return out

    # -- propagation

    def _push(self, lhs, use) -> None:
        self.worklist.append((lhs, use))

    def _drain(self) -> None:
        if self._draining:
            return
        self._draining = True
        try:
            wl = self.worklist
            while wl:
                lhs, use = wl.popleft()
                self._process(lhs, use)
        finally:
            self._draining = False

    def _process(self, lhs, use) -> None:
        if isinstance(lhs, Join) or isinstance(lhs, EffectJoin):
            self._push(lhs.left, use)
            self._push(lhs.right, use)
        elif isinstance(lhs, (TypeVar, EffectVar)):
            st = self.state(lhs)
            if use in st.uppers or _self_edge(self, use, st.root):
                return
            st.uppers[use] = None
            for low in list(st.lowers):
                self._push(low, use)
        elif isinstance(lhs, EmptyEffect):
            return
        elif isinstance(lhs, NameEffect):
            self._effect_name(lhs, use)
        else:
            self._lit(lhs, use)

    def _effect_name(self, name: NameEffect, use) -> None:
        key = (name, use)
        if key in self.processed:
            return
        self.processed.add(key)
        if isinstance(use, ToEVar):
            st = self.state(use.var)
            if name in st.lowers:
                return
            st.lowers[name] = None
            for u in list(st.uppers):
                self._push(name, u)
        elif isinstance(use, HavocUse):
            entry = use.lookup(name.name)
            if entry is None:
                return
            if self.trace:
                self.firings.append(f"havoc {name}")
            if use.kind == "call" and isinstance(entry.specific, TypeVar) and isinstance(entry.general, TypeVar):
                self.unify(entry.general, entry.specific)
            else:
                self._push(entry.general, ToVar(entry.specific, use.span))
        else:
            raise TypeError(use)

    def _lit(self, lit, use) -> None:
        key = (lit, use)
        if key in self.processed:
            return
        self.processed.add(key)
        self.lit_flows.append(Flow(lit, use))
        if isinstance(use, ToVar):
            st = self.state(use.var)
            if st.resolved is not None:
                self._push(lit, AnnotUse(st.resolved, use.span or st.resolved_span))
                return
            if st.sealed and not _covered(lit, st.lowers):
                self._inconsistent(lit, use, "Incompatible", "the imported value it is written into")
                return
            if lit in st.lowers:
                return
            st.lowers[lit] = None
            for u in list(st.uppers):
                self._push(lit, u)
            for rec, fname, puse in list(st.watchers):
                self._concretize(rec, fname, lit, puse)
        elif isinstance(use, CallUse):
            if not isinstance(lit, ArrowT):
                self._inconsistent(lit, use, "NotAFunction")
                return
            if len(lit.params) != len(use.args):
                self._inconsistent(lit, use, "ArityMismatch", f"expected {len(lit.params)}, got {len(use.args)}")
                return
            for arg, param in zip(use.args, lit.params):
                self._push(arg, ToVar(param, use.span))
            self._push(lit.ret, ToVar(use.ret, use.span))
            self._push(lit.effect, ToEVar(use.effect))
        elif isinstance(use, GetUse):
            if not isinstance(lit, RecordT):
                self._inconsistent(lit, use, "NotARecord", use.field)
                return
            ft = lit.get(use.field)
            if ft is None:
                self._inconsistent(lit, use, "MissingField", use.field)
                return
            self._push(ft, ToVar(use.var, use.span))
        elif isinstance(use, SetUse):
            if not isinstance(lit, RecordT):
                self._inconsistent(lit, use, "NotARecord", use.field)
                return
            ft = lit.get(use.field)
            if ft is None:
                self._inconsistent(lit, use, "MissingField", use.field)
                return
            self._push(use.type, ToVar(ft, use.span))
        elif isinstance(use, PredUse):
            p = pred_base(use.pred)
            if isinstance(p, FieldEq) and isinstance(lit, RecordT) and isinstance(lit.get(p.field), TypeVar):
                fst = self.state(lit.get(p.field))
                fst.watchers.append((lit, p.field, use))
                for low in list(fst.lowers):
                    self._concretize(lit, p.field, low, use)
            elif check_pred(lit, use.pred):
                if self.trace:
                    self.firings.append(f"pred-base {use.pred}")
                self._push(lit, ToVar(use.var, use.span))
        elif isinstance(use, PlusLeft):
            if isinstance(lit, Base) and lit.kind in ("num", "string"):
                self._push(use.other, PlusRight(lit.kind, use.ret, use.span))
            else:
                self._inconsistent(lit, use, "BadOperand", "expected a number or a string")
        elif isinstance(use, PlusRight):
            if isinstance(lit, Base) and lit.kind == use.kind:
                self._push(Base(use.kind, None, use.span), ToVar(use.ret, use.span))
            else:
                self._inconsistent(lit, use, "BadOperand", f"expected a {use.kind} to match the other operand")
        elif isinstance(use, AnnotUse):
            self._annot(lit, use)
        else:
            raise TypeError(use)

    def _concretize(self, rec: RecordT, fname: str, filler, use: PredUse) -> None:
        """Substitute one lower bound into the record's (positive) field hole and test it."""
        ctx = PolarityContext(rec, (("field", fname),))
        concrete = ctx.fill(filler)
        key = ("concrete", concrete, use)
        if key in self.processed:
            return
        self.processed.add(key)
        self.concretized.append((concrete, use))
        if self.trace:
            self.firings.append(f"pred-trans {use.pred}")
        if check_pred(concrete, use.pred):
            self._push(rec, ToVar(use.var, use.span))

    def _annot(self, lit, use: AnnotUse) -> None:
        a = ann.desugar(use.annotation)
        span = use.span
        if isinstance(a, ann.BaseA):
            if not (isinstance(lit, Base) and ann.base_accepts(a, lit.kind, lit.value)):
                self._inconsistent(lit, use, "Incompatible", str(a))
        elif isinstance(a, ann.RecordA):
            if not isinstance(lit, RecordT):
                self._inconsistent(lit, use, "Incompatible", str(a))
                return
            for fname, fa in a.fields:
                if lit.get(fname) is None:
                    self._inconsistent(lit, use, "MissingField", fname)
                    continue
                gamma = self.fresh.tvar(span)
                self._push(lit, GetUse(fname, gamma, span))
                self._push(gamma, AnnotUse(fa, span))
                self._push(lit, SetUse(fname, self.resolved_var(fa), span))
        elif isinstance(a, ann.ArrowA):
            if not isinstance(lit, ArrowT):
                self._inconsistent(lit, use, "Incompatible", str(a))
                return
            beta = self.fresh.tvar(span)
            params = tuple(self.resolved_var(p) for p in a.params)
            self._push(lit, CallUse(params, self.escape, beta, span))
            self._push(beta, AnnotUse(a.ret, span))
        elif isinstance(a, ann.UnionA):
            self.pending_unions.append((lit, a, span))
        else:
            raise TypeError(a)

    def _inconsistent(self, lit, use, reason: str, detail: str = "", related: tuple = ()) -> None:
        self.inconsistencies.append(Inconsistency(lit, use, reason, detail, related))

    # -- rendering

    def to_dot(self) -> str:
        lines = ["digraph constraints {", "  node [shape=box];"]
        ids: dict = {}

        def node(key, label, color=None) -> str:
            if key not in ids:
                ids[key] = f"n{len(ids)}"
                extra = f', color="{color}"' if color else ""
                lines.append(f'  {ids[key]} [label="{_esc(label)}"{extra}];')
            return ids[key]

        for root in sorted(self.classes, key=_vid):
            st = self.classes[root]
            members = " ".join(sorted((str(m) for m in st.members), key=lambda s: int(s[1:])))
            label = members + (f" : {st.resolved}" if st.resolved is not None else "")
            cid = node(("class", root), label)
            for low in st.lowers:
                lid = node(("lit", low), str(low))
                lines.append(f"  {lid} -> {cid};")
            for u in st.uppers:
                if isinstance(u, (ToVar, ToEVar)):
                    target = node(("class", self.find(u.var)), "")
                else:
                    target = node(("use", u), str(u))
                lines.append(f"  {cid} -> {target};")
        for inc in self.inconsistencies:
            lid = node(("lit", inc.lhs), str(inc.lhs))
            uid = node(("use", inc.use), str(inc.use), "red")
            lines.append(f'  {lid} -> {uid} [color="red", label="{inc.reason}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _esc(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def _vid(v) -> int:
    return v.id


def _self_edge(g: ConstraintGraph, use, root) -> bool:
    return isinstance(use, (ToVar, ToEVar)) and g.find(use.var) == root


def _covered(lit, lowers: Iterable) -> bool:
    """Is ``lit`` already represented by a sealed class's bounds?"""
    for low in lowers:
        if low == lit:
            return True
        if isinstance(lit, Base) and isinstance(low, Base) and low.kind == lit.kind:
            if low.value is None or low.value == lit.value:
                return True
    return False
