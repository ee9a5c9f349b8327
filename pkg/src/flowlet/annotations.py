"""Type annotations: their data model and the checking of inferred bounds against them.

Checking hooks into the constraint graph through a small duck-typed surface
(``flow``, ``resolved_var``, ``lowers_of``, ``log_inconsistency`` ...), so this
module never imports the solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .spans import Span


@dataclass(frozen=True)
class BaseA:
    kind: str
    value: object = None

    def __str__(self) -> str:
        if self.value is None:
            return {"num": "number", "bool": "boolean", "void": "void"}.get(self.kind, self.kind)
        if self.kind == "string":
            return '"' + str(self.value) + '"'
        if self.kind == "bool":
            return "true" if self.value else "false"
        from .types import render_number

        return render_number(self.value)


@dataclass(frozen=True)
class ArrowA:
    params: tuple["Annotation", ...]
    ret: "Annotation"

    def __str__(self) -> str:
        return "(" + ", ".join(str(p) for p in self.params) + f") => {self.ret}"


@dataclass(frozen=True)
class RecordA:
    fields: tuple[tuple[str, "Annotation"], ...]

    def __post_init__(self) -> None:
        names = [f for f, _ in self.fields]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate field in record annotation: {names}")
        object.__setattr__(self, "fields", tuple(sorted(self.fields, key=lambda p: p[0])))

    def __str__(self) -> str:
        return "{ " + ", ".join(f"{f}: {a}" for f, a in self.fields) + " }" if self.fields else "{}"


@dataclass(frozen=True)
class UnionA:
    left: "Annotation"
    right: "Annotation"

    def __str__(self) -> str:
        return f"{_wrap(self.left)} | {_wrap(self.right)}"


@dataclass(frozen=True)
class MaybeA:
    inner: "Annotation"

    def __str__(self) -> str:
        return f"?{_wrap(self.inner)}"


Annotation = Union[BaseA, ArrowA, RecordA, UnionA, MaybeA]


def _wrap(a: Annotation) -> str:
    return f"({a})" if isinstance(a, (ArrowA, UnionA)) else str(a)


def desugar(a: Annotation) -> Annotation:
    """Rewrite MaybeA into its union form; other nodes are returned as is."""
    if isinstance(a, MaybeA):
        return UnionA(a.inner, UnionA(BaseA("null"), BaseA("void")))
    return a


def base_accepts(a: BaseA, kind: str, value: object) -> bool:
    """Does a base literal (kind, optional singleton value) inhabit annotation ``a``?"""
    if a.kind != kind:
        return False
    return a.value is None or (value is not None and value == a.value)


# --- speculation ----------------------------------------------------------


@dataclass(frozen=True)
class Chosen:
    branch: Annotation
    conditions: frozenset


@dataclass(frozen=True)
class Ambiguous:
    condition_vars: tuple
    conditions: frozenset


@dataclass(frozen=True)
class NoMatch:
    reasons: tuple[str, ...]


class _Probe:
    """Restricted, read-only exploration of ``lit <= annotation`` over a graph.

    Follows every propagation rule except transitivity through type variables:
    when a check would need to follow a variable, the pair is recorded as a
    condition instead.  Known literal lower bounds of a variable are consulted
    (they are already in the graph); nothing is written back.
    """

    def __init__(self, graph) -> None:
        self.graph = graph
        self.conditions: set[tuple[str, str]] = set()
        self.condition_vars: list = []
        self.failures: list[str] = []
        self.seen: set = set()

    def cond(self, var, a: Annotation, direction: str) -> None:
        key = (direction, self.graph.render_class(var), str(a))
        if key not in self.conditions:
            self.conditions.add(key)
            self.condition_vars.append(var)

    def check_type(self, t, a: Annotation) -> None:
        from .types import Join, TypeVar

        if isinstance(t, Join):
            self.check_type(t.left, a)
            self.check_type(t.right, a)
        elif isinstance(t, TypeVar):
            if self.graph.is_resolved(t):
                if not annotation_leq(self.graph.resolved_annotation(t), a):
                    self.failures.append(f"{self.graph.resolved_annotation(t)} is not {a}")
                return
            for lit in self.graph.lit_lowers(t):
                self.check_lit(lit, a)
        else:
            self.check_lit(t, a)

    def check_lit(self, lit, a: Annotation) -> None:
        from .types import ArrowT, Base, RecordT, TypeVar

        key = (lit, a)
        if key in self.seen:
            return
        self.seen.add(key)
        a = desugar(a)
        if isinstance(a, UnionA):
            outcome = speculate_lit(self.graph, lit, a.left, a.right)
            if isinstance(outcome, NoMatch):
                self.failures.extend(outcome.reasons)
            elif isinstance(outcome, Chosen):
                self.conditions |= outcome.conditions
            else:
                self.conditions |= outcome.conditions
                self.condition_vars.extend(outcome.condition_vars)
            return
        if isinstance(a, BaseA):
            if not (isinstance(lit, Base) and base_accepts(a, lit.kind, lit.value)):
                self.failures.append(f"{lit} is not {a}")
            return
        if isinstance(a, RecordA):
            if not isinstance(lit, RecordT):
                self.failures.append(f"{lit} is not a record")
                return
            for name, fa in a.fields:
                ft = lit.get(name)
                if ft is None:
                    self.failures.append(f"missing field {name}")
                    continue
                self.check_type(ft, fa)
            return
        if isinstance(a, ArrowA):
            if not isinstance(lit, ArrowT):
                self.failures.append(f"{lit} is not a function")
                return
            if len(lit.params) != len(a.params):
                self.failures.append("arity mismatch")
                return
            for p, pa in zip(lit.params, a.params):
                if isinstance(p, TypeVar) and not self.graph.is_resolved(p):
                    self.cond(p, pa, "lower")
                elif isinstance(p, TypeVar) and not annotation_leq(pa, self.graph.resolved_annotation(p)):
                    self.failures.append(f"parameter {self.graph.resolved_annotation(p)} does not accept {pa}")
            ret = lit.ret
            if isinstance(ret, TypeVar) and not self.graph.is_resolved(ret):
                self.cond(ret, a.ret, "upper")
            else:
                self.check_type(ret, a.ret)
            return
        raise TypeError(a)


def speculate_lit(graph, lit, a1: Annotation, a2: Annotation):
    """Decide which branch of ``a1 | a2`` a literal lower bound should be checked against."""
    p1, p2 = _Probe(graph), _Probe(graph)
    p1.check_lit(lit, a1)
    p2.check_lit(lit, a2)
    ok1, ok2 = not p1.failures, not p2.failures
    if ok1 and not ok2:
        return Chosen(a1, frozenset(p1.conditions))
    if ok2 and not ok1:
        return Chosen(a2, frozenset(p2.conditions))
    if not ok1 and not ok2:
        return NoMatch(tuple(p1.failures + p2.failures))
    if p1.conditions <= p2.conditions:
        return Chosen(a1, frozenset(p1.conditions))
    seen, cvars = set(), []
    for v in p1.condition_vars + p2.condition_vars:
        if v not in seen:
            seen.add(v)
            cvars.append(v)
    return Ambiguous(tuple(cvars), frozenset(p1.conditions | p2.conditions))


def speculative_union_match(graph, lb, a1: Annotation, a2: Annotation):
    """Speculate over every literal currently bounding ``lb``; combine the verdicts.

    Returns Chosen when one branch works for all literals, Ambiguous when any
    literal is ambiguous, NoMatch otherwise.  The graph is not modified.
    """
    from .types import Join, TypeVar

    lits = []
    stack = [lb]
    while stack:
        t = stack.pop()
        if isinstance(t, Join):
            stack += [t.right, t.left]
        elif isinstance(t, TypeVar):
            lits.extend(graph.lit_lowers(t))
        else:
            lits.append(t)
    outcomes = [speculate_lit(graph, lit, a1, a2) for lit in lits]
    for o in outcomes:
        if isinstance(o, Ambiguous):
            return o
    for o in outcomes:
        if isinstance(o, NoMatch):
            return o
    branches = {o.branch for o in outcomes}
    if len(branches) > 1:
        # different literals pick different branches; each is checked on its own
        return Chosen(UnionA(a1, a2), frozenset().union(*(o.conditions for o in outcomes)))
    branch = outcomes[0].branch if outcomes else a1
    return Chosen(branch, frozenset().union(*(o.conditions for o in outcomes)) if outcomes else frozenset())


def annotation_leq(a: Annotation, b: Annotation) -> bool:
    """Structural subtyping between annotations (used when both sides are declared)."""
    a, b = desugar(a), desugar(b)
    if isinstance(a, UnionA):
        return annotation_leq(a.left, b) and annotation_leq(a.right, b)
    if isinstance(b, UnionA):
        return annotation_leq(a, b.left) or annotation_leq(a, b.right)
    if isinstance(a, BaseA) and isinstance(b, BaseA):
        return base_accepts(b, a.kind, a.value)
    if isinstance(a, RecordA) and isinstance(b, RecordA):
        fa = dict(a.fields)
        return all(n in fa and annotation_leq(fa[n], t) and annotation_leq(t, fa[n]) for n, t in b.fields)
    if isinstance(a, ArrowA) and isinstance(b, ArrowA):
        return (
            len(a.params) == len(b.params)
            and all(annotation_leq(pb, pa) for pa, pb in zip(a.params, b.params))
            and annotation_leq(a.ret, b.ret)
        )
    return False


def check_annotation(graph, lb, a: Annotation, span: Span | None = None) -> None:
    """Require every value flowing from ``lb`` to fit ``a`` (constraints go to ``graph``)."""
    from .types import AnnotUse

    graph.flow(lb, AnnotUse(a, span))
