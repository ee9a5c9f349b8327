"""Reference closure: the propagation rules applied to a plain set of constraints.

No union-find, no class bookkeeping: a constraint ``lhs <= use`` is a fact, and
every rule is re-applied until nothing new appears.  Havoc is kept in its
directional form (``general <= specific``) rather than unified.  This is the
oracle the optimized ConstraintGraph is compared against; it is slow by design.
"""

from __future__ import annotations

from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable

from . import annotations as ann
from .solver import check_pred
from .types import (
    AnnotUse,
    ArrowT,
    Base,
    CallUse,
    EffectJoin,
    EffectVar,
    EmptyEffect,
    FieldEq,
    Flow,
    GetUse,
    HavocUse,
    Join,
    NameEffect,
    PlusLeft,
    PlusRight,
    PredUse,
    RecordT,
    SetUse,
    ToEVar,
    ToVar,
    TypeVar,
    pred_base,
)


class Diverged(Exception):
    pass


@dataclass
class NaiveResult:
    facts: set = field(default_factory=set)
    inconsistencies: list = field(default_factory=list)  # (reason, lhs, use)

    def contains(self, lhs, use) -> bool:
        return (lhs, use) in self.facts

    def verdict(self) -> bool:
        return not self.inconsistencies

    def signature(self) -> Counter:
        return Counter(self.inconsistencies)


def naive_close(constraints: Iterable[Flow], max_facts: int = 2_000_000) -> NaiveResult:
    facts: set = set()
    uppers = defaultdict(list)  # var -> uses it flows into
    lowers = defaultdict(list)  # var -> types flowing into it
    watches = defaultdict(list)  # field var -> (record, field, PredUse)
    work: deque = deque()

    def add(lhs, use) -> None:
        key = (lhs, use)
        if key not in facts:
            facts.add(key)
            work.append(key)
            if len(facts) > max_facts:
                raise Diverged(f"closure exceeded {max_facts} constraints")

    for c in constraints:
        if isinstance(c.use, AnnotUse) and isinstance(ann.desugar(c.use.annotation), ann.UnionA):
            raise ValueError("union annotations are outside the reference closure")
        add(c.lhs, c.use)

    while work:
        lhs, use = work.popleft()
        if isinstance(lhs, (Join, EffectJoin)):
            add(lhs.left, use)
            add(lhs.right, use)
            continue
        if isinstance(use, (ToVar, ToEVar)):
            target = use.var
            lowers[target].append(lhs)
            for u in list(uppers[target]):
                add(lhs, u)
            if isinstance(lhs, (Base, ArrowT, RecordT)):
                for rec, fname, puse in list(watches[target]):
                    if check_pred(rec.replace(fname, lhs), puse.pred):
                        add(rec, ToVar(puse.var))
        if isinstance(lhs, (TypeVar, EffectVar)):
            uppers[lhs].append(use)
            for low in list(lowers[lhs]):
                add(low, use)
            continue
        if isinstance(lhs, EmptyEffect):
            continue
        if isinstance(lhs, NameEffect):
            if isinstance(use, HavocUse):
                entry = use.lookup(lhs.name)
                if entry is not None:
                    add(entry.general, ToVar(entry.specific))
            continue
        _literal_rules(lhs, use, add, lowers, watches)

    result = NaiveResult(facts)
    for lhs, use in facts:
        reason = _inconsistent(lhs, use)
        if reason is not None:
            result.inconsistencies.append((reason, lhs, use))
    return result


def _literal_rules(lit, use, add, lowers, watches) -> None:
    if isinstance(use, CallUse):
        if isinstance(lit, ArrowT) and len(lit.params) == len(use.args):
            for arg, param in zip(use.args, lit.params):
                add(arg, ToVar(param))
            add(lit.ret, ToVar(use.ret))
            add(lit.effect, ToEVar(use.effect))
    elif isinstance(use, GetUse):
        if isinstance(lit, RecordT) and lit.get(use.field) is not None:
            add(lit.get(use.field), ToVar(use.var))
    elif isinstance(use, SetUse):
        if isinstance(lit, RecordT) and lit.get(use.field) is not None:
            add(use.type, ToVar(lit.get(use.field)))
    elif isinstance(use, PredUse):
        p = pred_base(use.pred)
        if isinstance(p, FieldEq) and isinstance(lit, RecordT) and isinstance(lit.get(p.field), TypeVar):
            fv = lit.get(p.field)
            watches[fv].append((lit, p.field, use))
            for low in list(lowers[fv]):
                if isinstance(low, (Base, ArrowT, RecordT)) and check_pred(lit.replace(p.field, low), use.pred):
                    add(lit, ToVar(use.var))
        elif check_pred(lit, use.pred):
            add(lit, ToVar(use.var))
    elif isinstance(use, PlusLeft):
        if isinstance(lit, Base) and lit.kind in ("num", "string"):
            add(use.other, PlusRight(lit.kind, use.ret, use.span))
    elif isinstance(use, PlusRight):
        if isinstance(lit, Base) and lit.kind == use.kind:
            add(Base(use.kind, None, use.span), ToVar(use.ret))
    elif isinstance(use, AnnotUse):
        a = ann.desugar(use.annotation)
        if not isinstance(a, ann.BaseA):
            raise ValueError("only base annotations are handled by the reference closure")


def _inconsistent(lhs, use):
    if not isinstance(lhs, (Base, ArrowT, RecordT)):
        return None
    if isinstance(use, CallUse):
        if not isinstance(lhs, ArrowT):
            return "NotAFunction"
        if len(lhs.params) != len(use.args):
            return "ArityMismatch"
    elif isinstance(use, (GetUse, SetUse)):
        if not isinstance(lhs, RecordT):
            return "NotARecord"
        if lhs.get(use.field) is None:
            return "MissingField"
    elif isinstance(use, PlusLeft):
        if not (isinstance(lhs, Base) and lhs.kind in ("num", "string")):
            return "BadOperand"
    elif isinstance(use, PlusRight):
        if not (isinstance(lhs, Base) and lhs.kind == use.kind):
            return "BadOperand"
    elif isinstance(use, AnnotUse):
        a = ann.desugar(use.annotation)
        if isinstance(a, ann.BaseA) and not (isinstance(lhs, Base) and ann.base_accepts(a, lhs.kind, lhs.value)):
            return "Incompatible"
    return None


def graph_signature(graph) -> Counter:
    """The optimized graph's inconsistencies in the same comparable form."""
    return Counter((i.reason, i.lhs, i.use) for i in graph.consistency_errors())
