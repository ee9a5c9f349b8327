"""The constraint language: types, effects, uses, predicates, predicate maps, environments."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

from .spans import Span

BASE_KINDS = ("num", "string", "bool", "void", "null")


# --- unknowns -------------------------------------------------------------


@dataclass(frozen=True)
class TypeVar:
    id: int
    span: Span | None = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        return f"a{self.id}"


@dataclass(frozen=True)
class EffectVar:
    id: int

    def __str__(self) -> str:
        return f"e{self.id}"


class FreshSource:
    """Monotone id supply; ids are never reused within a session."""

    def __init__(self, start: int = 1) -> None:
        self.next_id = start

    def tvar(self, span: Span | None = None) -> TypeVar:
        v = TypeVar(self.next_id, span)
        self.next_id += 1
        return v

    def evar(self) -> EffectVar:
        v = EffectVar(self.next_id)
        self.next_id += 1
        return v


# --- effects --------------------------------------------------------------


@dataclass(frozen=True)
class EmptyEffect:
    def __str__(self) -> str:
        return "0"


@dataclass(frozen=True)
class NameEffect:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class EffectJoin:
    left: "Effect"
    right: "Effect"

    def __str__(self) -> str:
        return f"{self.left} | {self.right}"


Effect = Union[EmptyEffect, NameEffect, EffectJoin, EffectVar]
EMPTY = EmptyEffect()


def ejoin(*effects: Effect) -> Effect:
    """Join effects, dropping empties; the result is EMPTY for no operands."""
    out: Effect | None = None
    for e in effects:
        if isinstance(e, EmptyEffect):
            continue
        out = e if out is None else EffectJoin(out, e)
    return EMPTY if out is None else out


def effect_atoms(e: Effect) -> Iterator[NameEffect | EffectVar]:
    if isinstance(e, EffectJoin):
        yield from effect_atoms(e.left)
        yield from effect_atoms(e.right)
    elif isinstance(e, (NameEffect, EffectVar)):
        yield e


def effect_names(e: Effect) -> set[str]:
    return {a.name for a in effect_atoms(e) if isinstance(a, NameEffect)}


def effect_without(e: Effect, names: set[str]) -> Effect:
    """Drop the given variable names from a concrete part of an effect."""
    return ejoin(*(a for a in effect_atoms(e) if not (isinstance(a, NameEffect) and a.name in names)))


# --- type literals and types ----------------------------------------------


@dataclass(frozen=True)
class Base:
    """A base type; ``value`` is set for singleton string/number/boolean types.

    ``span`` records where the literal originated and takes part in equality, so
    two ``"nil"`` literals from different sites stay distinct bounds.
    """

    kind: str
    value: object = None
    span: Span | None = None

    @property
    def singleton(self) -> bool:
        return self.value is not None

    def __str__(self) -> str:
        if self.value is None:
            return self.kind
        if self.kind == "string":
            return '"' + str(self.value).replace("\\", "\\\\").replace('"', '\\"') + '"'
        if self.kind == "bool":
            return "true" if self.value else "false"
        return render_number(self.value)


@dataclass(frozen=True)
class ArrowT:
    params: tuple["Type", ...]
    effect: Effect
    ret: "Type"
    span: Span | None = None

    def __str__(self) -> str:
        ps = ", ".join(str(p) for p in self.params)
        return f"({ps}) -[{self.effect}]-> {self.ret}"


@dataclass(frozen=True)
class RecordT:
    fields: tuple[tuple[str, "Type"], ...]
    span: Span | None = None

    def __post_init__(self) -> None:
        names = [f for f, _ in self.fields]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate record field in {names}")
        if names != sorted(names):
            object.__setattr__(self, "fields", tuple(sorted(self.fields, key=lambda p: p[0])))

    def get(self, name: str) -> "Type | None":
        for f, t in self.fields:
            if f == name:
                return t
        return None

    def replace(self, name: str, t: "Type") -> "RecordT":
        return RecordT(tuple((f, t if f == name else u) for f, u in self.fields), self.span)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{f}: {t}" for f, t in self.fields) + "}"


@dataclass(frozen=True)
class Join:
    left: "Type"
    right: "Type"

    def __str__(self) -> str:
        return f"{self.left} | {self.right}"


TypeLit = Union[Base, ArrowT, RecordT]
Type = Union[Base, ArrowT, RecordT, Join, TypeVar]
LIT_TYPES = (Base, ArrowT, RecordT)


def tjoin(*types: Type) -> Type:
    out = types[0]
    for t in types[1:]:
        out = Join(out, t)
    return out


def join_operands(t: Type) -> Iterator[Type]:
    if isinstance(t, Join):
        yield from join_operands(t.left)
        yield from join_operands(t.right)
    else:
        yield t


def render_number(v: object) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return repr(v) if isinstance(v, float) else str(v)


# --- predicates -----------------------------------------------------------


class BasePred:
    __slots__ = ()


@dataclass(frozen=True)
class Truthy(BasePred):
    def __str__(self) -> str:
        return "truthy"


@dataclass(frozen=True)
class Falsy(BasePred):
    def __str__(self) -> str:
        return "falsy"


@dataclass(frozen=True)
class Nullish(BasePred):
    def __str__(self) -> str:
        return "nullish"


@dataclass(frozen=True)
class IsNull(BasePred):
    def __str__(self) -> str:
        return "is-null"


@dataclass(frozen=True)
class IsUndefined(BasePred):
    def __str__(self) -> str:
        return "is-undefined"


TYPEOF_KINDS = ("number", "string", "boolean", "function", "object", "undefined")


@dataclass(frozen=True)
class TypeofIs(BasePred):
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in TYPEOF_KINDS:
            raise ValueError(f"unknown typeof kind {self.kind!r}")

    def __str__(self) -> str:
        return f"typeof={self.kind}"


@dataclass(frozen=True)
class FieldEq(BasePred):
    field: str
    value: str

    def __str__(self) -> str:
        return f'{self.field}=="{self.value}"'


@dataclass(frozen=True)
class Neg:
    base: BasePred

    def __str__(self) -> str:
        return f"!{self.base}"


Predicate = Union[BasePred, Neg]


def negate_pred(q: Predicate) -> Predicate:
    return q.base if isinstance(q, Neg) else Neg(q)


def pred_base(q: Predicate) -> BasePred:
    return q.base if isinstance(q, Neg) else q


# --- predicate maps -------------------------------------------------------


@dataclass(frozen=True)
class PEmpty:
    def __str__(self) -> str:
        return "{}"


@dataclass(frozen=True)
class PSingle:
    name: str
    pred: Predicate

    def __str__(self) -> str:
        return f"{{{self.name} -> {self.pred}}}"


@dataclass(frozen=True)
class PAnd:
    left: "PredMap"
    right: "PredMap"

    def __str__(self) -> str:
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class POr:
    left: "PredMap"
    right: "PredMap"

    def __str__(self) -> str:
        return f"({self.left} or {self.right})"


@dataclass(frozen=True)
class PNot:
    inner: "PredMap"

    def __str__(self) -> str:
        return f"not {self.inner}"


@dataclass(frozen=True)
class PExclude:
    inner: "PredMap"
    effect: Effect

    def __str__(self) -> str:
        return f"({self.inner} \\ {self.effect})"


PredMap = Union[PEmpty, PSingle, PAnd, POr, PNot, PExclude]
P_EMPTY = PEmpty()


def exclude(p: PredMap, e: Effect) -> PredMap:
    return p if isinstance(e, EmptyEffect) else PExclude(p, e)


def negate_predmap(p: PredMap) -> PredMap:
    """Push a negation through ``p``; the result never contains PNot."""
    if isinstance(p, PEmpty):
        return p
    if isinstance(p, PSingle):
        return PSingle(p.name, negate_pred(p.pred))
    if isinstance(p, PAnd):
        return POr(negate_predmap(p.left), negate_predmap(p.right))
    if isinstance(p, POr):
        return PAnd(negate_predmap(p.left), negate_predmap(p.right))
    if isinstance(p, PNot):
        return eliminate_not(p.inner)
    if isinstance(p, PExclude):
        return PExclude(negate_predmap(p.inner), p.effect)
    raise TypeError(p)


def eliminate_not(p: PredMap) -> PredMap:
    """Rewrite ``p`` into an equivalent PNot-free predicate map."""
    if isinstance(p, (PEmpty, PSingle)):
        return p
    if isinstance(p, PAnd):
        return PAnd(eliminate_not(p.left), eliminate_not(p.right))
    if isinstance(p, POr):
        return POr(eliminate_not(p.left), eliminate_not(p.right))
    if isinstance(p, PNot):
        return negate_predmap(p.inner)
    if isinstance(p, PExclude):
        return PExclude(eliminate_not(p.inner), p.effect)
    raise TypeError(p)


def contains_not(p: PredMap) -> bool:
    if isinstance(p, PNot):
        return True
    if isinstance(p, (PAnd, POr)):
        return contains_not(p.left) or contains_not(p.right)
    if isinstance(p, PExclude):
        return contains_not(p.inner)
    return False


# --- uses and constraints -------------------------------------------------


@dataclass(frozen=True)
class ToVar:
    var: TypeVar
    span: Span | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return str(self.var)


@dataclass(frozen=True)
class CallUse:
    args: tuple[Type, ...]
    effect: EffectVar
    ret: TypeVar
    span: Span | None = None

    def __str__(self) -> str:
        args = ", ".join(str(a) for a in self.args)
        return f"Call({args}; {self.effect} -> {self.ret})"


@dataclass(frozen=True)
class GetUse:
    field: str
    var: TypeVar
    span: Span | None = None

    def __str__(self) -> str:
        return f"Get({self.field}, {self.var})"


@dataclass(frozen=True)
class SetUse:
    field: str
    type: Type
    span: Span | None = None

    def __str__(self) -> str:
        return f"Set({self.field}, {self.type})"


@dataclass(frozen=True)
class PredUse:
    pred: Predicate
    var: TypeVar
    span: Span | None = None

    def __str__(self) -> str:
        return f"Pred({self.pred}, {self.var})"


@dataclass(frozen=True)
class PlusLeft:
    """Left operand of ``+``; checks the operand kind, then forwards to the right."""

    other: Type
    ret: TypeVar
    span: Span | None = None

    def __str__(self) -> str:
        return f"PlusL({self.other}, {self.ret})"


@dataclass(frozen=True)
class PlusRight:
    kind: str
    ret: TypeVar
    span: Span | None = None

    def __str__(self) -> str:
        return f"PlusR({self.kind}, {self.ret})"


@dataclass(frozen=True)
class AnnotUse:
    annotation: object  # annotations.Annotation; kept loose to avoid an import cycle
    span: Span | None = None

    def __str__(self) -> str:
        return f"Annot({self.annotation})"


@dataclass(frozen=True)
class ToEVar:
    var: EffectVar

    def __str__(self) -> str:
        return str(self.var)


@dataclass(frozen=True)
class HavocEntry:
    name: str
    specific: Type
    general: Type


@dataclass(frozen=True)
class HavocUse:
    """``kind`` is "call" for widened snapshots (entries ⟨β;α⟩) or "refine" (entries ⟨β;τ⟩)."""

    entries: tuple[HavocEntry, ...]
    kind: str = "call"
    span: Span | None = None

    def lookup(self, name: str) -> HavocEntry | None:
        for e in self.entries:
            if e.name == name:
                return e
        return None

    def __str__(self) -> str:
        inner = ", ".join(f"{e.name}:<{e.specific};{e.general}>" for e in self.entries)
        return f"Havoc[{self.kind}]({inner})"


TypeUse = Union[ToVar, CallUse, GetUse, SetUse, PredUse, PlusLeft, PlusRight, AnnotUse]
EffectUse = Union[ToEVar, HavocUse]
TYPE_USES = (ToVar, CallUse, GetUse, SetUse, PredUse, PlusLeft, PlusRight, AnnotUse)
EFFECT_USES = (ToEVar, HavocUse)


@dataclass(frozen=True)
class Flow:
    """A constraint ``lhs <= use``."""

    lhs: Type | Effect
    use: TypeUse | EffectUse

    def __str__(self) -> str:
        return f"{self.lhs} <= {self.use}"


# --- environments ---------------------------------------------------------


class EnvError(Exception):
    pass


class DomainMismatch(EnvError):
    pass


class GeneralVarMismatch(EnvError):
    pass


@dataclass(frozen=True)
class Entry:
    specific: Type
    general: TypeVar


class Env:
    """An ordered, persistent mapping from identifiers to ⟨specific; general⟩ entries."""

    __slots__ = ("_entries",)

    def __init__(self, entries: dict[str, Entry] | Iterable[tuple[str, Entry]] = ()) -> None:
        self._entries = dict(entries)

    def get(self, name: str) -> Entry | None:
        return self._entries.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def items(self) -> Iterable[tuple[str, Entry]]:
        return self._entries.items()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Env) and self._entries == other._entries

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}: <{e.specific}; {e.general}>" for n, e in self._entries.items())
        return "Env{" + inner + "}"

    def extend(self, name: str, entry: Entry) -> Env:
        if name in self._entries:
            raise EnvError(f"extension of already-bound {name}")
        out = Env(self._entries)
        out._entries[name] = entry
        return out

    def update(self, name: str, specific: Type) -> Env:
        old = self._entries.get(name)
        if old is None:
            raise EnvError(f"update of unbound {name}")
        out = Env(self._entries)
        out._entries[name] = Entry(specific, old.general)
        return out

    def map(self, fn) -> Env:
        return Env((n, fn(n, e)) for n, e in self._entries.items())


def erase_env(env: Env) -> Env:
    return env.map(lambda _n, e: Entry(e.general, e.general))


def join_env(a: Env, b: Env) -> Env:
    if set(a) != set(b):
        raise DomainMismatch(f"{sorted(set(a) ^ set(b))}")
    out = {}
    for name, ea in a.items():
        eb = b.get(name)
        if ea.general != eb.general:
            raise GeneralVarMismatch(name)
        spec = ea.specific if ea.specific == eb.specific else Join(ea.specific, eb.specific)
        out[name] = Entry(spec, ea.general)
    return Env(out)


# --- polarity -------------------------------------------------------------


@dataclass(frozen=True)
class PolarityContext:
    """A literal with one hole, named by a path of child indices; always positive.

    Path steps are ("field", name), ("ret",) or ("param", i); a path through an
    odd number of parameter positions is negative and cannot be constructed.
    """

    lit: TypeLit
    path: tuple[tuple, ...]

    def __post_init__(self) -> None:
        if path_polarity(self.path) != "+":
            raise ValueError("only positive contexts are constructible")

    def fill(self, t: Type) -> TypeLit:
        return _fill(self.lit, self.path, t)


def path_polarity(path: tuple[tuple, ...]) -> str:
    flips = sum(1 for step in path if step[0] == "param")
    return "+" if flips % 2 == 0 else "-"


def holes(t: Type, path: tuple = ()) -> Iterator[tuple[tuple, TypeVar, str]]:
    """Every type-variable leaf in ``t`` with its path and polarity (Join is transparent)."""
    if isinstance(t, TypeVar):
        yield path, t, path_polarity(path)
    elif isinstance(t, Join):
        yield from holes(t.left, path + (("join", 0),))
        yield from holes(t.right, path + (("join", 1),))
    elif isinstance(t, RecordT):
        for name, ft in t.fields:
            yield from holes(ft, path + (("field", name),))
    elif isinstance(t, ArrowT):
        for i, p in enumerate(t.params):
            yield from holes(p, path + (("param", i),))
        yield from holes(t.ret, path + (("ret",),))


def positive_contexts(lit: TypeLit, var: TypeVar) -> list[PolarityContext]:
    return [PolarityContext(lit, p) for p, v, pol in holes(lit) if v == var and pol == "+"]


def _fill(t: Type, path: tuple, filler: Type) -> Type:
    if not path:
        return filler
    step, rest = path[0], path[1:]
    if step[0] == "join":
        if step[1] == 0:
            return Join(_fill(t.left, rest, filler), t.right)
        return Join(t.left, _fill(t.right, rest, filler))
    if step[0] == "field":
        return t.replace(step[1], _fill(t.get(step[1]), rest, filler))
    if step[0] == "ret":
        return ArrowT(t.params, t.effect, _fill(t.ret, rest, filler), t.span)
    if step[0] == "param":
        params = list(t.params)
        params[step[1]] = _fill(params[step[1]], rest, filler)
        return ArrowT(tuple(params), t.effect, t.ret, t.span)
    raise ValueError(step)


def type_vars(t: Type) -> Iterator[TypeVar]:
    for _p, v, _pol in holes(t):
        yield v
