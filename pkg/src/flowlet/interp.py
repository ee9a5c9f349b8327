"""Small-step operational semantics for FlowCore.

A configuration is a heap, a stack of frames and a control item.  Each frame
owns a store (identifier -> location) and the evaluation contexts still to be
resumed in that function.  ``step`` applies exactly one reduction; ``run``
iterates it under a fuel budget.  Closures keep a reference to the store they
were created in, and variables live in heap cells, so assignments through a
closure are visible to every other holder of the location.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .spans import Span
from .syntax import (
    And,
    Arrow,
    Assign,
    BinOp,
    Call,
    Const,
    Export,
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
    VarDecl,
    Var,
)
from .rename import hoisted_locals
from .types import Falsy, FieldEq, IsNull, IsUndefined, Neg, Nullish, Truthy, TypeofIs


class _Special:
    def __init__(self, name: str) -> None:
        self.name = name

    def __repr__(self) -> str:
        return self.name


UNDEFINED = _Special("undefined")
NULL = _Special("null")
_DONE = _Special("<done>")


@dataclass(frozen=True)
class Loc:
    addr: int


@dataclass
class Closure:
    store: dict
    params: tuple[str, ...]
    body: object
    ret: object


@dataclass
class RecordVal:
    fields: dict


# --- outcomes -------------------------------------------------------------


@dataclass(frozen=True)
class Value:
    value: object  # a rendered Python value

    def __str__(self) -> str:
        return f"Value({render_py(self.value)})"


@dataclass(frozen=True)
class Stuck:
    kind: str
    span: Optional[Span]
    detail: str = ""

    def __str__(self) -> str:
        return f"Stuck({self.kind} at {self.span}{': ' + self.detail if self.detail else ''})"


@dataclass(frozen=True)
class OutOfFuel:
    steps: int

    def __str__(self) -> str:
        return f"OutOfFuel({self.steps})"


Outcome = Union[Value, Stuck, OutOfFuel]


def render_py(v) -> str:
    if v is UNDEFINED or v is NULL:
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v + '"'
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {render_py(x)}" for k, x in v.items()) + "}"
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


# --- predicates -----------------------------------------------------------


def truthy(v) -> bool:
    if v is UNDEFINED or v is NULL:
        return False
    if isinstance(v, bool):
        return v
    if isinstance(v, (int, float)):
        return not (v == 0 or (isinstance(v, float) and math.isnan(v)))
    if isinstance(v, str):
        return v != ""
    return True


def is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def typeof(hv) -> str:
    if hv is UNDEFINED:
        return "undefined"
    if hv is NULL or isinstance(hv, RecordVal):
        return "object"
    if isinstance(hv, bool):
        return "boolean"
    if is_number(hv):
        return "number"
    if isinstance(hv, str):
        return "string"
    if isinstance(hv, Closure):
        return "function"
    raise TypeError(hv)


def eval_base_pred(hv, p) -> bool:
    """Runtime truth of a (possibly negated) base predicate on a dereferenced heap value."""
    if isinstance(p, Neg):
        return not eval_base_pred(hv, p.base)
    if isinstance(p, Truthy):
        return truthy(hv)
    if isinstance(p, Falsy):
        return not truthy(hv)
    if isinstance(p, Nullish):
        return hv is NULL or hv is UNDEFINED
    if isinstance(p, IsNull):
        return hv is NULL
    if isinstance(p, IsUndefined):
        return hv is UNDEFINED
    if isinstance(p, TypeofIs):
        return typeof(hv) == p.kind
    if isinstance(p, FieldEq):
        if not isinstance(hv, RecordVal) or p.field not in hv.fields:
            return False
        v = hv.fields[p.field]
        return isinstance(v, str) and v == p.value
    raise TypeError(p)


# --- the machine ----------------------------------------------------------


@dataclass
class Frame:
    store: dict
    konts: list
    kind: str = "call"  # "main", "call" or "module"
    module: Optional[str] = None


@dataclass
class Machine:
    heap: dict = field(default_factory=dict)
    frames: list = field(default_factory=list)
    control: tuple = ()
    last_value: object = UNDEFINED
    next_addr: int = 0
    exports: dict = field(default_factory=dict)
    loader: Optional[Callable[[str, Optional[str]], tuple[str, Program]]] = None
    module_cache: dict = field(default_factory=dict)

    def alloc(self, hv) -> Loc:
        loc = Loc(self.next_addr)
        self.next_addr += 1
        self.heap[loc] = hv
        return loc

    def deref(self, v):
        return self.heap[v] if isinstance(v, Loc) else v

    @property
    def frame(self) -> Frame:
        return self.frames[-1]

    def hoisted_store(self, base: dict, names) -> dict:
        store = dict(base)
        for n in names:
            store[n] = self.alloc(UNDEFINED)
        return store


def load(p: Program, loader=None) -> Machine:
    m = Machine(loader=loader)
    body = p.body
    store = m.hoisted_store({}, hoisted_locals(body))
    m.frames.append(Frame(store, [("halt",)], "main", p.file))
    m.control = ("exec", body)
    return m


def step(m: Machine) -> Optional[Outcome]:
    """Apply one reduction rule.  Returns an Outcome when the run ends."""
    mode, item = m.control
    if mode == "eval":
        return _eval(m, item)
    if mode == "exec":
        return _exec(m, item)
    return _resume(m, item)


def _value(m: Machine, v) -> None:
    m.control = ("value", v)


def _eval(m: Machine, e) -> Optional[Outcome]:
    fr = m.frame
    if isinstance(e, Const):
        _value(m, {"number": e.value, "string": e.value, "boolean": e.value, "null": NULL, "undefined": UNDEFINED}[e.kind])
    elif isinstance(e, Var):
        loc = fr.store.get(e.name)
        if loc is None:
            return Stuck("Unbound", e.span, e.name)
        _value(m, m.heap[loc])
    elif isinstance(e, Assign):
        fr.konts.append(("assign", e.name, e.span))
        m.control = ("eval", e.value)
    elif isinstance(e, Arrow):
        _value(m, m.alloc(Closure(fr.store, e.params, e.body, e.ret)))
    elif isinstance(e, Call):
        fr.konts.append(("callee", e.args, e.span))
        m.control = ("eval", e.callee)
    elif isinstance(e, RecordLit):
        if not e.fields:
            _value(m, m.alloc(RecordVal({})))
        else:
            fr.konts.append(("record", e.fields, [], e.span))
            m.control = ("eval", e.fields[0][1])
    elif isinstance(e, FieldRead):
        fr.konts.append(("read", e.field, e.span))
        m.control = ("eval", e.obj)
    elif isinstance(e, FieldWrite):
        fr.konts.append(("write_obj", e.field, e.value, e.span))
        m.control = ("eval", e.obj)
    elif isinstance(e, PredTest):
        loc = fr.store.get(e.name)
        if loc is None:
            return Stuck("Unbound", e.span, e.name)
        _value(m, eval_base_pred(m.deref(m.heap[loc]), e.pred))
    elif isinstance(e, And):
        fr.konts.append(("and", e.right))
        m.control = ("eval", e.left)
    elif isinstance(e, Or):
        fr.konts.append(("or", e.right))
        m.control = ("eval", e.left)
    elif isinstance(e, Not):
        fr.konts.append(("not",))
        m.control = ("eval", e.inner)
    elif isinstance(e, BinOp):
        fr.konts.append(("plus_l", e.right, e.span))
        m.control = ("eval", e.left)
    elif isinstance(e, Require):
        if m.loader is None:
            return Stuck("Unsupported", e.span, "require without a module loader")
        try:
            file, prog = m.loader(e.ref, fr.module)
        except LookupError as exc:
            return Stuck("UnresolvedModule", e.span, str(exc))
        if file in m.module_cache:
            _value(m, m.module_cache[file])
        else:
            body = prog.body
            store = m.hoisted_store({}, hoisted_locals(body))
            m.module_cache[file] = UNDEFINED  # a cycle observes the partial export
            m.frames.append(Frame(store, [("module_done", file)], "module", file))
            m.control = ("exec", body)
    else:
        raise TypeError(e)
    return None


def _exec(m: Machine, s) -> Optional[Outcome]:
    fr = m.frame
    if isinstance(s, ExprStmt):
        fr.konts.append(("expr_stmt",))
        m.control = ("eval", s.expr)
    elif isinstance(s, VarDecl):
        fr.konts.append(("discard",))
        m.control = ("eval", Assign(s.name, s.value, s.span))
    elif isinstance(s, If):
        fr.konts.append(("if", s.then, s.orelse))
        m.control = ("eval", s.cond)
    elif isinstance(s, Seq):
        fr.konts.append(("seq", s.second))
        m.control = ("exec", s.first)
    elif isinstance(s, Skip):
        _value(m, _DONE)
    elif isinstance(s, Export):
        fr.konts.append(("export",))
        m.control = ("eval", s.expr)
    elif isinstance(s, Return):
        raise ValueError("return statements must be folded into their arrow")
    else:
        raise TypeError(s)
    return None


def _resume(m: Machine, v) -> Optional[Outcome]:
    fr = m.frame
    k = fr.konts.pop()
    tag = k[0]
    if tag == "assign":
        loc = fr.store.get(k[1])
        if loc is None:
            return Stuck("Unbound", k[2], k[1])
        m.heap[loc] = v
        _value(m, v)
    elif tag == "callee":
        args, span = k[1], k[2]
        if args:
            fr.konts.append(("args", v, [], args, span))
            m.control = ("eval", args[0])
        else:
            return _apply(m, v, [], span)
    elif tag == "args":
        fn, done, args, span = k[1], k[2] + [v], k[3], k[4]
        if len(done) < len(args):
            fr.konts.append(("args", fn, done, args, span))
            m.control = ("eval", args[len(done)])
        else:
            return _apply(m, fn, done, span)
    elif tag == "record":
        fields, done, span = k[1], k[2] + [v], k[3]
        if len(done) < len(fields):
            fr.konts.append(("record", fields, done, span))
            m.control = ("eval", fields[len(done)][1])
        else:
            _value(m, m.alloc(RecordVal({f: x for (f, _), x in zip(fields, done)})))
    elif tag == "read":
        hv = m.deref(v)
        if not isinstance(hv, RecordVal) or k[1] not in hv.fields:
            return Stuck("NoSuchField", k[2], f"{k[1]} of {_show(hv)}")
        _value(m, hv.fields[k[1]])
    elif tag == "write_obj":
        fr.konts.append(("write_val", k[1], v, k[3]))
        m.control = ("eval", k[2])
    elif tag == "write_val":
        hv = m.deref(k[2])
        if not isinstance(hv, RecordVal) or k[1] not in hv.fields:
            return Stuck("NoSuchField", k[3], f"{k[1]} of {_show(hv)}")
        hv.fields[k[1]] = v
        _value(m, v)
    elif tag == "and":
        if truthy(m.deref(v)):
            m.control = ("eval", k[1])
        else:
            _value(m, v)
    elif tag == "or":
        if truthy(m.deref(v)):
            _value(m, v)
        else:
            m.control = ("eval", k[1])
    elif tag == "not":
        _value(m, not truthy(m.deref(v)))
    elif tag == "plus_l":
        fr.konts.append(("plus_r", v, k[2]))
        m.control = ("eval", k[1])
    elif tag == "plus_r":
        a, b = k[1], v
        if is_number(a) and is_number(b):
            _value(m, a + b)
        elif isinstance(a, str) and isinstance(b, str):
            _value(m, a + b)
        else:
            return Stuck("BadOperand", k[2], f"{_show(m.deref(a))} + {_show(m.deref(b))}")
    elif tag == "expr_stmt":
        if fr.kind == "main" and len(m.frames) == 1:
            m.last_value = v
        _value(m, _DONE)
    elif tag == "discard":
        _value(m, _DONE)
    elif tag == "if":
        m.control = ("exec", k[1] if truthy(m.deref(v)) else k[2])
    elif tag == "seq":
        m.control = ("exec", k[1])
    elif tag == "export":
        m.exports[fr.module] = v
        _value(m, _DONE)
    elif tag == "body_done":
        fr.konts.append(("return",))
        m.control = ("eval", k[1])
    elif tag == "return":
        m.frames.pop()
        _value(m, v)
    elif tag == "module_done":
        m.frames.pop()
        export = m.exports.get(k[1], UNDEFINED)
        m.module_cache[k[1]] = export
        _value(m, export)
    elif tag == "halt":
        fr.konts.append(k)
        return Value(_render(m, m.last_value))
    else:
        raise ValueError(tag)
    return None


def _apply(m: Machine, fn, args: list, span) -> Optional[Outcome]:
    hv = m.deref(fn)
    if not isinstance(hv, Closure):
        return Stuck("NotAFunction", span, _show(hv))
    if len(args) != len(hv.params):
        return Stuck("ArityMismatch", span, f"expected {len(hv.params)}, got {len(args)}")
    store = dict(hv.store)
    for p, a in zip(hv.params, args):
        store[p] = m.alloc(a)
    for n in hoisted_locals(hv.body):
        if n not in hv.params:
            store[n] = m.alloc(UNDEFINED)
    m.frames.append(Frame(store, [("body_done", hv.ret)], "call", m.frame.module))
    m.control = ("exec", hv.body)
    return None


def _show(hv) -> str:
    if isinstance(hv, RecordVal):
        return "a record"
    if isinstance(hv, Closure):
        return "a function"
    return render_py(hv)


def _render(m: Machine, v, depth: int = 0):
    hv = m.deref(v)
    if isinstance(hv, RecordVal):
        if depth > 8:
            return "{...}"
        return {f: _render(m, x, depth + 1) for f, x in hv.fields.items()}
    if isinstance(hv, Closure):
        return "<function>"
    return hv


def run(m: Machine, fuel: int = 10_000) -> Outcome:
    for _ in range(fuel):
        out = step(m)
        if out is not None:
            return out
    return OutOfFuel(fuel)


def run_program(p: Program, fuel: int = 10_000, loader=None) -> Outcome:
    """Run a (renamed) program until it produces a value, gets stuck, or runs out of fuel."""
    return run(load(p, loader), fuel)


def well_formed(m: Machine) -> bool:
    """Every location reachable from a store or heap value is bound in the heap."""

    def ok(v) -> bool:
        return not isinstance(v, Loc) or v in m.heap

    for fr in m.frames:
        if not all(loc in m.heap for loc in fr.store.values()):
            return False
    for hv in m.heap.values():
        if isinstance(hv, Closure) and not all(loc in m.heap for loc in hv.store.values()):
            return False
        if isinstance(hv, RecordVal) and not all(ok(x) for x in hv.fields.values()):
            return False
        if not ok(hv):
            return False
    return True
