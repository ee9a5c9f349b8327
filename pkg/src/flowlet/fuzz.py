"""Random FlowCore programs for differential and safety testing.

Programs are generated against intended value shapes so that a useful share of
them type-check: calls go to function variables with the right arity, field
reads go to records, nullable and tagged-union variables are usually guarded.
A configurable amount of noise (unguarded uses, havocking closures, wrong
arities) keeps inconsistent programs in the mix.

Two scoping rules keep the generator inside the fragment where hoisted
variables are never observed before initialization: declarations only occur
directly in a body's statement sequence, and every reference names a variable
declared earlier in program order.
"""

from __future__ import annotations

import posixpath
import random
from dataclasses import dataclass, field
from typing import Optional

from .syntax import (
    And,
    Arrow,
    Assign,
    BinOp,
    Call,
    Const,
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
    Skip,
    Stmt,
    Var,
    VarDecl,
    pretty,
    seq,
)
from .types import FieldEq, IsNull, IsUndefined, Nullish, TypeofIs


@dataclass(frozen=True)
class Shape:
    kind: str  # num, str, bool, null, undef, rec, fun, union
    tag: str = ""
    fields: tuple = ()
    params: tuple = ()
    ret: Optional["Shape"] = None
    members: tuple = ()

    def field(self, name: str) -> Optional["Shape"]:
        for f, s in self.fields:
            if f == name:
                return s
        return None


NUM = Shape("num")
STR = Shape("str")
BOOL = Shape("bool")
NULL = Shape("null")
UNDEF = Shape("undef")
REC_A = Shape("rec", "a", (("f", NUM), ("kind", STR)))
REC_B = Shape("rec", "b", (("g", STR), ("kind", STR)))
REC_C = Shape("rec", "c", (("kind", STR), ("next", Shape("union", members=(REC_A, NULL)))))
U_AB = Shape("union", members=(REC_A, REC_B))
MAYBE_A = Shape("union", members=(REC_A, NULL))
OPT_A = Shape("union", members=(REC_A, UNDEF))
F_NUM = Shape("fun", params=(NUM,), ret=NUM)
F_A = Shape("fun", params=(MAYBE_A,), ret=NUM)
F_AB = Shape("fun", params=(U_AB,), ret=STR)
F_UNIT = Shape("fun", params=(), ret=UNDEF)
F_MK = Shape("fun", params=(NUM,), ret=REC_A)

VAR_SHAPES = [NUM, STR, REC_A, REC_B, REC_C, U_AB, MAYBE_A, OPT_A, F_NUM, F_A, F_AB, F_UNIT, F_MK, BOOL]


@dataclass
class Scope:
    vars: list = field(default_factory=list)  # (name, shape)

    def child(self) -> "Scope":
        return Scope(list(self.vars))

    def of(self, pred) -> list:
        return [(n, s) for n, s in self.vars if pred(s)]


class ProgramGenerator:
    def __init__(self, seed: int, noise: float = 0.12, size: int = 6, max_depth: int = 3) -> None:
        self.rng = random.Random(seed)
        self.noise = noise
        self.size = size
        self.max_depth = max_depth
        self.counter = 0

    def fresh(self, base: str) -> str:
        self.counter += 1
        return f"{base}{self.counter}"

    def chance(self, p: float) -> bool:
        return self.rng.random() < p

    # -- programs

    def program(self) -> Program:
        scope = Scope()
        stmts = self.body(scope, self.rng.randint(2, self.size), depth=0)
        return Program(tuple(stmts), "<gen>")

    def body(self, scope: Scope, n: int, depth: int) -> list[Stmt]:
        out = []
        for _ in range(n):
            out.append(self.stmt(scope, depth, allow_decl=True))
        return out

    def stmt(self, scope: Scope, depth: int, allow_decl: bool) -> Stmt:
        r = self.rng.random()
        if allow_decl and (r < 0.4 or not scope.vars):
            shape = self.rng.choice(VAR_SHAPES)
            value = self.expr(shape, scope, depth)
            name = self.fresh("v")
            scope.vars.append((name, shape))
            return VarDecl(name, value)
        if r < 0.55:
            return self.use_stmt(scope, depth)
        if r < 0.7:
            target = self.pick_var(scope, lambda s: s.kind != "fun")
            if target is not None:
                name, shape = target
                return ExprStmt(Assign(name, self.expr(self.member(shape), scope, depth)))
        if r < 0.8:
            rec = self.pick_var(scope, lambda s: s.kind == "rec")
            if rec is not None:
                fname, fshape = self.rng.choice(rec[1].fields)
                if fname != "kind":
                    return ExprStmt(FieldWrite(Var(rec[0]), fname, self.expr(fshape, scope, depth)))
        if r < 0.92 and depth < self.max_depth:
            cond = self.cond(scope, depth)
            inner = scope.child()
            then = seq([self.stmt(inner, depth + 1, False) for _ in range(self.rng.randint(1, 2))])
            orelse = seq([self.stmt(scope.child(), depth + 1, False)]) if self.chance(0.4) else Skip()
            return If(cond, then, orelse)
        return ExprStmt(self.expr(self.rng.choice([NUM, STR, BOOL]), scope, depth))

    def use_stmt(self, scope: Scope, depth: int) -> Stmt:
        """A statement that consumes a variable: a call, a field read, or a guarded read."""
        cands = scope.of(lambda s: s.kind in ("fun", "rec", "union"))
        if not cands:
            return ExprStmt(self.expr(NUM, scope, depth))
        name, shape = self.rng.choice(cands)
        if shape.kind == "fun":
            return ExprStmt(self.call(name, shape, scope, depth))
        if shape.kind == "rec":
            fname, _ = self.rng.choice(shape.fields)
            return ExprStmt(FieldRead(Var(name), fname))
        return self.guarded_use(name, shape, scope, depth)

    def guarded_use(self, name: str, shape: Shape, scope: Scope, depth: int) -> Stmt:
        recs = [m for m in shape.members if m.kind == "rec"]
        target = self.rng.choice(recs)
        fname = self.rng.choice([f for f, _ in target.fields if f != "kind"] or ["kind"])
        read = ExprStmt(FieldRead(Var(name), fname))
        if self.chance(self.noise):
            return read  # unguarded
        if len(recs) == 2:
            guard: Expr = PredTest(name, FieldEq("kind", target.tag))
            if self.chance(0.3):
                guard = Not(PredTest(name, FieldEq("kind", [m for m in recs if m is not target][0].tag)))
        else:
            guard = self.rng.choice([
                Var(name),
                Not(PredTest(name, Nullish())),
                And(PredTest(name, TypeofIs("object")), Not(PredTest(name, IsNull()))),
                Not(PredTest(name, IsUndefined() if any(m.kind == "undef" for m in shape.members) else IsNull())),
            ])
        body = [read]
        if self.chance(0.3):
            # an intervening call may invalidate the refinement
            fn = self.pick_var(scope, lambda s: s.kind == "fun" and not s.params)
            if fn is not None:
                body.insert(0, ExprStmt(Call(Var(fn[0]), ())))
        if self.chance(0.3) and depth < self.max_depth:
            body.append(ExprStmt(Assign(name, self.expr(self.rng.choice(shape.members), scope, depth + 1))))
        return If(guard, seq(body), Skip())

    # -- expressions

    def member(self, shape: Shape) -> Shape:
        return self.rng.choice(shape.members) if shape.kind == "union" else shape

    def pick_var(self, scope: Scope, pred):
        cands = scope.of(pred)
        return self.rng.choice(cands) if cands else None

    def call(self, name: str, shape: Shape, scope: Scope, depth: int) -> Expr:
        args = [self.expr(p, scope, depth + 1) for p in shape.params]
        if self.chance(self.noise / 3):
            args = args[:-1] if args else [Const("number", 1)]
        return Call(Var(name), tuple(args))

    def expr(self, shape: Shape, scope: Scope, depth: int) -> Expr:
        if self.chance(self.noise / 4):
            shape = self.rng.choice(VAR_SHAPES)  # deliberately off-shape
        same = scope.of(lambda s: s == shape)
        if same and self.chance(0.35):
            return Var(self.rng.choice(same)[0])
        deep = depth >= self.max_depth
        if shape.kind == "num":
            r = self.rng.random()
            if r < 0.5 or deep:
                return Const("number", self.rng.choice([0, 1, 2, 7]))
            if r < 0.7:
                return BinOp("+", self.expr(NUM, scope, depth + 1), self.expr(NUM, scope, depth + 1))
            fn = self.pick_var(scope, lambda s: s.kind == "fun" and s.ret == NUM)
            if fn is not None:
                return self.call(fn[0], fn[1], scope, depth)
            rec = self.pick_var(scope, lambda s: s == REC_A)
            if rec is not None:
                return FieldRead(Var(rec[0]), "f")
            return Const("number", 3)
        if shape.kind == "str":
            r = self.rng.random()
            if r < 0.5 or deep:
                return Const("string", self.rng.choice(["a", "b", "", "s"]))
            if r < 0.7:
                return BinOp("+", self.expr(STR, scope, depth + 1), Const("string", "x"))
            rec = self.pick_var(scope, lambda s: s.kind == "rec" or s == U_AB)
            if rec is not None:
                return FieldRead(Var(rec[0]), "kind")
            return Const("string", "t")
        if shape.kind == "bool":
            var = self.pick_var(scope, lambda s: True)
            if var is None or deep or self.chance(0.3):
                return Const("boolean", self.chance(0.5))
            return self.cond(scope, depth)
        if shape.kind == "null":
            return Const("null")
        if shape.kind == "undef":
            if self.chance(0.7) or deep:
                return Const("undefined")
            fn = self.pick_var(scope, lambda s: s.kind == "fun" and s.ret == UNDEF)
            return self.call(fn[0], fn[1], scope, depth) if fn else Const("undefined")
        if shape.kind == "rec":
            fn = self.pick_var(scope, lambda s: s.kind == "fun" and s.ret == shape)
            if fn is not None and self.chance(0.3) and not deep:
                return self.call(fn[0], fn[1], scope, depth)
            fields = []
            for fname, fshape in shape.fields:
                if fname == "kind":
                    fields.append((fname, Const("string", shape.tag)))
                else:
                    fields.append((fname, self.expr(fshape, scope, depth + 1) if not deep else self.leaf(fshape)))
            self.rng.shuffle(fields)
            return RecordLit(tuple(fields))
        if shape.kind == "union":
            opt = [m for m in shape.members if m.kind == "rec"]
            r = self.rng.random()
            if r < 0.2 and not deep:
                nullable = self.pick_var(scope, lambda s: s == shape)
                if nullable is not None and opt:
                    return Or(Var(nullable[0]), self.expr(opt[0], scope, depth + 1))
            return self.expr(self.rng.choice(shape.members), scope, depth)
        if shape.kind == "fun":
            return self.arrow(shape, scope, depth)
        raise ValueError(shape)

    def leaf(self, shape: Shape) -> Expr:
        return {"num": Const("number", 1), "str": Const("string", "z"), "bool": Const("boolean", True),
                "null": Const("null"), "undef": Const("undefined")}.get(shape.kind, Const("null"))

    def arrow(self, shape: Shape, scope: Scope, depth: int) -> Expr:
        inner = scope.child()
        params = []
        for p in shape.params:
            name = self.fresh("p")
            params.append(name)
            inner.vars.append((name, p))
        body: list[Stmt] = []
        if depth < self.max_depth:
            n = self.rng.randint(0, 2)
            for _ in range(n):
                if self.chance(0.25):
                    # assign an outer variable: gives the closure an effect
                    target = self.pick_var(scope, lambda s: s.kind not in ("fun",))
                    if target is not None:
                        value = self.expr(self.member(target[1]), inner, depth + 1)
                        if self.chance(self.noise):
                            value = Const("null")
                        body.append(ExprStmt(Assign(target[0], value)))
                        continue
                body.append(self.stmt(inner, depth + 1, allow_decl=True))
        ret = self.expr(shape.ret, inner, depth + 1)
        return Arrow(tuple(params), seq(body), ret)

    def cond(self, scope: Scope, depth: int) -> Expr:
        var = self.pick_var(scope, lambda s: True)
        if var is None:
            return Const("boolean", True)
        name, shape = var
        r = self.rng.random()
        if r < 0.2:
            base: Expr = Var(name)
        elif r < 0.35:
            base = PredTest(name, Nullish())
        elif r < 0.5:
            base = PredTest(name, self.rng.choice([IsNull(), IsUndefined()]))
        elif r < 0.65:
            base = PredTest(name, TypeofIs(self.rng.choice(["number", "string", "object", "function", "undefined"])))
        elif r < 0.8:
            base = PredTest(name, FieldEq("kind", self.rng.choice(["a", "b", "c"])))
        elif r < 0.9 and depth < self.max_depth:
            base = And(self.cond(scope, depth + 1), self.cond(scope, depth + 1))
        elif depth < self.max_depth:
            base = Or(self.cond(scope, depth + 1), self.cond(scope, depth + 1))
        else:
            base = Var(name)
        return Not(base) if self.chance(0.3) else base


def random_program(seed: int, noise: float = 0.12, size: int = 6, max_depth: int = 3) -> Program:
    return ProgramGenerator(seed, noise, size, max_depth).program()


def random_source(seed: int, **kw) -> str:
    return pretty(random_program(seed, **kw))


# --- multi-file projects --------------------------------------------------


@dataclass
class ModuleSpec:
    """What a generated module imports and exports; mutated by change events."""

    deps: list  # file ids
    val_kind: str = "num"  # the exported ``val`` field: num or str
    body: int = 0  # varies local code without touching the export
    broken: bool = False  # call a non-function, giving the file a type error


def ref_between(importer: str, target: str) -> str:
    rel = posixpath.relpath(target, posixpath.dirname(importer) or ".")
    if rel.endswith(".fc"):
        rel = rel[:-3]
    return rel if rel.startswith("../") else "./" + rel


def module_source(file: str, spec: ModuleSpec) -> str:
    lines = []
    for i, d in enumerate(spec.deps):
        lines.append(f'var d{i} = require("{ref_between(file, d)}");')
    lines.append(f"var local = {spec.body};")
    lines.append(f"var bump = (n: number) => n + {spec.body % 3 + 1};")
    for i, d in enumerate(spec.deps):
        lines.append(f"var r{i} = d{i}.mk(local);")
        lines.append(f"var k{i} = r{i}.kind;")
        lines.append(f"var s{i} = d{i}.val + 1;")
        lines.append(f"if (d{i}.tag === \"num\") {{ bump(d{i}.num); }}")
    if spec.broken:
        lines.append("local(1);")
    val = "local + 1" if spec.val_kind == "num" else '"v"'
    parts = [f'tag: "{spec.val_kind}"', f"val: {val}", 'mk: (n: number) => ({ kind: "m", n: n })']
    if spec.val_kind == "num":
        parts.append("num: local + 0")
    else:
        parts.append("num: 0")
    if spec.deps:
        parts.append("up: d0.val")
    lines.append("module.exports = { " + ", ".join(parts) + " };")
    return "\n".join(lines) + "\n"


def random_dag(seed: int, n: int, max_deps: int = 3, dirs: int = 3) -> dict[str, ModuleSpec]:
    """A random acyclic project: file i may import files with smaller indices."""
    rng = random.Random(seed)
    names = [f"p{rng.randrange(dirs)}/m{i}.fc" if dirs > 1 else f"m{i}.fc" for i in range(n)]
    specs = {}
    for i, name in enumerate(names):
        k = rng.randint(0, min(max_deps, i))
        deps = sorted(rng.sample(names[:i], k)) if k else []
        specs[name] = ModuleSpec(deps, rng.choice(["num", "num", "str"]), rng.randrange(100), rng.random() < 0.05)
    return specs


def render_project(specs: dict[str, ModuleSpec]) -> dict[str, str]:
    return {f: module_source(f, s) for f, s in sorted(specs.items())}


def random_diamond(seed: int) -> dict[str, str]:
    """A imports B and C, both of which import D; exports mix values from every path."""
    rng = random.Random(seed)
    d_val = rng.choice(['"d"', "1", '{ kind: "d", n: 2 }', "(n: number) => n"])
    d_extra = rng.choice(["null", '"e"', "3"])
    files = {
        "d.fc": f"var v = {d_val};\nmodule.exports = {{ v: v, w: {d_extra} }};\n",
    }
    for arm in ("b", "c"):
        pick = rng.choice(["d.v", "d.w", "d"])
        files[f"{arm}.fc"] = (
            'var d = require("./d");\n'
            f'var own = {rng.choice(["1", chr(34) + arm + chr(34), "{ kind: " + chr(34) + arm + chr(34) + " }"])};\n'
            f"module.exports = {{ from_d: {pick}, own: own, d: d }};\n"
        )
    files["a.fc"] = (
        'var b = require("./b");\nvar c = require("./c");\n'
        f"var x = {rng.choice(['b.from_d || c.from_d', 'b.own || c.own', 'b.d'])};\n"
        "module.exports = { x: x, b: b.own, c: c.from_d, dd: c.d };\n"
    )
    return files


def change_sequence(seed: int, specs: dict[str, ModuleSpec], events: int):
    """Yield (ChangeSet-like dict, new specs) pairs: body edits, signature edits, adds, deletes."""
    rng = random.Random(seed)
    specs = {f: ModuleSpec(list(s.deps), s.val_kind, s.body, s.broken) for f, s in specs.items()}
    counter = len(specs)
    for _ in range(events):
        r = rng.random()
        files = sorted(specs)
        if r < 0.35 and files:
            f = rng.choice(files)
            specs[f].body += 1
            yield {"modified": [f]}, specs
        elif r < 0.6 and files:
            f = rng.choice(files)
            specs[f].val_kind = "str" if specs[f].val_kind == "num" else "num"
            yield {"modified": [f]}, specs
        elif r < 0.7 and files:
            f = rng.choice(files)
            specs[f].broken = not specs[f].broken
            yield {"modified": [f]}, specs
        elif r < 0.85 or not files:
            name = f"p{rng.randrange(3)}/m{counter}.fc"
            counter += 1
            k = rng.randint(0, min(2, len(files)))
            specs[name] = ModuleSpec(sorted(rng.sample(files, k)), "num", 0)
            yield {"added": [name]}, specs
        else:
            f = rng.choice(files)
            del specs[f]
            yield {"deleted": [f]}, specs
