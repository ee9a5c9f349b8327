"""Long-lived checking state and minimal rechecking on file changes.

After a change, the candidate set is the changed files, their direct
dependents (files whose resolution probes mention a changed path) and the
indirect dependents of those.  Candidates are then visited component by
component in dependency order; a component is skipped when none of its files
changed, their module references resolve as before, and no signature it
depends on changed hash in this wave.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .checker import CheckResult, FileResult, ScannedFile, check_project, check_unit, components, rescan, scan_file
from .modules import FileSystemView


@dataclass(frozen=True)
class ChangeSet:
    added: frozenset = frozenset()
    modified: frozenset = frozenset()
    deleted: frozenset = frozenset()

    @classmethod
    def of(cls, added=(), modified=(), deleted=()) -> "ChangeSet":
        return cls(frozenset(added), frozenset(modified), frozenset(deleted))

    @classmethod
    def from_json(cls, data: dict) -> "ChangeSet":
        return cls.of(data.get("added", ()), data.get("modified", ()), data.get("deleted", ()))

    def paths(self) -> frozenset:
        return self.added | self.modified | self.deleted


@dataclass
class ServerState:
    fs: FileSystemView
    scans: dict[str, ScannedFile] = field(default_factory=dict)
    results: dict[str, FileResult] = field(default_factory=dict)
    units: dict[str, tuple] = field(default_factory=dict)  # file -> its component
    refinements: bool = True

    def check_result(self) -> CheckResult:
        return CheckResult(dict(sorted(self.results.items())), dict(self.scans))

    def errors(self) -> list:
        return self.check_result().errors()

    def dumps(self) -> str:
        return self.check_result().dumps()

    def hashes(self) -> dict[str, int]:
        return self.check_result().hashes()

    def status_json(self) -> dict:
        per_file: dict[str, list] = {}
        for e in self.errors():
            per_file.setdefault(e.file, []).append(e.to_json())
        return {"schema": "1", "error_count": sum(len(v) for v in per_file.values()), "files": per_file}

    def snapshot(self) -> str:
        """Errors and signature hashes: what must match a cold check."""
        return json.dumps({"errors": self.check_result().to_json(), "hashes": self.hashes()}, sort_keys=True)


def init_server(fs: FileSystemView, workers: int = 1, refinements: bool = True) -> ServerState:
    res = check_project(fs, workers=workers, refinements=refinements)
    st = ServerState(fs, dict(res.scans), dict(res.results), refinements=refinements)
    comps, _ = components(st.scans)
    st.units = {f: c for c in comps for f in c}
    return st


def dependents(st: ServerState, f: str) -> tuple[set, set]:
    """Direct dependents probe ``f``; indirect ones depend on those transitively."""
    direct = {g for g, s in st.scans.items() if g != f and f in s.probes}
    return direct, _closure(st, direct) - direct - {f}


def _closure(st: ServerState, start: set) -> set:
    importers: dict[str, set] = {}
    for g, s in st.scans.items():
        for d in s.dep_files():
            importers.setdefault(d, set()).add(g)
    seen = set(start)
    work = list(start)
    while work:
        for g in importers.get(work.pop(), ()):
            if g not in seen:
                seen.add(g)
                work.append(g)
    return seen


def apply_changes(st: ServerState, ch: ChangeSet) -> tuple[ServerState, set]:
    """Bring ``st`` up to date with ``st.fs`` after the changes ``ch``."""
    changed = ch.paths()
    for f in ch.deleted:
        st.scans.pop(f, None)
        st.results.pop(f, None)
    for f in sorted(ch.added | ch.modified):
        if f in st.fs.files:
            st.scans[f] = scan_file(st.fs, f)
    direct = {g for g, s in st.scans.items() if g not in changed and changed & set(s.probes)}
    moved = set()
    for g in sorted(direct):
        old = st.scans[g]
        st.scans[g] = rescan(st.fs, old)
        if st.scans[g].deps != old.deps:
            moved.add(g)
    own = ({f for f in changed if f in st.scans}) | moved
    candidates = _closure(st, own | direct)
    comps, _ = components(st.scans)
    new_units = {f: c for c in comps for f in c}
    dirty_sigs = set(ch.deleted) | {f for f in changed if f not in st.results}
    rechecked: set = set()
    for comp in comps:
        if not candidates & set(comp):
            continue
        must = bool(own & set(comp)) or any(st.units.get(f) != comp for f in comp)
        if not must:
            deps = {d for f in comp for d in st.scans[f].dep_files() if d not in comp}
            must = bool(deps & dirty_sigs)
        if not must:
            continue
        sigs = {d: st.results[d].signature for f in comp for d in st.scans[f].dep_files() if d not in comp}
        res = check_unit([st.scans[f] for f in comp], sigs, st.refinements)
        for f, r in res.items():
            old = st.results.get(f)
            if old is None or old.signature.hash != r.signature.hash:
                dirty_sigs.add(f)
            st.results[f] = r
            rechecked.add(f)
    st.units = new_units
    return st, rechecked
