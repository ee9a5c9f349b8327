"""Master/worker map-reduce over files, and the shared results table.

The master owns the accumulator: it asks ``next`` for a bucket whenever a
worker is free, hands the bucket to the worker, and folds each returned
intermediate into the result with ``merge``.  Workers communicate bulk results
only through a ``SharedTable``.
"""

from __future__ import annotations

import pickle
import threading
import zlib
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Optional

DEFAULT_BUCKET = 16
MASTER = "master"


class JobFailed(Exception):
    def __init__(self, items: list, cause: BaseException) -> None:
        super().__init__(f"job failed on {', '.join(map(str, items))}: {cause!r}")
        self.items = items
        self.cause = cause


class SchedulerDeadlock(Exception):
    pass


@dataclass
class TaskSpec:
    job: Callable[[list], Any]
    merge: Callable[[Any, Any], Any]
    neutral: Any
    next: Callable[[], list]
    completed: Optional[Callable[[list], None]] = None  # the master's hook after merging a bucket


class StaticNext:
    """Hand out consecutive buckets of a fixed list."""

    def __init__(self, items: Iterable, bucket: int = DEFAULT_BUCKET) -> None:
        self.items = list(items)
        self.bucket = max(1, bucket)
        self.index = 0

    def __call__(self) -> list:
        out = self.items[self.index : self.index + self.bucket]
        self.index += len(out)
        return out


class DynamicNext:
    """Dispatch items whose dependencies have all completed.

    ``deps`` maps each item to the items it depends on.  ``completed`` is the
    merge-side hook: it decrements the counts of dependents and enqueues the
    ones that reach zero.  Dispatch order is recorded in ``log`` and any
    dispatch of an item with an incomplete dependency in ``violations``.
    """

    def __init__(self, deps: dict, bucket: int = DEFAULT_BUCKET) -> None:
        self.bucket = max(1, bucket)
        self.deps = {k: set(v) for k, v in deps.items()}
        self.counts = {k: len(v) for k, v in self.deps.items()}
        self.dependents: dict = {k: [] for k in self.deps}
        for k, ds in self.deps.items():
            for d in sorted(ds, key=str):
                self.dependents[d].append(k)
        self.worklist = [k for k in self.deps if self.counts[k] == 0]
        self.remaining = len(self.deps)
        self.in_flight = 0
        self.done: set = set()
        self.log: list = []
        self.violations: list = []

    def __call__(self) -> list:
        if not self.worklist:
            if self.in_flight == 0 and self.remaining > 0:
                raise SchedulerDeadlock(f"{self.remaining} items wait on a dependency cycle")
            return []
        out, self.worklist = self.worklist[: self.bucket], self.worklist[self.bucket :]
        for item in out:
            if not self.deps[item] <= self.done:
                self.violations.append(item)
            self.log.append(item)
        self.in_flight += len(out)
        return out

    def completed(self, items: list) -> None:
        for item in items:
            self.done.add(item)
            self.remaining -= 1
            self.in_flight -= 1
            for d in self.dependents[item]:
                self.counts[d] -= 1
                if self.counts[d] == 0:
                    self.worklist.append(d)


def run_parallel(spec: TaskSpec, workers: int = 1) -> Any:
    """Fold ``merge`` over job outputs, running up to ``workers`` jobs at once."""
    if workers < 1:
        raise ValueError("workers must be at least 1")
    result = spec.neutral
    if workers == 1:
        while True:
            batch = spec.next()
            if not batch:
                return result
            result = spec.merge(result, _run_job(spec.job, batch))
            if spec.completed is not None:
                spec.completed(batch)
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="worker") as pool:
        in_flight: dict = {}
        while True:
            while len(in_flight) < workers:
                batch = spec.next()
                if not batch:
                    break
                in_flight[pool.submit(_run_job, spec.job, batch)] = batch
            if not in_flight:
                return result
            finished, _ = wait(in_flight, return_when=FIRST_COMPLETED)
            for fut in sorted(finished, key=lambda f: str(in_flight[f])):
                batch = in_flight.pop(fut)
                try:
                    inter = fut.result()
                except JobFailed:
                    for other in in_flight:
                        other.cancel()
                    raise
                result = spec.merge(result, inter)
                if spec.completed is not None:
                    spec.completed(batch)


def _run_job(job, batch: list):
    try:
        return job(batch)
    except Exception as exc:
        raise JobFailed(batch, exc) from exc


# --- shared table ---------------------------------------------------------


class DisjointKeyViolation(Exception):
    pass


class RoleViolation(Exception):
    pass


@dataclass
class SharedTable:
    """Concurrent reads; writes add entries for disjoint keys; only the master removes."""

    compress: bool = True
    _data: dict = field(default_factory=dict)
    _writers: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def put_bytes(self, key: Hashable, value: bytes, writer: Optional[str] = None) -> None:
        writer = writer or threading.current_thread().name
        blob = zlib.compress(value) if self.compress else bytes(value)
        with self._lock:
            if key in self._data:
                if self._writers[key] != writer or self._data[key] != blob:
                    raise DisjointKeyViolation(f"{key!r} already written by {self._writers[key]}")
                return
            self._data[key] = blob
            self._writers[key] = writer

    def get_bytes(self, key: Hashable) -> Optional[bytes]:
        blob = self._data.get(key)
        if blob is None:
            return None
        return zlib.decompress(blob) if self.compress else blob

    def put(self, key: Hashable, value: Any, writer: Optional[str] = None) -> None:
        self.put_bytes(key, pickle.dumps(value, protocol=pickle.HIGHEST_PROTOCOL), writer)

    def get(self, key: Hashable) -> Any:
        raw = self.get_bytes(key)
        return None if raw is None else pickle.loads(raw)

    def remove(self, key: Hashable, role: str) -> None:
        if role != MASTER:
            raise RoleViolation(f"{role} may not remove {key!r}")
        with self._lock:
            self._data.pop(key, None)
            self._writers.pop(key, None)

    def writer(self, key: Hashable) -> Optional[str]:
        return self._writers.get(key)

    def __contains__(self, key: Hashable) -> bool:
        return key in self._data

    def __len__(self) -> int:
        return len(self._data)

    def keys(self) -> list:
        return list(self._data)
