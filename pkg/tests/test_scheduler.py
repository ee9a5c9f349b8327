from __future__ import annotations

import random
import threading

import pytest
from hypothesis import given, settings, strategies as st

from flowlet.checker import check_project
from flowlet.fuzz import random_dag, render_project
from flowlet.modules import FileSystemView
from flowlet.scheduler import (
    MASTER,
    DisjointKeyViolation,
    DynamicNext,
    JobFailed,
    RoleViolation,
    SchedulerDeadlock,
    SharedTable,
    StaticNext,
    TaskSpec,
    run_parallel,
)


def collect(items):
    return list(items)


def concat(acc, part):
    return acc + part


def test_static_buckets():
    nxt = StaticNext(range(5), 2)
    assert [nxt(), nxt(), nxt(), nxt()] == [[0, 1], [2, 3], [4], []]


def test_one_worker_runs_on_the_calling_thread():
    seen = []

    def job(batch):
        seen.append(threading.current_thread())
        return batch

    out = run_parallel(TaskSpec(job, concat, [], StaticNext(range(10), 3)), 1)
    assert out == list(range(10))
    assert set(seen) == {threading.current_thread()}


@pytest.mark.parametrize("workers", [1, 2, 4, 8])
def test_parse_stage_is_worker_independent(workers):
    files = render_project(random_dag(3, 30))
    res = check_project(FileSystemView(files), workers=workers, bucket=2)
    assert res.dumps() == check_project(FileSystemView(files)).dumps()
    assert res.violations == []


def run_dynamic(deps, workers, bucket=1):
    finished: set = set()
    lock = threading.Lock()
    early = []

    def job(batch):
        with lock:
            for item in batch:
                if not deps[item] <= finished:
                    early.append(item)
        with lock:
            finished.update(batch)
        return batch

    dyn = DynamicNext(deps, bucket)
    out = run_parallel(TaskSpec(job, concat, [], dyn, dyn.completed), workers)
    return out, dyn, early


def test_chain_runs_in_dependency_order():
    out, dyn, early = run_dynamic({"A": set(), "B": {"A"}, "C": {"B"}}, 4)
    assert out == ["A", "B", "C"] and dyn.log == ["A", "B", "C"] and not early


def test_diamond_apex_runs_last():
    deps = {"D": set(), "B": {"D"}, "C": {"D"}, "A": {"B", "C"}}
    out, dyn, early = run_dynamic(deps, 3)
    assert dyn.log[0] == "D" and dyn.log[-1] == "A" and not early and not dyn.violations


@given(st.integers(0, 10_000), st.integers(1, 8), st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_dynamic_never_dispatches_early(seed, workers, bucket):
    rng = random.Random(seed)
    n = rng.randint(1, 30)
    deps = {i: {j for j in range(i) if rng.random() < 0.2} for i in range(n)}
    out, dyn, early = run_dynamic(deps, workers, bucket)
    assert sorted(out) == list(range(n))
    assert not early and not dyn.violations
    pos = {x: i for i, x in enumerate(dyn.log)}
    assert all(pos[d] < pos[i] for i in deps for d in deps[i])


def test_cycle_is_a_deadlock():
    with pytest.raises(SchedulerDeadlock):
        run_dynamic({"A": {"B"}, "B": {"A"}}, 2)


def test_job_failure_names_the_bucket():
    def job(batch):
        raise ValueError("boom")

    with pytest.raises(JobFailed) as info:
        run_parallel(TaskSpec(job, concat, [], StaticNext([1, 2], 2)), 2)
    assert info.value.items == [1, 2]


# --- shared table -----------------------------------------------------------


@given(st.lists(st.binary(max_size=64), min_size=1, max_size=40), st.integers(1, 8))
@settings(max_examples=30, deadline=None)
def test_disjoint_concurrent_puts(values, workers):
    table = SharedTable()
    barrier = threading.Barrier(workers)

    def writer(w):
        barrier.wait()
        for i in range(w, len(values), workers):
            table.put_bytes(i, values[i])

    threads = [threading.Thread(target=writer, args=(w,), name=f"w{w}") for w in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert [table.get_bytes(i) for i in range(len(values))] == values
    assert all(table.writer(i) == f"w{i % workers}" for i in range(len(values)))


@given(st.binary(max_size=32), st.binary(max_size=32))
def test_same_key_from_another_writer_is_rejected(a, b):
    table = SharedTable()
    table.put_bytes("k", a, writer="w1")
    table.put_bytes("k", a, writer="w1")  # an identical replay is harmless
    with pytest.raises(DisjointKeyViolation):
        table.put_bytes("k", b, writer="w2")
    assert table.get_bytes("k") == a


@given(st.text(min_size=1).filter(lambda r: r != MASTER))
def test_only_the_master_removes(role):
    table = SharedTable()
    table.put("k", {"x": 1}, writer="w1")
    with pytest.raises(RoleViolation):
        table.remove("k", role)
    assert table.get("k") == {"x": 1}
    table.remove("k", MASTER)
    assert "k" not in table and len(table) == 0


def test_uncompressed_table_round_trips():
    table = SharedTable(compress=False)
    table.put(("sig", "a.fc"), [1, 2, 3])
    assert table.get(("sig", "a.fc")) == [1, 2, 3] and table.keys() == [("sig", "a.fc")]
