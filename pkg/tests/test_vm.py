import time

from blockexec.model import Version
from blockexec.mvmemory import FROM_STORAGE, FromVersion, MVMemory
from blockexec.vm import AbortedOnBlocked, Completed, ReadLogEntry, execute

from conftest import R, RW, W, txn


class Recorder:
    def __init__(self):
        self.calls = []

    def __call__(self, s):
        self.calls.append(s)


def test_read_write_same_object_from_storage():
    sleep = Recorder()
    res = execute(txn(0, (1, RW), duration_ms=4.0), 0, MVMemory(4), sleep)
    assert res == Completed((ReadLogEntry(1, FROM_STORAGE),), frozenset({1}), frozenset())
    assert sleep.calls == [0.004]


def test_observed_dependency_is_the_writer():
    mem = MVMemory(4)
    mem.apply_writes(3, 0, {1})
    res = execute(txn(7, (1, R)), 0, mem, Recorder())
    assert res.read_log == (ReadLogEntry(1, FromVersion(Version(3, 0))),)
    assert res.observed_deps == {3}
    assert res.write_set == frozenset()


def test_blocked_read_aborts_before_sleeping():
    mem = MVMemory(4)
    mem.apply_writes(3, 0, {1})
    mem.mark_estimates(3)
    sleep = Recorder()
    start = time.perf_counter()
    res = execute(txn(7, (1, R), (2, W), duration_ms=50.0), 0, mem, sleep)
    assert res == AbortedOnBlocked(3)
    assert sleep.calls == []
    assert time.perf_counter() - start < 0.001


def test_reads_in_ascending_object_order():
    mem = MVMemory(4)
    mem.apply_writes(1, 0, {3})
    mem.apply_writes(2, 0, {0})
    mem.mark_estimates(1)
    mem.mark_estimates(2)
    # Both reads would block; the lower object id is read first.
    assert execute(txn(5, (3, R), (0, R)), 0, mem, Recorder()) == AbortedOnBlocked(2)


def test_blind_write_never_blocks():
    mem = MVMemory(4)
    mem.apply_writes(1, 0, {2})
    mem.mark_estimates(1)
    res = execute(txn(5, (2, W)), 0, mem, Recorder())
    assert isinstance(res, Completed) and res.write_set == {2}


def test_used_set_only_is_executed():
    t = txn(0, (1, R), (2, RW), used=[(2, RW)])
    res = execute(t, 0, MVMemory(4), Recorder())
    assert [e.object for e in res.read_log] == [2]


def test_wall_clock_at_least_duration():
    start = time.perf_counter()
    execute(txn(0, (1, RW), duration_ms=20.0), 0, MVMemory(4))
    assert time.perf_counter() - start >= 0.020


def test_reexecution_reads_same_objects():
    mem = MVMemory(4)
    t = txn(5, (1, R), (2, RW), (3, W))
    first = execute(t, 0, mem, Recorder())
    mem.apply_writes(2, 0, {1})
    second = execute(t, 1, mem, Recorder())
    assert [e.object for e in first.read_log] == [e.object for e in second.read_log]
    assert first.write_set == second.write_set
    assert first.read_log != second.read_log
