import pytest
from hypothesis import given, strategies as st

from blockexec.model import GENESIS, ObjectKind, Version
from blockexec.mvmemory import (
    FROM_STORAGE, Blocked, Estimate, FromVersion, MVMemory, MVMemoryError, PlannedWrite,
)

from conftest import R, RW, txn


def test_planned_write_blocks_higher_reader():
    mem = MVMemory(4)
    mem.install_planned_writes({4: [1]})
    assert mem.read(1, 7) == Blocked(4)


def test_no_hints_means_empty_memory():
    mem = MVMemory(4)
    mem.install_planned_writes({})
    assert mem.read(1, 7) == FROM_STORAGE


def test_planned_write_invisible_to_lower_reader():
    mem = MVMemory(4)
    mem.install_planned_writes({4: [1]})
    assert mem.read(1, 2) == FROM_STORAGE


def test_planned_writes_rejected_after_execution_started():
    mem = MVMemory(4)
    mem.read(0, 1)
    with pytest.raises(MVMemoryError):
        mem.install_planned_writes({1: [0]})


def test_read_empty_memory():
    assert MVMemory(4).read(1, 5) == FROM_STORAGE


def test_read_highest_lower_writer():
    mem = MVMemory(4)
    mem.apply_writes(3, 0, {1})
    assert mem.read(1, 5) == FromVersion(Version(3, 0))
    assert mem.read(1, 3) == FROM_STORAGE


def test_estimate_blocks_reader():
    mem = MVMemory(4)
    mem.apply_writes(3, 0, {1})
    mem.mark_estimates(3)
    assert mem.read(1, 5) == Blocked(3)


def test_first_write_is_new_location():
    assert MVMemory(4).apply_writes(3, 0, {1}) is True


def test_same_write_set_on_reincarnation_is_not_new():
    mem = MVMemory(4)
    mem.apply_writes(3, 0, {1})
    mem.mark_estimates(3)
    assert mem.apply_writes(3, 1, {1}) is False


def test_extra_location_on_reincarnation_is_new_and_visible():
    mem = MVMemory(4)
    mem.apply_writes(3, 0, {1})
    assert mem.apply_writes(3, 1, {1, 2}) is True
    assert mem.read(2, 4) == FromVersion(Version(3, 1))


def test_dropped_location_is_removed():
    mem = MVMemory(4)
    mem.apply_writes(3, 0, {1, 2})
    assert mem.apply_writes_detail(3, 1, {1}) == {2}
    assert mem.read(2, 4) == FROM_STORAGE


def test_planned_slot_is_not_a_new_location():
    mem = MVMemory(4)
    mem.install_planned_writes({3: [1]})
    assert mem.apply_writes(3, 0, {1}) is False
    assert mem.read(1, 4) == FromVersion(Version(3, 0))


def test_duplicate_application_is_an_error():
    mem = MVMemory(4)
    mem.apply_writes(3, 0, {1})
    with pytest.raises(MVMemoryError):
        mem.apply_writes(3, 0, {1})


def test_mark_estimates_without_writes_is_noop():
    mem = MVMemory(4)
    mem.apply_writes(2, 0, {0})
    mem.mark_estimates(5)
    assert mem.read(0, 6) == FromVersion(Version(2, 0))


def test_mark_estimates_is_idempotent():
    mem = MVMemory(4)
    mem.apply_writes(3, 0, {1})
    mem.mark_estimates(3)
    mem.mark_estimates(3)
    assert mem.entry(1, 3) == Estimate(3)
    assert mem.read(1, 5) == Blocked(3)


def test_greedy_commit_writes_storage_immediately():
    objects = [ObjectKind.SHARED] * 9 + [ObjectKind.OWNED]
    mem = MVMemory(objects)
    t = txn(4, (9, RW), objects=objects)
    mem.greedy_commit(t, {9})
    assert mem.storage[9] == Version(4, 0)
    assert mem.read(9, 5) == FROM_STORAGE


def test_greedy_commit_with_reads_only_leaves_storage():
    objects = [ObjectKind.SHARED, ObjectKind.OWNED]
    mem = MVMemory(objects)
    mem.greedy_commit(txn(0, (1, R), objects=objects), set())
    assert mem.storage[1] == GENESIS


def test_greedy_commit_rejects_shared_access():
    objects = [ObjectKind.SHARED, ObjectKind.OWNED]
    mem = MVMemory(objects)
    with pytest.raises(MVMemoryError):
        mem.greedy_commit(txn(0, (1, RW), (0, R)), {1})


def test_commit_final_state_takes_max_writer():
    mem = MVMemory(3)
    mem.apply_writes(2, 0, {1})
    mem.apply_writes(7, 0, {1})
    state = mem.commit_final_state()
    assert state[1].writer == 7
    assert state[0] == GENESIS


def test_commit_final_state_rejects_leftover_markers():
    mem = MVMemory(3)
    mem.apply_writes(2, 0, {1})
    mem.mark_estimates(2)
    with pytest.raises(MVMemoryError):
        mem.commit_final_state()
    mem2 = MVMemory(3)
    mem2.install_planned_writes({1: [0]})
    with pytest.raises(MVMemoryError):
        mem2.commit_final_state()


# Random operation sequences checked against a brute-force dict model.
ops = st.lists(
    st.one_of(
        st.tuples(st.just("apply"), st.integers(0, 7), st.frozensets(st.integers(0, 3), max_size=3)),
        st.tuples(st.just("mark"), st.integers(0, 7), st.just(frozenset())),
    ),
    max_size=30,
)


@given(ops, st.integers(0, 3), st.integers(0, 9))
def test_reads_match_reference_model(sequence, obj, reader):
    mem = MVMemory(4)
    slots = {}  # (obj, writer) -> ("value", inc) | ("estimate",)
    incs = {}
    for op, t, writes in sequence:
        if op == "apply":
            inc = incs.get(t, -1) + 1
            incs[t] = inc
            for key in [k for k in slots if k[1] == t and k[0] not in writes]:
                del slots[key]
            for o in writes:
                slots[(o, t)] = ("value", inc)
            mem.apply_writes(t, inc, writes)
        else:
            for key in [k for k in slots if k[1] == t]:
                slots[key] = ("estimate",)
            mem.mark_estimates(t)
    lower = [w for (o, w) in slots if o == obj and w < reader]
    got = mem.read(obj, reader)
    if not lower:
        assert got == FROM_STORAGE
    else:
        w = max(lower)
        entry = slots[(obj, w)]
        if entry[0] == "value":
            assert got == FromVersion(Version(w, entry[1]))
        else:
            assert got == Blocked(w)
    if isinstance(got, FromVersion):
        assert got.version.writer < reader
