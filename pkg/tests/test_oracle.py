from blockexec.engines import EpochReport, run_sequential
from blockexec.model import GENESIS, Version
from blockexec.mvmemory import FROM_STORAGE, FromVersion
from blockexec.oracle import ViolationKind, check_run, sequential_final_state
from blockexec.vm import ReadLogEntry
from blockexec.workload import WorkloadParams, generate_block

from conftest import R, RW, W, shared_block, txn


def writers_block():
    # o1 written by 2 and 7, read by 5 and 8; o3 never written.
    txns = [txn(i, (10 + i, RW)) for i in range(9)]
    txns[2] = txn(2, (1, W))
    txns[5] = txn(5, (1, RW))
    txns[7] = txn(7, (1, RW))
    txns[8] = txn(8, (1, R))
    return shared_block(txns, 20)


def report_for(block, final_state, read_logs):
    return EpochReport("hand", 1, len(block), 1.0, 0, 0, 0, final_state, read_logs=read_logs)


def correct_logs(block):
    return run_sequential(block, lambda s: None).read_logs


def test_max_index_writer_wins():
    state = sequential_final_state(writers_block())
    assert state[1] == Version(7, 0)
    assert state[3] == GENESIS


def test_single_txn_block():
    assert sequential_final_state(shared_block([txn(0, (3, W))]))[3] == Version(0, 0)


def test_sequential_run_is_clean():
    block = generate_block(WorkloadParams(block_size=150, seed=7))
    assert check_run(block, run_sequential(block, lambda s: None)) == []


def test_incoherent_read_detected():
    block = writers_block()
    logs = list(correct_logs(block))
    logs[7] = (ReadLogEntry(1, FromVersion(Version(3, 0))),)
    report = report_for(block, sequential_final_state(block), logs)
    [v] = check_run(block, report)
    assert v.kind is ViolationKind.INCOHERENT_READ
    assert (v.txn, v.object, v.expected.writer, v.actual.writer) == (7, 1, 5, 3)


def test_final_state_mismatch_detected():
    block = writers_block()
    state = sequential_final_state(block)
    state[1] = Version(2, 0)
    [v] = check_run(block, report_for(block, state, correct_logs(block)))
    assert v.kind is ViolationKind.FINAL_STATE_MISMATCH and v.object == 1


def test_incarnations_are_ignored():
    block = writers_block()
    state = sequential_final_state(block)
    state[1] = Version(7, 4)
    logs = list(correct_logs(block))
    logs[8] = (ReadLogEntry(1, FromVersion(Version(7, 3))),)
    assert check_run(block, report_for(block, state, logs)) == []


def test_missing_read_log_is_a_violation():
    block = writers_block()
    logs = list(correct_logs(block))
    logs[8] = None
    [v] = check_run(block, report_for(block, sequential_final_state(block), logs))
    assert v.txn == 8 and v.actual.writer == -2


def test_storage_read_where_a_writer_exists():
    block = writers_block()
    logs = list(correct_logs(block))
    logs[8] = (ReadLogEntry(1, FROM_STORAGE),)
    [v] = check_run(block, report_for(block, sequential_final_state(block), logs))
    assert v.expected.writer == 7 and v.actual.writer == -1
