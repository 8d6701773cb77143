"""Engine-independent correctness checks.

Only the block definition and a run's report are consulted; nothing here
touches the multi-version memory or the scheduler.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .model import GENESIS, Block, ObjectId, Version
from .mvmemory import FromStorage, FromVersion


class ViolationKind(enum.Enum):
    FINAL_STATE_MISMATCH = "FinalStateMismatch"
    INCOHERENT_READ = "IncoherentRead"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    txn: int
    object: ObjectId
    expected: Version
    actual: Version


def sequential_final_state(block: Block) -> dict[ObjectId, Version]:
    state = {o: GENESIS for o in range(len(block.objects))}
    for t in block:
        for o in t.writes():
            state[o] = Version(t.index, 0)
    return state


def _writer_of(observed) -> int:
    if isinstance(observed, FromStorage):
        return GENESIS.writer
    if isinstance(observed, FromVersion):
        return observed.version.writer
    raise TypeError(f"read log holds a non-value outcome {observed!r}")


def check_run(block: Block, report, committed_read_logs=None) -> list[Violation]:
    """Compare a run against sequential semantics; empty list means serializable.

    Checks the final state writer-by-writer and that every committed read
    observed the highest lower-index writer of its object.
    """
    if committed_read_logs is None:
        committed_read_logs = report.read_logs
    violations = []
    expected = sequential_final_state(block)
    for o, want in expected.items():
        got = report.final_state.get(o, GENESIS)
        if got.writer != want.writer:
            violations.append(Violation(ViolationKind.FINAL_STATE_MISMATCH, -1, o, want, got))

    last_writer: dict[ObjectId, int] = {}
    for t in block:
        logged = committed_read_logs[t.index] if t.index < len(committed_read_logs) else None
        if logged is None:
            logged_objects = {}
        else:
            logged_objects = {e.object: _writer_of(e.observed) for e in logged}
        for o in t.reads():
            want = last_writer.get(o, GENESIS.writer)
            got = logged_objects.get(o)
            if got != want:
                violations.append(
                    Violation(
                        ViolationKind.INCOHERENT_READ, t.index, o,
                        Version(want, 0), Version(-2 if got is None else got, 0),
                    )
                )
        for o in t.writes():
            last_writer[o] = t.index
    return violations
