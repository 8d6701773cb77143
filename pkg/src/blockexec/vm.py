"""Simulated transaction execution: reads, sleep, then report writes."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Union

from .model import ObjectId, Transaction
from .mvmemory import Blocked, FromVersion, MVMemory, ReadOutcome


@dataclass(frozen=True)
class ReadLogEntry:
    object: ObjectId
    observed: ReadOutcome


@dataclass(frozen=True)
class Completed:
    read_log: tuple[ReadLogEntry, ...]
    write_set: frozenset
    observed_deps: frozenset = field(default=frozenset())


@dataclass(frozen=True)
class AbortedOnBlocked:
    blocker: int


ExecutionResult = Union[Completed, AbortedOnBlocked]


def observed_writers(read_log) -> frozenset:
    return frozenset(
        e.observed.version.writer for e in read_log if isinstance(e.observed, FromVersion)
    )


def execute(
    t: Transaction,
    inc: int,
    mem: MVMemory,
    sleep: Callable[[float], None] = time.sleep,
) -> ExecutionResult:
    """Run one incarnation of ``t`` against ``mem``.

    Reads go in ascending object order and the first blocked read aborts
    before any simulated work is done. The caller applies the writes.
    """
    log = []
    for o in t.reads():
        outcome = mem.read(o, t.index)
        if type(outcome) is Blocked:
            return AbortedOnBlocked(outcome.blocker)
        log.append(ReadLogEntry(o, outcome))
    sleep(t.duration_ms / 1000.0)
    return Completed(tuple(log), t.writes(), observed_writers(log))
