"""Task dispensation and transaction lifecycle for the optimistic engines.

One scheduler serves both the index-ordered collaborative schedule and the
dependency-scored priority schedule. The behavioural switches live in
``SchedulerMode``:

* ``ordering``: pop tasks by index, or by (score desc, index asc);
* ``resolve_on``: wake waiting dependents when the blocker finishes
  execution, or only once it passes validation;
* ``use_waiting``: a transaction failing validation waits for its known,
  not yet validated blockers instead of re-executing immediately;
* ``use_hints``: install planned-write markers and hint-derived edges
  before the parallel phase.

All state is guarded by a single lock. Validation re-reads are performed
while holding it, so a validation and its outcome are one atomic step.
"""

from __future__ import annotations

import enum
import heapq
import threading
import time
from collections import defaultdict
from dataclasses import dataclass
from typing import NamedTuple

from .model import Block
from .mvmemory import FromVersion, MVMemory
from .vm import AbortedOnBlocked, Completed


def _writer_of(outcome) -> int:
    return outcome.version.writer if isinstance(outcome, FromVersion) else -1


class SchedulerError(RuntimeError):
    pass


class Ordering(enum.Enum):
    INDEX = "index"
    PRIORITY = "priority"


class ResolveOn(enum.Enum):
    EXECUTION = "execution"
    VALIDATION = "validation"


@dataclass(frozen=True)
class SchedulerMode:
    ordering: Ordering
    resolve_on: ResolveOn
    use_waiting: bool
    use_hints: bool


BLOCK_STM = SchedulerMode(Ordering.INDEX, ResolveOn.EXECUTION, False, False)
NEMO = SchedulerMode(Ordering.PRIORITY, ResolveOn.VALIDATION, True, True)
NEMO_NO_PQ = SchedulerMode(Ordering.INDEX, ResolveOn.VALIDATION, True, True)


class Status(enum.Enum):
    READY = "ReadyToExecute"
    EXECUTING = "Executing"
    WAITING = "Waiting"
    EXECUTED = "Executed"
    VALIDATED = "Validated"
    COMMITTED = "Committed"


class TaskKind(enum.IntEnum):
    # Lower value wins ties, so validation is preferred.
    VALIDATE = 0
    EXECUTE = 1


class Task(NamedTuple):
    kind: TaskKind
    txn: int
    inc: int


class _Signal:
    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name


IDLE = _Signal("Idle")
EPOCH_DONE = _Signal("EpochDone")


class DependencyGraph:
    """Edges blocker -> dependent (blocker < dependent) with dependent counts."""

    def __init__(self):
        self.edges: set[tuple[int, int]] = set()
        self.score: defaultdict[int, int] = defaultdict(int)
        self._blockers: defaultdict[int, set] = defaultdict(set)

    def add(self, blocker: int, dependent: int) -> bool:
        if blocker < 0 or blocker == dependent:
            return False
        if blocker > dependent:
            raise SchedulerError(f"edge ({blocker}, {dependent}) points backwards")
        if (blocker, dependent) in self.edges:
            return False
        self.edges.add((blocker, dependent))
        self.score[blocker] += 1
        self._blockers[dependent].add(blocker)
        return True

    def blockers(self, dependent: int) -> set[int]:
        return set(self._blockers.get(dependent, ()))


class TaskQueue:
    """Heap of (kind, txn) tasks with a membership set so none is queued twice.

    In priority mode entries are keyed (−score, txn, kind). Scores only grow,
    so a rescore pushes a fresher entry and the old one is skipped on pop.
    """

    def __init__(self, ordering: Ordering, score):
        self.ordering = ordering
        self._score = score
        self._heap: list = []
        self._members: set[tuple[TaskKind, int]] = set()

    def __len__(self) -> int:
        return len(self._members)

    def __contains__(self, task) -> bool:
        return task in self._members

    def _entry(self, kind: TaskKind, txn: int):
        if self.ordering is Ordering.PRIORITY:
            return (-self._score[txn], txn, kind)
        return (txn, kind)

    def push(self, kind: TaskKind, txn: int) -> bool:
        if (kind, txn) in self._members:
            return False
        self._members.add((kind, txn))
        heapq.heappush(self._heap, self._entry(kind, txn))
        return True

    def rescore(self, txn: int) -> None:
        if self.ordering is not Ordering.PRIORITY:
            return
        for kind in TaskKind:
            if (kind, txn) in self._members:
                heapq.heappush(self._heap, self._entry(kind, txn))

    def pop(self) -> tuple[TaskKind, int] | None:
        heap = self._heap
        while heap:
            entry = heapq.heappop(heap)
            txn, kind = entry[-2], entry[-1]
            if (kind, txn) not in self._members:
                continue
            if self.ordering is Ordering.PRIORITY and -entry[0] != self._score[txn]:
                continue
            self._members.discard((kind, txn))
            return kind, txn
        return None


@dataclass
class TxnStats:
    executions: int = 0  # completed incarnations
    blocked: int = 0  # attempts suspended on a blocked read
    waits: int = 0
    validations: int = 0


class Scheduler:
    def __init__(
        self,
        block: Block,
        mem: MVMemory,
        mode: SchedulerMode,
        greedy: bool = False,
        revalidation: str = "readers",
    ):
        if revalidation not in ("readers", "all"):
            raise SchedulerError(f"unknown revalidation policy {revalidation!r}")
        self.revalidation = revalidation
        self.block = block
        self.mem = mem
        self.mode = mode
        self.greedy = greedy
        n = self.n = len(block)
        self._lock = threading.Lock()
        self.status = [Status.READY] * n
        self.incarnation = [0] * n
        self.wait_on: list[set] = [set() for _ in range(n)]
        self._waiters: defaultdict[int, set] = defaultdict(set)
        self.read_logs: list = [None] * n
        self._readers: defaultdict[int, set] = defaultdict(set)
        self._observed: list[dict] = [{} for _ in range(n)]
        self.graph = DependencyGraph()
        self.queue = TaskQueue(mode.ordering, self.graph.score)
        self.stats = [TxnStats() for _ in range(n)]
        self.failed_validations = 0
        self.greedy_commits = 0
        self.commit_idx = 0
        self.n_committed = 0
        self.last_progress = time.monotonic()
        self._preprocessed = False
        self._greedy_txn = [greedy and t.owned_only for t in block]

    # -- setup ---------------------------------------------------------------

    def preprocess_hints(self) -> None:
        """Install planned writes and hint-derived edges, then queue ready work."""
        if self._preprocessed:
            raise SchedulerError("preprocess already ran")
        self._preprocessed = True
        with self._lock:
            if self.mode.use_hints:
                planned = {
                    t.index: t.hinted_writes()
                    for t in self.block
                    if not self._greedy_txn[t.index] and t.hinted_writes()
                }
                self.mem.install_planned_writes(planned)
                last_writer: dict[int, int] = {}
                for t in self.block:
                    i = t.index
                    if self._greedy_txn[i]:
                        continue
                    blockers = set()
                    for o in t.hinted_reads():
                        j = last_writer.get(o)
                        if j is not None:
                            self.graph.add(j, i)
                            blockers.add(j)
                    for o in t.hinted_writes():
                        last_writer[o] = i
                    if blockers and self.mode.use_waiting:
                        self._wait(i, blockers)
            for i in range(self.n):
                if self.status[i] is Status.READY:
                    self.queue.push(TaskKind.EXECUTE, i)

    # -- task dispensation ---------------------------------------------------

    def next_task(self):
        with self._lock:
            if self.n_committed == self.n:
                return EPOCH_DONE
            while True:
                item = self.queue.pop()
                if item is None:
                    return IDLE
                kind, i = item
                if kind is TaskKind.EXECUTE:
                    if self.status[i] is Status.READY:
                        self.status[i] = Status.EXECUTING
                        return Task(kind, i, self.incarnation[i])
                elif self.status[i] is Status.EXECUTED:
                    return Task(kind, i, self.incarnation[i])

    def epoch_done(self) -> bool:
        with self._lock:
            return self.n_committed == self.n

    # -- lifecycle -----------------------------------------------------------

    def finish_execution(self, txn: int, inc: int, result) -> None:
        with self._lock:
            if self.status[txn] is not Status.EXECUTING or self.incarnation[txn] != inc:
                raise SchedulerError(
                    f"finish_execution({txn}, {inc}) but status is "
                    f"{self.status[txn].value}({self.incarnation[txn]})"
                )
            if isinstance(result, AbortedOnBlocked):
                # The incarnation is suspended, not consumed: it resumes once
                # the blocker resolves.
                b = result.blocker
                self._add_edge(b, txn)
                self.stats[txn].blocked += 1
                if self._resolved(b):
                    self._make_ready(txn)
                else:
                    self._wait(txn, {b})
                return
            if not isinstance(result, Completed):
                raise SchedulerError(f"unexpected execution result {result!r}")
            self.stats[txn].executions += 1
            if self._greedy_txn[txn]:
                self.mem.greedy_commit(self.block[txn], result.write_set)
                self.read_logs[txn] = result.read_log
                self.greedy_commits += 1
                self._commit(txn)
                self._advance_watermark()
                return
            self.read_logs[txn] = result.read_log
            observed = self._observed[txn] = {}
            for entry in result.read_log:
                self._readers[entry.object].add(txn)
                observed[entry.object] = _writer_of(entry.observed)
            for d in result.observed_deps:
                self._add_edge(d, txn)
            changed = self.mem.apply_writes_detail(txn, inc, result.write_set)
            self.status[txn] = Status.EXECUTED
            self.queue.push(TaskKind.VALIDATE, txn)
            if changed:
                self._revalidate_above(txn, changed)
            if self.mode.resolve_on is ResolveOn.EXECUTION:
                self._wake(txn)

    def validate(self, txn: int) -> bool:
        """Re-read the logged objects; pass iff every outcome is unchanged."""
        mem = self.mem
        for entry in self.read_logs[txn]:
            if mem.read(entry.object, txn) != entry.observed:
                return False
        return True

    def perform_validation(self, txn: int, inc: int) -> bool | None:
        """Validate and record the outcome atomically; None if the task is stale."""
        with self._lock:
            if self.status[txn] is not Status.EXECUTED or self.incarnation[txn] != inc:
                return None
            passed = self.validate(txn)
            self._finish_validation(txn, inc, passed)
            return passed

    def finish_validation(self, txn: int, inc: int, passed: bool) -> None:
        with self._lock:
            self._finish_validation(txn, inc, passed)

    def _finish_validation(self, txn: int, inc: int, passed: bool) -> None:
        if self.status[txn] is not Status.EXECUTED or self.incarnation[txn] != inc:
            raise SchedulerError(
                f"finish_validation({txn}, {inc}) but status is "
                f"{self.status[txn].value}({self.incarnation[txn]})"
            )
        self.stats[txn].validations += 1
        if passed:
            self.status[txn] = Status.VALIDATED
            if self.mode.resolve_on is ResolveOn.VALIDATION:
                self._wake(txn)
            self._advance_watermark()
            return
        self.failed_validations += 1
        marked = self.mem.mark_estimates(txn)
        self.incarnation[txn] += 1
        blockers = set()
        if self.mode.use_waiting:
            blockers = {b for b in self.graph.blockers(txn) if not self._resolved(b)}
        if blockers:
            self._wait(txn, blockers)
        else:
            self._make_ready(txn)
        self._revalidate_above(txn, marked)

    # -- helpers (lock held) -------------------------------------------------

    def _add_edge(self, blocker: int, dependent: int) -> None:
        if self.graph.add(blocker, dependent):
            self.queue.rescore(blocker)

    def _resolved(self, b: int) -> bool:
        s = self.status[b]
        if self.mode.resolve_on is ResolveOn.EXECUTION:
            return s in (Status.EXECUTED, Status.VALIDATED, Status.COMMITTED)
        return s in (Status.VALIDATED, Status.COMMITTED)

    def _make_ready(self, txn: int) -> None:
        self.status[txn] = Status.READY
        self.queue.push(TaskKind.EXECUTE, txn)

    def _wait(self, txn: int, blockers: set) -> None:
        self.status[txn] = Status.WAITING
        self.wait_on[txn] = set(blockers)
        self.stats[txn].waits += 1
        for b in blockers:
            self._waiters[b].add(txn)

    def _wake(self, blocker: int) -> None:
        for j in self._waiters.pop(blocker, ()):
            pending = self.wait_on[j]
            pending.discard(blocker)
            if not pending and self.status[j] is Status.WAITING:
                self._make_ready(j)

    def _revalidate_above(self, txn: int, objects) -> None:
        """Queue validation for executed transactions above ``txn``.

        With the "readers" policy only those whose latest read of one of
        ``objects`` came from ``txn`` or below are touched. A read served by a
        higher writer cannot see a change at ``txn``'s slot, so its
        validation would pass unchanged.
        """
        low = max(txn + 1, self.commit_idx)
        if self.revalidation == "all":
            candidates = range(low, self.n)
        else:
            observed = self._observed
            candidates = sorted(
                {
                    j
                    for o in objects
                    for j in self._readers.get(o, ())
                    if j >= low and observed[j].get(o, self.n) <= txn
                }
            )
        status = self.status
        push = self.queue.push
        for j in candidates:
            s = status[j]
            if s is Status.VALIDATED:
                status[j] = Status.EXECUTED
                push(TaskKind.VALIDATE, j)
            elif s is Status.EXECUTED:
                push(TaskKind.VALIDATE, j)

    def _commit(self, txn: int) -> None:
        self.status[txn] = Status.COMMITTED
        self.n_committed += 1
        self.last_progress = time.monotonic()

    def _advance_watermark(self) -> None:
        status = self.status
        while self.commit_idx < self.n:
            s = status[self.commit_idx]
            if s is Status.VALIDATED:
                self._commit(self.commit_idx)
            elif s is not Status.COMMITTED:
                break
            self.commit_idx += 1
