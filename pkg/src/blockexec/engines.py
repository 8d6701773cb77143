"""Epoch drivers: sequential, Block-STM, NEMO, NEMO without priority queue, PCC."""

from __future__ import annotations

import enum
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .model import Block, ObjectId, Version
from .mvmemory import FROM_STORAGE, FromVersion, MVMemory
from .scheduler import BLOCK_STM, EPOCH_DONE, IDLE, NEMO, NEMO_NO_PQ, Scheduler, TaskKind
from .vm import Completed, ReadLogEntry, execute

log = logging.getLogger(__name__)

DEFAULT_WATCHDOG_S = 30.0
BACKOFF_MIN_S = 50e-6
BACKOFF_MAX_S = 1e-3


class Engine(enum.Enum):
    SEQUENTIAL = "sequential"
    BLOCK_STM = "blockstm"
    NEMO = "nemo"
    NEMO_NO_PQ = "nemonopq"
    PCC = "pcc"


OCC_MODES = {Engine.BLOCK_STM: BLOCK_STM, Engine.NEMO: NEMO, Engine.NEMO_NO_PQ: NEMO_NO_PQ}


class ProgressTimeout(RuntimeError):
    """No transaction committed within the watchdog interval."""


@dataclass
class EngineConfig:
    engine: Engine
    workers: int = 1
    seed: int = 0
    watchdog_s: float = DEFAULT_WATCHDOG_S

    def __post_init__(self):
        self.engine = Engine(self.engine)
        if self.workers < 1:
            raise ValueError("workers must be ≥ 1")
        if self.engine is Engine.SEQUENTIAL:
            self.workers = 1


@dataclass
class EpochReport:
    engine: str
    workers: int
    block_size: int
    duration_ms: float
    reexecutions: int
    failed_validations: int
    greedy_commits: int
    final_state: dict[ObjectId, Version]
    per_txn: list[tuple[int, int, int]] = field(default_factory=list)
    blocked_aborts: int = 0
    read_logs: list = field(default_factory=list, repr=False)

    @property
    def tps(self) -> float:
        if self.block_size == 0 or self.duration_ms <= 0:
            return 0.0
        return self.block_size / (self.duration_ms / 1000.0)

    def scalars(self) -> dict:
        return {
            "engine": self.engine,
            "workers": self.workers,
            "block_size": self.block_size,
            "duration_ms": self.duration_ms,
            "tps": self.tps,
            "reexecutions": self.reexecutions,
            "failed_validations": self.failed_validations,
            "greedy_commits": self.greedy_commits,
            "blocked_aborts": self.blocked_aborts,
        }


def run_sequential(block: Block, sleep=time.sleep) -> EpochReport:
    storage = {o: Version(-1, 0) for o in range(len(block.objects))}
    logs = []
    start = time.perf_counter()
    for t in block:
        logs.append(tuple(ReadLogEntry(o, _storage_outcome(storage[o])) for o in t.reads()))
        sleep(t.duration_ms / 1000.0)
        for o in t.writes():
            storage[o] = Version(t.index, 0)
    elapsed = (time.perf_counter() - start) * 1000.0
    return _one_shot_report(Engine.SEQUENTIAL, 1, len(block), elapsed, storage, logs)


def _one_shot_report(engine, workers, n, elapsed, storage, logs) -> EpochReport:
    return EpochReport(
        engine=engine.value,
        workers=workers,
        block_size=n,
        duration_ms=elapsed,
        reexecutions=0,
        failed_validations=0,
        greedy_commits=0,
        final_state=storage,
        per_txn=[(0, 0, 0)] * n,
        read_logs=logs,
    )


def _storage_outcome(v: Version):
    return FROM_STORAGE if v.writer < 0 else FromVersion(v)


class _WorkerPool:
    """Runs ``body`` on n threads; the driver polls a progress clock."""

    def __init__(self, n: int, body, progress, watchdog_s: float):
        self.stop = threading.Event()
        self.errors: list[BaseException] = []
        self._progress = progress
        self._watchdog_s = watchdog_s
        self._threads = [
            threading.Thread(target=self._guard, args=(body,), name=f"worker-{k}", daemon=True)
            for k in range(n)
        ]

    def _guard(self, body):
        try:
            body(self.stop)
        except BaseException as e:  # surfaced by the driver
            self.errors.append(e)
            self.stop.set()

    def run(self):
        for th in self._threads:
            th.start()
        while not self.errors:
            alive = [th for th in self._threads if th.is_alive()]
            if not alive:
                break
            alive[0].join(timeout=0.05)
            if time.monotonic() - self._progress() > self._watchdog_s:
                self.stop.set()
                raise ProgressTimeout(f"no commit for {self._watchdog_s:.1f} s")
        for th in self._threads:
            th.join()
        if self.errors:
            raise self.errors[0]


def run_occ(
    block: Block, config: EngineConfig, sleep=time.sleep, revalidation: str = "readers"
) -> EpochReport:
    mode = OCC_MODES.get(config.engine)
    if mode is None:
        raise ValueError(f"{config.engine.value} is not an optimistic engine")
    greedy = config.engine in (Engine.NEMO, Engine.NEMO_NO_PQ)
    mem = MVMemory(block.objects)
    sched = Scheduler(block, mem, mode, greedy=greedy, revalidation=revalidation)
    txns = block.transactions

    def worker(stop: threading.Event):
        backoff = BACKOFF_MIN_S
        while not stop.is_set():
            task = sched.next_task()
            if task is EPOCH_DONE:
                return
            if task is IDLE:
                time.sleep(backoff)
                backoff = min(backoff * 2, BACKOFF_MAX_S)
                continue
            backoff = BACKOFF_MIN_S
            if task.kind is TaskKind.EXECUTE:
                result = execute(txns[task.txn], task.inc, mem, sleep)
                sched.finish_execution(task.txn, task.inc, result)
            else:
                sched.perform_validation(task.txn, task.inc)

    start = time.perf_counter()
    sched.last_progress = time.monotonic()
    sched.preprocess_hints()
    _WorkerPool(config.workers, worker, lambda: sched.last_progress, config.watchdog_s).run()
    elapsed = (time.perf_counter() - start) * 1000.0
    final = mem.commit_final_state()
    executions = sum(s.executions for s in sched.stats)
    return EpochReport(
        engine=config.engine.value,
        workers=config.workers,
        block_size=len(block),
        duration_ms=elapsed,
        reexecutions=executions - len(block),
        failed_validations=sched.failed_validations,
        greedy_commits=sched.greedy_commits,
        final_state=final,
        per_txn=[(inc, s.waits, s.validations) for inc, s in zip(sched.incarnation, sched.stats)],
        blocked_aborts=sum(s.blocked for s in sched.stats),
        read_logs=list(sched.read_logs),
    )


def pcc_predecessors(block: Block) -> list[set[int]]:
    """Reduced conflict predecessors over exhaustive sets.

    Waiting on the latest earlier writer of each object, plus (for a writer)
    the readers since that writer, is equivalent to waiting on every earlier
    conflicting transaction: those are ordered before them transitively.
    """
    last_writer: dict[ObjectId, int] = {}
    readers: dict[ObjectId, list[int]] = {}
    preds = []
    for t in block:
        p = set()
        for a in t.exhaustive_set:
            w = last_writer.get(a.object)
            if w is not None:
                p.add(w)
            if a.kind.writes:
                p.update(readers.get(a.object, ()))
        for a in t.exhaustive_set:
            if a.kind.writes:
                last_writer[a.object] = t.index
                readers[a.object] = []
            else:
                readers.setdefault(a.object, []).append(t.index)
        p.discard(t.index)
        preds.append(p)
    return preds


def run_pcc(block: Block, config: EngineConfig, sleep=time.sleep) -> EpochReport:
    if config.engine is not Engine.PCC:
        raise ValueError("run_pcc needs engine=pcc")
    n = len(block)
    storage = {o: Version(-1, 0) for o in range(len(block.objects))}
    logs: list = [None] * n
    lock = threading.Lock()
    state = {"finished": 0, "progress": time.monotonic()}

    start = time.perf_counter()
    preds = pcc_predecessors(block)
    pending = [len(p) for p in preds]
    dependents: list[list[int]] = [[] for _ in range(n)]
    for j, p in enumerate(preds):
        for i in p:
            dependents[i].append(j)
    ready = deque(j for j in range(n) if pending[j] == 0)

    def worker(stop: threading.Event):
        backoff = BACKOFF_MIN_S
        while not stop.is_set():
            with lock:
                if state["finished"] == n:
                    return
                j = ready.popleft() if ready else None
            if j is None:
                time.sleep(backoff)
                backoff = min(backoff * 2, BACKOFF_MAX_S)
                continue
            backoff = BACKOFF_MIN_S
            t = block[j]
            with lock:
                log_j = tuple(ReadLogEntry(o, _storage_outcome(storage[o])) for o in t.reads())
            sleep(t.duration_ms / 1000.0)
            with lock:
                for o in t.writes():
                    storage[o] = Version(j, 0)
                logs[j] = log_j
                state["finished"] += 1
                state["progress"] = time.monotonic()
                for d in dependents[j]:
                    pending[d] -= 1
                    if pending[d] == 0:
                        ready.append(d)

    _WorkerPool(config.workers, worker, lambda: state["progress"], config.watchdog_s).run()
    elapsed = (time.perf_counter() - start) * 1000.0
    return _one_shot_report(Engine.PCC, config.workers, n, elapsed, storage, logs)


def run_engine(block: Block, config: EngineConfig, sleep=time.sleep) -> EpochReport:
    if config.engine is Engine.SEQUENTIAL:
        return run_sequential(block, sleep)
    if config.engine is Engine.PCC:
        return run_pcc(block, config, sleep)
    return run_occ(block, config, sleep)
