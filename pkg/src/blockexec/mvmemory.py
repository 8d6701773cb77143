"""Multi-version memory with ESTIMATE and planned-write markers."""

from __future__ import annotations

import bisect
import threading
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Union

from .model import GENESIS, ObjectId, ObjectKind, Transaction, Version


class MVMemoryError(RuntimeError):
    """Misuse of the multi-version memory (ordering or marker violations)."""


# Entry states kept per (object, writer) slot.
class Value(NamedTuple):
    version: Version


class Estimate(NamedTuple):
    writer: int


class PlannedWrite(NamedTuple):
    writer: int


Entry = Union[Value, Estimate, PlannedWrite]


# Read outcomes.
class FromStorage(NamedTuple):
    pass


class FromVersion(NamedTuple):
    version: Version


class Blocked(NamedTuple):
    blocker: int


ReadOutcome = Union[FromStorage, FromVersion, Blocked]

FROM_STORAGE = FromStorage()


@dataclass
class _Chain:
    writers: list  # sorted writer indices with a live slot
    slots: dict  # writer -> Entry


class MVMemory:
    """Per-object version chains keyed by writer index.

    One lock guards all slots; every public operation is atomic.
    """

    def __init__(self, objects: list[ObjectKind] | int = 0):
        if isinstance(objects, int):
            objects = [ObjectKind.SHARED] * objects
        self.objects = list(objects)
        self._lock = threading.Lock()
        self._chains: dict[ObjectId, _Chain] = {}
        self._written: dict[int, frozenset] = {}
        self._applied: set[tuple[int, int]] = set()
        self._started = False
        self.storage: dict[ObjectId, Version] = {o: GENESIS for o in range(len(self.objects))}

    def _chain(self, o: ObjectId) -> _Chain:
        c = self._chains.get(o)
        if c is None:
            c = self._chains[o] = _Chain([], {})
        return c

    def _put(self, o: ObjectId, writer: int, entry: Entry) -> bool:
        c = self._chain(o)
        fresh = writer not in c.slots
        if fresh:
            bisect.insort(c.writers, writer)
        c.slots[writer] = entry
        return fresh

    def _drop(self, o: ObjectId, writer: int) -> None:
        c = self._chains[o]
        del c.slots[writer]
        c.writers.pop(bisect.bisect_left(c.writers, writer))

    def install_planned_writes(self, hints: Mapping[int, Iterable[ObjectId]]) -> None:
        """Mark every hinted write as a PlannedWrite before execution starts."""
        with self._lock:
            if self._started:
                raise MVMemoryError("planned writes must be installed before execution")
            for txn, objects in hints.items():
                for o in objects:
                    self._put(o, txn, PlannedWrite(txn))

    def read(self, o: ObjectId, reader: int) -> ReadOutcome:
        with self._lock:
            self._started = True
            c = self._chains.get(o)
            if c is None:
                return FROM_STORAGE
            pos = bisect.bisect_left(c.writers, reader)
            if pos == 0:
                return FROM_STORAGE
            writer = c.writers[pos - 1]
            entry = c.slots[writer]
            if type(entry) is Value:
                return FromVersion(entry.version)
            return Blocked(writer)

    def apply_writes(self, txn: int, inc: int, writes: Iterable[ObjectId]) -> bool:
        """Publish one incarnation's writes; True iff a new location was written."""
        return bool(self.apply_writes_detail(txn, inc, writes))

    def apply_writes_detail(self, txn: int, inc: int, writes: Iterable[ObjectId]) -> set[ObjectId]:
        """Publish writes and return the locations whose visibility changed.

        That is objects that gained a slot for ``txn`` plus objects whose slot
        from the previous incarnation was dropped. A slot already holding a
        marker is not new: readers above it were blocked, never served a
        lower version.
        """
        writes = frozenset(writes)
        with self._lock:
            self._started = True
            if (txn, inc) in self._applied:
                raise MVMemoryError(f"writes of ({txn}, {inc}) already applied")
            self._applied.add((txn, inc))
            previous = self._written.get(txn, frozenset())
            changed = set(previous - writes)
            for o in changed:
                self._drop(o, txn)
            version = Version(txn, inc)
            for o in writes:
                if self._put(o, txn, Value(version)):
                    changed.add(o)
            self._written[txn] = writes
            return changed

    def mark_estimates(self, txn: int) -> frozenset:
        """Turn every value written by ``txn`` into an ESTIMATE; returns those objects."""
        with self._lock:
            written = self._written.get(txn, frozenset())
            for o in written:
                c = self._chains[o]
                if type(c.slots[txn]) is Value:
                    c.slots[txn] = Estimate(txn)
            return written

    def greedy_commit(self, txn: Transaction, writes: Iterable[ObjectId]) -> None:
        """Write an owned-only transaction straight to storage, bypassing the chains."""
        for a in txn.exhaustive_set:
            if self.objects[a.object] is ObjectKind.SHARED:
                raise MVMemoryError(
                    f"transaction {txn.index} touches shared object {a.object}; no greedy commit"
                )
        with self._lock:
            for o in writes:
                self.storage[o] = Version(txn.index, 0)

    def commit_final_state(self) -> dict[ObjectId, Version]:
        with self._lock:
            for o, c in self._chains.items():
                if not c.writers:
                    continue
                for w in c.writers:
                    if type(c.slots[w]) is not Value:
                        raise MVMemoryError(f"object {o} still carries a marker from {w}")
                self.storage[o] = c.slots[c.writers[-1]].version
            return dict(self.storage)

    def entry(self, o: ObjectId, writer: int) -> Entry | None:
        with self._lock:
            c = self._chains.get(o)
            return None if c is None else c.slots.get(writer)
