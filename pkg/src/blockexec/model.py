"""Object data model, transactions and conflict predicates shared by all engines."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

ObjectId = int

GENESIS_WRITER = -1


class ObjectKind(enum.Enum):
    OWNED = "owned"
    SHARED = "shared"
    IMMUTABLE = "immutable"


class AccessKind(enum.Enum):
    READ = "read"
    READ_WRITE = "read_write"
    WRITE = "write"

    @property
    def reads(self) -> bool:
        return self is not AccessKind.WRITE

    @property
    def writes(self) -> bool:
        return self is not AccessKind.READ


class Access(NamedTuple):
    object: ObjectId
    kind: AccessKind


class Version(NamedTuple):
    """A write identity, ordered by writer index then incarnation."""

    writer: int
    incarnation: int = 0


GENESIS = Version(GENESIS_WRITER, 0)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Transaction:
    index: int
    exhaustive_set: tuple[Access, ...]
    used_set: tuple[Access, ...]
    hint_set: tuple[Access, ...] = ()
    duration_ms: float = 1.0
    owned_only: bool = False

    def reads(self) -> list[ObjectId]:
        """Objects read during execution, ascending."""
        return sorted(a.object for a in self.used_set if a.kind.reads)

    def writes(self) -> frozenset[ObjectId]:
        return frozenset(a.object for a in self.used_set if a.kind.writes)

    def hinted_reads(self) -> list[ObjectId]:
        return sorted(a.object for a in self.hint_set if a.kind.reads)

    def hinted_writes(self) -> list[ObjectId]:
        return sorted(a.object for a in self.hint_set if a.kind.writes)


@dataclass
class Block:
    """One epoch of transactions over a fixed object table."""

    objects: list[ObjectKind]
    transactions: list[Transaction]
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.transactions)

    def __iter__(self):
        return iter(self.transactions)

    def __getitem__(self, i: int) -> Transaction:
        return self.transactions[i]

    def validate(self) -> None:
        """Raise ModelError naming the first transaction breaking an invariant."""
        owners: dict[ObjectId, int] = {}
        for pos, t in enumerate(self.transactions):
            where = f"transaction {t.index}"
            if t.index != pos:
                raise ModelError(f"{where}: index does not match block position {pos}")
            if not t.duration_ms > 0:
                raise ModelError(f"{where}: duration_ms must be positive")
            seen = set()
            for a in t.exhaustive_set:
                if a.object in seen:
                    raise ModelError(f"{where}: object {a.object} listed twice")
                seen.add(a.object)
                if not 0 <= a.object < len(self.objects):
                    raise ModelError(f"{where}: unknown object {a.object}")
                kind = self.objects[a.object]
                if kind is ObjectKind.IMMUTABLE and a.kind.writes:
                    raise ModelError(f"{where}: writes immutable object {a.object}")
                if kind is ObjectKind.OWNED:
                    if a.object in owners:
                        raise ModelError(
                            f"{where}: owned object {a.object} already used by "
                            f"transaction {owners[a.object]}"
                        )
                    owners[a.object] = t.index
            if not set(t.used_set) <= set(t.exhaustive_set):
                raise ModelError(f"{where}: used_set is not a subset of exhaustive_set")
            if not set(t.hint_set) <= set(t.used_set):
                raise ModelError(f"{where}: hint_set is not a subset of used_set")
            if t.owned_only != is_owned_only(t, self.objects):
                raise ModelError(f"{where}: owned_only flag disagrees with object kinds")


def conflicts(a: Transaction, b: Transaction) -> bool:
    """True iff the exhaustive sets overlap on an object that either side writes."""
    if a.index == b.index:
        raise ModelError("conflicts() needs two distinct transactions")
    kinds = {acc.object: acc.kind for acc in a.exhaustive_set}
    for acc in b.exhaustive_set:
        other = kinds.get(acc.object)
        if other is not None and (other.writes or acc.kind.writes):
            return True
    return False


def is_owned_only(t: Transaction, objects: list[ObjectKind]) -> bool:
    kinds = [objects[a.object] for a in t.exhaustive_set]
    return ObjectKind.OWNED in kinds and ObjectKind.SHARED not in kinds
