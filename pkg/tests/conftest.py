import time

import pytest

from blockexec.model import Access, AccessKind, Block, ObjectKind, Transaction

R, RW, W = AccessKind.READ, AccessKind.READ_WRITE, AccessKind.WRITE


def txn(index, *accesses, used=None, hints=(), duration_ms=1.0, objects=None):
    """Build a transaction from (object, kind) pairs; used defaults to all."""
    ex = tuple(Access(o, k) for o, k in accesses)
    us = ex if used is None else tuple(Access(o, k) for o, k in used)
    hs = tuple(Access(o, k) for o, k in hints)
    owned = False
    if objects is not None:
        kinds = [objects[a.object] for a in ex]
        owned = ObjectKind.OWNED in kinds and ObjectKind.SHARED not in kinds
    return Transaction(index, ex, us, hs, duration_ms, owned)


def shared_block(txns, n_objects=8):
    return Block([ObjectKind.SHARED] * n_objects, list(txns))


def scaled_sleep(factor):
    def sleep(s):
        time.sleep(s * factor)

    return sleep


@pytest.fixture
def no_sleep():
    return lambda s: None


# One line per acceptance criterion, printed after the run.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
