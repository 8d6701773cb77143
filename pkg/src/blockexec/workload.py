"""Seeded synthetic high-contention blocks and their on-disk format.

Per-transaction draw order (normative for reproducibility):
owned coin (only when owned_fraction > 0), access count, objects, access
kinds, usage coins, hint coins, duration.
"""

from __future__ import annotations

import bisect
import dataclasses
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .model import Access, AccessKind, Block, ModelError, ObjectKind, Transaction

FORMAT = "blockexec.block/1"


class WorkloadError(ValueError):
    pass


@dataclass
class WorkloadParams:
    block_size: int = 1000
    n_shared_objects: int = 50
    count_mu: float = 0.5
    count_sigma: float = 0.5
    zipf_s: float = 2.0
    p_read: float = 0.35
    p_readwrite: float = 0.4225
    p_write: float = 0.2275
    p_use: float = 0.9
    knowledge: int = 0
    duration_mu: float = 2.0
    duration_sigma: float = 0.5
    owned_fraction: float = 0.0
    n_immutable_objects: int = 0
    p_immutable: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.block_size < 1:
            raise WorkloadError("block_size must be ≥ 1")
        if self.n_shared_objects < 1:
            raise WorkloadError("n_shared_objects must be ≥ 1")
        for name in ("p_read", "p_readwrite", "p_write", "p_use", "owned_fraction", "p_immutable"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise WorkloadError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.p_read + self.p_readwrite + self.p_write - 1.0) > 1e-9:
            raise WorkloadError("p_read + p_readwrite + p_write must equal 1")
        if not 0 <= self.knowledge <= 100:
            raise WorkloadError("knowledge must lie in 0..100")
        if self.count_sigma <= 0 or self.duration_sigma <= 0 or self.zipf_s <= 0:
            raise WorkloadError("sigmas and zipf_s must be positive")
        if self.p_immutable > 0 and self.n_immutable_objects < 1:
            raise WorkloadError("p_immutable > 0 needs n_immutable_objects ≥ 1")
        if not 0 <= self.seed < 2**64:
            raise WorkloadError("seed must be a 64-bit unsigned integer")

    def replace(self, **changes) -> "WorkloadParams":
        return dataclasses.replace(self, **changes)


class Rng:
    """Seeded uniform source with Box-Muller normals (both deviates used in order)."""

    def __init__(self, seed: int):
        self._r = random.Random(seed)
        self._spare: float | None = None

    def uniform(self) -> float:
        return self._r.random()

    def normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = 1.0 - self._r.random()  # (0, 1]
        u2 = self._r.random()
        radius = math.sqrt(-2.0 * math.log(u1))
        self._spare = radius * math.sin(2.0 * math.pi * u2)
        return radius * math.cos(2.0 * math.pi * u2)


def sample_lognormal(mu: float, sigma: float, rng: Rng) -> float:
    if sigma <= 0:
        raise WorkloadError("sigma must be positive")
    return math.exp(mu + sigma * rng.normal())


def zipf_pmf(n: int, s: float, k: int) -> float:
    if not 1 <= k <= n or s <= 0:
        raise WorkloadError(f"zipf_pmf needs 1 ≤ k ≤ n and s > 0 (n={n}, s={s}, k={k})")
    return k ** -s / sum(j ** -s for j in range(1, n + 1))


class ZipfSampler:
    """Inverse-CDF sampling over a precomputed cumulative pmf."""

    def __init__(self, n: int, s: float):
        if n < 1 or s <= 0:
            raise WorkloadError("Zipf needs n ≥ 1 and s > 0")
        weights = [k ** -s for k in range(1, n + 1)]
        total = math.fsum(weights)
        acc, cdf = 0.0, []
        for w in weights:
            acc += w / total
            cdf.append(acc)
        cdf[-1] = 1.0
        self.n = n
        self._cdf = cdf

    def __call__(self, rng: Rng) -> int:
        return bisect.bisect_right(self._cdf, rng.uniform()) + 1


def sample_zipf(n: int, s: float, rng: Rng) -> int:
    return ZipfSampler(n, s)(rng)


def round_count(x: float, n: int) -> int:
    """Round half up, then clamp to [1, n]."""
    return max(1, min(n, math.floor(x + 0.5)))


def _kind(u: float, p: WorkloadParams) -> AccessKind:
    if u < p.p_read:
        return AccessKind.READ
    if u < p.p_read + p.p_readwrite:
        return AccessKind.READ_WRITE
    return AccessKind.WRITE


def generate_block(params: WorkloadParams) -> Block:
    params.validate()
    rng = Rng(params.seed)
    zipf = ZipfSampler(params.n_shared_objects, params.zipf_s)
    hint_p = params.knowledge / 100.0
    n_shared = params.n_shared_objects
    objects = [ObjectKind.SHARED] * n_shared + [ObjectKind.IMMUTABLE] * params.n_immutable_objects
    txns = []
    for index in range(params.block_size):
        if params.owned_fraction > 0 and rng.uniform() < params.owned_fraction:
            obj = len(objects)
            objects.append(ObjectKind.OWNED)
            exhaustive = [Access(obj, AccessKind.READ_WRITE)]
            used = list(exhaustive)
        else:
            count = round_count(sample_lognormal(params.count_mu, params.count_sigma, rng), n_shared)
            chosen: list[int] = []
            while len(chosen) < count:
                o = zipf(rng) - 1
                if o not in chosen:
                    chosen.append(o)
            kinds = [_kind(rng.uniform(), params) for _ in chosen]
            exhaustive = [Access(o, k) for o, k in zip(chosen, kinds)]
            if params.p_immutable > 0:
                exhaustive += _immutable_reads(params, rng, n_shared)
            used = []
            while not used:
                used = [a for a in exhaustive if rng.uniform() < params.p_use]
        hints = [a for a in used if rng.uniform() < hint_p]
        duration = sample_lognormal(params.duration_mu, params.duration_sigma, rng)
        owned_only = any(objects[a.object] is ObjectKind.OWNED for a in exhaustive) and not any(
            objects[a.object] is ObjectKind.SHARED for a in exhaustive
        )
        txns.append(
            Transaction(index, tuple(exhaustive), tuple(used), tuple(hints), duration, owned_only)
        )
    return Block(objects, txns, dataclasses.asdict(params))


def _immutable_reads(params: WorkloadParams, rng: Rng, first_id: int) -> list[Access]:
    if rng.uniform() >= params.p_immutable:
        return []
    o = first_id + min(int(rng.uniform() * params.n_immutable_objects), params.n_immutable_objects - 1)
    return [Access(o, AccessKind.READ)]


# ---------------------------------------------------------------------------
# Block files

BLOCK_SCHEMA = {
    "type": "object",
    "required": ["format", "params", "objects", "transactions"],
    "properties": {
        "format": {"const": FORMAT},
        "params": {"type": "object"},
        "objects": {"type": "array", "items": {"enum": [k.value for k in ObjectKind]}},
        "transactions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "accesses", "duration_ms", "owned_only"],
                "additionalProperties": False,
                "properties": {
                    "index": {"type": "integer", "minimum": 0},
                    "duration_ms": {"type": "number", "exclusiveMinimum": 0},
                    "owned_only": {"type": "boolean"},
                    "accesses": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["object", "kind", "used", "hinted"],
                            "additionalProperties": False,
                            "properties": {
                                "object": {"type": "integer", "minimum": 0},
                                "kind": {"enum": [k.value for k in AccessKind]},
                                "used": {"type": "boolean"},
                                "hinted": {"type": "boolean"},
                            },
                        },
                    },
                },
            },
        },
    },
}


def block_to_dict(block: Block) -> dict:
    txns = []
    for t in block:
        used, hinted = set(t.used_set), set(t.hint_set)
        txns.append(
            {
                "index": t.index,
                "accesses": [
                    {"object": a.object, "kind": a.kind.value, "used": a in used, "hinted": a in hinted}
                    for a in t.exhaustive_set
                ],
                "duration_ms": t.duration_ms,
                "owned_only": t.owned_only,
            }
        )
    return {
        "format": FORMAT,
        "params": block.params,
        "objects": [k.value for k in block.objects],
        "transactions": txns,
    }


def block_from_dict(doc: dict) -> Block:
    try:
        jsonschema.validate(doc, BLOCK_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise WorkloadError(f"block file invalid at {where}: {e.message}") from None
    txns = []
    for t in doc["transactions"]:
        exhaustive, used, hints = [], [], []
        for a in t["accesses"]:
            acc = Access(a["object"], AccessKind(a["kind"]))
            exhaustive.append(acc)
            if a["hinted"] and not a["used"]:
                raise WorkloadError(
                    f"transaction {t['index']}: object {acc.object} is hinted but not used "
                    "(hint_set must be a subset of used_set)"
                )
            if a["used"]:
                used.append(acc)
            if a["hinted"]:
                hints.append(acc)
        txns.append(
            Transaction(t["index"], tuple(exhaustive), tuple(used), tuple(hints), t["duration_ms"], t["owned_only"])
        )
    block = Block([ObjectKind(k) for k in doc["objects"]], txns, doc["params"])
    try:
        block.validate()
    except ModelError as e:
        raise WorkloadError(str(e)) from None
    return block


def save_block(block: Block, path) -> None:
    Path(path).write_text(json.dumps(block_to_dict(block), indent=1) + "\n")


def load_block(path) -> Block:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise WorkloadError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    return block_from_dict(doc)
