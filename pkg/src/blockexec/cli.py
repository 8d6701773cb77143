"""Command-line harness: generate | run | sweep | verify."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import logging
import statistics
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .engines import Engine, EngineConfig, ProgressTimeout, run_engine
from .oracle import check_run
from .workload import WorkloadError, WorkloadParams, generate_block, load_block, save_block

log = logging.getLogger("blockexec")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_TIMEOUT = 3

ROW_FIELDS = [
    "engine", "workers", "knowledge", "seed", "repeat", "block_size", "duration_ms",
    "tps", "reexecutions", "failed_validations", "greedy_commits", "verified",
]
AGG_FIELDS = [
    "engine", "workers", "knowledge", "runs", "block_size",
    "duration_ms_mean", "duration_ms_std", "tps_mean", "tps_std",
    "reexecutions_mean", "reexecutions_std", "failed_validations_mean",
    "failed_validations_std", "greedy_commits_mean", "verified",
]

# Engines whose behaviour does not depend on hint coverage.
KNOWLEDGE_AGNOSTIC = {Engine.PCC: 100, Engine.SEQUENTIAL: 100}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


@dataclass
class SweepSpec:
    engines: list[str]
    workers_list: list[int]
    knowledge_list: list[int]
    seeds: list[int]
    block_size: int = 1000
    repeats: int = 5
    verify: bool = False
    overrides: dict = field(default_factory=dict)

    def validate(self) -> None:
        for name in ("engines", "workers_list", "knowledge_list", "seeds"):
            if not getattr(self, name):
                raise CliError(f"{name} must not be empty")
        if self.repeats < 1:
            raise CliError("repeats must be ≥ 1")
        for e in self.engines:
            Engine(e)
        if any(w < 1 for w in self.workers_list):
            raise CliError("workers must be ≥ 1")
        if any(not 0 <= k <= 100 for k in self.knowledge_list):
            raise CliError("knowledge must lie in 0..100")

    def cells(self):
        """(engine, workers, knowledge) cells, collapsing axes an engine ignores."""
        seen = set()
        for e, w, k in itertools.product(self.engines, self.workers_list, self.knowledge_list):
            engine = Engine(e)
            if engine in KNOWLEDGE_AGNOSTIC:
                k = KNOWLEDGE_AGNOSTIC[engine]
            if engine is Engine.SEQUENTIAL:
                w = 1
            if (engine, w, k) not in seen:
                seen.add((engine, w, k))
                yield engine, w, k


def _read_config(path) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text()
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if not isinstance(data, dict):
        raise CliError(f"{path}: expected a mapping at top level")
    return data


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


PARAM_FIELDS = {f.name for f in dataclasses.fields(WorkloadParams)}


def workload_params(args, config: dict) -> WorkloadParams:
    values = {k: v for k, v in config.items() if k in PARAM_FIELDS}
    for name in ("block_size", "knowledge", "seed", "owned_fraction"):
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    params = WorkloadParams(**values)
    try:
        params.validate()
    except WorkloadError as e:
        raise CliError(str(e)) from None
    return params


def block_summary(block) -> dict:
    n = len(block)
    hits = Counter(a.object for t in block for a in t.exhaustive_set)
    used = sum(len(t.used_set) for t in block)
    hinted = sum(len(t.hint_set) for t in block)
    return {
        "transactions": n,
        "objects_referenced": len(hits),
        "mean_accesses": sum(len(t.exhaustive_set) for t in block) / n if n else 0.0,
        "mean_duration_ms": sum(t.duration_ms for t in block) / n if n else 0.0,
        "hottest_object": hits.most_common(1)[0][0] if hits else None,
        "hottest_object_txn_share": hits.most_common(1)[0][1] / n if hits else 0.0,
        "hint_coverage": hinted / used if used else 0.0,
        "owned_only": sum(t.owned_only for t in block),
    }


def cmd_generate(args) -> int:
    params = workload_params(args, _read_config(args.params))
    block = generate_block(params)
    save_block(block, args.out)
    print(json.dumps(block_summary(block), indent=2))
    return EXIT_OK


def _load_or_generate(args):
    if getattr(args, "block", None):
        try:
            return load_block(args.block)
        except WorkloadError as e:
            raise CliError(str(e)) from None
    return generate_block(workload_params(args, _read_config(args.params)))


def _run_one(block, engine: Engine, workers: int, verify: bool, seed: int = 0):
    try:
        report = run_engine(block, EngineConfig(engine, workers, seed))
    except ProgressTimeout as e:
        raise CliError(f"watchdog: {e}", EXIT_TIMEOUT) from None
    violations = check_run(block, report) if verify else None
    return report, violations


def cmd_run(args) -> int:
    block = _load_or_generate(args)
    report, violations = _run_one(block, Engine(args.engine), args.workers, args.verify, args.seed or 0)
    out = report.scalars()
    if args.verify:
        out["verified"] = not violations
        out["violations"] = len(violations)
    print(json.dumps(out))
    if violations:
        for v in violations[:20]:
            log.error("violation: %s", v)
        return EXIT_INVALID
    return EXIT_OK


def cmd_verify(args) -> int:
    block = _load_or_generate(args)
    engines = _str_list(args.engine) if args.engine else [e.value for e in Engine]
    status = EXIT_OK
    for name in engines:
        report, violations = _run_one(block, Engine(name), args.workers, True)
        print(json.dumps({"engine": name, "workers": report.workers, "violations": len(violations)}))
        for v in violations[:20]:
            log.error("%s: %s", name, v)
        if violations:
            status = EXIT_INVALID
    return status


def sweep_spec(args, config: dict) -> SweepSpec:
    spec = SweepSpec(
        engines=config.get("engines", [e.value for e in Engine]),
        workers_list=config.get("workers_list", [16]),
        knowledge_list=config.get("knowledge_list", [0, 25, 50, 75, 90, 100]),
        seeds=config.get("seeds", [0, 1, 2, 3, 4]),
        block_size=config.get("block_size", 1000),
        repeats=config.get("repeats", 5),
        verify=config.get("verify", False),
        overrides={k: v for k, v in config.items() if k in PARAM_FIELDS - {"block_size", "knowledge", "seed"}},
    )
    if args.engine:
        spec.engines = _str_list(args.engine)
    if args.workers_list:
        spec.workers_list = _int_list(args.workers_list)
    if args.knowledge_list:
        spec.knowledge_list = _int_list(args.knowledge_list)
    if args.seed_list:
        spec.seeds = _int_list(args.seed_list)
    if args.block_size is not None:
        spec.block_size = args.block_size
    if args.repeats is not None:
        spec.repeats = args.repeats
    if args.verify:
        spec.verify = True
    try:
        spec.validate()
    except ValueError as e:
        raise CliError(str(e)) from None
    return spec


def aggregate(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["engine"], r["workers"], r["knowledge"]), []).append(r)

    def ms(key, rs):
        xs = [float(r[key]) for r in rs]
        return statistics.fmean(xs), (statistics.stdev(xs) if len(xs) > 1 else 0.0)

    out = []
    for (engine, workers, knowledge), rs in groups.items():
        agg = {"engine": engine, "workers": workers, "knowledge": knowledge, "runs": len(rs),
               "block_size": rs[0]["block_size"]}
        for key in ("duration_ms", "tps", "reexecutions", "failed_validations"):
            agg[f"{key}_mean"], agg[f"{key}_std"] = ms(key, rs)
        agg["greedy_commits_mean"] = ms("greedy_commits", rs)[0]
        verified = {r["verified"] for r in rs}
        agg["verified"] = verified.pop() if len(verified) == 1 else "mixed"
        out.append(agg)
    return out


def aggregate_path(out: Path) -> Path:
    return out.with_name(out.stem + "_aggregate" + (out.suffix or ".csv"))


def run_sweep(spec: SweepSpec, out: Path) -> list[dict]:
    """Run the cross product, flushing one CSV row per run."""
    rows = []
    failed = False
    blocks = {}
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=ROW_FIELDS)
        writer.writeheader()
        fh.flush()
        for seed in spec.seeds:
            for engine, workers, knowledge in spec.cells():
                key = (seed, knowledge)
                if key not in blocks:
                    # Blocks are shared by repeats and engines of one seed.
                    blocks = {k: b for k, b in blocks.items() if k[0] == seed}
                    params = WorkloadParams(
                        block_size=spec.block_size, knowledge=knowledge, seed=seed, **spec.overrides
                    )
                    blocks[key] = generate_block(params)
                block = blocks[key]
                for rep in range(spec.repeats):
                    report, violations = _run_one(block, engine, workers, spec.verify, seed)
                    row = {
                        "engine": engine.value, "workers": report.workers, "knowledge": knowledge,
                        "seed": seed, "repeat": rep, "block_size": report.block_size,
                        "duration_ms": f"{report.duration_ms:.3f}", "tps": f"{report.tps:.6f}",
                        "reexecutions": report.reexecutions,
                        "failed_validations": report.failed_validations,
                        "greedy_commits": report.greedy_commits,
                        "verified": (not violations) if spec.verify else "",
                    }
                    writer.writerow(row)
                    fh.flush()
                    rows.append(row)
                    log.info("%s", row)
                    if violations:
                        failed = True
    with open(aggregate_path(out), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=AGG_FIELDS)
        writer.writeheader()
        writer.writerows(aggregate(rows))
    if failed:
        raise CliError("verification failed for at least one run")
    return rows


def cmd_sweep(args) -> int:
    spec = sweep_spec(args, _read_config(args.params))
    run_sweep(spec, Path(args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blockexec", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def workload_flags(sp):
        sp.add_argument("--params", help="JSON/YAML file with workload (and sweep) settings")
        sp.add_argument("--block-size", type=int)
        sp.add_argument("--knowledge", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--owned-fraction", type=float)

    g = sub.add_parser("generate", help="write a block file")
    workload_flags(g)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run one engine once and print a JSON report")
    workload_flags(r)
    r.add_argument("--block", help="block file (otherwise generated from params)")
    r.add_argument("--engine", required=True, choices=[e.value for e in Engine])
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--verify", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run engines and check them against the oracle")
    workload_flags(v)
    v.add_argument("--block")
    v.add_argument("--engine", help="comma-separated engines (default: all)")
    v.add_argument("--workers", type=int, default=4)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="engine x workers x knowledge x seeds, CSV out")
    s.add_argument("--params")
    s.add_argument("--engine", help="comma-separated engines")
    s.add_argument("--workers", dest="workers_list", help="comma-separated worker counts")
    s.add_argument("--knowledge", dest="knowledge_list", help="comma-separated 0..100 values")
    s.add_argument("--seed", dest="seed_list", help="comma-separated seeds")
    s.add_argument("--block-size", type=int)
    s.add_argument("--repeats", type=int)
    s.add_argument("--verify", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (WorkloadError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
