"""Seeded experiment runs and parameter sweeps.

Each run derives all of its randomness from its own seed through named
streams (workload, binding, vulnerabilities), so changing one ingredient of
a run never perturbs the others.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assignment import (EXACT_BUDGET, Assignment, DisclosureTable, build_disclosure_table,
                         solve_exact, solve_nbh, solve_tdh)
from .checkins import read_mapped
from .measures import PropertyContext, PropertyKind
from .metrics import RiskReport, build_report
from .rbac import (SensitivePropertyProfile, bind_dataset, classify_sensitivity,
                   evaluate_profile, generate_workload)
from .synthetic import synthetic_table
from .vuln import (DEFAULT_CROSS, DEFAULT_INTRA, MAX_CLUSTER_SIZE, MAX_CLUSTERS,
                   VulnerabilityMatrix, even_cluster_sizes, generate_vuln_matrix)

CSV_HEADER = ["run_id", "solver", "n", "m", "s", "class", "property", "seed",
              "total_risk", "pa", "delta", "di", "runtime_ms"]

SOLVER_NAMES = ("tdh", "nbh", "exact")


class ConfigError(ValueError):
    """Every problem found in a config, reported together."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid config:\n  " + "\n  ".join(problems))
        self.problems = problems


def stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


@dataclass
class ExperimentConfig:
    n: list = field(default_factory=lambda: [30])
    cluster_sizes: list = field(default_factory=lambda: [[10]])
    s: list = field(default_factory=lambda: [1.2])
    object_count: int = 30000
    truncation_level: int = 3
    property_kind: list = field(default_factory=lambda: ["KLD"])
    seeds: list = field(default_factory=lambda: [0])
    dataset_path: str | None = None
    dataset_size: int = 250000
    dataset_seed: int = 0
    intra_vm_range: list = field(default_factory=lambda: list(DEFAULT_INTRA))
    cross_vm_range: list = field(default_factory=lambda: list(DEFAULT_CROSS))
    solvers: list = field(default_factory=lambda: ["tdh", "nbh"])
    exact_budget: int = EXACT_BUDGET
    record_runtime: bool = False
    write_artifacts: bool = False

    @property
    def points(self):
        return list(itertools.product(self.n, self.cluster_sizes, self.s, self.property_kind))


_KNOWN = set(ExperimentConfig.__dataclass_fields__) | {"m"}


def _listify(v):
    return v if isinstance(v, list) else [v]


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a config document, collecting every problem before failing."""
    problems = []
    if not isinstance(doc, dict):
        raise ConfigError(["config must be a JSON object"])
    for key in sorted(set(doc) - _KNOWN):
        problems.append(f"unknown key {key!r}")
    cfg = ExperimentConfig()

    def ints(key, lo):
        vals = _listify(doc[key])
        if not vals:
            problems.append(f"{key}: sweep list is empty")
        for v in vals:
            if not _is_int(v) or v < lo:
                problems.append(f"{key}: {v!r} is not an integer >= {lo}")
        return vals

    if "n" in doc:
        cfg.n = ints("n", 1)
    if "m" in doc and "cluster_sizes" in doc:
        problems.append("give either m or cluster_sizes, not both")
    if "m" in doc:
        cfg.cluster_sizes = []
        for m in ints("m", 1):
            if _is_int(m) and m >= 1:
                try:
                    cfg.cluster_sizes.append(even_cluster_sizes(m))
                except ValueError as exc:
                    problems.append(f"m: {exc}")
    if "cluster_sizes" in doc:
        cs = doc["cluster_sizes"]
        if isinstance(cs, list) and cs and all(_is_int(x) for x in cs):
            cs = [cs]
        if not isinstance(cs, list) or not cs:
            problems.append("cluster_sizes: expected a non-empty list of cluster sizes or a list of such lists")
            cs = []
        for sizes in cs:
            if (not isinstance(sizes, list) or not 1 <= len(sizes) <= MAX_CLUSTERS
                    or not all(_is_int(x) and 1 <= x <= MAX_CLUSTER_SIZE for x in sizes)):
                problems.append(f"cluster_sizes: {sizes!r} must hold 1..{MAX_CLUSTERS} sizes in 1..{MAX_CLUSTER_SIZE}")
        cfg.cluster_sizes = cs
    if "s" in doc:
        cfg.s = _listify(doc["s"])
        if not cfg.s:
            problems.append("s: sweep list is empty")
        for v in cfg.s:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v >= 1:
                problems.append(f"s: {v!r} is not a number >= 1")
        cfg.s = [float(v) for v in cfg.s if isinstance(v, (int, float)) and not isinstance(v, bool)]
    for key, lo in (("object_count", 1), ("dataset_size", 1), ("dataset_seed", 0), ("exact_budget", 1)):
        if key in doc:
            if not _is_int(doc[key]) or doc[key] < lo:
                problems.append(f"{key}: {doc[key]!r} is not an integer >= {lo}")
            else:
                setattr(cfg, key, doc[key])
    if "truncation_level" in doc:
        v = doc["truncation_level"]
        if not _is_int(v) or not 1 <= v <= 3:
            problems.append(f"truncation_level: {v!r} must be 1, 2 or 3")
        else:
            cfg.truncation_level = v
    if "property_kind" in doc:
        kinds = _listify(doc["property_kind"])
        if not kinds:
            problems.append("property_kind: sweep list is empty")
        for k in kinds:
            if k not in ("KLD", "MI"):
                problems.append(f"property_kind: {k!r} is not KLD or MI")
        cfg.property_kind = kinds
    if "seeds" in doc:
        cfg.seeds = ints("seeds", 0)
        if len(set(map(repr, cfg.seeds))) != len(cfg.seeds):
            problems.append("seeds: duplicates")
    if "dataset_path" in doc:
        v = doc["dataset_path"]
        if v is not None and not isinstance(v, str):
            problems.append("dataset_path: expected a string or null")
        cfg.dataset_path = v
    for key in ("intra_vm_range", "cross_vm_range"):
        if key in doc:
            v = doc[key]
            if (not isinstance(v, list) or len(v) != 2
                    or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)
                    or not 0 < v[0] <= v[1] <= 1):
                problems.append(f"{key}: {v!r} must be [lo, hi] with 0 < lo <= hi <= 1")
            else:
                setattr(cfg, key, [float(x) for x in v])
    if (isinstance(cfg.cross_vm_range, list) and isinstance(cfg.intra_vm_range, list)
            and cfg.cross_vm_range[1] >= cfg.intra_vm_range[0]):
        problems.append("cross_vm_range must lie strictly below intra_vm_range")
    if "solvers" in doc:
        cfg.solvers = _listify(doc["solvers"])
        if not cfg.solvers:
            problems.append("solvers: sweep list is empty")
        for v in cfg.solvers:
            if v not in SOLVER_NAMES:
                problems.append(f"solvers: {v!r} is not one of {', '.join(SOLVER_NAMES)}")
    for key in ("record_runtime", "write_artifacts"):
        if key in doc:
            if not isinstance(doc[key], bool):
                problems.append(f"{key}: expected true or false")
            else:
                setattr(cfg, key, doc[key])
    if "exact" in cfg.solvers:
        for n in cfg.n:
            for sizes in cfg.cluster_sizes:
                if _is_int(n) and isinstance(sizes, list) and all(_is_int(x) for x in sizes):
                    m = sum(sizes)
                    if m**n > cfg.exact_budget:
                        problems.append(f"exact solver: m^n = {m}^{n} exceeds budget {cfg.exact_budget}")
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: not valid JSON ({exc})"]) from exc
    return parse_config(doc)


def load_corpus(cfg: ExperimentConfig) -> np.ndarray:
    """Cell indices of the check-in corpus the profiles draw records from."""
    if cfg.dataset_path:
        table = read_mapped(cfg.dataset_path)
    else:
        table = synthetic_table(cfg.dataset_size, stream(cfg.dataset_seed, "corpus"))
    if len(table) == 0:
        raise ValueError("check-in corpus is empty")
    return table.cells


@dataclass
class Instance:
    profile: SensitivePropertyProfile
    table: DisclosureTable


def build_instance(n: int, s: float, kind: str, seed: int, cells: np.ndarray,
                   object_count: int, level: int = 3) -> Instance:
    skeleton = generate_workload(n, object_count, s, stream(seed, "workload"))
    bound = bind_dataset(skeleton, cells.size, stream(seed, "binding"))
    support = np.concatenate([e.entry_ids for e in bound.partitions.values()])
    ctx = PropertyContext(cells, PropertyKind(kind), support=support)
    profile = evaluate_profile(bound, ctx, level)
    return Instance(profile, build_disclosure_table(profile))


def build_matrix(cluster_sizes, seed: int, cfg: ExperimentConfig) -> VulnerabilityMatrix:
    return generate_vuln_matrix(cluster_sizes, stream(seed, "vulnerability"),
                                tuple(cfg.intra_vm_range), tuple(cfg.cross_vm_range))


def solve(name: str, table: DisclosureTable, D: VulnerabilityMatrix, budget=EXACT_BUDGET) -> Assignment:
    if name == "tdh":
        return solve_tdh(table, D)
    if name == "nbh":
        return solve_nbh(table, D)
    if name == "exact":
        return solve_exact(table, D, budget)[0]
    raise ValueError(f"unknown solver {name!r}")


def run_id(n, sizes, s, kind, seed, solver) -> str:
    clusters = "-".join(str(x) for x in sizes)
    return f"n{n:04d}_m{sum(sizes):03d}_c{clusters}_s{s:.2f}_{kind}_seed{seed:08d}_{solver}"


@dataclass
class RunResult:
    run_id: str
    solver: str
    n: int
    m: int
    s: float
    kind: str
    seed: int
    assignment: Assignment
    report: RiskReport
    runtime_ms: float

    def row(self, with_runtime: bool) -> list[str]:
        r = self.report
        return [self.run_id, self.solver, str(self.n), str(self.m), repr(self.s),
                classify_sensitivity(self.s).value, self.kind, str(self.seed),
                repr(r.total_risk), repr(r.pa), _fmt(r.delta), _fmt(r.di),
                f"{self.runtime_ms:.3f}" if with_runtime else ""]


def _fmt(v):
    return "" if v is None else repr(float(v))


def run_sweep(cfg: ExperimentConfig, cells: np.ndarray | None = None) -> list[RunResult]:
    """Every (n, clusters, s, property, seed, solver) run, sorted by run id."""
    if cells is None:
        cells = load_corpus(cfg)
    results = []
    for n, s, kind, seed in itertools.product(cfg.n, cfg.s, cfg.property_kind, cfg.seeds):
        inst = build_instance(n, s, kind, seed, cells, cfg.object_count, cfg.truncation_level)
        for sizes in cfg.cluster_sizes:
            D = build_matrix(sizes, seed, cfg)
            for solver in cfg.solvers:
                t0 = time.perf_counter()
                a = solve(solver, inst.table, D, cfg.exact_budget)
                ms = (time.perf_counter() - t0) * 1000.0
                rep = build_report(a, inst.table, D, inst.profile)
                results.append(RunResult(run_id(n, sizes, s, kind, seed, solver), solver, n,
                                         sum(sizes), s, kind, seed, a, rep, ms))
    results.sort(key=lambda r: r.run_id)
    return results


def results_csv(results: list[RunResult], with_runtime: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        w.writerow(r.row(with_runtime))
    return buf.getvalue()


def write_outputs(cfg: ExperimentConfig, results: list[RunResult], out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "runs.csv"
    path.write_text(results_csv(results, cfg.record_runtime))
    with open(out / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run_id", "runtime_ms"])
        for r in results:
            w.writerow([r.run_id, f"{r.runtime_ms:.3f}"])
    if cfg.write_artifacts:
        runs = out / "runs"
        runs.mkdir(exist_ok=True)
        for r in results:
            doc = {"assignment": {"heuristic": r.solver, "seed": r.seed,
                                  "vm_of": list(r.assignment.vm_of),
                                  "total_risk": r.report.total_risk,
                                  "per_role_risk": r.report.per_role_risk},
                   "report": r.report.to_json()}
            (runs / f"{r.run_id}.json").write_text(json.dumps(doc, sort_keys=True))
    return path


def mean_by(results, key, field_name, solver=None):
    """Mean of a report field grouped by ``key(result)``."""
    groups: dict = {}
    for r in results:
        if solver is not None and r.solver != solver:
            continue
        v = getattr(r.report, field_name)
        if v is None or (isinstance(v, float) and math.isnan(v)):
            continue
        groups.setdefault(key(r), []).append(v)
    return {k: float(np.mean(v)) for k, v in sorted(groups.items())}


__all__ = ["CSV_HEADER", "ConfigError", "ExperimentConfig", "Instance", "RunResult",
           "build_instance", "build_matrix", "load_config", "load_corpus", "parse_config",
           "results_csv", "run_id", "run_sweep", "solve", "stream", "write_outputs", "mean_by"]
