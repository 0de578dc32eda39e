"""Command-line entry point.

Exit status is 0 on success, 2 when inputs or the config fail validation and
1 for any other runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .assignment import (CapacityError, assignment_from_json, assignment_to_json,
                         build_disclosure_table)
from .checkins import FormatError, ingest, read_mapped, write_mapped
from .measures import PropertyContext, PropertyKind, monotonicity_curve
from .metrics import build_report
from .rbac import (SensitivePropertyProfile, bind_dataset, evaluate_profile,
                   generate_workload)
from .vuln import DEFAULT_CROSS, DEFAULT_INTRA, VulnerabilityMatrix, generate_vuln_matrix

log = logging.getLogger("rspap")

OUT_ENV = "RSPAP_OUT_DIR"


class UsageError(ValueError):
    pass


def _out_path(args, default_name: str) -> Path:
    if args.out:
        return Path(args.out)
    base = Path(os.environ.get(OUT_ENV, "."))
    return base / default_name


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc))


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def cmd_ingest(args) -> int:
    with open(args.checkins) as fc, open(args.pois) as fp:
        table, summary = ingest(fc, fp)
    out = _out_path(args, "mapped.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_mapped(table, out)
    print(f"parsed={summary.parsed} skipped={summary.skipped} mapped={summary.mapped} "
          f"dropped={summary.dropped} pois={summary.pois} -> {out}")
    return 0


def cmd_monotonicity(args) -> int:
    table = read_mapped(args.dataset)
    if len(table) == 0:
        raise UsageError("mapped dataset is empty")
    rng = np.random.default_rng(args.seed)
    curves = {}
    for kind in PropertyKind:
        ctx = PropertyContext(table.cells, kind)
        curves[kind] = monotonicity_curve(ctx, args.fractions, args.trials, rng)
    out = _out_path(args, "monotonicity.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fraction", "kld", "mi"])
        for i, f in enumerate(args.fractions):
            w.writerow([repr(f), repr(curves[PropertyKind.KLD][i]), repr(curves[PropertyKind.MI][i])])
    print(f"{len(args.fractions)} fractions x {args.trials} trials -> {out}")
    return 0


def _corpus(args) -> np.ndarray:
    cfg = ex.ExperimentConfig(dataset_path=args.dataset, dataset_size=args.dataset_size,
                              dataset_seed=args.dataset_seed)
    return ex.load_corpus(cfg)


def cmd_gen_workload(args) -> int:
    profile = generate_workload(args.n, args.objects, args.s, ex.stream(args.seed, "workload"))
    if args.property:
        cells = _corpus(args)
        profile = bind_dataset(profile, cells.size, ex.stream(args.seed, "binding"))
        support = np.concatenate([e.entry_ids for e in profile.partitions.values()])
        ctx = PropertyContext(cells, PropertyKind(args.property), support=support)
        profile = evaluate_profile(profile, ctx, args.level)
    out = _out_path(args, "profile.json")
    _write_json(out, profile.to_json())
    print(f"{len(profile.partitions)} partitions, {profile.total_cardinality} objects -> {out}")
    return 0


def cmd_gen_vuln(args) -> int:
    D = generate_vuln_matrix(args.clusters, ex.stream(args.seed, "vulnerability"),
                             tuple(args.intra), tuple(args.cross))
    out = _out_path(args, "vuln.json")
    _write_json(out, D.to_json())
    print(f"m={D.m} clusters={D.cluster_sizes} -> {out}")
    return 0


def _load_pair(args):
    profile = SensitivePropertyProfile.from_json(_read_json(args.profile))
    if not profile.evaluated:
        raise UsageError("profile has no property values; generate it with --property")
    D = VulnerabilityMatrix.from_json(_read_json(args.vuln))
    return profile, build_disclosure_table(profile), D


def cmd_assign(args) -> int:
    profile, table, D = _load_pair(args)
    a = ex.solve(args.solver, table, D, args.budget)
    doc = assignment_to_json(a, table, D, args.solver, args.seed)
    out = _out_path(args, "assignment.json")
    _write_json(out, doc)
    print(f"{args.solver}: total_risk={doc['total_risk']!r} -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    profile, table, D = _load_pair(args)
    a = assignment_from_json(_read_json(args.assignment), D.m)
    if a.n != profile.n:
        raise UsageError(f"assignment covers {a.n} roles, profile has {profile.n}")
    report = build_report(a, table, D, profile)
    out = _out_path(args, "report.json")
    _write_json(out, report.to_json())
    print(f"total_risk={report.total_risk!r} pa={report.pa!r} delta={report.delta!r} di={report.di!r} -> {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = ex.load_config(args.config)
    results = ex.run_sweep(cfg)
    out_dir = Path(args.out) if args.out else Path(os.environ.get(OUT_ENV, "."))
    path = ex.write_outputs(cfg, results, out_dir)
    print(f"{len(results)} runs -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rspap", description="Risk-aware assignment of RBAC roles to VMs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", help=f"output path (default: under ${OUT_ENV} or the working directory)")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("ingest", help="map a check-in log onto POI categories and time slots")
    sp.add_argument("--checkins", required=True)
    sp.add_argument("--pois", required=True)
    common(sp, seed=False)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("monotonicity", help="property value against dataset fraction")
    sp.add_argument("--dataset", required=True, help="mapped check-in CSV")
    sp.add_argument("--fractions", type=_floats, default=[i / 10 for i in range(1, 11)])
    sp.add_argument("--trials", type=int, default=10)
    common(sp)
    sp.set_defaults(func=cmd_monotonicity)

    sp = sub.add_parser("gen-workload", help="Zipfian profile, optionally bound and evaluated")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--objects", type=int, default=30000)
    sp.add_argument("--s", type=float, default=1.2)
    sp.add_argument("--property", choices=[k.value for k in PropertyKind])
    sp.add_argument("--level", type=int, default=3)
    sp.add_argument("--dataset", help="mapped check-in CSV (synthetic corpus when omitted)")
    sp.add_argument("--dataset-size", type=int, default=250000)
    sp.add_argument("--dataset-seed", type=int, default=0)
    common(sp)
    sp.set_defaults(func=cmd_gen_workload)

    sp = sub.add_parser("gen-vuln", help="clustered vulnerability matrix")
    sp.add_argument("--clusters", type=_ints, required=True, help="cluster sizes, e.g. 4,4,2")
    sp.add_argument("--intra", type=_floats, default=list(DEFAULT_INTRA))
    sp.add_argument("--cross", type=_floats, default=list(DEFAULT_CROSS))
    common(sp)
    sp.set_defaults(func=cmd_gen_vuln)

    sp = sub.add_parser("assign", help="solve one instance")
    sp.add_argument("--profile", required=True)
    sp.add_argument("--vuln", required=True)
    sp.add_argument("--solver", choices=list(ex.SOLVER_NAMES), default="tdh")
    sp.add_argument("--budget", type=int, default=ex.EXACT_BUDGET)
    common(sp)
    sp.set_defaults(func=cmd_assign)

    sp = sub.add_parser("evaluate", help="risk report for an assignment")
    sp.add_argument("--profile", required=True)
    sp.add_argument("--vuln", required=True)
    sp.add_argument("--assignment", required=True)
    common(sp, seed=False)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep", help="run every combination in a config file")
    sp.add_argument("--config", required=True)
    common(sp, seed=False)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ex.ConfigError, UsageError, FormatError, CapacityError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort exit status
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
