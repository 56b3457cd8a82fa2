"""Command-line entry points: simulate, audit, report.

Experiments are described by a JSON manifest so a full run is reproducible
from one file plus a seed. The audit command exits nonzero when any cell
whose prediction says "holds" comes back inconsistent, so CI pipelines can
gate on it.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

from . import metrics as metrics_mod
from .audit import AuditConfig, run_audit, validate_report
from .data import read_csv, write_csv
from .dgp import DgpSpec, Family, Selection, preset, sample, sample_selected
from .learner import FitConfig
from .metrics import MetricSpec

MANIFEST_SCHEMA_VERSION = 1

_METRIC_FACTORIES = {
    "log_loss": metrics_mod.log_loss,
    "auc_roc": metrics_mod.auc_roc,
    "sensitivity": metrics_mod.sensitivity,
    "specificity": metrics_mod.specificity,
    "precision": metrics_mod.precision,
    "net_benefit": metrics_mod.net_benefit,
    "classification_rate": metrics_mod.classification_rate,
}


@dataclass
class ExperimentManifest:
    dgp: Optional[DgpSpec] = None
    train_csv: Optional[str] = None
    test_csv: Optional[str] = None
    columns: Optional[dict] = None
    n_train: int = 50_000
    n_test: int = 20_000
    policies: tuple = ("agnostic", "aware", "stratified")
    metrics: tuple = tuple(f.key for f in metrics_mod.DEFAULT_METRICS)
    control_vars: tuple = ("x", "y", "r")
    weight_scheme: str = "pop_to_subgroup"
    replicates: int = 10_000
    ci_level: float = 0.95
    seed: int = 0
    oracle: bool = False
    transform: str = "spline"
    threads: int = 0   # 0 = one worker per available core

    def metric_specs(self) -> tuple[MetricSpec, ...]:
        return tuple(_METRIC_FACTORIES[name]() for name in self.metrics)

    def audit_config(self) -> AuditConfig:
        return AuditConfig(
            n_train=self.n_train,
            n_test=self.n_test,
            seed=self.seed,
            policies=tuple(self.policies),
            metrics=self.metric_specs(),
            control_vars=tuple(self.control_vars),
            replicates=self.replicates,
            ci_level=self.ci_level,
            fit=FitConfig(transform=self.transform, seed=self.seed),
            oracle=self.oracle,
            threads=self.threads or (os.cpu_count() or 1),
        )


def load_manifest(path: str) -> ExperimentManifest:
    with open(path) as fh:
        obj = json.load(fh)
    version = obj.get("schema_version", MANIFEST_SCHEMA_VERSION)
    if version != MANIFEST_SCHEMA_VERSION:
        raise ValueError(f"unsupported manifest schema_version {version}")
    manifest = ExperimentManifest()
    if "dgp" in obj and obj["dgp"] is not None:
        block = obj["dgp"]
        if "preset" in block:
            manifest.dgp = preset(
                Family(block["preset"]), Selection(block.get("selection", "none"))
            )
        elif "spec" in block:
            manifest.dgp = DgpSpec.from_json(block["spec"])
        else:
            raise ValueError("dgp block needs either 'preset' or 'spec'")
    if "data" in obj and obj["data"] is not None:
        block = obj["data"]
        manifest.train_csv = block.get("train_csv")
        manifest.test_csv = block.get("test_csv")
        manifest.columns = block.get("columns")
        if manifest.columns is None:
            raise ValueError("external data requires a 'columns' mapping")
        for key in ("x", "a", "y"):
            if key not in manifest.columns:
                raise ValueError(f"external column mapping is missing {key!r}")
    if manifest.dgp is None and manifest.train_csv is None:
        raise ValueError("manifest must provide a dgp block or external data paths")
    for name in (
        "n_train", "n_test", "replicates", "ci_level", "seed", "oracle",
        "weight_scheme", "transform", "threads",
    ):
        if name in obj:
            setattr(manifest, name, obj[name])
    for name in ("policies", "metrics", "control_vars"):
        if name in obj:
            setattr(manifest, name, tuple(obj[name]))
    unknown = [m for m in manifest.metrics if m not in _METRIC_FACTORIES]
    if unknown:
        raise ValueError(f"unknown metrics {unknown}")
    if manifest.weight_scheme != "pop_to_subgroup":
        raise ValueError(
            "the audit pipeline maps the population onto each subgroup; "
            f"weight scheme {manifest.weight_scheme!r} is library-only"
        )
    if manifest.n_train <= 0 or manifest.n_test <= 0:
        raise ValueError("sample sizes must be positive")
    return manifest


def _read_external(manifest: ExperimentManifest):
    cols = manifest.columns
    kwargs = dict(
        x_columns=cols["x"],
        a_column=cols["a"],
        y_column=cols["y"],
        s_column=cols.get("s"),
    )
    train = read_csv(manifest.train_csv, **kwargs)
    test = read_csv(manifest.test_csv, **kwargs)
    return train, test


def cmd_simulate(manifest: ExperimentManifest, out_dir: str) -> int:
    if manifest.dgp is None:
        raise ValueError("simulate requires a dgp block")
    os.makedirs(out_dir, exist_ok=True)
    spec = manifest.dgp
    if spec.selection is not Selection.NONE:
        train = sample_selected(spec, manifest.n_train, 2 * manifest.seed)
    else:
        train = sample(spec, manifest.n_train, 2 * manifest.seed)
    test = sample(spec, manifest.n_test, 2 * manifest.seed + 1)
    write_csv(train, os.path.join(out_dir, "train.csv"))
    write_csv(test, os.path.join(out_dir, "test.csv"))
    sidecar = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "spec": spec.to_json(),
        "seed": manifest.seed,
        "n_train": manifest.n_train,
        "n_test": manifest.n_test,
    }
    with open(os.path.join(out_dir, "simulation.json"), "w") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
    print(f"wrote train.csv ({train.n} rows), test.csv ({test.n} rows) to {out_dir}")
    return 0


def _write_report_files(report_obj: dict, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report_obj, fh, sort_keys=True, indent=2)
    _write_cells_csv(report_obj, os.path.join(out_dir, "cells.csv"))
    _write_comparisons_csv(report_obj, os.path.join(out_dir, "comparisons.csv"))
    _write_calibration_csv(report_obj, os.path.join(out_dir, "calibration.csv"))


def _write_cells_csv(report_obj: dict, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "setting", "policy", "control", "metric", "subgroup",
                "subgroup_value", "weighted_value", "t", "t_lower", "t_upper",
                "n_eff", "prediction", "verdict",
            ]
        )
        for cell in report_obj["cells"]:
            writer.writerow(
                [
                    cell["setting"], cell["policy"], cell["control"], cell["metric"],
                    cell["subgroup"],
                    cell["subgroup_estimate"]["point"],
                    cell["weighted_estimate"]["point"],
                    cell["t_statistic"]["point"],
                    cell["t_statistic"]["lower"],
                    cell["t_statistic"]["upper"],
                    cell["n_eff"], cell["prediction"], cell["verdict"],
                ]
            )


def _write_comparisons_csv(report_obj: dict, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["policy_a", "policy_b", "metric", "subgroup",
             "delta", "delta_lower", "delta_upper", "expected", "verdict"]
        )
        for comp in report_obj["comparisons"]:
            writer.writerow(
                [
                    comp["policy_a"], comp["policy_b"], comp["metric"], comp["subgroup"],
                    comp["delta"]["point"], comp["delta"]["lower"], comp["delta"]["upper"],
                    comp["expected"], comp["verdict"],
                ]
            )


def _write_calibration_csv(report_obj: dict, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["policy", "subgroup", "bin", "mean_score", "mean_outcome",
             "lower", "upper", "count", "violations", "prediction"]
        )
        for entry in report_obj["calibration"]:
            curve = entry["curve"]
            for b in range(len(curve["count"])):
                writer.writerow(
                    [
                        entry["policy"], entry["subgroup"], b,
                        curve["mean_score"][b], curve["mean_outcome"][b],
                        curve["lower"][b], curve["upper"][b], curve["count"][b],
                        entry["violations"], entry["prediction"],
                    ]
                )


def cmd_audit(manifest: ExperimentManifest, out_dir: str) -> int:
    config = manifest.audit_config()
    if manifest.dgp is not None:
        report = run_audit(manifest.dgp, config)
    else:
        train, test = _read_external(manifest)
        report = run_audit(None, config, train=train, test=test)
    report_obj = report.to_json()
    validate_report(report_obj)
    _write_report_files(report_obj, out_dir)
    counts = report.verdict_counts()
    print(f"report written to {os.path.join(out_dir, 'report.json')}")
    print(
        "verdicts: "
        + ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    )
    if report.holds_inconsistent():
        print("FAIL: at least one cell predicted to hold is inconsistent", file=sys.stderr)
        return 1
    return 0


def cmd_report(report_path: str, out_dir: Optional[str]) -> int:
    with open(report_path) as fh:
        report_obj = json.load(fh)
    validate_report(report_obj)
    counts = {"consistent": 0, "inconsistent": 0, "inconclusive": 0, "unscored": 0}
    for cell in report_obj["cells"]:
        counts[cell["verdict"] or "unscored"] += 1
    print(f"setting: {report_obj['setting']}  selection: {report_obj['selection']}")
    print(
        f"seed={report_obj['seed']} n_train={report_obj['n_train']} "
        f"n_test={report_obj['n_test']} replicates={report_obj['replicates']}"
    )
    print("verdicts: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    header = f"{'policy':<11} {'V':<2} {'metric':<19} {'subgroup':<9} {'T_a':>10} {'CI':>24} {'pred':>6} {'verdict':>13}"
    print(header)
    print("-" * len(header))
    for cell in report_obj["cells"]:
        t = cell["t_statistic"]
        tval = "nan" if t["point"] is None else f"{t['point']:+.4f}"
        ci = (
            "undefined"
            if t["lower"] is None
            else f"[{t['lower']:+.4f}, {t['upper']:+.4f}]"
        )
        print(
            f"{cell['policy']:<11} {cell['control']:<2} {cell['metric']:<19} "
            f"{cell['subgroup']:<9} {tval:>10} {ci:>24} "
            f"{str(cell['prediction']):>6} {str(cell['verdict']):>13}"
        )
    for comp in report_obj["comparisons"]:
        d = comp["delta"]
        dval = "nan" if d["point"] is None else f"{d['point']:+.5f}"
        print(
            f"compare {comp['policy_a']} - {comp['policy_b']} {comp['metric']:<19} "
            f"{comp['subgroup']:<9} {dval} "
            f"[{d['lower']}, {d['upper']}] {comp['expected']} {comp['verdict']}"
        )
    if out_dir:
        _write_report_files(report_obj, out_dir)
        print(f"plot-data CSVs written to {out_dir}")
    return 0


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="shiftaudit",
        description="simulate subgroup-shift settings and audit model evaluation stability",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write train/test CSVs for a manifest")
    p_sim.add_argument("--manifest", required=True)
    p_sim.add_argument("--out", default="out")
    p_sim.add_argument("--seed", type=int, default=None)

    p_audit = sub.add_parser("audit", help="run the controlled evaluation pipeline")
    p_audit.add_argument("--manifest", required=True)
    p_audit.add_argument("--out", default="out")
    p_audit.add_argument("--seed", type=int, default=None)
    p_audit.add_argument("--threads", type=int, default=None)
    p_audit.add_argument("--replicates", type=int, default=None)

    p_rep = sub.add_parser("report", help="render a report JSON as text and CSVs")
    p_rep.add_argument("report", help="path to report.json")
    p_rep.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    if args.command == "report":
        return cmd_report(args.report, args.out)

    manifest = load_manifest(args.manifest)
    if args.seed is not None:
        manifest.seed = args.seed
    if args.command == "audit":
        if args.threads is not None:
            manifest.threads = args.threads
        if args.replicates is not None:
            manifest.replicates = args.replicates
        return cmd_audit(manifest, args.out)
    return cmd_simulate(manifest, args.out)


if __name__ == "__main__":
    sys.exit(main())
