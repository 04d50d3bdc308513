"""JSON and CSV writers with deterministic number formatting."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, is_dataclass
from importlib import metadata
from pathlib import Path

import numpy as np

from .analysis import AnalysisReport
from .budget import BudgetAllocation
from .config import ExperimentConfig, stamp_provenance

REPLICATION_COLUMNS = ["rep", "method", "lo", "point", "hi", "halfwidth", "truth", "covered"]
COVERAGE_COLUMNS = ["method", "replications", "covered", "coverage", "mean_halfwidth"]
PLOT_COLUMNS = ["method", "scenario", "lo", "point", "hi"]


def fmt(value) -> str:
    """Shortest round-tripping text for a number; NaN and infinities spelled out."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(value)


def write_csv(path: Path, rows: list[dict], columns: list[str] | None = None) -> Path:
    if columns is None:
        columns = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row.get(c, "")) for c in columns])
    return path


def jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.as_dict() if hasattr(obj, "as_dict") else asdict(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer, np.bool_)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else fmt(v)
    return obj


def write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


def versions() -> dict:
    out = {}
    for pkg in ("roa", "numpy", "scipy", "numba"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def allocation_dict(alloc: BudgetAllocation | None) -> dict | None:
    if alloc is None:
        return None
    return {"N": alloc.N, "n": alloc.n, "m_star": alloc.m_star, "kappa": alloc.kappa, "B1": alloc.B1,
            "R": alloc.R, "B2": alloc.B2, "baseline_runs": alloc.baseline_runs, "overridden": alloc.overridden,
            "ledger": alloc.ledger}


def analysis_dict(report: AnalysisReport) -> dict:
    t = report.tensor
    fib = None
    if report.fib is not None:
        f = report.fib
        fib = {"mean_w_hat": float(f.w_hat.mean()), "mean_w_used": float(f.w_used.mean()),
               "mean_w_hat_cv": float(f.w_hat_cv.mean()), "fraction_significant": float(f.significant.mean()),
               "gated": f.gated, "c1_hat": f.c1_hat}
    settings = {k: v for k, v in report.settings.items() if k != "allocation"}
    return {
        "settings": settings,
        "allocation": allocation_dict(report.settings.get("allocation")),
        "design": {"B1": t.B1, "R": t.R, "B2": t.B2, "m": t.m, "n": t.n, "counted_runs": t.runs},
        "grand_mean": float(t.y_star.mean()),
        "baseline_mean": t.baseline_mean(),
        "point": report.point,
        "intervals": {k: iv.as_dict() for k, iv in report.intervals.items()},
        "fib": fib,
        "hoif": report.hoif.as_dict() if report.hoif else None,
        "hoif_vr": report.hoif_cv.as_dict() if report.hoif_cv else None,
        "variance": report.variance.as_dict() if report.variance else None,
        "variance_vr": report.variance_cv.as_dict() if report.variance_cv else None,
        "notes": {"iu-lamqian": "IU variance from the nonparametric delta method, (1/n^2) sum IF1^2"},
    }


def interval_rows(intervals, scenario: str) -> list[dict]:
    return [{"method": iv.method, "scenario": scenario, "lo": iv.lo, "point": iv.point, "hi": iv.hi}
            for iv in intervals]


def write_analysis(out: Path, report: AnalysisReport, config: ExperimentConfig, scenario: str) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    payload = analysis_dict(report)
    alloc = payload["allocation"]
    ledger = dict(alloc["ledger"]) if alloc else {}
    ledger["counted_runs"] = report.tensor.runs
    payload = stamp_provenance(payload, config, versions(), ledger)
    write_json(out / "report.json", payload)
    write_csv(out / "cells.csv", report.cell_rows())
    write_csv(out / "plotdata_intervals.csv", interval_rows(report.intervals.values(), scenario), PLOT_COLUMNS)
    return payload


def write_coverage(out: Path, run, config: ExperimentConfig) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "coverage.csv", [r.as_dict() for r in run.results], COVERAGE_COLUMNS)
    write_csv(out / "replications.csv", run.log, REPLICATION_COLUMNS)
    write_csv(out / "cells.csv", run.cells)
    scenario = _scenario_label(config)
    rows = [{"method": r["method"], "scenario": scenario, "lo": r["lo"], "point": r["point"], "hi": r["hi"],
             "rep": r["rep"], "truth": r["truth"]} for r in run.log]
    write_csv(out / "plotdata_coverage.csv", rows, PLOT_COLUMNS + ["rep", "truth"])
    payload = {"config": config.to_dict(), "coverage": [r.as_dict() for r in run.results],
               "budgets": run.budgets}
    payload = stamp_provenance(payload, config, versions(), run.budgets.get("bias-corrected", {}).get("ledger"))
    write_json(out / "report.json", payload)
    return payload


def write_partial(out: Path, log: list[dict], cells: list[dict]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "replications.csv", log, REPLICATION_COLUMNS)
    write_csv(out / "cells.csv", cells)


def _scenario_label(config: ExperimentConfig) -> str:
    g = config.generator
    if config.scenario == "ml":
        return f"ml-{g['kind']}-{g['noise']}-n{g['n']}"
    if config.scenario == "inventory":
        p = config.policy
        return f"inventory-{g['law']}-n{g['n']}-s{fmt(p['s'])}-S{fmt(p['S'])}"
    return f"oracle-{g['model']}-n{g['n']}"
