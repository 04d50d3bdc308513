"""Command-line entry point: ``roa analyze | inventory-demo | ml-demo | coverage``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import ci
from .analysis import analyze
from .budget import InfeasibleBudget, allocate
from .config import ConfigError, ExperimentConfig, from_dict
from .coverage import CoverageAborted, _draw_dataset, _inventory_parts, _oracle_model, coverage_experiment, \
    scenario_truth
from .engine import run_at_empirical, run_nested
from .fib import CV_SLOPES
from .inventory import CORRUPT, PERFECT, SCENARIOS, InventoryPolicy, long_run_reference
from .ml import LEARNERS, Generator, OobErrorModel, SupervisedDataset, loo_boot_baseline, repeated_cv_baseline, \
    run_algorithm1, true_error
from .report import PLOT_COLUMNS, fmt, interval_rows, versions, write_analysis, write_coverage, write_csv, \
    write_json, write_partial
from .resample import derive_seed, read_dataset


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roa", description="Input-uncertainty aware Monte-Carlo output analysis.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--scenario", choices=["oracle", "inventory", "ml"])
    common.add_argument("--budget", type=int, help="simulation budget N")
    common.add_argument("--alloc", help="override allocation as B1,R,B2")
    common.add_argument("--mode", choices=["eq21", "eq22", "eq22-literal"], help="bias estimator prefactor")
    common.add_argument("--gate-bias", action="store_true", default=None,
                        help="zero FIB bias estimates that are not significant")
    common.add_argument("--scale", choices=list(ci.SCALES), help="bias-corrected interval width")
    common.add_argument("--cv-slope", choices=list(CV_SLOPES), help="control-variate slope: one per outer resample or pooled")
    common.add_argument("--alpha", type=float)
    common.add_argument("--seed", type=int, help="root seed (ROA_SEED overrides the config file)")
    common.add_argument("--method", help="comma separated interval methods")
    common.add_argument("--n", type=int, help="dataset size")
    common.add_argument("--workers", type=int)
    common.add_argument("--out", type=Path, default=Path("roa-out"))

    a = sub.add_parser("analyze", parents=[common], help="analyse one dataset")
    a.add_argument("--data", type=Path, help="CSV dataset (generated from the config when omitted)")
    sub.add_parser("inventory-demo", parents=[common], help="reference costs and intervals for the (s,S) scenarios")
    sub.add_parser("ml-demo", parents=[common], help="all prediction-error intervals on one dataset")
    c = sub.add_parser("coverage", parents=[common], help="macro-replicated coverage experiment")
    c.add_argument("--reps", type=int, help="macro-replications")
    return p


def build_config(args, env=None) -> ExperimentConfig:
    raw: dict = {}
    if args.config is not None:
        text = args.config.read_text()
        if text.strip():
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"<root>: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<root>: expected a JSON object")
    flags = {"scenario": args.scenario, "budget": args.budget, "alpha": args.alpha, "root_seed": args.seed,
             "gate_bias": args.gate_bias, "ci_scale": args.scale,
             "cv_slope": args.cv_slope, "workers": args.workers,
             "macro_replications": getattr(args, "reps", None)}
    raw.update({k: v for k, v in flags.items() if v is not None})
    if args.mode is not None:
        raw["mode"] = "eq22-literal" if args.mode == "eq22" else args.mode
    if args.alloc is not None:
        try:
            raw["alloc"] = [int(v) for v in args.alloc.split(",")]
        except ValueError as exc:
            raise ConfigError(f"alloc: expected B1,R,B2 integers, got {args.alloc!r}") from exc
    if args.method is not None:
        raw["methods"] = [m.strip() for m in args.method.split(",") if m.strip()]
    if args.n is not None:
        raw["generator"] = {**raw.get("generator", {}), "n": args.n}
    env = os.environ if env is None else env
    if env.get("ROA_SEED"):
        try:
            raw["root_seed"] = int(env["ROA_SEED"])
        except ValueError as exc:
            raise ConfigError(f"ROA_SEED: expected integer, got {env['ROA_SEED']!r}") from exc
    return from_dict(raw)


def _print_allocation(alloc) -> None:
    led = alloc.ledger
    print(f"allocation  N={alloc.N} n={alloc.n} m*={alloc.m_star}  B1={alloc.B1} R={alloc.R} B2={alloc.B2}"
          f"{'  (override)' if alloc.overridden else ''}")
    print(f"runs        nominal={led['nominal']} full={led['full']} (core {led['core']}, cv {led['cv_extra']}, "
          f"baseline {led['baseline']})")


def _print_intervals(intervals, truth=None) -> None:
    print(f"{'method':<20}{'lo':>12}{'point':>12}{'hi':>12}{'half':>10}" + ("  covers" if truth is not None else ""))
    for iv in intervals:
        line = f"{iv.method:<20}{iv.lo:>12.4f}{iv.point:>12.4f}{iv.hi:>12.4f}{iv.halfwidth:>10.4f}"
        if truth is not None:
            line += f"  {'yes' if iv.covers(truth) else 'no'}"
        print(line)


def cmd_analyze(cfg: ExperimentConfig, args) -> int:
    if args.data is not None:
        data = read_dataset(args.data)
        if cfg.scenario == "ml":
            data = SupervisedDataset(data.rows, data.label)
    else:
        data = _draw_dataset(cfg, derive_seed(cfg.root_seed, (2,)))
    root = derive_seed(cfg.root_seed, (3,))
    if cfg.scenario == "ml":
        report = run_algorithm1(data, LEARNERS[cfg.learner](), cfg.budget, root, cfg.alloc, cfg.alpha,
                                cfg.mode, cfg.gate_bias, cfg.ci_scale, cfg.cv_slope)
        alloc = report.settings["allocation"]
    else:
        alloc = allocate(cfg.budget, data.n, cfg.alloc)
        model = _inventory_parts(cfg)[0] if cfg.scenario == "inventory" else _oracle_model(cfg.generator)
        t = run_nested(model, data, alloc.B1, alloc.R, alloc.B2, alloc.m_star, root,
                       baseline_runs=alloc.baseline_runs, workers=cfg.workers)
        report = analyze(t, cfg.alpha, cfg.mode, cfg.gate_bias, cfg.ci_scale, cfg.methods, cfg.cv_slope)
        report.settings["allocation"] = alloc
    _print_allocation(alloc)
    _print_intervals(report.intervals.values())
    write_analysis(args.out, report, cfg, cfg.scenario)
    print(f"wrote {args.out}/report.json, cells.csv, plotdata_intervals.csv")
    return 0


def cmd_inventory_demo(cfg: ExperimentConfig, args) -> int:
    """Long-run references for every (policy, law) pair, then crude and bias-corrected
    intervals for the configured policy at n = 10, 25, 50."""
    model, policy, costs, _ = _inventory_parts(cfg)
    refs = []
    for sid, (s, S) in SCENARIOS.items():
        for law in (PERFECT, CORRUPT):
            ref = long_run_reference(InventoryPolicy(s, S), costs, law, derive_seed(cfg.root_seed, (4, sid)))
            refs.append({"scenario": sid, "s": s, "S": S, "law": law.name, "reference": ref})
    print(f"{'scenario':<10}{'(s,S)':<10}{'law':<10}{'reference':>12}")
    for r in refs:
        pair = f"({r['s']},{r['S']})"
        print(f"{r['scenario']:<10}{pair:<10}{r['law']:<10}{r['reference']:>12.2f}")
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "reference.csv", refs, ["scenario", "s", "S", "law", "reference"])
    truth = scenario_truth(cfg)
    rows = []
    for n in (10, 25, 50):
        sub = from_dict({**cfg.to_dict(), "generator": {**cfg.generator, "n": n}})
        data = _draw_dataset(sub, derive_seed(cfg.root_seed, (5, n)))
        crude = ci.crude_ci(run_at_empirical(model, data, cfg.budget, derive_seed(cfg.root_seed, (6, n))), cfg.alpha)
        alloc = allocate(cfg.budget, n, cfg.alloc, baseline_runs=0)
        t = run_nested(model, data, alloc.B1, alloc.R, alloc.B2, alloc.m_star, derive_seed(cfg.root_seed, (7, n)))
        report = analyze(t, cfg.alpha, cfg.mode, cfg.gate_bias, cfg.ci_scale, ["bias-corrected"], cfg.cv_slope)
        ivs = [crude, report.intervals["bias-corrected"]]
        print(f"\nn={n}  reference={truth:.2f}  policy=({fmt(policy.s)},{fmt(policy.S)}) law={cfg.generator['law']}")
        _print_intervals(ivs, truth)
        rows += interval_rows(ivs, f"n{n}")
    write_csv(out / "plotdata_inventory.csv", rows, PLOT_COLUMNS)
    write_json(out / "report.json", {"references": refs, "truth": truth, "intervals": rows,
                                     "config": cfg.to_dict(), "versions": versions()})
    print(f"\nwrote {out}/reference.csv, plotdata_inventory.csv, report.json")
    return 0


def cmd_ml_demo(cfg: ExperimentConfig, args) -> int:
    gen = cfg.generator
    data = _draw_dataset(cfg, derive_seed(cfg.root_seed, (8,)))
    learner = LEARNERS[cfg.learner]()
    truth = true_error(data, learner, Generator(gen["kind"], gen["noise"]), derive_seed(cfg.root_seed, (9,)),
                       cfg.truth_size)
    report = run_algorithm1(data, learner, cfg.budget, derive_seed(cfg.root_seed, (10,)), cfg.alloc, cfg.alpha,
                            cfg.mode, cfg.gate_bias, cfg.ci_scale, cfg.cv_slope)
    alloc = report.settings["allocation"]
    b1, r = cfg.baseline_shape()
    nested = run_nested(OobErrorModel(data, learner, alloc.kappa), data, b1, r, 0, data.n,
                        derive_seed(cfg.root_seed, (11,)), cv=False)
    base = analyze(nested, cfg.alpha, cfg.mode, methods=["iu-barton", "iu-lamqian"])
    ivs = list(base.intervals.values()) + [report.intervals[m] for m in ("bias-corrected", "bias-corrected-vr")]
    ivs.append(loo_boot_baseline(data, learner, b1, r, derive_seed(cfg.root_seed, (12,)), cfg.alpha))
    ivs.append(repeated_cv_baseline(data, learner, derive_seed(cfg.root_seed, (13,)),
                                    repeats=max(2, cfg.budget // 10), alpha=cfg.alpha))
    ivs = [iv for iv in ivs if iv.method in cfg.methods] or ivs
    _print_allocation(alloc)
    print(f"true error {truth:.4f}  ({gen['kind']}, {gen['noise']} noise, n={data.n})")
    _print_intervals(ivs, truth)
    scenario = f"{gen['kind']}-{gen['noise']}"
    write_analysis(args.out, report, cfg, scenario)
    write_csv(args.out / "plotdata_ml.csv", interval_rows(ivs, scenario), PLOT_COLUMNS)
    print(f"wrote {args.out}/report.json, cells.csv, plotdata_ml.csv")
    return 0


def cmd_coverage(cfg: ExperimentConfig, args) -> int:
    try:
        run = coverage_experiment(cfg)
    except CoverageAborted as exc:
        write_partial(args.out, exc.log, exc.cells)
        print(f"error: {exc}; partial log in {args.out}/replications.csv", file=sys.stderr)
        return 1
    print(f"{'method':<20}{'reps':>6}{'covered':>9}{'coverage':>10}{'mean half':>12}")
    for r in run.results:
        print(f"{r.method:<20}{r.replications:>6}{r.covered:>9}{r.coverage:>10.3f}{r.mean_halfwidth:>12.4f}")
    write_coverage(args.out, run, cfg)
    print(f"wrote {args.out}/coverage.csv, replications.csv, cells.csv, plotdata_coverage.csv, report.json")
    return 0


DEMO_SCENARIOS = {"inventory-demo": "inventory", "ml-demo": "ml"}
COMMANDS = {"analyze": cmd_analyze, "inventory-demo": cmd_inventory_demo, "ml-demo": cmd_ml_demo,
            "coverage": cmd_coverage}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command in DEMO_SCENARIOS:
        args.scenario = DEMO_SCENARIOS[args.command]
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, InfeasibleBudget, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
