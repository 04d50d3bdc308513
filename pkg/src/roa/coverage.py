"""Macro-replicated coverage experiments.

Each macro-replication draws a fresh dataset from the true law, builds every
requested interval from it and checks whether the interval contains the true
expected output. Replications use seeds derived from (root, rep) only, so the
result does not depend on how replications are spread over processes.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import ci
from .analysis import analyze
from .budget import allocate
from .config import ExperimentConfig
from .engine import run_at_empirical, run_nested
from .inventory import CORRUPT, PERFECT, CostStructure, InventoryModel, InventoryPolicy, calibrated_costs, \
    long_run_reference
from .ml import LEARNERS, Generator, OobErrorModel, generate_dataset, loo_boot_baseline, repeated_cv_baseline, \
    run_algorithm1, true_error
from .models import MeanModel, NoiseModel, ProductModel
from .resample import Dataset, derive_seed

# first seed-path component: truth oracle vs macro-replications
_TRUTH, _REP = 0, 1
# second component inside a replication
_DATA, _TRUTH_REP, _CRUDE, _NESTED, _FIB, _LOO, _RCV = range(7)


@dataclass(frozen=True)
class CoverageResult:
    method: str
    replications: int
    covered: int
    coverage: float
    mean_halfwidth: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class CoverageRun:
    results: list[CoverageResult]
    log: list[dict]
    cells: list[dict]
    budgets: dict = field(default_factory=dict)


class CoverageAborted(RuntimeError):
    """A replication failed; ``log`` and ``cells`` hold the replications that finished."""

    def __init__(self, message: str, log: list[dict], cells: list[dict]):
        super().__init__(message)
        self.log = log
        self.cells = cells


def summarize(log: list[dict], methods) -> list[CoverageResult]:
    out = []
    for method in methods:
        rows = [r for r in log if r["method"] == method]
        if not rows:
            continue
        covered = sum(int(r["covered"]) for r in rows)
        half = float(np.mean([r["halfwidth"] for r in rows]))
        out.append(CoverageResult(method, len(rows), covered, covered / len(rows), half))
    return out


# ---------------------------------------------------------------- scenarios

def _oracle_model(gen: dict):
    if gen["model"] == "product":
        return ProductModel()
    if gen["model"] == "noise":
        return NoiseModel(gen["mu"], gen["sigma"])
    return MeanModel(gen["k"], gen["power"])


def _oracle_truth(gen: dict) -> float:
    mu, sigma = gen["mu"], gen["sigma"]
    if gen["model"] == "product":
        return mu * mu
    if gen["model"] == "mean" and gen["power"] == 2:
        return mu * mu + sigma * sigma / gen["k"]
    return mu


def _inventory_parts(cfg: ExperimentConfig):
    pol = cfg.policy
    policy = InventoryPolicy(pol["s"], pol["S"])
    costs = CostStructure(**cfg.costs) if cfg.costs else calibrated_costs()
    law = PERFECT if cfg.generator["law"] == "perfect" else CORRUPT
    return InventoryModel(policy, costs, pol["periods"], pol["warmup"]), policy, costs, law


def scenario_truth(cfg: ExperimentConfig) -> float | None:
    """Truth shared by every replication, or None when it depends on the dataset."""
    if cfg.scenario == "oracle":
        return _oracle_truth(cfg.generator)
    if cfg.scenario == "inventory":
        model, policy, costs, law = _inventory_parts(cfg)
        return long_run_reference(policy, costs, law, derive_seed(cfg.root_seed, (_TRUTH,)),
                                  warmup=model.warmup, batch_len=model.periods)
    return None


def _draw_dataset(cfg: ExperimentConfig, seed: int) -> Dataset:
    gen = cfg.generator
    if cfg.scenario == "ml":
        return generate_dataset(gen["kind"], gen["noise"], gen["n"], seed)
    if cfg.scenario == "inventory":
        _, _, _, law = _inventory_parts(cfg)
        return Dataset.from_values(law.sample(np.random.default_rng(seed), gen["n"]), law.name)
    x = np.random.default_rng(seed).normal(gen["mu"], gen["sigma"], gen["n"])
    return Dataset.from_values(x, "normal")


def method_budgets(cfg: ExperimentConfig) -> dict:
    """Design used by each method family, for the report."""
    n = cfg.generator["n"]
    alloc = allocate(cfg.budget, n, cfg.alloc, baseline_runs=0)
    b1, r = cfg.baseline_shape()
    return {
        "crude": {"runs": cfg.budget},
        "nested": {"B1": b1, "R": r, "m": n},
        "bias-corrected": {"B1": alloc.B1, "R": alloc.R, "B2": alloc.B2, "m": alloc.m_star,
                           "ledger": alloc.ledger},
        "loo-boot": {"B1": b1, "R": r},
        "repeated-cv": {"folds": 10, "repeats": max(2, cfg.budget // 10)},
    }


# ---------------------------------------------------------------- one replication

def _row(rep: int, iv: ci.ConfidenceInterval, truth: float) -> dict:
    return {"rep": rep, "method": iv.method, "lo": iv.lo, "point": iv.point, "hi": iv.hi,
            "halfwidth": iv.halfwidth, "truth": truth, "covered": int(iv.covers(truth))}


def run_replication(cfg: ExperimentConfig, rep: int, truth: float | None) -> tuple[list[dict], list[dict]]:
    seed = derive_seed(cfg.root_seed, (_REP, rep))
    data = _draw_dataset(cfg, derive_seed(seed, (_DATA,)))
    n = data.n
    methods = set(cfg.methods)
    alloc = allocate(cfg.budget, n, cfg.alloc, baseline_runs=0)
    b1, r = cfg.baseline_shape()
    if cfg.scenario == "ml":
        learner = LEARNERS[cfg.learner]()
        model = OobErrorModel(data, learner, alloc.kappa)
        if truth is None:
            truth = true_error(data, learner, Generator(cfg.generator["kind"], cfg.generator["noise"]),
                               derive_seed(seed, (_TRUTH_REP,)), cfg.truth_size)
    elif cfg.scenario == "inventory":
        model = _inventory_parts(cfg)[0]
    else:
        model = _oracle_model(cfg.generator)

    intervals: list[ci.ConfidenceInterval] = []
    if "crude" in methods:
        y0 = run_at_empirical(model, data, cfg.budget, derive_seed(seed, (_CRUDE,)))
        intervals.append(ci.crude_ci(y0, cfg.alpha))
    if methods & {"iu-barton", "iu-lamqian"}:
        t = run_nested(model, data, b1, r, 0, n, derive_seed(seed, (_NESTED,)), cv=False)
        rep_ = analyze(t, cfg.alpha, cfg.mode, cfg.gate_bias, cfg.ci_scale,
                       methods=[m for m in ("iu-barton", "iu-lamqian") if m in methods], cv_slope=cfg.cv_slope)
        intervals += [rep_.intervals[m] for m in ("iu-barton", "iu-lamqian") if m in rep_.intervals]
    cells: list[dict] = []
    wanted = [m for m in ("bias-corrected", "bias-corrected-vr") if m in methods]
    if wanted:
        fseed = derive_seed(seed, (_FIB,))
        if cfg.scenario == "ml":
            report = run_algorithm1(data, LEARNERS[cfg.learner](), cfg.budget, fseed, cfg.alloc, cfg.alpha,
                                    cfg.mode, cfg.gate_bias, cfg.ci_scale, cfg.cv_slope)
        else:
            t = run_nested(model, data, alloc.B1, alloc.R, alloc.B2, alloc.m_star, fseed)
            report = analyze(t, cfg.alpha, cfg.mode, cfg.gate_bias, cfg.ci_scale, methods=wanted,
                             cv_slope=cfg.cv_slope)
        intervals += [report.intervals[m] for m in wanted if m in report.intervals]
        cells = [{"rep": rep, **row} for row in report.cell_rows()]
    if cfg.scenario == "ml":
        learner = LEARNERS[cfg.learner]()
        if "loo-boot" in methods:
            intervals.append(loo_boot_baseline(data, learner, b1, r, derive_seed(seed, (_LOO,)), cfg.alpha))
        if "repeated-cv" in methods:
            intervals.append(repeated_cv_baseline(data, learner, derive_seed(seed, (_RCV,)),
                                                  repeats=max(2, cfg.budget // 10), alpha=cfg.alpha))
    order = {m: i for i, m in enumerate(cfg.methods)}
    intervals.sort(key=lambda iv: order.get(iv.method, len(order)))
    return [_row(rep, iv, truth) for iv in intervals], cells


def _run_chunk(cfg: ExperimentConfig, reps: list[int], truth):
    out = []
    for rep in reps:
        try:
            out.append((rep, run_replication(cfg, rep, truth), None))
        except Exception as exc:  # noqa: BLE001 - reported with the partial log
            out.append((rep, None, f"{type(exc).__name__}: {exc}"))
            break
    return out


def coverage_experiment(cfg: ExperimentConfig, workers: int | None = None) -> CoverageRun:
    """Run ``cfg.macro_replications`` replications and summarise coverage per method."""
    truth = scenario_truth(cfg)
    reps = cfg.macro_replications
    workers = max(1, min(workers or cfg.workers, reps))
    if workers == 1:
        parts = [_run_chunk(cfg, list(range(reps)), truth)]
    else:
        chunks = [list(range(i, reps, workers)) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [cfg] * workers, chunks, [truth] * workers))
    done = sorted((item for part in parts for item in part), key=lambda item: item[0])
    log: list[dict] = []
    cells: list[dict] = []
    for rep, result, error in done:
        if error is not None:
            raise CoverageAborted(f"replication {rep} failed: {error}", log, cells)
        log += result[0]
        cells += result[1]
    return CoverageRun(summarize(log, cfg.methods), log, cells, method_budgets(cfg))
