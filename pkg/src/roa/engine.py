"""Nested resampling runs that fill an output tensor.

Layout for outer resample b1 and replication r:

* ``y_star[b1, r]``: output at the outer resample F*_{b1}
* ``y_2star[b1, r, b2]``: output at F**, a resample of F*_{b1}
* ``y_3star[b1, r, b2]``: output at F***, a resample of that F**
* ``y_cv[b1]``: one extra output at F*_{b1} with an independent seed
* ``baseline[r]``: outputs at the empirical distribution itself

Replication r reuses one model seed at all three levels (common random
numbers), so level differences reflect the input distribution, not noise.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .models import ModelConfig, simulate
from .resample import Dataset, ResampleCounts, derive_seed, draw_counts, nested_counts

# first component of every seed path
OUTER, SIM, LEVEL2, LEVEL3, BASELINE, TEST = range(6)


@dataclass
class OutputTensor:
    y_star: np.ndarray
    y_2star: np.ndarray
    y_3star: np.ndarray
    y_cv: np.ndarray | None
    counts: np.ndarray
    baseline: np.ndarray
    m: int
    n: int
    runs: int

    @property
    def B1(self) -> int:
        return self.y_star.shape[0]

    @property
    def R(self) -> int:
        return self.y_star.shape[1]

    @property
    def B2(self) -> int:
        return self.y_2star.shape[2]

    def baseline_mean(self) -> float | None:
        return float(self.baseline.mean()) if self.baseline.size else None


@dataclass(frozen=True)
class _Job:
    model: object
    data: Dataset
    config: ModelConfig
    root: int
    m: int
    m_inner: int
    R: int
    B2: int
    cv: bool


def _outer_cell(job: _Job, b1: int):
    outer = draw_counts(job.data, job.m, derive_seed(job.root, (OUTER, b1)))
    y = np.empty(job.R)
    y2 = np.empty((job.R, job.B2))
    y3 = np.empty((job.R, job.B2))
    runs = 0
    for r in range(job.R):
        seed = derive_seed(job.root, (SIM, b1, r))
        y[r] = simulate(job.model, outer, job.config, seed).value
        runs += 1
        for b2 in range(job.B2):
            f2 = nested_counts(outer, job.m_inner, derive_seed(job.root, (LEVEL2, b1, r, b2)))
            f3 = nested_counts(f2, job.m_inner, derive_seed(job.root, (LEVEL3, b1, r, b2)))
            y2[r, b2] = simulate(job.model, f2, job.config, seed).value
            y3[r, b2] = simulate(job.model, f3, job.config, seed).value
            runs += 2
    ycv = np.nan
    if job.cv:
        # replication index R is never used by r = 0..R-1, so the seed is independent
        ycv = simulate(job.model, outer, job.config, derive_seed(job.root, (SIM, b1, job.R))).value
        runs += 1
    return outer.counts, y, y2, y3, ycv, runs


def _run_chunk(job: _Job, indices: list[int]):
    return [_outer_cell(job, b) for b in indices]


def run_nested(model, data: Dataset, B1: int, R: int, B2: int, m: int, root: int,
               config: ModelConfig | None = None, m_inner: int | None = None, cv: bool = True,
               baseline_runs: int = 0, workers: int = 1) -> OutputTensor:
    """Evaluate ``model`` on the full nested design.

    Outer resamples have size ``m``; inner resamples default to the same size.
    With ``workers > 1`` outer resamples are spread over processes and merged
    by index, so the tensor does not depend on the schedule.
    """
    if B1 < 1 or R < 1 or B2 < 0:
        raise ValueError(f"invalid design B1={B1}, R={R}, B2={B2}")
    config = config or ModelConfig()
    job = _Job(model, data, config, root, m, m_inner or m, R, B2, cv and B2 > 0)
    cells = _map_cells(job, B1, workers)
    counts = np.stack([c[0] for c in cells])
    y = np.stack([c[1] for c in cells])
    y2 = np.stack([c[2] for c in cells])
    y3 = np.stack([c[3] for c in cells])
    ycv = np.array([c[4] for c in cells]) if job.cv else None
    runs = sum(c[5] for c in cells)
    base = np.empty(baseline_runs)
    ident = ResampleCounts.identity(data)
    for r in range(baseline_runs):
        base[r] = simulate(model, ident, config, derive_seed(root, (BASELINE, r))).value
    runs += baseline_runs
    return OutputTensor(y, y2, y3, ycv, counts, base, m, data.n, runs)


def _map_cells(job, B1: int, workers: int):
    if workers <= 1 or B1 < 2:
        return _run_chunk(job, list(range(B1)))
    chunks = [list(range(i, B1, workers)) for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [job] * len(chunks), chunks))
    out = [None] * B1
    for chunk, part in zip(chunks, parts):
        for b, cell in zip(chunk, part):
            out[b] = cell
    return out


def run_at_empirical(model, data: Dataset, runs: int, root: int, config: ModelConfig | None = None) -> np.ndarray:
    """``runs`` replications at the empirical distribution (the crude design)."""
    config = config or ModelConfig()
    ident = ResampleCounts.identity(data)
    return np.array([simulate(model, ident, config, derive_seed(root, (BASELINE, r))).value
                     for r in range(runs)])
