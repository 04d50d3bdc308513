"""Seed streams, datasets and multinomial resampling.

Every random quantity in the package is driven by a 64-bit seed derived from
a root seed and an integer path such as ``(stage, b1, r, b2)``. Because the
derivation is a pure function, work items can be evaluated in any order or
on any worker and still reproduce the same numbers.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(root: int, path: Iterable[int]) -> int:
    """Mix ``path`` into ``root`` and return a 64-bit seed.

    Each component is folded in with a SplitMix64 round, so the result depends
    on the order and the length of the path.
    """
    h = _mix64((root & _MASK) + _GAMMA)
    for c in path:
        c = int(c)
        if c < 0:
            raise ValueError(f"seed path components must be non-negative, got {c}")
        h = _mix64(h + _GAMMA + _mix64(c + _GAMMA * 2))
    return h


def rng(root: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, path))


@dataclass(frozen=True)
class Dataset:
    """Ordered observation records, one fixed-width row each."""

    rows: np.ndarray
    label: str = ""

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim == 1:
            rows = rows[:, None]
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ValueError(f"dataset needs at least one row and one column, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("dataset contains non-finite values")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_values(cls, values: Sequence[float], label: str = "") -> "Dataset":
        return cls(np.asarray(values, dtype=float).reshape(-1, 1), label)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def width(self) -> int:
        return self.rows.shape[1]

    @property
    def values(self) -> np.ndarray:
        """The single column of a scalar dataset."""
        if self.width != 1:
            raise ValueError(f"dataset '{self.label}' has {self.width} columns, expected 1")
        return self.rows[:, 0]


@dataclass(frozen=True)
class ResampleCounts:
    """How many times each base row was drawn; defines a bootstrap distribution."""

    counts: np.ndarray
    base: Dataset = field(repr=False)

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.shape != (self.base.n,):
            raise ValueError(f"counts length {c.shape} does not match base size {self.base.n}")
        if np.any(c < 0):
            raise ValueError("negative resample count")
        if c.sum() < 1:
            raise ValueError("resample must contain at least one draw")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def m(self) -> int:
        return int(self.counts.sum())

    @property
    def n(self) -> int:
        return self.base.n

    @classmethod
    def identity(cls, base: Dataset) -> "ResampleCounts":
        """The empirical distribution itself: every row once."""
        return cls(np.ones(base.n, dtype=np.int64), base)

    def deviations(self) -> np.ndarray:
        """N_i/m - 1/n for every base index."""
        return self.counts / self.m - 1.0 / self.n


def draw_counts(base: Dataset, m: int, seed: int) -> ResampleCounts:
    """Draw ``m`` rows uniformly with replacement from ``base``."""
    if m < 1:
        raise ValueError(f"resample size must be >= 1, got {m}")
    g = np.random.default_rng(seed)
    # numpy draws a multinomial through sequential conditional binomials
    counts = g.multinomial(m, np.full(base.n, 1.0 / base.n))
    return ResampleCounts(counts, base)


def nested_counts(parent: ResampleCounts, m_inner: int, seed: int) -> ResampleCounts:
    """Resample ``m_inner`` draws from the distribution defined by ``parent``."""
    if m_inner < 1:
        raise ValueError(f"inner resample size must be >= 1, got {m_inner}")
    g = np.random.default_rng(seed)
    counts = g.multinomial(m_inner, parent.counts / parent.m)
    return ResampleCounts(counts, parent.base)


def materialize(counts: ResampleCounts) -> Dataset:
    """Expand counts into rows, ascending by base index."""
    rows = np.repeat(counts.base.rows, counts.counts, axis=0)
    return Dataset(rows, counts.base.label)


class InverseCdf:
    """Left-continuous inverse CDF of a weighted scalar sample.

    ``q(u)`` returns the smallest support value whose cumulative weight
    reaches ``u``; for unit weights this is the ceil(u*n)-th order statistic.
    """

    def __init__(self, values: np.ndarray, weights: np.ndarray | None = None):
        values = np.asarray(values, dtype=float)
        if weights is None:
            weights = np.ones(values.shape[0], dtype=np.int64)
        weights = np.asarray(weights)
        keep = weights > 0
        order = np.argsort(values[keep], kind="stable")
        self.support = values[keep][order]
        cum = np.cumsum(weights[keep][order])
        self.total = cum[-1]
        self._cum = cum

    @classmethod
    def from_counts(cls, counts: ResampleCounts) -> "InverseCdf":
        return cls(counts.base.values, counts.counts)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u < 0.0) | (u >= 1.0)):
            raise ValueError("quantile levels must lie in [0, 1)")
        idx = np.searchsorted(self._cum, u * self.total, side="left")
        return self.support[idx]


def empirical_quantile(data: Dataset, u: float) -> float:
    """The ceil(u*n)-th order statistic of a scalar dataset (minimum at u=0)."""
    return float(InverseCdf(data.values)(u))


def read_dataset(path: str | Path) -> Dataset:
    """Read a CSV with a header row; the label is the file stem."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        rows = [[float(x) for x in line] for line in reader if line]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if widths != {len(header)}:
        raise ValueError(f"{path}: rows do not all have {len(header)} fields")
    return Dataset(np.array(rows), path.stem)


def write_dataset(data: Dataset, path: str | Path, header: Sequence[str] | None = None) -> None:
    if header is None:
        header = [f"x{j}" for j in range(data.width)] if data.width > 1 else ["value"]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in data.rows:
            w.writerow([repr(float(v)) for v in row])


def ceil_size(ratio: float, size: int) -> int:
    """ceil(ratio*size) guarded against float noise, at least 1."""
    return max(1, math.ceil(ratio * size - 1e-12))
