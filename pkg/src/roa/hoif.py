"""Influence-function estimates from resample counts.

With N_i the count of base point i in an m-out-of-n resample and
delta_i = N_i/m - 1/n, output-weighted averages of polynomial scores in delta
estimate the first and second functional derivatives of theta at the
empirical distribution.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MODES = ("eq21", "eq22-literal")


@dataclass(frozen=True)
class ScoreConstants:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")

    @property
    def cov_nn(self) -> float:
        """Cov(N_i/m, N_j/m) for i != j."""
        return -1.0 / (self.m * self.n ** 2)

    @property
    def var_n(self) -> float:
        return (self.n - 1) / (self.m * self.n ** 2)

    @property
    def lam(self) -> float:
        return self.m * self.n ** 2 / 5.0

    @property
    def eta(self) -> float:
        return 6.0 * self.cov_nn + 4.0 / self.n ** 3

    @property
    def c2_star(self) -> float:
        m, n = self.m, self.n
        return -0.2 * (n - 1.0 / m + 2.0 / (m * n) + 1.0)

    def as_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "cov_nn": self.cov_nn, "var_n": self.var_n,
                "lambda": self.lam, "eta": self.eta, "c2_star": self.c2_star}


def _deviations(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    m = counts.sum(axis=-1, keepdims=True)
    return counts / m - 1.0 / counts.shape[-1]


def score1(counts, i: int) -> float:
    c = np.asarray(counts, dtype=float)
    m, n = c.sum(), c.size
    return float(m * n * (c[i] / m - 1.0 / n))


def score1_all(counts) -> np.ndarray:
    """S1 for every index; works row-wise on a (B1, n) matrix."""
    c = np.asarray(counts, dtype=float)
    m = c.sum(axis=-1, keepdims=True)
    n = c.shape[-1]
    return m * n * (c / m - 1.0 / n)


def score2(counts, i: int, j: int, constants: ScoreConstants) -> float:
    if i == j:
        raise ValueError("second-order score is defined for distinct points only")
    d = _deviations(counts)
    return float(constants.lam * d[i] * d[j])


def if1_hat(y_d, counts) -> np.ndarray:
    """Average of Y^d * S1_i over all (b1, r); y_d is (B1, R), counts is (B1, n)."""
    y_bar = np.asarray(y_d, dtype=float).mean(axis=1)
    s1 = score1_all(counts)
    return (y_bar[:, None] * s1).mean(axis=0)


def if1_centered(y_d, counts) -> np.ndarray:
    """Same target as ``if1_hat`` with the grand mean removed from the outputs.

    The score has mean zero, so centring leaves the expectation unchanged and
    drops the large noise term proportional to the output level.
    """
    y = np.asarray(y_d, dtype=float)
    return if1_hat(y - y.mean(), counts)


def if2_hat(y_d, counts, i: int, j: int, constants: ScoreConstants, baseline: float,
            if1: np.ndarray | None = None) -> float:
    """Second-order estimate for the pair (i, j), i != j.

    ``baseline`` is the mean output at the un-resampled empirical distribution.
    """
    if i == j:
        raise ValueError("second-order estimate is defined for distinct points only")
    if baseline is None or not np.isfinite(baseline):
        raise ValueError("a baseline output at the empirical distribution is required")
    y_bar = np.asarray(y_d, dtype=float).mean(axis=1)
    d = _deviations(counts)
    lam = constants.lam
    if if1 is None:
        if1 = if1_hat(y_d, counts)
    term = float(np.mean(y_bar * lam * d[:, i] * d[:, j]))
    return term + lam * baseline / (constants.m * constants.n ** 2) - lam * constants.eta * float(if1[i])


def if2_matrix(y_d, counts, constants: ScoreConstants, baseline: float) -> np.ndarray:
    """All pairs at once; the diagonal is NaN."""
    y_bar = np.asarray(y_d, dtype=float).mean(axis=1)
    d = _deviations(counts)
    lam = constants.lam
    if1 = if1_hat(y_d, counts)
    out = lam * np.einsum("b,bi,bj->ij", y_bar, d, d) / y_bar.size
    out += lam * baseline / (constants.m * constants.n ** 2)
    out -= lam * constants.eta * if1[:, None]
    np.fill_diagonal(out, np.nan)
    return out


@dataclass(frozen=True)
class HoifDiagnostics:
    if1: np.ndarray
    beta_hat: float
    mode: str
    constants: ScoreConstants
    terms: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"beta_hat": self.beta_hat, "mode": self.mode, "constants": self.constants.as_dict(),
                "terms": self.terms, "if1": [float(v) for v in self.if1]}


def pair_statistic(counts) -> np.ndarray:
    """Z_b = sum over ordered pairs i != j of delta_i^2 * delta_j^2, per row.

    Equal to (sum delta^2)^2 - sum delta^4, accumulated in extended precision.
    """
    d2 = _deviations(counts).astype(np.longdouble) ** 2
    s = d2.sum(axis=-1)
    return s * s - (d2 * d2).sum(axis=-1)


def beta_hat(y_d, counts, constants: ScoreConstants, mode: str = "eq21") -> tuple[float, dict]:
    """Scalar bias estimate from the covariance over b1 of mean Y^d with Z_b.

    Since the covariance is linear, summing the per-pair covariances equals
    the covariance with the per-resample pair sum Z_b. ``eq21`` scales by
    lambda/2, ``eq22-literal`` by -1.2 * Cov(N_i/m, N_j/m).
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    y_bar = np.asarray(y_d, dtype=float).mean(axis=1).astype(np.longdouble)
    b1 = y_bar.size
    if b1 < 2:
        raise ValueError("need at least two outer resamples")
    z = pair_statistic(counts)
    cross = np.sum((y_bar - y_bar.mean()) * (z - z.mean()))
    cov = cross / (b1 - 1)
    factor = constants.lam / 2.0 if mode == "eq21" else -1.2 * constants.cov_nn
    beta = float(factor * cov)
    terms = {"pair_covariance_sum": float(cov), "prefactor": float(factor),
             "pair_statistic_mean": float(z.mean())}
    return beta, terms


def hoif_diagnostics(y_d, counts, m: int, mode: str = "eq21") -> HoifDiagnostics:
    counts = np.asarray(counts)
    constants = ScoreConstants(m, counts.shape[1])
    beta, terms = beta_hat(y_d, counts, constants, mode)
    return HoifDiagnostics(if1_hat(y_d, counts), beta, mode, constants, terms)


def c2_star(constants: ScoreConstants) -> float:
    return constants.c2_star
