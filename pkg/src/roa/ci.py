"""Confidence intervals for the expected model output."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .variance import crude_variance, iu_variance, pooled_simulation_variance

METHODS = ("crude", "iu-barton", "iu-lamqian", "bias-corrected", "bias-corrected-vr", "loo-boot", "repeated-cv")
SCALES = ("iu-adjusted", "sampling-only")


@dataclass(frozen=True)
class ConfidenceInterval:
    method: str
    point: float
    lo: float
    hi: float
    alpha: float
    dof: float

    @property
    def halfwidth(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def as_dict(self) -> dict:
        d = asdict(self)
        d["halfwidth"] = self.halfwidth
        return d


def _t(alpha: float, dof: float) -> float:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(stats.t.ppf(1.0 - alpha / 2.0, dof))


def _z(alpha: float) -> float:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(stats.norm.ppf(1.0 - alpha / 2.0))


def symmetric(method: str, point: float, half: float, alpha: float, dof: float) -> ConfidenceInterval:
    return ConfidenceInterval(method, float(point), float(point - half), float(point + half), alpha, dof)


def t_interval(method: str, values, alpha: float) -> ConfidenceInterval:
    """mean +- t_{k-1} * sd / sqrt(k) over ``values``."""
    x = np.asarray(values, dtype=float).ravel()
    k = x.size
    if k < 2:
        raise ValueError(f"{method}: need at least two values")
    half = _t(alpha, k - 1) * math.sqrt(crude_variance(x) / k)
    return symmetric(method, x.mean(), half, alpha, k - 1)


def crude_ci(outputs, alpha: float = 0.05) -> ConfidenceInterval:
    """Replications at the empirical distribution only; ignores input uncertainty."""
    return t_interval("crude", outputs, alpha)


def barton_ci(y, alpha: float = 0.05) -> ConfidenceInterval:
    y = np.asarray(y, dtype=float)
    b1, r = y.shape
    iu, _ = iu_variance(y)
    half = _t(alpha, b1 - 1) * math.sqrt(iu + pooled_simulation_variance(y) / r)
    return symmetric("iu-barton", y.mean(), half, alpha, b1 - 1)


def lamqian_ci(y, if1, alpha: float = 0.05) -> ConfidenceInterval:
    """Delta-method interval: input variance (1/n^2) sum IF1_i^2 plus simulation noise."""
    y = np.asarray(y, dtype=float)
    b1, r = y.shape
    if1 = np.asarray(if1, dtype=float)
    n = if1.size
    var = float(np.sum(if1 ** 2)) / n ** 2 + pooled_simulation_variance(y) / (b1 * r)
    return symmetric("iu-lamqian", y.mean(), _z(alpha) * math.sqrt(var), alpha, math.inf)


def bias_corrected_ci(y_d, beta: float, total_var: float, iu_var: float, alpha: float = 0.05,
                      m: int | None = None, n: int | None = None, scale: str = "iu-adjusted",
                      method: str = "bias-corrected") -> ConfidenceInterval:
    """Centre mean(Y^d) - beta with a t_{B1*R-1} half-width.

    ``sampling-only`` uses sqrt(total_var / (B1*R - 1)) alone. ``iu-adjusted`` adds
    the input-uncertainty variance outside that division, rescaled by m/n for
    m-out-of-n resampling, so the width does not shrink below the data
    uncertainty as more outer resamples are drawn.
    """
    y_d = np.asarray(y_d, dtype=float)
    b1, r = y_d.shape
    k = b1 * r
    if k < 2:
        raise ValueError("need at least two cells")
    var = max(total_var, 0.0) / (k - 1)
    if scale == "iu-adjusted":
        ratio = 1.0 if (m is None or n is None) else m / n
        var += ratio * max(iu_var, 0.0)
    elif scale != "sampling-only":
        raise ValueError(f"unknown scale {scale!r}; expected one of {SCALES}")
    point = y_d.mean() - beta
    return symmetric(method, point, _t(alpha, k - 1) * math.sqrt(var), alpha, k - 1)
