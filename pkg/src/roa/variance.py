"""Variance components of nested-simulation outputs.

Outputs are arranged as a (B1, R) array: B1 outer resamples of the input
data, R replications each. The between-resample spread measures input
uncertainty once the within-resample (simulation) noise is subtracted.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


def _grid(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise ValueError(f"expected a (B1, R) array, got shape {y.shape}")
    return y


def pooled_simulation_variance(y) -> float:
    """Within-resample sum of squares pooled over all resamples, over B1*(R-1)."""
    y = _grid(y)
    b1, r = y.shape
    if r < 2:
        raise ValueError("need R >= 2 replications per resample")
    resid = y - y.mean(axis=1, keepdims=True)
    return float(np.sum(resid ** 2) / (b1 * (r - 1)))


def iu_variance(y) -> tuple[float, float]:
    """(floored, raw) ANOVA estimate of the input-uncertainty variance.

    Sample variance of the resample means minus the pooled within variance
    divided by R.
    """
    y = _grid(y)
    b1, r = y.shape
    if b1 < 2 or r < 2:
        raise ValueError("need B1 >= 2 and R >= 2")
    between = float(np.var(y.mean(axis=1), ddof=1))
    raw = between - pooled_simulation_variance(y) / r
    return max(raw, 0.0), raw


def crude_variance(outputs) -> float:
    x = np.asarray(outputs, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two outputs")
    return float(np.var(x, ddof=1))


@dataclass(frozen=True)
class VarianceReport:
    sigma2_u: float
    iu_var: float
    iu_var_raw: float
    bias_var: float
    bias_cov: float
    total_debiased: float
    crude: float
    groups: tuple[float, float, float, float, float]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["groups"] = dict(zip(("output_ss", "bias_ss", "bias_output_cross", "between", "within"), self.groups))
        return d


def debiased_variance_groups(y, w) -> tuple[float, float, float, float, float]:
    """The five summation groups of the total variance of the debiased outputs.

    1. output sum of squares about the grand mean, over R*(B1*R-1)
    2. bias-estimate sum of squares about its grand mean, over B1*R*(B1*R-1)
    3. -2(R-1)/(B1*R^2*(B1*R-1)) times the bias/output cross products
    4. sample variance of the resample means
    5. minus the pooled within variance over R
    """
    y = _grid(y)
    w = _grid(w)
    if w.shape != y.shape:
        raise ValueError(f"bias array shape {w.shape} does not match outputs {y.shape}")
    b1, r = y.shape
    if b1 < 2 or r < 2:
        raise ValueError("need B1 >= 2 and R >= 2")
    k = b1 * r
    dy = y - y.mean()
    dw = w - w.mean(axis=1).mean()
    g1 = float(np.sum(dy ** 2) / (r * (k - 1)))
    g2 = float(np.sum(dw ** 2) / (k * (k - 1)))
    g3 = float(-2.0 * (r - 1) / (b1 * r ** 2 * (k - 1)) * np.sum(dw * dy))
    g4 = float(np.var(y.mean(axis=1), ddof=1))
    g5 = -pooled_simulation_variance(y) / r
    return g1, g2, g3, g4, g5


def total_debiased_variance(y, w) -> VarianceReport:
    groups = debiased_variance_groups(y, w)
    sigma2 = pooled_simulation_variance(y)
    iu, iu_raw = iu_variance(y)
    r = np.asarray(y).shape[1]
    return VarianceReport(
        sigma2_u=sigma2,
        iu_var=iu,
        iu_var_raw=iu_raw,
        bias_var=groups[1],
        bias_cov=groups[2],
        total_debiased=float(sum(groups)),
        crude=sigma2 / r + iu,
        groups=groups,
    )
