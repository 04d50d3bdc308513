"""Fast iterated bootstrap (FIB) bias of individual outputs.

For replication r of outer resample b1 we have the output at the first level
(``y_star``), B2 outputs at resamples of that resample (``y_2star``) and B2
outputs one level deeper (``y_3star``). The bias estimate is
``mean(y_3star) - mean(y_2star)``, split into a first-order part and a
second-order correction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

CV_SLOPES = ("pooled", "per-b1")


@dataclass(frozen=True)
class FibCell:
    y_star: float
    y_2star: np.ndarray
    y_3star: np.ndarray
    y_cv_extra: float = float("nan")

    def __post_init__(self):
        y2 = np.asarray(self.y_2star, dtype=float).ravel()
        y3 = np.asarray(self.y_3star, dtype=float).ravel()
        if y2.size < 1 or y2.shape != y3.shape:
            raise ValueError("y_2star and y_3star must be non-empty and equally long")
        object.__setattr__(self, "y_2star", y2)
        object.__setattr__(self, "y_3star", y3)

    @property
    def control(self) -> float:
        """C_r = Y_{R+1} - Y_r, the zero-mean control for this replication."""
        return self.y_cv_extra - self.y_star


@dataclass(frozen=True)
class FibResult:
    delta_star: float
    gamma_hat: float
    w_hat: float
    t_stat: float
    significant: bool
    w_hat_cv: float
    c1_hat: float


def delta_star(cell: FibCell) -> float:
    return float(np.mean(cell.y_2star) - cell.y_star)


def gamma_hat(cell: FibCell) -> float:
    return float(np.mean(cell.y_3star) - 2.0 * np.mean(cell.y_2star) + cell.y_star)


def w_hat(cell: FibCell) -> float:
    return delta_star(cell) + gamma_hat(cell)


def debias_output(cell: FibCell) -> float:
    return float(cell.y_star + np.mean(cell.y_2star) - np.mean(cell.y_3star))


def bias_terms(cell: FibCell) -> np.ndarray:
    """Per-b2 bias terms: (y2 - y*) + (y3 - 2*y2 + y*)."""
    d = cell.y_2star - cell.y_star
    g = cell.y_3star - 2.0 * cell.y_2star + cell.y_star
    return d + g


def _t_from_terms(terms: np.ndarray, alpha: float):
    """t statistic of H0: W = 0 from the per-b2 terms along the last axis.

    Uses the standard error sd/sqrt(B2) so the statistic is t-distributed with
    B2-1 degrees of freedom; the interval is mean +- t_crit * se.
    """
    terms = np.asarray(terms, dtype=float)
    b2 = terms.shape[-1]
    mean = terms.mean(axis=-1)
    if b2 < 2:
        nan = np.full(mean.shape, np.nan)
        return nan, np.zeros(mean.shape, dtype=bool), nan, nan
    se = terms.std(axis=-1, ddof=1) / np.sqrt(b2)
    crit = stats.t.ppf(1.0 - alpha / 2.0, b2 - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, mean / np.where(se > 0, se, 1.0), np.sign(mean) * np.inf)
    t = np.where((se == 0) & (mean == 0), 0.0, t)
    lo, hi = mean - crit * se, mean + crit * se
    significant = (lo > 0) | (hi < 0)
    return t, significant, lo, hi


def t_test(cell: FibCell, alpha: float = 0.05) -> tuple[float, bool, float, float]:
    """(t, significant, lo, hi) for the hypothesis that the output is unbiased."""
    t, sig, lo, hi = _t_from_terms(bias_terms(cell), alpha)
    return float(t), bool(sig), float(lo), float(hi)


def cv_coefficient(w_hats, controls) -> float:
    """Least-squares slope of the bias estimates on the controls (0 if controls are constant)."""
    w = np.asarray(w_hats, dtype=float)
    c = np.asarray(controls, dtype=float)
    if w.shape != c.shape or w.ndim != 1:
        raise ValueError("w_hats and controls must be equally long vectors")
    if w.size < 2:
        raise ValueError("need at least two replications")
    cc = c - c.mean()
    sxx = float(np.dot(cc, cc))
    if sxx == 0.0:
        return 0.0
    return float(np.dot(w - w.mean(), cc) / sxx)


def w_hat_cv(cell: FibCell, c1: float) -> float:
    return w_hat(cell) + c1 * cell.control


@dataclass(frozen=True)
class FibTable:
    """Vectorised FIB quantities for a whole (B1, R) grid."""

    delta_star: np.ndarray
    gamma_hat: np.ndarray
    w_hat: np.ndarray
    t_stat: np.ndarray
    significant: np.ndarray
    w_used: np.ndarray  # after the optional significance gate
    c1_hat: np.ndarray  # per b1 regression slope
    w_hat_cv: np.ndarray
    gated: bool

    def result(self, b1: int, r: int) -> FibResult:
        return FibResult(float(self.delta_star[b1, r]), float(self.gamma_hat[b1, r]), float(self.w_hat[b1, r]),
                         float(self.t_stat[b1, r]), bool(self.significant[b1, r]),
                         float(self.w_hat_cv[b1, r]), float(self.c1_hat[b1]))


def fib_table(y_star, y_2star, y_3star, y_cv=None, alpha: float = 0.05, gate: bool = False,
              cv_slope: str = "pooled") -> FibTable:
    """FIB bias, significance and control-variate adjustment for every (b1, r).

    The control is C_r = y_cv - y_star and the adjusted estimate subtracts the
    fitted part, ``w - c1 * C``, the variance-minimising direction. With
    ``cv_slope="per-b1"`` each outer resample gets its own slope from its R
    replications; ``"pooled"`` fits one slope to the within-b1 deviations of
    all cells, which is far less noisy when R is small.
    """
    if cv_slope not in CV_SLOPES:
        raise ValueError(f"unknown cv_slope {cv_slope!r}; expected one of {CV_SLOPES}")
    y = np.asarray(y_star, dtype=float)
    y2 = np.asarray(y_2star, dtype=float)
    y3 = np.asarray(y_3star, dtype=float)
    d = y2.mean(axis=-1) - y
    g = y3.mean(axis=-1) - 2.0 * y2.mean(axis=-1) + y
    w = d + g
    terms = (y2 - y[..., None]) + (y3 - 2.0 * y2 + y[..., None])
    t, sig, _, _ = _t_from_terms(terms, alpha)
    w_used = np.where(sig, w, 0.0) if gate else w.copy()
    b1, r = y.shape
    c1 = np.zeros(b1)
    if y_cv is not None and r >= 2:
        control = np.asarray(y_cv, dtype=float)[:, None] - y
        if cv_slope == "per-b1":
            for b in range(b1):
                c1[b] = cv_coefficient(w_used[b], control[b])
        else:
            wc = (w_used - w_used.mean(axis=1, keepdims=True)).ravel()
            cc = (control - control.mean(axis=1, keepdims=True)).ravel()
            sxx = float(np.dot(cc, cc))
            c1[:] = float(np.dot(wc, cc)) / sxx if sxx > 0 else 0.0
        w_cv = w_used - c1[:, None] * control
    else:
        w_cv = w_used.copy()
    return FibTable(d, g, w, t, sig, w_used, c1, w_cv, gate)
