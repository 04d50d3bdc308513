"""Turn a filled output tensor into bias, variance and interval estimates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ci
from .engine import OutputTensor
from .fib import FibTable, fib_table
from .hoif import HoifDiagnostics, hoif_diagnostics, if1_centered
from .variance import VarianceReport, total_debiased_variance


@dataclass
class AnalysisReport:
    tensor: OutputTensor
    fib: FibTable | None
    y_d: np.ndarray
    y_d_cv: np.ndarray
    hoif: HoifDiagnostics | None
    hoif_cv: HoifDiagnostics | None
    variance: VarianceReport | None
    variance_cv: VarianceReport | None
    intervals: dict[str, ci.ConfidenceInterval]
    settings: dict = field(default_factory=dict)

    @property
    def point(self) -> float:
        """The bias-corrected point estimate."""
        iv = self.intervals.get("bias-corrected")
        return iv.point if iv else float(self.tensor.y_star.mean())

    def cell_rows(self) -> list[dict]:
        t = self.tensor
        rows = []
        for b in range(t.B1):
            for r in range(t.R):
                row = {"b1": b, "r": r, "y_star": t.y_star[b, r]}
                if self.fib is not None:
                    f = self.fib
                    row.update(mean_y_2star=t.y_2star[b, r].mean(), mean_y_3star=t.y_3star[b, r].mean(),
                               delta_star=f.delta_star[b, r], gamma_hat=f.gamma_hat[b, r], w_hat=f.w_hat[b, r],
                               t_stat=f.t_stat[b, r], significant=int(f.significant[b, r]),
                               c1_hat=f.c1_hat[b], w_hat_cv=f.w_hat_cv[b, r],
                               y_d=self.y_d[b, r], y_d_cv=self.y_d_cv[b, r])
                rows.append(row)
        return rows


def analyze(t: OutputTensor, alpha: float = 0.05, mode: str = "eq21", gate: bool = False,
            scale: str = "iu-adjusted", methods=None, cv_slope: str = "pooled") -> AnalysisReport:
    methods = tuple(methods or ci.METHODS)
    intervals: dict[str, ci.ConfidenceInterval] = {}
    if t.baseline.size >= 2 and "crude" in methods:
        intervals["crude"] = ci.crude_ci(t.baseline, alpha)
    y = t.y_star
    nested = t.B1 >= 2 and t.R >= 2
    if nested and "iu-barton" in methods:
        intervals["iu-barton"] = ci.barton_ci(y, alpha)
    raw_hoif = hoif_diagnostics(y, t.counts, t.m, mode) if t.B1 >= 2 else None
    if raw_hoif is not None and t.R >= 2 and "iu-lamqian" in methods:
        intervals["iu-lamqian"] = ci.lamqian_ci(y, if1_centered(y, t.counts), alpha)

    fib = hoif = hoif_cv = var = var_cv = None
    y_d = y_d_cv = y
    if t.B2 >= 1:
        fib = fib_table(y, t.y_2star, t.y_3star, t.y_cv, alpha, gate, cv_slope)
        y_d = y - fib.w_used
        y_d_cv = y - fib.w_hat_cv
        if nested:
            hoif = hoif_diagnostics(y_d, t.counts, t.m, mode)
            hoif_cv = hoif_diagnostics(y_d_cv, t.counts, t.m, mode)
            var = total_debiased_variance(y, fib.w_used)
            var_cv = total_debiased_variance(y, fib.w_hat_cv)
            if "bias-corrected" in methods:
                intervals["bias-corrected"] = ci.bias_corrected_ci(
                    y_d, hoif.beta_hat, var.total_debiased, var.iu_var, alpha, t.m, t.n, scale)
            if "bias-corrected-vr" in methods and t.y_cv is not None:
                intervals["bias-corrected-vr"] = ci.bias_corrected_ci(
                    y_d_cv, hoif_cv.beta_hat, var_cv.total_debiased, var_cv.iu_var, alpha, t.m, t.n, scale,
                    method="bias-corrected-vr")
    settings = {"alpha": alpha, "mode": mode, "gate_bias": gate, "scale": scale, "cv_slope": cv_slope}
    return AnalysisReport(t, fib, y_d, y_d_cv, hoif or raw_hoif, hoif_cv, var, var_cv, intervals, settings)
