"""Split a budget of N model runs into (m, B1, R, B2).

The orders of growth are m ~ N^(1/3) (or sqrt(n) once N exceeds n^1.5),
B2 ~ ((3m^2 - m)/(m + 1))^(1/3), R*B2 ~ m and B1 = N/(R*B2). The constants
C_M and C_R are calibrated so that N=1000, n=100 gives (B1, R, B2) = (50, 5, 4).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

C_M = 2.0
C_R = 1.0
MAX_OVERDRAFT = 0.05


class InfeasibleBudget(ValueError):
    pass


def _round(x: float) -> int:
    """Round half up (Python's round() is half-to-even)."""
    return int(math.floor(x + 0.5))


def _cbrt(x: float) -> float:
    r = round(x ** (1.0 / 3.0))
    return float(r) if r ** 3 == x else x ** (1.0 / 3.0)


def optimal_m(N: int, n: int, c_m: float = 1.0) -> int:
    if N <= n ** 1.5:
        return min(max(_round(c_m * _cbrt(N)), 2), n)
    # beyond n^1.5 runs the subsample stops growing; the N/n cap is relaxed to n
    return min(max(_round(c_m * math.sqrt(n)), 2), n)


def optimal_b2(m: int) -> int:
    if m < 1:
        raise ValueError("m must be >= 1")
    return max(1, _round(((3 * m * m - m) / (m + 1)) ** (1.0 / 3.0)))


def _raw_r(m: int, c_r: float) -> int:
    return max(2, _round(c_r * m / optimal_b2(m)))


def optimal_r(m: int, c_r: float = C_R) -> int:
    """Replications per outer resample, made non-decreasing in m."""
    return max(_raw_r(k, c_r) for k in range(2, max(m, 2) + 1))


@dataclass(frozen=True)
class BudgetAllocation:
    N: int
    n: int
    m_star: int
    B1: int
    R: int
    B2: int
    baseline_runs: int = 0
    overridden: bool = False
    ledger: dict = field(default_factory=dict)

    @property
    def kappa(self) -> float:
        return self.m_star / self.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.B1, self.R, self.B2


def run_ledger(B1: int, R: int, B2: int, N: int, baseline_runs: int = 0, cv_runs: bool = True) -> dict:
    """Run counts under both accountings.

    ``nominal`` counts B1*R*B2 (the inner bias runs carry the budget, star runs
    shared); ``full`` counts every model evaluation.
    """
    core = B1 * R * (1 + 2 * B2)
    cv = B1 if (cv_runs and B2 > 0) else 0
    full = core + cv + baseline_runs
    nominal = B1 * R * max(B2, 1)
    return {"core": core, "cv_extra": cv, "baseline": baseline_runs, "full": full,
            "nominal": nominal, "budget": N,
            "nominal_overdraft": nominal / N - 1.0, "full_overdraft": full / N - 1.0}


def allocate(N: int, n: int, overrides: tuple[int, int, int] | None = None,
             baseline_runs: int | None = None, c_m: float = C_M, c_r: float = C_R) -> BudgetAllocation:
    """Allocate the budget, or validate explicit ``(B1, R, B2)`` overrides.

    ``baseline_runs`` defaults to R (runs at the empirical distribution).
    The nominal count B1*R*B2 may exceed N by at most 5%.
    """
    if N < 8 or n < 2:
        raise InfeasibleBudget(f"need N >= 8 and n >= 2, got N={N}, n={n}")
    m = optimal_m(N, n, c_m)
    if overrides is not None:
        B1, R, B2 = (int(v) for v in overrides)
        if B1 < 1 or R < 1 or B2 < 0:
            raise InfeasibleBudget(f"invalid override {overrides}")
    else:
        B2 = optimal_b2(m)
        R = optimal_r(m, c_r)
        B1 = N // (R * B2)
        if B1 < 2:
            raise InfeasibleBudget(f"budget N={N} leaves fewer than two outer resamples (R={R}, B2={B2})")
    base = R if baseline_runs is None else baseline_runs
    ledger = run_ledger(B1, R, B2, N, base)
    if ledger["nominal_overdraft"] > MAX_OVERDRAFT + 1e-12:
        raise InfeasibleBudget(f"allocation {B1, R, B2} needs {ledger['nominal']} runs, budget {N}")
    return BudgetAllocation(N, n, m, B1, R, B2, base, overrides is not None, ledger)
