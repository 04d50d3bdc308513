"""Periodic-review (s, S) inventory model with backlogging.

Each period: demand is subtracted from the inventory level, holding and
shortage costs are charged on the end-of-period level, and if the level is
below ``s`` an order brings it back to ``S`` immediately.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np
from numba import njit

from .models import ModelConfig, ModelOutput, simulate
from .resample import Dataset, InverseCdf, ResampleCounts

DEFAULT_WARMUP = 10_000
DEFAULT_PERIODS = 30
SCENARIOS = {1: (20, 40), 2: (20, 45), 3: (20, 50), 4: (20, 55)}


@dataclass(frozen=True)
class InventoryPolicy:
    s: float
    S: float

    def __post_init__(self):
        if not 0 <= self.s < self.S:
            raise ValueError(f"need 0 <= s < S, got s={self.s}, S={self.S}")


@dataclass(frozen=True)
class CostStructure:
    holding: float
    shortage: float
    order_fixed: float
    order_unit: float

    def __post_init__(self):
        if min(self.holding, self.shortage, self.order_fixed, self.order_unit) < 0:
            raise ValueError("cost coefficients must be non-negative")


def calibrated_costs() -> CostStructure:
    """Cost coefficients frozen in ``data/inventory_costs.json``."""
    text = resources.files("roa").joinpath("data/inventory_costs.json").read_text()
    return CostStructure(**json.loads(text))


@njit(cache=True)
def _cost_path(demand, s, S, h, p, k, c, warmup):
    level = S
    total = 0.0
    for t in range(demand.shape[0]):
        level -= demand[t]
        cost = h * max(level, 0.0) + p * max(-level, 0.0)
        if level < s:
            cost += k + c * (S - level)
            level = S
        if t >= warmup:
            total += cost
    return total / (demand.shape[0] - warmup)


def cost_path(demand: np.ndarray, policy: InventoryPolicy, costs: CostStructure, warmup: int = 0) -> float:
    """Average per-period cost over ``demand[warmup:]``, starting at level S."""
    demand = np.ascontiguousarray(demand, dtype=np.float64)
    if demand.shape[0] <= warmup:
        raise ValueError("demand path shorter than warm-up")
    return float(_cost_path(demand, float(policy.s), float(policy.S), costs.holding, costs.shortage,
                            costs.order_fixed, costs.order_unit, int(warmup)))


@dataclass(frozen=True)
class InventoryModel:
    """Average cost over ``periods`` after ``warmup``; demand drawn from the counts distribution."""

    policy: InventoryPolicy
    costs: CostStructure
    periods: int = DEFAULT_PERIODS
    warmup: int = DEFAULT_WARMUP

    def __post_init__(self):
        if self.periods < 1 or self.warmup < 0:
            raise ValueError("periods must be >= 1 and warmup >= 0")

    def evaluate(self, counts, config, seed):
        u = np.random.default_rng(seed).random(self.warmup + self.periods)
        demand = InverseCdf.from_counts(counts)(u)
        return cost_path(demand, self.policy, self.costs, self.warmup)


def run_inventory(demand: ResampleCounts, policy: InventoryPolicy, costs: CostStructure,
                  periods: int = DEFAULT_PERIODS, warmup: int = DEFAULT_WARMUP, seed: int = 0) -> ModelOutput:
    return simulate(InventoryModel(policy, costs, periods, warmup), demand, ModelConfig(), seed)


@dataclass(frozen=True)
class PoissonDemand:
    """Poisson(base) demand plus optional independent Poisson(noise) corruption."""

    base: float = 30.0
    noise: float = 0.0
    name: str = "perfect"

    def sample(self, g: np.random.Generator, size: int) -> np.ndarray:
        d = g.poisson(self.base, size)
        if self.noise > 0:
            d = d + g.poisson(self.noise, size)
        return d.astype(float)


PERFECT = PoissonDemand(30.0, 0.0, "perfect")
CORRUPT = PoissonDemand(25.0, 5.0, "corrupt")


@dataclass(frozen=True)
class ZeroDemand:
    name: str = "zero"

    def sample(self, g: np.random.Generator, size: int) -> np.ndarray:
        return np.zeros(size)


def _gen(generator, n: int, seed: int) -> Dataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    return Dataset.from_values(generator.sample(np.random.default_rng(seed), n), generator.name)


def gen_perfect_poisson(n: int, seed: int) -> Dataset:
    return _gen(PERFECT, n, seed)


def gen_corrupt_poisson(n: int, seed: int) -> Dataset:
    return _gen(CORRUPT, n, seed)


def long_run_reference(policy: InventoryPolicy, costs: CostStructure, generator, seed: int,
                       batches: int = 100, batch_len: int = DEFAULT_PERIODS,
                       warmup: int = DEFAULT_WARMUP) -> float:
    """Mean of ``batches`` consecutive batch means after a warm-up, demand drawn from the true law."""
    demand = generator.sample(np.random.default_rng(seed), warmup + batches * batch_len)
    return cost_path(demand, policy, costs, warmup)


def costs_dict(costs: CostStructure) -> dict:
    return asdict(costs)
