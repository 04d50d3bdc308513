"""Model contract and analytic oracle models.

A model maps a resample distribution (``ResampleCounts``) and a seed to one
stochastic output. It draws its own inputs from the distribution using the
seed, so a replication is fully reproducible from ``(counts, config, seed)``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol

import numpy as np

from .resample import InverseCdf, ResampleCounts


class EvaluationError(RuntimeError):
    """A model run failed; the analysis that requested it must abort."""

    def __init__(self, tag: str, message: str):
        super().__init__(f"[{tag}] {message}")
        self.tag = tag


@dataclass(frozen=True)
class ModelConfig:
    decision: tuple[float, ...] = ()
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ModelOutput:
    value: float
    runtime: float = 0.0


class Model(Protocol):
    def evaluate(self, counts: ResampleCounts, config: ModelConfig, seed: int) -> float:
        ...


def simulate(model: Model, counts: ResampleCounts, config: ModelConfig, seed: int) -> ModelOutput:
    """Run ``model`` once; any failure or non-finite value raises EvaluationError."""
    t0 = time.perf_counter()
    try:
        value = float(model.evaluate(counts, config, seed))
    except EvaluationError:
        raise
    except Exception as exc:  # surface every model failure with a tag
        raise EvaluationError(type(model).__name__, repr(exc)) from exc
    if not math.isfinite(value):
        raise EvaluationError(type(model).__name__, f"non-finite output {value}")
    return ModelOutput(value, time.perf_counter() - t0)


@dataclass(frozen=True)
class MeanModel:
    """Y = (mean of k draws from F) ** power.

    theta(F) = mu_F for power 1 and mu_F**2 + var_F / k for power 2.
    """

    k: int = 1
    power: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.power not in (1, 2):
            raise ValueError("power must be 1 or 2")

    def evaluate(self, counts, config, seed):
        u = np.random.default_rng(seed).random(self.k)
        draws = InverseCdf.from_counts(counts)(u)
        return float(np.mean(draws)) ** self.power

    def theta(self, counts: ResampleCounts) -> float:
        mu, var = _weighted_moments(counts)
        return mu if self.power == 1 else mu * mu + var / self.k


@dataclass(frozen=True)
class ProductModel:
    """Y = D1 * D2 for two independent draws, so theta(F) = mu_F**2 exactly."""

    def evaluate(self, counts, config, seed):
        u = np.random.default_rng(seed).random(2)
        d = InverseCdf.from_counts(counts)(u)
        return float(d[0] * d[1])

    def theta(self, counts: ResampleCounts) -> float:
        mu, _ = _weighted_moments(counts)
        return mu * mu


@dataclass(frozen=True)
class ConstantModel:
    value: float = 0.0

    def evaluate(self, counts, config, seed):
        return self.value

    def theta(self, counts: ResampleCounts) -> float:
        return self.value


def make_mean_model(k: int = 1, power: int = 1) -> MeanModel:
    return MeanModel(k, power)


def _weighted_moments(counts: ResampleCounts) -> tuple[float, float]:
    """Mean and (population) variance of the distribution defined by counts."""
    w = counts.counts / counts.m
    x = counts.base.values
    mu = float(np.dot(w, x))
    return mu, float(np.dot(w, (x - mu) ** 2))


@dataclass(frozen=True)
class NoiseModel:
    """Y = mean + sd * Z, ignoring the input distribution entirely."""

    mean: float = 0.0
    sd: float = 1.0

    def evaluate(self, counts, config, seed):
        return self.mean + self.sd * float(np.random.default_rng(seed).standard_normal())

    def theta(self, counts: ResampleCounts) -> float:
        return self.mean
