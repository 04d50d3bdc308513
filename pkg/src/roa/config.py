"""Experiment configuration: JSON in, validated dataclass out."""
from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .ci import METHODS, SCALES
from .fib import CV_SLOPES
from .hoif import MODES

SCENARIOS = ("oracle", "inventory", "ml")

_GENERATOR_DEFAULTS = {
    "oracle": {"model": "product", "k": 1, "power": 1, "mu": 0.0, "sigma": 1.0, "n": 20},
    "inventory": {"law": "perfect", "n": 10},
    "ml": {"kind": "linear", "noise": "low", "n": 100},
}
_POLICY_DEFAULTS = {"s": 20.0, "S": 45.0, "periods": 30, "warmup": 10_000}
_DEFAULT_METHODS = {
    "oracle": ["crude", "bias-corrected", "bias-corrected-vr"],
    "inventory": ["crude", "iu-barton", "iu-lamqian", "bias-corrected", "bias-corrected-vr"],
    "ml": ["iu-barton", "iu-lamqian", "bias-corrected-vr", "loo-boot", "repeated-cv"],
}
_CHOICES = {
    ("generator", "model"): ("product", "mean", "noise"),
    ("generator", "power"): (1, 2),
    ("generator", "law"): ("perfect", "corrupt"),
    ("generator", "kind"): ("linear", "polynomial", "complex"),
    ("generator", "noise"): ("none", "low", "high"),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "oracle"
    generator: dict = field(default_factory=dict)
    policy: dict = field(default_factory=dict)
    costs: dict | None = None
    learner: str = "ols"
    budget: int = 1000
    alloc: tuple[int, int, int] | None = None
    baseline_alloc: tuple[int, int] | None = None
    methods: tuple[str, ...] = ()
    alpha: float = 0.05
    macro_replications: int = 100
    root_seed: int = 0
    mode: str = "eq21"
    gate_bias: bool = False
    ci_scale: str = "iu-adjusted"
    cv_slope: str = "pooled"
    truth_size: int = 1_000_000
    workers: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("alloc", "baseline_alloc", "methods"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        """Hash of the settings that determine results (worker count excluded)."""
        d = self.to_dict()
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def baseline_shape(self) -> tuple[int, int]:
        if self.baseline_alloc is not None:
            return self.baseline_alloc
        return max(2, self.budget // 10), 10


_FIELD_TYPES = {
    "scenario": str, "generator": dict, "policy": dict, "costs": (dict, type(None)), "learner": str,
    "budget": int, "alloc": (list, type(None)), "baseline_alloc": (list, type(None)), "methods": list,
    "alpha": float, "macro_replications": int, "root_seed": int, "mode": str, "gate_bias": bool,
    "ci_scale": str, "cv_slope": str, "truth_size": int, "workers": int,
}


def _check_type(path: str, value: Any, expected) -> Any:
    types = expected if isinstance(expected, tuple) else (expected,)
    if float in types and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if int in types and isinstance(value, bool):
        raise ConfigError(f"{path}: expected integer, got boolean")
    if not isinstance(value, types):
        names = "/".join(t.__name__ for t in types)
        raise ConfigError(f"{path}: expected {names}, got {type(value).__name__}")
    return value


def _merge(path: str, given: dict, defaults: dict) -> dict:
    out = dict(defaults)
    for key, value in given.items():
        if key not in defaults:
            raise ConfigError(f"{path}.{key}: unknown key")
        expected = type(defaults[key])
        value = _check_type(f"{path}.{key}", value, expected)
        choices = _CHOICES.get((path, key))
        if choices and value not in choices:
            raise ConfigError(f"{path}.{key}: must be one of {list(choices)}, got {value!r}")
        out[key] = value
    return out


def from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>: expected a JSON object")
    raw = copy.deepcopy(raw)
    for key in raw:
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{key}: unknown key")
    vals = {k: _check_type(k, v, _FIELD_TYPES[k]) for k, v in raw.items()}
    scenario = vals.get("scenario", "oracle")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario: must be one of {list(SCENARIOS)}, got {scenario!r}")
    vals["scenario"] = scenario
    vals["generator"] = _merge("generator", vals.get("generator", {}), _GENERATOR_DEFAULTS[scenario])
    vals["policy"] = _merge("policy", vals.get("policy", {}), _POLICY_DEFAULTS) if scenario == "inventory" else \
        _merge("policy", vals.get("policy", {}), {})
    if vals.get("costs") is not None:
        vals["costs"] = _merge("costs", vals["costs"], {"holding": 0.0, "shortage": 0.0,
                                                        "order_fixed": 0.0, "order_unit": 0.0})
    vals["methods"] = tuple(vals.get("methods") or _DEFAULT_METHODS[scenario])
    for i, m in enumerate(vals["methods"]):
        if m not in METHODS:
            raise ConfigError(f"methods[{i}]: unknown method {m!r}; expected one of {list(METHODS)}")
    for key, size in (("alloc", 3), ("baseline_alloc", 2)):
        if vals.get(key) is not None:
            v = vals[key]
            if len(v) != size or not all(isinstance(x, int) and not isinstance(x, bool) and x >= 0 for x in v):
                raise ConfigError(f"{key}: expected {size} non-negative integers, got {v!r}")
            vals[key] = tuple(v)
    cfg = ExperimentConfig(**vals)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if not 0 < cfg.alpha < 1:
        raise ConfigError(f"alpha: must lie in (0, 1), got {cfg.alpha}")
    if cfg.mode not in MODES:
        raise ConfigError(f"mode: must be one of {list(MODES)}, got {cfg.mode!r}")
    if cfg.ci_scale not in SCALES:
        raise ConfigError(f"ci_scale: must be one of {list(SCALES)}, got {cfg.ci_scale!r}")
    if cfg.cv_slope not in CV_SLOPES:
        raise ConfigError(f"cv_slope: must be one of {list(CV_SLOPES)}, got {cfg.cv_slope!r}")
    if cfg.budget < 8:
        raise ConfigError(f"budget: must be >= 8, got {cfg.budget}")
    if cfg.macro_replications < 1:
        raise ConfigError(f"macro_replications: must be >= 1, got {cfg.macro_replications}")
    if cfg.root_seed < 0:
        raise ConfigError(f"root_seed: must be >= 0, got {cfg.root_seed}")
    if cfg.workers < 1:
        raise ConfigError(f"workers: must be >= 1, got {cfg.workers}")
    if cfg.truth_size < 1:
        raise ConfigError(f"truth_size: must be >= 1, got {cfg.truth_size}")
    if cfg.learner not in ("ols", "constant-mean"):
        raise ConfigError(f"learner: must be 'ols' or 'constant-mean', got {cfg.learner!r}")
    n = cfg.generator.get("n", 1)
    if n < 2:
        raise ConfigError(f"generator.n: must be >= 2, got {n}")
    if cfg.scenario == "inventory" and not 0 <= cfg.policy["s"] < cfg.policy["S"]:
        raise ConfigError(f"policy: need 0 <= s < S, got s={cfg.policy['s']}, S={cfg.policy['S']}")
    if cfg.costs is not None and min(cfg.costs.values()) < 0:
        raise ConfigError("costs: coefficients must be non-negative")


def parse_config(path: str | Path | None = None, env: dict | None = None) -> ExperimentConfig:
    """Read a JSON config (an empty file gives the defaults); ROA_SEED overrides the seed."""
    raw: dict = {}
    if path is not None:
        text = Path(path).read_text()
        if text.strip():
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"<root>: invalid JSON ({exc})") from exc
    env = os.environ if env is None else env
    if env.get("ROA_SEED"):
        try:
            raw = {**raw, "root_seed": int(env["ROA_SEED"])}
        except ValueError as exc:
            raise ConfigError(f"ROA_SEED: expected integer, got {env['ROA_SEED']!r}") from exc
    return from_dict(raw)


def stamp_provenance(report: dict, config: ExperimentConfig, versions: dict | None = None,
                     ledger: dict | None = None) -> dict:
    """Return ``report`` with a provenance block (config hash, seed, ledger, flags)."""
    out = dict(report)
    out["provenance"] = {
        "config_hash": config.digest(),
        "root_seed": config.root_seed,
        "mode": config.mode,
        "gate_bias": config.gate_bias,
        "ci_scale": config.ci_scale,
        "cv_slope": config.cv_slope,
        "ledger": ledger or {},
        "versions": versions or {},
    }
    return out
