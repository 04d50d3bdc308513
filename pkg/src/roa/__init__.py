"""Monte-Carlo output analysis under input uncertainty: nested bootstrap bias
correction, influence-function bias estimates, variance decomposition and
confidence intervals."""
from .analysis import AnalysisReport, analyze
from .budget import BudgetAllocation, allocate
from .ci import ConfidenceInterval
from .config import ExperimentConfig, parse_config
from .coverage import CoverageResult, coverage_experiment
from .engine import OutputTensor, run_nested
from .resample import Dataset, ResampleCounts, derive_seed

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport", "BudgetAllocation", "ConfidenceInterval", "CoverageResult", "Dataset", "ExperimentConfig",
    "OutputTensor", "ResampleCounts", "allocate", "analyze", "coverage_experiment", "derive_seed", "parse_config",
    "run_nested",
]
