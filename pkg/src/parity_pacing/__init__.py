"""Parity-regularized budget pacing for repeated second-price auctions."""
from .core import BudgetSpec, DatasetStats, InputTuple, TargetDistribution
from .regularizer import LpNorm, ModifiedKL, ParityRay, make_parity_ray

__all__ = [
    "BudgetSpec",
    "DatasetStats",
    "InputTuple",
    "TargetDistribution",
    "LpNorm",
    "ModifiedKL",
    "ParityRay",
    "make_parity_ray",
]
__version__ = "0.1.0"
