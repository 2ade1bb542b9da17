"""Beta-transformation, its adic successor map and the random walk adic skew product."""

from .beta_core import BetaParam, ParryAutomaton, expand, value_of, is_admissible
from .adic import successor, predecessor
from .cocycle import Observable, SkewPoint, Window, first_digit, occupation_sum
from .spectral import build_ulam, invariant_density, sigma_squared
from .experiments import ExperimentConfig, run_experiment

__all__ = [
    "BetaParam", "ParryAutomaton", "expand", "value_of", "is_admissible",
    "successor", "predecessor", "Observable", "SkewPoint", "Window", "first_digit", "occupation_sum",
    "build_ulam", "invariant_density", "sigma_squared", "ExperimentConfig", "run_experiment",
]
