"""Randomised regime-switching jump-diffusion models.

Quadrature-based characteristic functions for deterministic, stochastic,
fully stochastic and Markov-modulated switching, the mimicking local-vol
models, COS option pricing and a Monte Carlo oracle.
"""

from .models import (
    DeterministicModel,
    FullyStochasticModel,
    MarkovModel,
    NoSwitchModel,
    StochasticModel,
)
from .processes import ComponentSpec, JumpSpec, ScheduleDeterministic
from .quadrature import RandomiserSpec, rule_for
from .switching import SojournSpec

__version__ = "0.1.0"

__all__ = [
    "ComponentSpec",
    "DeterministicModel",
    "FullyStochasticModel",
    "JumpSpec",
    "MarkovModel",
    "NoSwitchModel",
    "RandomiserSpec",
    "ScheduleDeterministic",
    "SojournSpec",
    "StochasticModel",
    "rule_for",
]
