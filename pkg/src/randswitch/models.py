"""Model wrappers exposing a common ``chf(u, t)`` for pricing and the CLI.

Switching times and sojourn means can be given relative to the evaluation
horizon (``relative=True``); the figure-3 recipe uses this so that the switch
sits at ``T/2`` for every expiry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import markov, processes, switching
from .processes import ComponentSpec, ScheduleDeterministic
from .quadrature import RandomiserSpec
from .switching import SojournSpec

MODEL_KINDS = ("no-switch", "deterministic", "stochastic", "fully-stochastic", "markov")


@dataclass(frozen=True)
class NoSwitchModel:
    component: ComponentSpec
    x0: float = 0.0
    kind: str = "no-switch"

    def chf(self, u, t):
        u = np.asarray(u, dtype=float)
        return np.exp(1j * u * self.x0) * processes.randomised_chf(self.component, t, u)


@dataclass(frozen=True)
class DeterministicModel:
    components: tuple[ComponentSpec, ...]
    times: tuple[float, ...]
    x0: float = 0.0
    relative: bool = False
    kind: str = "deterministic"

    def schedule(self, t: float) -> ScheduleDeterministic:
        times = tuple(s * t for s in self.times) if self.relative else self.times
        return ScheduleDeterministic(times, self.components, self.x0)

    def chf(self, u, t):
        return processes.composite_chf_deterministic(self.schedule(t), t, u)


def _scale_law(law: RandomiserSpec, t: float) -> RandomiserSpec:
    """Sojourn law with its mean stretched by ``t`` (mean given as a fraction)."""
    if law.family == "exponential":
        return RandomiserSpec("exponential", (law.params[0] / t,), law.truncation)
    if law.family == "point":
        return RandomiserSpec.point(law.params[0] * t)
    if law.family == "uniform":
        return RandomiserSpec.uniform(law.params[0] * t, law.params[1] * t)
    raise ValueError(f"cannot rescale {law.family} sojourns")


@dataclass(frozen=True)
class StochasticModel:
    """Fixed number of switches ``len(components) - 1`` at random sojourn times."""

    components: tuple[ComponentSpec, ...]
    sojourns: SojournSpec
    x0: float = 0.0
    relative: bool = False
    kind: str = "stochastic"

    def sojourns_at(self, t: float) -> SojournSpec:
        if not self.relative:
            return self.sojourns
        return SojournSpec(tuple(_scale_law(l, t) for l in self.sojourns.laws), self.sojourns.orders)

    def chf(self, u, t):
        m = len(self.components) - 1
        return switching.chf_fixed_switches(self.components, self.sojourns_at(t), self.x0, t, u, m)


@dataclass(frozen=True)
class FullyStochasticModel:
    components: tuple[ComponentSpec, ...]
    sojourns: SojournSpec
    m_max: int
    delta: float = 0.05
    x0: float = 0.0
    kind: str = "fully-stochastic"

    def counts(self, t: float) -> switching.SwitchCountDistribution:
        return switching.switch_count_pmf(self.sojourns, t, self.m_max, self.delta)

    def chf(self, u, t):
        return switching.chf_fully_stochastic(
            self.components, self.sojourns, self.x0, t, u, self.m_max, self.delta, self.counts(t)
        )


@dataclass(frozen=True)
class MarkovModel:
    spec: markov.MarkovSpec
    kind: str = "markov"

    def chf(self, u, t):
        return markov.chf_markov(self.spec, t, u)


# calm / excited presets ----------------------------------------------------

CALM = RandomiserSpec.normal(0.15, 0.1)
EXCITED = RandomiserSpec.normal(0.3, 1.0)
RATE = 0.05
ORDER = 7


def regime(randomiser: RandomiserSpec, r: float = RATE, order: int = ORDER) -> ComponentSpec:
    return ComponentSpec(randomiser, "merton", (r,), "identity", 0.0, processes.JumpSpec(), order)


def alternating(count: int, calm=CALM, excited=EXCITED, r: float = RATE, order: int = ORDER):
    """calm, excited, calm, ... components."""
    return tuple(regime(calm if j % 2 == 0 else excited, r, order) for j in range(count))
