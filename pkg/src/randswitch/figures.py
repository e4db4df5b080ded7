"""Model sets behind the implied-volatility surface experiments.

fig3: strikes 0.8..1.4 against expiries 0.5..1; calm -> excited switch at
T/2 (deterministic) or after an exponential sojourn with mean T/2
(stochastic), and the excited randomiser without a switch.

fig4: T = 1, strikes 0.8..1.4 against the excited randomiser's std
xi_1 in [0, 1]; one switch at 0.5, one exponential(2) switch, and iid
exponential(2) sojourns with at most four switches.
"""

from __future__ import annotations

import numpy as np

from .models import (
    CALM,
    EXCITED,
    ORDER,
    RATE,
    DeterministicModel,
    FullyStochasticModel,
    NoSwitchModel,
    StochasticModel,
    alternating,
    regime,
)
from .pricing import CosConfig, MarketSpec, iv_surface
from .quadrature import RandomiserSpec
from .switching import SojournSpec

STRIKES = tuple(np.round(np.arange(0.8, 1.4001, 0.1), 10))
FIG3_EXPIRIES = (0.5, 0.75, 1.0)
FIG4_XI = (0.0, 0.25, 0.5, 0.75, 1.0)
FIG4_M_MAX = 4
SOJOURN = RandomiserSpec.exponential(2.0)


def fig3_models(r: float = RATE, order: int = ORDER) -> dict:
    calm, excited = regime(CALM, r, order), regime(EXCITED, r, order)
    # relative: switch at T/2; exponential(2) rescaled to rate 2/T, mean T/2
    return {
        "deterministic": DeterministicModel((calm, excited), (0.5,), relative=True),
        "stochastic": StochasticModel((calm, excited), SojournSpec.iid(SOJOURN, 1, order), relative=True),
        "no-switch": NoSwitchModel(excited),
    }


def fig3_market(r: float = RATE) -> MarketSpec:
    return MarketSpec(STRIKES, FIG3_EXPIRIES, 1.0, r)


def excited_with_std(xi: float) -> RandomiserSpec:
    return RandomiserSpec.normal(EXCITED.params[0], xi)


def fig4_models(r: float = RATE, order: int = ORDER, m_max: int = FIG4_M_MAX, point_mass: bool = False) -> dict:
    """name -> (xi -> model). ``point_mass`` uses a point-mass excited law at
    xi = 0 instead of a zero-std normal (the collapse reference)."""

    def excited(xi):
        if point_mass and xi == 0:
            return RandomiserSpec.point(EXCITED.params[0])
        return excited_with_std(xi)

    def regimes(xi, count):
        return alternating(count, CALM, excited(xi), r, order)

    return {
        "deterministic": lambda xi: DeterministicModel(regimes(xi, 2), (0.5,)),
        "stochastic": lambda xi: StochasticModel(regimes(xi, 2), SojournSpec.iid(SOJOURN, 1, order)),
        "fully-stochastic": lambda xi: FullyStochasticModel(
            regimes(xi, m_max + 1), SojournSpec.iid(SOJOURN, m_max, order), m_max
        ),
    }


def fig4_market(r: float = RATE) -> MarketSpec:
    return MarketSpec(STRIKES, (1.0,), 1.0, r)


def surface(figure: str, cos: CosConfig = CosConfig()):
    if figure == "fig3":
        return iv_surface(fig3_models(), fig3_market(), "T", cos=cos)
    if figure == "fig4":
        return iv_surface(fig4_models(), fig4_market(), "xi", FIG4_XI, cos=cos)
    raise ValueError(f"unknown figure {figure!r}; expected fig3 or fig4")


def ordering_violations(rows, order: tuple[str, ...]) -> list[tuple]:
    """Cells ``(K, sweep, higher, lower, iv_high, iv_low)`` where
    ``iv[order[i]] >= iv[order[i+1]]`` fails."""
    table = {(r.model, r.K, r.sweep): r.iv for r in rows}
    cells = sorted({(r.K, r.sweep) for r in rows})
    bad = []
    for K, s in cells:
        for hi, lo in zip(order, order[1:]):
            a, b = table[(hi, K, s)], table[(lo, K, s)]
            if not a >= b:
                bad.append((K, s, hi, lo, a, b))
    return bad


def smile_widths(rows, model: str) -> dict:
    """sweep value -> max - min IV over strikes."""
    out: dict = {}
    for r in rows:
        if r.model == model:
            out.setdefault(r.sweep, []).append(r.iv)
    return {s: max(v) - min(v) for s, v in sorted(out.items())}
