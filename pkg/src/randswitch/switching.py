"""Stochastic switching: sojourn-tree quadrature and switch-count laws.

Sojourn times are discretised by successive right-truncation: the first
sojourn is conditioned on ``zeta_1 < t``, and for each of its nodes ``z`` the
next one on ``zeta_2 < t - z``, and so on. Every root-to-leaf path is a set of
realised switching times, so the stochastic model becomes a weighted sum of
deterministic-switching models.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .processes import (
    ComponentSpec,
    ModelError,
    randomised_chf,
    time_shifts,
)
from .quadrature import RandomiserSpec, rule_for

log = logging.getLogger(__name__)
_warned: set = set()

MAX_LEAVES = 100_000
PRUNE_WEIGHT = 1e-14
CDF_GRID = 2**12


@dataclass(frozen=True)
class SojournSpec:
    """Per-switch sojourn laws ``zeta_1..zeta_M`` and tree orders ``L_1..L_M``."""

    laws: tuple[RandomiserSpec, ...]
    orders: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "laws", tuple(self.laws))
        object.__setattr__(self, "orders", tuple(int(o) for o in self.orders))
        if len(self.laws) != len(self.orders):
            raise ModelError("one tree order per sojourn law")
        for law in self.laws:
            if law.family == "normal":
                raise ModelError("sojourn laws need positive support")
            if law.family == "uniform" and law.params[0] < 0:
                raise ModelError("sojourn laws need positive support")
            if law.family == "point" and law.params[0] <= 0:
                raise ModelError("sojourn laws need positive support")

    @classmethod
    def iid(cls, law: RandomiserSpec, count: int, order: int = 7) -> "SojournSpec":
        return cls((law,) * count, (order,) * count)

    @property
    def count(self) -> int:
        return len(self.laws)

    def head(self, m: int) -> "SojournSpec":
        if m > self.count:
            raise ModelError(f"need {m} sojourn laws, only {self.count} configured")
        return SojournSpec(self.laws[:m], self.orders[:m])

    @property
    def is_iid_exponential(self) -> bool:
        return (
            len(set(self.laws)) <= 1
            and all(l.family == "exponential" and l.truncation is None for l in self.laws)
        )


@dataclass
class SojournTree:
    """Leaves of the sojourn tree.

    ``weights[i]`` is the product of branch weights on leaf ``i``;
    ``sojourns[i]`` are its node values ``z_1..z_M`` and ``times[i]`` their
    partial sums (realised switching times).
    """

    horizon: float
    weights: np.ndarray
    sojourns: np.ndarray
    branch_sums: list = field(default_factory=list)
    pruned: int = 0

    @property
    def depth(self) -> int:
        return self.sojourns.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.cumsum(self.sojourns, axis=1)

    @property
    def n_leaves(self) -> int:
        return len(self.weights)


def build_sojourn_tree(sojourns: SojournSpec, horizon: float, m: int | None = None) -> SojournTree:
    """Depth-first tree of Gauss rules for successively truncated sojourns."""
    if horizon <= 0:
        raise ModelError("horizon must be > 0")
    m = sojourns.count if m is None else m
    spec = sojourns.head(m)
    n_leaves = int(np.prod(spec.orders)) if m else 1
    if n_leaves > MAX_LEAVES:
        raise ModelError(f"sojourn tree would have {n_leaves} leaves (cap {MAX_LEAVES})")

    weights: list[float] = []
    paths: list[tuple[float, ...]] = []
    branch_sums: list[float] = []
    pruned = 0

    def recurse(level: int, prefix: tuple[float, ...], weight: float, used: float):
        nonlocal pruned
        if level == m:
            weights.append(weight)
            paths.append(prefix)
            return
        remaining = horizon - used
        if remaining <= 0:
            # the prefix already exhausts the horizon
            pruned += 1
            log.warning("sojourn prefix %s exhausts horizon %.6g; pruned", prefix, horizon)
            return
        law = spec.laws[level].truncated(remaining)
        rule = rule_for(law, spec.orders[level])
        branch_sums.append(float(np.sum(rule.weights)))
        for v, z in zip(rule.weights, rule.nodes):
            w = weight * v
            if w < PRUNE_WEIGHT:
                pruned += 1
                continue
            recurse(level + 1, prefix + (float(z),), w, used + float(z))

    recurse(0, (), 1.0, 0.0)
    W = np.array(weights)
    Z = np.array(paths, dtype=float).reshape(len(weights), m)
    return SojournTree(horizon, W, Z, branch_sums, pruned)


def _leaf_boundaries(tree: SojournTree) -> np.ndarray:
    n = tree.n_leaves
    zeros = np.zeros((n, 1))
    inf = np.full((n, 1), np.inf)
    return np.hstack([zeros, tree.times, inf])


def chf_fixed_switches(components, sojourns: SojournSpec, x0: float, t: float, u, m: int | None = None,
                       tree: SojournTree | None = None):
    """Leaf-weighted sum of deterministic-switching chfs (``m`` switches).

    The tree is built with horizon ``t``, i.e. conditioned on all ``m``
    switches having happened by ``t``.
    """
    components = tuple(components)
    m = len(components) - 1 if m is None else m
    if len(components) < m + 1:
        raise ModelError(f"{m} switches need {m + 1} components")
    u = np.asarray(u, dtype=float)
    base = np.exp(1j * u * x0)
    if m == 0:
        return base * randomised_chf(components[0], t, u)
    if tree is None:
        tree = build_sojourn_tree(sojourns, t, m)
    shifts = time_shifts(_leaf_boundaries(tree), t)  # (leaves, m+1)
    prod = np.ones((tree.n_leaves,) + u.shape, dtype=complex)
    for j in range(m + 1):
        # leaves sharing a prefix share the shift of this regime
        uniq, inv = np.unique(shifts[:, j], return_inverse=True)
        prod *= randomised_chf(components[j], uniq, u)[inv]
    return base * np.tensordot(tree.weights, prod, axes=1)


@dataclass
class SwitchCountDistribution:
    horizon: float
    pmf: np.ndarray  # raw probabilities for m = 0..M_max
    truncation_mass: float  # P[M(t) > M_max]
    delta: float = 1.0
    method: str = ""

    @property
    def weights(self) -> np.ndarray:
        """pmf renormalised over 0..M_max."""
        return self.pmf / (1.0 - self.truncation_mass)

    @property
    def flagged(self) -> bool:
        """True when the truncation mass does not meet the requested tail."""
        return self.truncation_mass >= self.delta


def _sum_cdfs_exponential(rate: float, t: float, upto: int) -> np.ndarray:
    """P[S_m <= t] for m = 0..upto with S_m an Erlang(m, rate) sum."""
    m = np.arange(upto + 1)
    out = np.ones(upto + 1)
    out[1:] = special.gammainc(m[1:], rate * t)
    return out


def _sum_cdfs_numeric(laws, t: float, upto: int, n_grid: int = CDF_GRID) -> np.ndarray:
    """P[S_m <= t] by trapezoidal convolution of densities on a uniform grid.

    Approximate; accuracy is O(h^2) in the grid step ``t / n_grid``.
    """
    x = np.linspace(0.0, t, n_grid + 1)
    h = x[1] - x[0]
    out = np.ones(upto + 1)
    dens = None
    for m in range(1, upto + 1):
        law = laws[m - 1]
        if law.family == "point":
            raise ModelError("numeric switch counts need continuous sojourn laws")
        f = law.pdf(x)
        if dens is None:
            dens = f
        else:
            conv = np.convolve(dens, f)[: n_grid + 1] * h
            # trapezoid end corrections
            conv -= 0.5 * h * (dens[0] * f + f[0] * dens)
            dens = conv
        out[m] = float(integrate.trapezoid(dens, x))
    return np.clip(out, 0.0, 1.0)


def _sum_cdfs_point(laws, t: float, upto: int) -> np.ndarray:
    s = np.concatenate([[0.0], np.cumsum([l.params[0] for l in laws[:upto]])])
    return (s <= t).astype(float)


def switch_count_pmf(sojourns: SojournSpec, horizon: float, m_max: int, delta: float = 0.05
                     ) -> SwitchCountDistribution:
    """Law of the number of switches by ``horizon``, truncated at ``m_max``.

    pmf(m) = P[S_m <= t] - P[S_{m+1} <= t] with ``S_m`` the sum of the first
    ``m`` sojourns; the neglected mass is ``P[S_{m_max+1} <= t]``.
    """
    if horizon <= 0:
        raise ModelError("horizon must be > 0")
    laws = list(sojourns.laws)
    if sojourns.is_iid_exponential and laws:
        cdfs = _sum_cdfs_exponential(laws[0].params[0], horizon, m_max + 1)
        method = "erlang"
    else:
        if len(laws) < m_max + 1:
            raise ModelError(f"switch counts up to {m_max} need {m_max + 1} sojourn laws")
        if all(l.family == "point" for l in laws):
            cdfs = _sum_cdfs_point(laws, horizon, m_max + 1)
            method = "point"
        else:
            cdfs = _sum_cdfs_numeric(laws, horizon, m_max + 1)
            method = "convolution"
    pmf = cdfs[:-1] - cdfs[1:]
    q = float(cdfs[-1])
    dist = SwitchCountDistribution(horizon, pmf, q, delta, method)
    key = (sojourns, float(horizon), m_max, float(delta))
    if dist.flagged and key not in _warned:
        _warned.add(key)
        log.warning("switch-count truncation mass %.3g exceeds delta %.3g", q, delta)
    return dist


def chf_fully_stochastic(components, sojourns: SojournSpec, x0: float, t: float, u, m_max: int,
                         delta: float = 0.05, counts: SwitchCountDistribution | None = None):
    """pmf-weighted mixture of fixed-count chfs, pmf renormalised over 0..m_max."""
    components = tuple(components)
    if len(components) < m_max + 1:
        raise ModelError(f"up to {m_max} switches need {m_max + 1} components")
    counts = switch_count_pmf(sojourns, t, m_max, delta) if counts is None else counts
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape, dtype=complex)
    for m, p in enumerate(counts.weights):
        if p == 0.0:
            continue
        out = out + p * chf_fixed_switches(components[: m + 1], sojourns, x0, t, u, m)
    return out
