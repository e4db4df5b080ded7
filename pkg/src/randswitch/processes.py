"""Randomised component processes and deterministic-switching composites.

Convention: for a conditional (fixed-parameter) component the characteristic
function is ``exp(-t * psi(u; theta))`` with ``Re psi >= 0``, i.e.

    psi(u; theta) = -i u b(theta) + u^2 sigma(theta)^2 / 2
                    - lam (exp(i u muJ - u^2 sigJ^2 / 2) - 1).

The usual ``exp(t * Psi)`` form is recovered with ``Psi = -psi``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special, stats

from . import fourier
from .quadrature import QuadratureRule, RandomiserSpec, rule_for

POISSON_TAIL = 1e-12

DRIFT_RULES = ("merton", "constant", "affine")
VOL_RULES = ("identity", "constant")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class JumpSpec:
    """Compound-Poisson part: intensity and normal(mu, sigma^2) log-jumps."""

    intensity: float = 0.0
    mean: float = 0.0
    std: float = 0.0

    def __post_init__(self):
        if self.intensity < 0 or self.std < 0:
            raise ModelError("jump intensity and std must be >= 0")

    @property
    def k(self) -> float:
        """E[e^eta] - 1."""
        return math.expm1(self.mean + 0.5 * self.std**2)

    def exponent(self, u):
        """Jump contribution to psi(u)."""
        if self.intensity == 0.0:
            return np.zeros_like(np.asarray(u, dtype=float), dtype=complex)
        u = np.asarray(u, dtype=float)
        return -self.intensity * (np.exp(1j * u * self.mean - 0.5 * u * u * self.std**2) - 1.0)


@dataclass(frozen=True)
class ComponentSpec:
    """One regime: drift/vol rules of the randomiser, jumps, quadrature order.

    ``drift`` is ``"merton"`` (params ``(r,)``: ``r - sigma^2/2 - lam k``),
    ``"constant"`` (``(c,)``) or ``"affine"`` (``(c0, c1)``: ``c0 + c1 theta``).
    ``vol`` is ``"identity"`` (``sigma = theta``) or ``"constant"``.
    """

    randomiser: RandomiserSpec
    drift: str = "merton"
    drift_params: tuple[float, ...] = (0.05,)
    vol: str = "identity"
    vol_param: float = 0.0
    jumps: JumpSpec = field(default_factory=JumpSpec)
    order: int = 7

    def __post_init__(self):
        if self.drift not in DRIFT_RULES:
            raise ModelError(f"unknown drift rule {self.drift!r}")
        if self.vol not in VOL_RULES:
            raise ModelError(f"unknown vol rule {self.vol!r}")
        object.__setattr__(self, "drift_params", tuple(float(c) for c in self.drift_params))
        need = {"merton": 1, "constant": 1, "affine": 2}[self.drift]
        if len(self.drift_params) != need:
            raise ModelError(f"drift rule {self.drift!r} takes {need} parameter(s)")

    def sigma(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.vol == "identity":
            return theta
        return np.full_like(theta, self.vol_param)

    def b(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.drift == "merton":
            r = self.drift_params[0]
            return r - 0.5 * self.sigma(theta) ** 2 - self.jumps.intensity * self.jumps.k
        if self.drift == "constant":
            return np.full_like(theta, self.drift_params[0])
        c0, c1 = self.drift_params
        return c0 + c1 * theta

    @cached_property
    def rule(self) -> QuadratureRule:
        return rule_for(self.randomiser, self.order)

    def with_randomiser(self, randomiser: RandomiserSpec) -> "ComponentSpec":
        return ComponentSpec(
            randomiser, self.drift, self.drift_params, self.vol, self.vol_param, self.jumps, self.order
        )


def black_scholes_component(sigma: float, r: float = 0.05) -> ComponentSpec:
    """Degenerate randomiser at ``sigma``: a plain Black-Scholes log-price."""
    return ComponentSpec(RandomiserSpec.point(sigma), "merton", (r,))


# characteristic exponents -----------------------------------------------------

def levy_exponent(comp: ComponentSpec, theta, u):
    """psi(u; theta), broadcasting over ``theta`` and ``u``."""
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float)
    b = comp.b(theta)
    s = comp.sigma(theta)
    return -1j * u * b + 0.5 * u * u * s * s + comp.jumps.exponent(u)


def conditional_chf(comp: ComponentSpec, theta, t, u):
    if np.any(np.asarray(t) < 0):
        raise ModelError("t must be >= 0")
    return np.exp(-np.asarray(t) * levy_exponent(comp, theta, u))


def randomised_chf(comp: ComponentSpec, t, u, rule: QuadratureRule | None = None):
    """Quadrature sum of conditional chfs.

    ``t`` may be an array (shape ``T``); the result then has shape
    ``T + u.shape``.
    """
    rule = comp.rule if rule is None else rule
    u = np.asarray(u, dtype=float)
    t = np.asarray(t, dtype=float)
    psi = levy_exponent(comp, rule.nodes.reshape((-1,) + (1,) * u.ndim), u)  # (N, *u)
    tt = t.reshape(t.shape + (1,) * (u.ndim + 1))
    vals = np.exp(-tt * psi)  # (*t, N, *u)
    w = rule.weights.reshape((-1,) + (1,) * u.ndim)
    return np.sum(w * vals, axis=t.ndim)


def integrated_exponent(comp: ComponentSpec, u, rule: QuadratureRule | None = None):
    """Quadrature average of psi(u; theta) over the randomiser."""
    rule = comp.rule if rule is None else rule
    u = np.asarray(u, dtype=float)
    psi = levy_exponent(comp, rule.nodes.reshape((-1,) + (1,) * u.ndim), u)
    return np.tensordot(rule.weights, psi, axes=1)


# densities ------------------------------------------------------------------------

def poisson_terms(lam_t: float, tail: float = POISSON_TAIL) -> int:
    """Number of Poisson terms needed so that the neglected tail is < ``tail``."""
    if lam_t <= 0:
        return 1
    n = int(stats.poisson.isf(tail, lam_t)) + 2
    return max(n, 1)


def jump_diffusion_logpdf(x, mean, var, lam_t: float, jumps: JumpSpec):
    """log density of mean + sqrt(var) Z + compound Poisson(lam_t) normal jumps.

    ``x``, ``mean`` and ``var`` broadcast together.
    """
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    if lam_t <= 0 or jumps.intensity == 0:
        if np.any(var <= 0):
            raise ModelError("zero variance: density is a Dirac mass")
        return -0.5 * (x - mean) ** 2 / var - 0.5 * np.log(2 * np.pi * var)
    n = np.arange(poisson_terms(lam_t))
    logp = -lam_t + n * math.log(lam_t) - special.gammaln(n + 1.0)
    shape = np.broadcast(x, mean, var).shape
    sh = (slice(None),) + (None,) * len(shape)
    v = var[None] + n[sh] * jumps.std**2
    if np.any(v <= 0):
        raise ModelError("zero variance: density is a Dirac mass")
    m = mean[None] + n[sh] * jumps.mean
    terms = logp[sh] - 0.5 * (x[None] - m) ** 2 / v - 0.5 * np.log(2 * np.pi * v)
    return special.logsumexp(terms, axis=0)


def conditional_density(comp: ComponentSpec, theta: float, t: float, x):
    """Density of the conditional component at time ``t > 0``."""
    if t <= 0:
        raise ModelError("t must be > 0 (t = 0 is a Dirac mass)")
    mean = float(comp.b(theta)) * t
    var = float(comp.sigma(theta)) ** 2 * t
    return np.exp(jump_diffusion_logpdf(x, mean, var, comp.jumps.intensity * t, comp.jumps))


# deterministic switching ------------------------------------------------------

@dataclass(frozen=True)
class ScheduleDeterministic:
    """Switching times ``tau_1 < ... < tau_M`` and ``M + 1`` components."""

    times: tuple[float, ...]
    components: tuple[ComponentSpec, ...]
    x0: float = 0.0

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) != len(times) + 1:
            raise ModelError("need exactly one more component than switching times")
        bounds = (0.0,) + times
        if any(b1 <= b0 for b0, b1 in zip(bounds, bounds[1:])):
            raise ModelError("switching times must be strictly increasing and > 0")

    @property
    def boundaries(self) -> np.ndarray:
        """``[tau_0 = 0, tau_1, ..., tau_M, inf]``."""
        return np.array((0.0,) + self.times + (np.inf,))

    def time_shifts(self, t: float) -> np.ndarray:
        return time_shifts(self.boundaries, t)

    def active_regime(self, t: float) -> int:
        # half-open [tau_j, tau_{j+1}): at t = tau_j the new regime applies
        return int(np.searchsorted(self.boundaries, t, side="right") - 1)


def time_shifts(boundaries, t):
    """s_j(t) for regime boundaries ``[0, tau_1, ..., inf]``; broadcasts over
    leading axes of ``boundaries``."""
    boundaries = np.asarray(boundaries, dtype=float)
    lo = boundaries[..., :-1]
    hi = boundaries[..., 1:]
    return np.clip(np.minimum(t, hi) - lo, 0.0, None)


def composite_chf_deterministic(sched: ScheduleDeterministic, t: float, u):
    """exp(i u x0) * prod_j sum_n w_n phi(u; Y^{theta_n}(s_j(t)))."""
    if t < 0:
        raise ModelError("t must be >= 0")
    u = np.asarray(u, dtype=float)
    out = np.exp(1j * u * sched.x0)
    for comp, s in zip(sched.components, sched.time_shifts(t)):
        if s > 0:
            out = out * randomised_chf(comp, s, u)
    return out


def node_combinations(components) -> tuple[np.ndarray, np.ndarray]:
    """All node combinations across regimes: ``(weights (C,), thetas (C, J))``."""
    rules = [c.rule for c in components]
    idx = np.array(list(itertools.product(*[range(r.order) for r in rules])), dtype=int)
    if idx.size == 0:
        idx = idx.reshape(1, 0)
    w = np.ones(len(idx))
    th = np.empty(idx.shape)
    for j, r in enumerate(rules):
        w = w * r.weights[idx[:, j]]
        th[:, j] = r.nodes[idx[:, j]]
    return w, th


def density_range(chf, width: float = 10.0) -> tuple[float, float]:
    return fourier.cumulants_from_chf(chf).interval(width)


def mixture_density_deterministic(sched: ScheduleDeterministic, t: float, x, n_terms: int = 2**12,
                                  width: float = 10.0):
    """Quadrature-mixture density at ``t`` by cosine inversion of the composite chf."""
    if t <= 0:
        raise ModelError("t must be > 0")

    def chf(u):
        return composite_chf_deterministic(sched, t, u)

    a, b = density_range(chf, width)
    return np.maximum(fourier.cos_density(chf, x, a, b, n_terms), 0.0)


def mixture_cdf_deterministic(sched: ScheduleDeterministic, t: float, x, n_terms: int = 2**12,
                              width: float = 10.0):
    if t <= 0:
        raise ModelError("t must be > 0")

    def chf(u):
        return composite_chf_deterministic(sched, t, u)

    a, b = density_range(chf, width)
    return fourier.cos_cdf(chf, x, a, b, n_terms)
