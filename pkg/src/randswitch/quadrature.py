"""Gauss quadrature rules built from raw moments (Golub-Welsch).

Randomiser and sojourn laws are described by :class:`RandomiserSpec`. Every
supported family is a location-scale transform of a standard law whose
moments are known in closed form, so the Hankel matrix handed to the
Cholesky step is always built from moments of a mean-zero, unit-variance
variable. Nodes are mapped back afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg, special

N_MAX = 10

FAMILIES = ("normal", "exponential", "uniform", "point")


class QuadratureError(ValueError):
    """Raised when a rule cannot be built from the supplied moments."""


@dataclass(frozen=True)
class RandomiserSpec:
    """A scalar law with moment access and optional right-truncation.

    ``params`` per family:

    - ``normal``: (mean, std)
    - ``exponential``: (rate,)
    - ``uniform``: (low, high)
    - ``point``: (value,)

    ``truncation`` is a right bound ``b``; the truncated density is
    ``f(x) / F(b)`` on ``(lower, b)``.
    """

    family: str
    params: tuple[float, ...]
    truncation: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise QuadratureError(f"unsupported family {self.family!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        expected = {"normal": 2, "exponential": 1, "uniform": 2, "point": 1}[self.family]
        if len(self.params) != expected:
            raise QuadratureError(
                f"{self.family} expects {expected} parameter(s), got {len(self.params)}"
            )
        if self.family == "normal" and self.params[1] < 0:
            raise QuadratureError("normal std must be >= 0")
        if self.family == "exponential" and self.params[0] <= 0:
            raise QuadratureError("exponential rate must be > 0")
        if self.family == "uniform" and not self.params[0] < self.params[1]:
            raise QuadratureError("uniform needs low < high")
        if self.truncation is not None:
            b = float(self.truncation)
            object.__setattr__(self, "truncation", b)
            if b <= 0:
                raise QuadratureError("truncation bound must be > 0")
            if self.family == "exponential" and b <= 0:
                raise QuadratureError("truncation bound below the support")
            if self.family == "uniform" and b <= self.params[0]:
                raise QuadratureError("truncation bound below the support")
            if self.family == "point" and b <= self.params[0]:
                raise QuadratureError("truncation removes the point mass")

    # constructors -----------------------------------------------------
    @classmethod
    def normal(cls, mean, std):
        return cls("normal", (mean, std))

    @classmethod
    def exponential(cls, rate):
        return cls("exponential", (rate,))

    @classmethod
    def uniform(cls, low, high):
        return cls("uniform", (low, high))

    @classmethod
    def point(cls, value):
        return cls("point", (value,))

    def truncated(self, b: float) -> "RandomiserSpec":
        """Right-truncate at ``b`` (nested truncations keep the tighter bound)."""
        if self.truncation is not None:
            b = min(b, self.truncation)
        return RandomiserSpec(self.family, self.params, b)

    # structure --------------------------------------------------------
    @property
    def is_degenerate(self) -> bool:
        if self.family == "point":
            return True
        if self.family == "normal" and self.params[1] == 0.0:
            return True
        return False

    def _loc_scale(self) -> tuple[float, float]:
        """Location/scale of the standard law this spec transforms."""
        if self.family == "normal":
            return self.params[0], self.params[1]
        if self.family == "exponential":
            if self.truncation is not None:
                # standardise on (0, 1) so that short truncations stay well scaled
                return 0.0, self.truncation
            return 0.0, 1.0 / self.params[0]
        if self.family == "uniform":
            hi = self.params[1] if self.truncation is None else min(self.params[1], self.truncation)
            return self.params[0], hi - self.params[0]
        return self.params[0], 0.0

    def _standard_moments(self, upto: int) -> np.ndarray:
        """Raw moments 0..upto of the standard (pre location-scale) law."""
        k = np.arange(upto + 1)
        if self.family == "normal":
            if self.truncation is None:
                return _normal_moments(upto)
            mean, std = self.params
            beta = (self.truncation - mean) / std
            return _upper_truncated_normal_moments(beta, upto)
        if self.family == "exponential":
            if self.truncation is None:
                return special.factorial(k, exact=False)
            c = self.params[0] * self.truncation
            return _truncated_exponential_unit_moments(c, upto)
        if self.family == "uniform":
            return 1.0 / (k + 1.0)
        return (k == 0).astype(float)

    def moments(self, upto: int) -> np.ndarray:
        return moments(self, upto)

    def mean(self) -> float:
        return float(moments(self, 1)[1])

    def std(self) -> float:
        loc, scale = self._loc_scale()
        z = self._standard_moments(2)
        return float(scale * math.sqrt(max(z[2] - z[1] ** 2, 0.0)))

    # distribution functions (used by the Monte Carlo oracle and switch counts)
    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        base = self._base_cdf(x)
        if self.truncation is None:
            return base
        fb = self._base_cdf(np.asarray(self.truncation))
        return np.where(x >= self.truncation, 1.0, base / fb)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        fam, p = self.family, self.params
        if fam == "normal":
            base = np.exp(-0.5 * ((x - p[0]) / p[1]) ** 2) / (p[1] * math.sqrt(2 * math.pi))
        elif fam == "exponential":
            base = np.where(x >= 0, p[0] * np.exp(-p[0] * np.maximum(x, 0.0)), 0.0)
        elif fam == "uniform":
            base = np.where((x >= p[0]) & (x <= p[1]), 1.0 / (p[1] - p[0]), 0.0)
        else:
            raise QuadratureError("point mass has no density")
        if self.truncation is None:
            return base
        fb = self._base_cdf(np.asarray(self.truncation))
        return np.where(x <= self.truncation, base / fb, 0.0)

    def _base_cdf(self, x):
        fam, p = self.family, self.params
        if fam == "normal":
            if p[1] == 0:
                return (x >= p[0]).astype(float)
            return special.ndtr((x - p[0]) / p[1])
        if fam == "exponential":
            return np.where(x > 0, -np.expm1(-p[0] * np.maximum(x, 0.0)), 0.0)
        if fam == "uniform":
            return np.clip((x - p[0]) / (p[1] - p[0]), 0.0, 1.0)
        return (x >= p[0]).astype(float)

    def ppf(self, q):
        """Inverse cdf, honouring truncation."""
        q = np.asarray(q, dtype=float)
        if self.truncation is not None:
            q = q * self._base_cdf(np.asarray(self.truncation))
        fam, p = self.family, self.params
        if fam == "normal":
            return p[0] + p[1] * special.ndtri(q)
        if fam == "exponential":
            return -np.log1p(-q) / p[0]
        if fam == "uniform":
            return p[0] + q * (p[1] - p[0])
        return np.full_like(q, p[0])

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "point":
            return np.full(size, self.params[0])
        if self.family == "normal" and self.truncation is None:
            return self.params[0] + self.params[1] * rng.standard_normal(size)
        return self.ppf(rng.random(size))


def _normal_moments(upto: int) -> np.ndarray:
    m = np.zeros(upto + 1)
    m[0] = 1.0
    for k in range(2, upto + 1, 2):
        m[k] = (k - 1) * m[k - 2]
    return m


def _upper_truncated_normal_moments(beta: float, upto: int) -> np.ndarray:
    """Moments of a standard normal conditioned on Z < beta."""
    # Mills-ratio recursion: E[Z^k] = (k-1) E[Z^{k-2}] - beta^{k-1} phi(beta)/Phi(beta)
    log_ratio = -0.5 * beta * beta - 0.5 * math.log(2 * math.pi) - special.log_ndtr(beta)
    ratio = math.exp(log_ratio)
    m = np.zeros(upto + 1)
    m[0] = 1.0
    if upto >= 1:
        m[1] = -ratio
    for k in range(2, upto + 1):
        m[k] = (k - 1) * m[k - 2] - beta ** (k - 1) * ratio
    return m


def _truncated_exponential_unit_moments(c: float, upto: int) -> np.ndarray:
    """Moments on (0, 1) of the density c e^{-cx} / (1 - e^{-c})."""
    k = np.arange(upto + 1)
    if c < 1e-6:
        # density is flat to first order; include the linear correction
        return 1.0 / (k + 1.0) - c * (1.0 / (k + 2.0) - 0.5 / (k + 1.0))
    # int_0^1 x^k c e^{-cx} dx = k! P(k+1, c) / c^k, P the regularised lower gamma
    num = special.gammaln(k + 1.0) + np.log(special.gammainc(k + 1.0, c)) - k * math.log(c)
    return np.exp(num - math.log(-math.expm1(-c)))


@lru_cache(maxsize=4096)
def _cached_standard(spec: RandomiserSpec, upto: int) -> np.ndarray:
    out = spec._standard_moments(upto)
    out.setflags(write=False)
    return out


def moments(spec: RandomiserSpec, upto: int, n_max: int = N_MAX) -> np.ndarray:
    """Raw moments ``m_0..m_upto`` of ``spec``.

    Closed forms throughout: factorials for the exponential, the Hermite
    recursion for the normal, regularised incomplete gamma for the truncated
    exponential and the Mills-ratio recursion for the truncated normal.
    """
    if upto < 0:
        raise QuadratureError("upto must be >= 0")
    if upto > 2 * n_max:
        raise QuadratureError(f"upto={upto} exceeds 2*N_max={2 * n_max}")
    loc, scale = spec._loc_scale()
    z = _cached_standard(spec, upto)
    # raw moments of loc + scale*Z via the binomial expansion
    out = np.zeros(upto + 1)
    for k in range(upto + 1):
        i = np.arange(k + 1)
        coeff = special.comb(k, i) * (scale ** i) * (loc ** (k - i))
        out[k] = float(np.sum(coeff * z[: k + 1]))
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss pairs ``(weights[i], nodes[i])``, nodes strictly increasing."""

    nodes: np.ndarray
    weights: np.ndarray
    order_requested: int = 0
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def order(self) -> int:
        return len(self.nodes)

    def integrate(self, f) -> complex | float:
        return np.sum(self.weights * f(self.nodes))

    def __iter__(self):
        return iter(zip(self.weights, self.nodes))

    @classmethod
    def point(cls, value: float, order_requested: int = 1) -> "QuadratureRule":
        return cls(
            np.array([float(value)]),
            np.array([1.0]),
            order_requested,
            {"degenerate": True, "max_abs_node": abs(float(value))},
        )


def _jacobi_from_hankel(mom: np.ndarray, n: int):
    """Recurrence coefficients from the Cholesky factor of the Hankel matrix."""
    H = np.array([[mom[i + j] for j in range(n + 1)] for i in range(n + 1)])
    # only the leading n x n block must be positive definite; the last column
    # of the upper factor comes from a triangular solve (an exact n-point law
    # has a singular (n+1) x (n+1) Hankel matrix)
    Rn = linalg.cholesky(H[:n, :n], lower=False)
    R = np.zeros((n, n + 1))
    R[:, :n] = Rn
    R[:, n] = linalg.solve_triangular(Rn, H[:n, n], trans="T", lower=False)
    d = np.diag(Rn)
    alpha = np.empty(n)
    alpha[0] = R[0, 1] / R[0, 0]
    for j in range(1, n):
        alpha[j] = R[j, j + 1] / R[j, j] - R[j - 1, j] / R[j - 1, j - 1]
    beta = d[1:n] / d[: n - 1]
    return alpha, beta


def golub_welsch_standardised(std_moments: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Nodes/weights from moments; falls back to lower orders if the Hankel
    matrix is not positive definite. Returns ``(nodes, weights, order_used)``."""
    for order in range(n, 0, -1):
        if 2 * order > len(std_moments) - 1:
            continue
        try:
            alpha, beta = _jacobi_from_hankel(std_moments, order)
        except linalg.LinAlgError:
            continue
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta)) and np.all(beta > 0)):
            continue
        if order == 1:
            return alpha.copy(), np.array([std_moments[0]]), 1
        x, v = linalg.eigh_tridiagonal(alpha, beta, lapack_driver="stev")
        w = std_moments[0] * v[0, :] ** 2
        return x, w, order
    raise QuadratureError("Hankel moment matrix is not positive definite at order 1")


def golub_welsch(mom: np.ndarray, n: int, n_max: int = N_MAX) -> QuadratureRule:
    """Gauss rule of order ``n`` from raw moments ``m_0..m_{2n}``.

    The moments are centred and scaled to unit variance before the Cholesky
    factorisation; nodes are shifted back.
    """
    mom = np.asarray(mom, dtype=float)
    if n < 1:
        raise QuadratureError("order must be >= 1")
    if n > n_max:
        raise QuadratureError(f"order {n} exceeds N_max={n_max}")
    if len(mom) < 2 * n + 1:
        raise QuadratureError(f"need {2 * n + 1} moments, got {len(mom)}")
    m0 = mom[0]
    mom = mom / m0
    mu = mom[1]
    var = mom[2] - mu * mu
    if not var > 1e-14 * max(1.0, mu * mu):
        return QuadratureRule.point(mu, n)
    sd = math.sqrt(var)
    std_mom = _standardise(mom, mu, sd)
    x, w, used = golub_welsch_standardised(std_mom, n)
    nodes = mu + sd * x
    return _finish(nodes, w * m0, n, used)


def _standardise(mom, mu, sd):
    out = np.zeros(len(mom))
    for k in range(len(mom)):
        i = np.arange(k + 1)
        out[k] = np.sum(special.comb(k, i) * mom[: k + 1] * (-mu) ** (k - i)) / sd**k
    return out


def _finish(nodes, weights, requested, used) -> QuadratureRule:
    order = np.argsort(nodes)
    nodes, weights = nodes[order], weights[order]
    diag = {
        "degenerate": False,
        "max_abs_node": float(np.max(np.abs(nodes))),
        "order_used": used,
    }
    if used < requested:
        diag["fallback_from"] = requested
    return QuadratureRule(nodes, weights, requested, diag)


@lru_cache(maxsize=4096)
def rule_for(spec: RandomiserSpec, n: int, n_max: int = N_MAX) -> QuadratureRule:
    """Order-``n`` Gauss rule for ``spec``.

    Uses the standard-law moments directly, so the location/scale never
    enters the Hankel matrix.
    """
    if n < 1:
        raise QuadratureError("order must be >= 1")
    if n > n_max:
        raise QuadratureError(f"order {n} exceeds N_max={n_max}")
    if spec.is_degenerate:
        return QuadratureRule.point(spec.params[0], n)
    loc, scale = spec._loc_scale()
    z = _cached_standard(spec, 2 * n)
    mu = z[1]
    var = z[2] - mu * mu
    if not var > 1e-14 * max(1.0, mu * mu):
        return QuadratureRule.point(loc + scale * mu, n)
    sd = math.sqrt(var)
    x, w, used = golub_welsch_standardised(_standardise(z, mu, sd), n)
    nodes = loc + scale * (mu + sd * x)
    return _finish(nodes, w, n, used)
