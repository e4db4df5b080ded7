"""Cosine-series inversion helpers shared by the density and pricing code."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EVAL_CHUNK = 4096  # x points per cosine-matrix block


@dataclass(frozen=True)
class Cumulants:
    c1: float
    c2: float
    c4: float

    def interval(self, width: float = 10.0) -> tuple[float, float]:
        half = width * np.sqrt(self.c2 + np.sqrt(abs(self.c4)))
        return self.c1 - half, self.c1 + half


def cumulants_from_chf(chf, h: float = 1e-4, h4: float = 2e-2) -> Cumulants:
    """First, second and fourth cumulants by central differences of log chf at 0.

    ``chf`` maps a real array ``u`` to complex values. The log is taken
    pointwise near zero, where the chf is close to one, so no branch issues
    arise.
    """
    u = np.array([-h, 0.0, h])
    lg = np.log(chf(u))
    # log chf(u) = i c1 u - c2 u^2 / 2 + ...
    c1 = float(((lg[2] - lg[0]) / (2j * h)).real)
    c2 = float(-((lg[2] - 2 * lg[1] + lg[0]) / h**2).real)
    u4 = np.array([-2 * h4, -h4, 0.0, h4, 2 * h4])
    l4 = np.log(chf(u4)).real
    # fourth derivative of Re log chf is c4 (real part is even in u)
    c4 = float((l4[0] - 4 * l4[1] + 6 * l4[2] - 4 * l4[3] + l4[4]) / h4**4)
    return Cumulants(c1, max(c2, 0.0), c4)


def cos_coefficients(chf, a: float, b: float, n_terms: int) -> np.ndarray:
    """Density coefficients ``A_k`` with ``f(x) ~ sum' A_k cos(k pi (x-a)/(b-a))``."""
    k = np.arange(n_terms)
    u = k * np.pi / (b - a)
    A = 2.0 / (b - a) * (chf(u) * np.exp(-1j * u * a)).real
    A[0] *= 0.5
    return A


def cos_density(chf, x, a: float, b: float, n_terms: int = 2**12) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    A = cos_coefficients(chf, a, b, n_terms)
    k = np.arange(n_terms)
    w = k * np.pi / (b - a)
    f = _blocked(lambda xb: np.cos(np.multiply.outer(xb - a, w)) @ A, x)
    return np.where((x < a) | (x > b), 0.0, f)


def cos_cdf(chf, x, a: float, b: float, n_terms: int = 2**12) -> np.ndarray:
    """Integral of the cosine-series density from ``a`` to ``x``."""
    x = np.asarray(x, dtype=float)
    A = cos_coefficients(chf, a, b, n_terms)
    xc = np.clip(x, a, b)
    k = np.arange(1, n_terms)
    w = k * np.pi / (b - a)
    F = A[0] * (xc - a) + _blocked(lambda xb: np.sin(np.multiply.outer(xb - a, w)) @ (A[1:] / w), xc)
    return np.clip(F, 0.0, 1.0)


def _blocked(fn, x):
    flat = x.ravel()
    out = np.concatenate([fn(flat[i : i + EVAL_CHUNK]) for i in range(0, max(flat.size, 1), EVAL_CHUNK)])
    return out[: flat.size].reshape(x.shape)
