"""Markov-modulated randomised Levy model.

The chf at ``t`` is ``p expm((Q - A(u)) t) 1`` where ``A(u)`` is diagonal
with the randomiser-averaged characteristic exponents of the states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .processes import ComponentSpec, ModelError, integrated_exponent, randomised_chf

MAX_STATES = 21

# Pade(13) numerator coefficients and the theta_13 scaling threshold (Higham 2005)
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0,
    40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


class ExpmError(ArithmeticError):
    pass


def expm_pade13(A: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a fixed Pade(13) approximant."""
    A = np.asarray(A)
    n = A.shape[0]
    norm = np.linalg.norm(A, 1)
    if not np.isfinite(norm):
        raise ExpmError(f"matrix has non-finite 1-norm ({norm})")
    s = 0
    if norm > _THETA13:
        s = int(np.ceil(np.log2(norm / _THETA13)))
    if s > 1000:
        raise ExpmError(f"1-norm {norm:.3g} too large for scaling and squaring")
    As = A / (2.0**s)
    b = _PADE13
    I = np.eye(n, dtype=As.dtype)
    A2 = As @ As
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = As @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    if not np.all(np.isfinite(R)):
        raise ExpmError(f"expm overflow (1-norm {norm:.3g})")
    return R


@dataclass(frozen=True)
class MarkovSpec:
    """Generator ``Q``, initial law ``p`` and one component per state."""

    Q: np.ndarray
    p: np.ndarray
    components: tuple[ComponentSpec, ...]
    x0: float = 0.0

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        p = np.array(self.p, dtype=float)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "components", tuple(self.components))
        n = len(self.components)
        if Q.shape != (n, n) or p.shape != (n,):
            raise ModelError("Q must be (S, S) and p length S for S components")
        if n > MAX_STATES:
            raise ModelError(f"at most {MAX_STATES} states supported")
        off = Q - np.diag(np.diag(Q))
        if np.any(off < 0):
            raise ModelError("off-diagonal generator entries must be >= 0")
        if np.any(np.abs(Q.sum(axis=1)) > 1e-12):
            raise ModelError("generator rows must sum to zero")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ModelError("p must be a probability vector")

    @property
    def n_states(self) -> int:
        return len(self.components)


def exponent_diagonal(spec: MarkovSpec, u: float) -> np.ndarray:
    return np.array([complex(integrated_exponent(c, u)) for c in spec.components])


def chf_markov(spec: MarkovSpec, t: float, u):
    """p expm((Q - A(u)) t) 1, evaluated for each ``u``."""
    if t < 0:
        raise ModelError("t must be >= 0")
    u_arr = np.atleast_1d(np.asarray(u, dtype=float))
    ones = np.ones(spec.n_states)
    out = np.empty(u_arr.shape, dtype=complex)
    for i, ui in enumerate(u_arr.flat):
        A = np.diag(exponent_diagonal(spec, ui))
        E = expm_pade13((spec.Q - A) * t)
        out.flat[i] = spec.p @ E @ ones
    out = out * np.exp(1j * u_arr * spec.x0)
    return out.reshape(np.shape(u)) if np.ndim(u) else complex(out[0])


def markov_diagnostics(spec: MarkovSpec, t: float, u: float) -> dict:
    """Both per-state quantities: exp(-t * mean exponent) and mean exp(-t * exponent).

    They differ by Jensen's inequality unless the randomiser is degenerate.
    """
    rows = []
    for j, comp in enumerate(spec.components):
        avg_exp = complex(integrated_exponent(comp, u))
        rows.append({
            "state": j,
            "integrated_exponent": avg_exp,
            "exp_of_mean_exponent": complex(np.exp(-t * avg_exp)),
            "mean_of_exp": complex(randomised_chf(comp, t, u)),
        })
    return {"t": t, "u": u, "states": rows}
