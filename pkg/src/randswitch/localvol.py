"""Mimicking local-volatility coefficients and an Euler scheme for them.

The local-vol model shares the marginal law of the quadrature mixture:

    mu(t, x)      = sum_c w_c beta_c(t) f_c(t, x) / sum_c w_c f_c(t, x)
    sigma^2(t, x) = sum_c w_c gamma_c^2(t) f_c(t, x) / sum_c w_c f_c(t, x)

where ``c`` runs over node combinations (and, for stochastic switching, over
sojourn-tree leaves too), ``f_c`` is the conditional composite density and
``beta_c``, ``gamma_c`` are the drift and volatility of the regime active at
``t`` under ``c``. The jump part is left unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import rng as rngmod
from .processes import ModelError, ScheduleDeterministic, jump_diffusion_logpdf, node_combinations
from .switching import SojournSpec, build_sojourn_tree

LOG_FLOOR = math.log(1e-300)
MAX_LOCALVOL_SWITCHES = 2
SANDWICH_SLACK = 1e-12
THINNING_MAX = 1e-2  # use one uniform per step when lambda*dt is below this


class LocalVolError(RuntimeError):
    pass


@dataclass
class Coefficients:
    mu: np.ndarray
    sigma2: np.ndarray
    active: np.ndarray  # active regime of each distinct mixture term
    fallback: np.ndarray  # points where every density underflowed


@dataclass(frozen=True)
class LocalVolField:
    """Mixture over combinations ``c`` with weight ``w[c]``, per-regime drift
    ``b[c, j]``, variance rate ``s2[c, j]`` and regime boundaries ``bounds[c]``."""

    weights: np.ndarray
    b: np.ndarray
    s2: np.ndarray
    bounds: np.ndarray  # (C, J + 1): 0, tau_1, ..., tau_{J-1}, inf
    x0: float
    jumps: object
    switch_times: tuple = ()

    @classmethod
    def from_schedule(cls, sched: ScheduleDeterministic) -> "LocalVolField":
        comps = sched.components
        jumps = _common_jumps(comps)
        w, th = node_combinations(comps)
        b = np.column_stack([comps[j].b(th[:, j]) for j in range(len(comps))])
        s2 = np.column_stack([comps[j].sigma(th[:, j]) ** 2 for j in range(len(comps))])
        bounds = np.tile(sched.boundaries, (len(w), 1))
        return cls(w, b, s2, bounds, float(sched.x0), jumps, tuple(sched.times))

    @classmethod
    def from_stochastic(cls, components, sojourns: SojournSpec, x0: float, horizon: float) -> "LocalVolField":
        """Leaf x node mixture for a fixed number ``M <= 2`` of random switches."""
        m = len(components) - 1
        if m > MAX_LOCALVOL_SWITCHES:
            raise ModelError(f"local-vol for stochastic switching supports at most {MAX_LOCALVOL_SWITCHES} switches")
        jumps = _common_jumps(components)
        tree = build_sojourn_tree(sojourns, horizon, m)
        w, th = node_combinations(components)
        b = np.column_stack([components[j].b(th[:, j]) for j in range(len(components))])
        s2 = np.column_stack([components[j].sigma(th[:, j]) ** 2 for j in range(len(components))])
        L, C = tree.n_leaves, len(w)
        leaf_b = np.hstack([np.zeros((L, 1)), tree.times, np.full((L, 1), np.inf)])
        return cls(
            np.outer(tree.weights, w).ravel(),
            np.tile(b, (L, 1)),
            np.tile(s2, (L, 1)),
            np.repeat(leaf_b, C, axis=0),
            float(x0),
            jumps,
        )

    @property
    def n_regimes(self) -> int:
        return self.b.shape[1]

    def reduced(self, t: float):
        """Distinct mixture terms at ``t``: weights, means, variances, beta,
        gamma^2 and the active regime.

        Combinations that differ only in regimes not yet reached give
        identical terms and are merged.
        """
        s = _shifts(self.bounds, t)
        mean = self.x0 + np.sum(self.b * s, axis=1)
        var = np.sum(self.s2 * s, axis=1)
        active = np.minimum((self.bounds[:, 1:] <= t).sum(axis=1), self.n_regimes - 1)
        rows = np.arange(len(active))
        beta = self.b[rows, active]
        g2 = self.s2[rows, active]
        key = np.column_stack([mean, var, beta, g2, active])
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        w = np.zeros(len(uniq))
        np.add.at(w, inv.ravel(), self.weights)
        return w, uniq[:, 0], uniq[:, 1], uniq[:, 2], uniq[:, 3], uniq[:, 4].astype(int)

    def lam_t(self, t: float) -> float:
        return self.jumps.intensity * t

    def coefficients(self, t: float, x, check: bool = True) -> Coefficients:
        """``(mu, sigma^2)`` at ``(t, x)``; ``t > 0``."""
        if t <= 0:
            raise LocalVolError("coefficients need t > 0 (the law at t = 0 is a Dirac mass)")
        w, mean, var, beta, g2, active = self.reduced(t)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(var <= 0):
            raise LocalVolError(f"zero conditional variance at t={t}")
        logf = jump_diffusion_logpdf(x[:, None], mean[None, :], var[None, :], self.lam_t(t), self.jumps)
        logf = logf + np.log(w)[None, :]
        top = logf.max(axis=1, keepdims=True)
        fallback = top[:, 0] < LOG_FLOOR
        p = np.exp(logf - top)
        # tail limit: keep only the dominant combination
        if np.any(fallback):
            dom = np.argmax(logf[fallback], axis=1)
            p[fallback] = 0.0
            p[np.flatnonzero(fallback), dom] = 1.0
        p /= p.sum(axis=1, keepdims=True)
        mu = p @ beta
        sigma2 = p @ g2
        if check:
            _sandwich(mu, beta, "drift", t)
            _sandwich(sigma2, g2, "variance", t)
        return Coefficients(mu, sigma2, active, fallback)

    def density(self, t: float, x) -> np.ndarray:
        """Mixture density by direct summation (no Fourier inversion)."""
        w, mean, var, _, _, _ = self.reduced(t)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        logf = jump_diffusion_logpdf(x[:, None], mean[None, :], var[None, :], self.lam_t(t), self.jumps)
        return np.exp(special.logsumexp(logf + np.log(w)[None, :], axis=1))

    def coefficient_grid(self, t: float, n_grid: int = 2001, width: float = 10.0):
        """Coefficients tabulated on an x-grid spanning every term's mean +- width sd."""
        w, mean, var, _, _, _ = self.reduced(t)
        sd = np.sqrt(var + self.lam_t(t) * (self.jumps.std**2 + self.jumps.mean**2))
        lo = float(np.min(mean - width * sd))
        hi = float(np.max(mean + width * sd))
        grid = np.linspace(lo, hi, n_grid)
        c = self.coefficients(t, grid)
        return grid, c.mu, c.sigma2


def _common_jumps(components):
    jumps = components[0].jumps
    if any(c.jumps != jumps for c in components):
        raise ModelError("the local-vol construction needs the same jump law in every regime")
    return jumps


def _shifts(bounds, t):
    lo = bounds[:, :-1]
    hi = bounds[:, 1:]
    return np.clip(np.minimum(t, hi) - lo, 0.0, None)


def _sandwich(values, terms, what, t):
    lo, hi = terms.min(), terms.max()
    tol = SANDWICH_SLACK * max(1.0, abs(lo), abs(hi))
    if np.any(values < lo - tol) or np.any(values > hi + tol):
        raise LocalVolError(f"local {what} outside [{lo:.6g}, {hi:.6g}] at t={t}")


def localvol_coefficients(sched: ScheduleDeterministic, t: float, x):
    """``(mu, sigma^2)`` of the deterministic-switch local-vol model."""
    c = LocalVolField.from_schedule(sched).coefficients(t, x)
    return c.mu, c.sigma2


# Euler ------------------------------------------------------------------------

def euler_grid(horizon: float, dt: float, required=()) -> np.ndarray:
    n = int(round(horizon / dt))
    if n < 1 or abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise LocalVolError(f"step {dt} does not divide horizon {horizon}")
    grid = np.linspace(0.0, horizon, n + 1)
    for tau in required:
        if 0 < tau < horizon:
            k = round(tau / dt)
            if abs(k * dt - tau) > 1e-9 * max(1.0, tau):
                raise LocalVolError(f"switching time {tau} is not on the step-{dt} grid")
            grid[k] = tau
    return grid


def _jumps(jumps, lam_dt: float, g: np.random.Generator, n: int) -> np.ndarray:
    if lam_dt <= 0:
        return np.zeros(n)
    if lam_dt < THINNING_MAX:
        # at most one jump per step; P[jump] = lam dt
        hit = g.random(n) < lam_dt
        out = np.zeros(n)
        k = int(hit.sum())
        out[hit] = jumps.mean + jumps.std * g.standard_normal(k)
        return out
    counts = g.poisson(lam_dt, n)
    return counts * jumps.mean + np.sqrt(counts) * jumps.std * g.standard_normal(n)


def _interp_uniform(x, grid, mu, s2):
    """Linear interpolation on a uniform grid, clamped to the end values."""
    h = grid[1] - grid[0]
    pos = np.clip((x - grid[0]) / h, 0.0, len(grid) - 1.0)
    i = np.minimum(pos.astype(np.intp), len(grid) - 2)
    f = pos - i
    return mu[i] + f * (mu[i + 1] - mu[i]), s2[i] + f * (s2[i + 1] - s2[i])


def euler_simulate(field: LocalVolField, horizon: float, dt: float, n: int, seed: int = 0,
                   x0: float | None = None, n_grid: int = 2001, keep_paths: bool = False):
    """Euler-Maruyama for the local-vol SDE.

    Coefficients are evaluated at mid-step (the law at ``t = 0`` is a Dirac
    mass) on an x-grid and interpolated per path; outside the grid the end
    values are used, which is the tail limit. Returns the terminal values,
    or ``(grid, paths)`` with ``keep_paths``.
    """
    x0 = field.x0 if x0 is None else float(x0)
    grid = euler_grid(horizon, dt, field.switch_times)
    steps = len(grid) - 1
    tables = []
    for k in range(steps):
        tm = 0.5 * (grid[k] + grid[k + 1])
        try:
            tables.append(field.coefficient_grid(tm, n_grid))
        except (LocalVolError, ModelError, FloatingPointError) as exc:
            raise LocalVolError(f"coefficient evaluation failed at step {k} (t={tm:.6g}): {exc}") from exc

    def run(ci, a, b):
        m = b - a
        g_w = rngmod.stream(seed, "euler-brownian", ci)
        g_j = rngmod.stream(seed, "euler-jumps", ci)
        x = np.full(m, x0)
        path = np.empty((m, steps + 1)) if keep_paths else None
        if keep_paths:
            path[:, 0] = x
        for k in range(steps):
            h = grid[k + 1] - grid[k]
            drift, vol2 = _interp_uniform(x, *tables[k])
            vol = np.sqrt(vol2)
            x = x + drift * h + vol * math.sqrt(h) * g_w.standard_normal(m)
            x = x + _jumps(field.jumps, field.jumps.intensity * h, g_j, m)
            if keep_paths:
                path[:, k + 1] = x
        return path if keep_paths else x

    out = rngmod.map_chunks(run, n)
    return (grid, out) if keep_paths else out
