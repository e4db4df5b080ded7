"""Monte Carlo oracle for the randomised switching models.

Randomisers can be drawn from their continuous law or from the quadrature
rule (``law="quadrature"``). The analytic chfs describe the quadrature
mixture exactly, which is also the marginal law of the local-volatility
models, so the quadrature law is the like-for-like comparison. Sojourn times
are drawn either by successive right-truncation from the continuous law or
from the leaves of the sojourn tree.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import rng as rngmod
from .models import (
    DeterministicModel,
    FullyStochasticModel,
    MarkovModel,
    NoSwitchModel,
    StochasticModel,
)
from .processes import ComponentSpec, ModelError, ScheduleDeterministic, time_shifts
from .quadrature import RandomiserSpec
from .switching import SojournSpec, build_sojourn_tree, switch_count_pmf

LAWS = ("quadrature", "continuous")


class SimulationError(RuntimeError):
    pass


# sampling helpers -------------------------------------------------------------

def sample_randomiser(comp: ComponentSpec, rng: np.random.Generator, n: int, law: str) -> np.ndarray:
    if law == "quadrature":
        rule = comp.rule
        if rule.order == 1:
            return np.full(n, rule.nodes[0])
        idx = np.searchsorted(np.cumsum(rule.weights), rng.random(n) * rule.weights.sum(), side="right")
        return rule.nodes[np.minimum(idx, rule.order - 1)]
    if law == "continuous":
        return comp.randomiser.sample(rng, n)
    raise ValueError(f"unknown law {law!r}")


def _base(law: RandomiserSpec) -> RandomiserSpec:
    return RandomiserSpec(law.family, law.params)


def sample_truncated(law: RandomiserSpec, bound: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per entry of ``bound`` from ``law`` conditioned on ``< bound``."""
    base = _base(law)
    if law.truncation is not None:
        bound = np.minimum(bound, law.truncation)
    if base.family == "point":
        if np.any(base.params[0] >= bound):
            raise SimulationError("point sojourn exceeds the remaining horizon")
        return np.full(bound.shape, base.params[0])
    return base.ppf(rng.random(bound.shape) * base._base_cdf(bound))


def sample_sojourns(sojourns: SojournSpec, m: int, horizon: float, rng: np.random.Generator, n: int,
                    law: str = "continuous") -> np.ndarray:
    """Sojourn draws (n, m) with every partial sum below ``horizon``.

    ``continuous``: successive right-truncation of the sojourn laws.
    ``quadrature``: draw a leaf of the sojourn tree.
    """
    if m == 0:
        return np.zeros((n, 0))
    if law == "quadrature":
        tree = build_sojourn_tree(sojourns, horizon, m)
        cw = np.cumsum(tree.weights)
        idx = np.searchsorted(cw, rng.random(n) * cw[-1], side="right")
        return tree.sojourns[np.minimum(idx, tree.n_leaves - 1)]
    z = np.empty((n, m))
    used = np.zeros(n)
    for j in range(m):
        z[:, j] = sample_truncated(sojourns.laws[j], horizon - used, rng)
        used += z[:, j]
    return z


def _jump_sum(comp: ComponentSpec, dt: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    lam = comp.jumps.intensity
    if lam == 0.0:
        return np.zeros(dt.shape)
    counts = rng.poisson(lam * dt)
    return counts * comp.jumps.mean + np.sqrt(counts) * comp.jumps.std * rng.standard_normal(dt.shape)


# model -> per-path boundaries ---------------------------------------------------

def _components_and_boundaries(model, t: float, n: int, streams: dict, law: str, sojourn_law: str):
    """Components list and per-path regime boundaries ``(n, J + 2)``."""
    if isinstance(model, ScheduleDeterministic):
        model = DeterministicModel(model.components, model.times, model.x0)
    if isinstance(model, NoSwitchModel):
        b = np.tile([0.0, np.inf], (n, 1))
        return (model.component,), b, model.x0
    if isinstance(model, DeterministicModel):
        sched = model.schedule(t)
        b = np.tile(sched.boundaries, (n, 1))
        return sched.components, b, model.x0
    if isinstance(model, StochasticModel):
        m = len(model.components) - 1
        z = sample_sojourns(model.sojourns_at(t), m, t, streams["sojourn"], n, sojourn_law)
        b = np.hstack([np.zeros((n, 1)), np.cumsum(z, axis=1), np.full((n, 1), np.inf)])
        return model.components, b, model.x0
    if isinstance(model, FullyStochasticModel):
        counts = switch_count_pmf(model.sojourns, t, model.m_max, model.delta)
        w = counts.weights
        m_draw = np.searchsorted(np.cumsum(w), streams["count"].random(n) * w.sum(), side="right")
        m_draw = np.minimum(m_draw, model.m_max)
        J = model.m_max
        b = np.full((n, J + 2), np.inf)
        b[:, 0] = 0.0
        for m in range(1, J + 1):
            sel = np.flatnonzero(m_draw == m)
            if sel.size == 0:
                continue
            z = sample_sojourns(model.sojourns, m, t, streams["sojourn"], sel.size, sojourn_law)
            b[sel, 1 : m + 1] = np.cumsum(z, axis=1)
        return model.components[: J + 1], b, model.x0
    raise ModelError(f"unsupported model {type(model).__name__}")


def _streams(seed: int, chunk: int) -> dict:
    names = ("randomiser", "brownian", "sojourn", "count", "jumps", "chain")
    return {k: rngmod.stream(seed, k, chunk) for k in names}


def _terminal_chunk(model, t, law, sojourn_law, seed, ci, n):
    st = _streams(seed, ci)
    if isinstance(model, MarkovModel):
        return _markov_terminal(model, t, st, n, law)
    comps, bounds, x0 = _components_and_boundaries(model, t, n, st, law, sojourn_law)
    s = time_shifts(bounds, t)
    x = np.full(n, float(x0))
    for j, comp in enumerate(comps):
        theta = sample_randomiser(comp, st["randomiser"], n, law)
        sj = s[:, j]
        z = st["brownian"].standard_normal(n)
        x += comp.b(theta) * sj + comp.sigma(theta) * np.sqrt(sj) * z + _jump_sum(comp, sj, st["jumps"])
    return x


def simulate_terminal(model, t: float, n: int, seed: int = 0, law: str = "quadrature",
                      sojourn_law: str = "quadrature") -> np.ndarray:
    """Exact draws of X(t): each regime contributes a Gaussian (plus jumps)
    increment over its realised time shift."""
    if law not in LAWS or sojourn_law not in LAWS:
        raise ValueError(f"law must be one of {LAWS}")
    return rngmod.map_chunks(
        lambda ci, a, b: _terminal_chunk(model, t, law, sojourn_law, seed, ci, b - a), n
    )


# Markov-modulated -------------------------------------------------------------

def _markov_terminal(model: MarkovModel, t: float, st: dict, n: int, law: str,
                     per_visit: bool = False) -> np.ndarray:
    """Chain with exact exponential holding times.

    Default: within a visit the increment is Levy with the randomiser-averaged
    exponent (drift E[b], variance rate E[sigma^2]), the law whose chf is
    ``p expm((Q - A) t) 1``. ``per_visit=True`` instead draws a fresh
    randomiser at each visit (a different law; diagnostics only).
    """
    spec = model.spec
    S = spec.n_states
    rates = -np.diag(spec.Q)
    jump_p = np.zeros((S, S))
    for i in range(S):
        if rates[i] > 0:
            jump_p[i] = spec.Q[i] / rates[i]
            jump_p[i, i] = 0.0
    mean_b = np.array([np.sum(c.rule.weights * c.b(c.rule.nodes)) for c in spec.components])
    mean_s2 = np.array([np.sum(c.rule.weights * c.sigma(c.rule.nodes) ** 2) for c in spec.components])
    chain = st["chain"]
    state = np.searchsorted(np.cumsum(spec.p), chain.random(n) * spec.p.sum(), side="right")
    state = np.minimum(state, S - 1)
    clock = np.zeros(n)
    x = np.full(n, spec.x0)
    active = np.ones(n, dtype=bool)
    while np.any(active):
        idx = np.flatnonzero(active)
        r = rates[state[idx]]
        with np.errstate(divide="ignore"):
            hold = np.where(r > 0, chain.exponential(1.0, idx.size) / np.where(r > 0, r, 1.0), np.inf)
        d = np.minimum(hold, t - clock[idx])
        for j in range(S):
            sel = state[idx] == j
            if not np.any(sel):
                continue
            comp = spec.components[j]
            dj = d[sel]
            z = st["brownian"].standard_normal(dj.size)
            if per_visit:
                theta = sample_randomiser(comp, st["randomiser"], dj.size, law)
                inc = comp.b(theta) * dj + comp.sigma(theta) * np.sqrt(dj) * z
            else:
                inc = mean_b[j] * dj + math.sqrt(mean_s2[j]) * np.sqrt(dj) * z
            x[idx[sel]] += inc + _jump_sum(comp, dj, st["jumps"])
        clock[idx] += d
        done = clock[idx] >= t
        moving = idx[~done]
        if moving.size:
            cp = np.cumsum(jump_p[state[moving]], axis=1)
            state[moving] = np.minimum(
                (chain.random(moving.size)[:, None] > cp).sum(axis=1), S - 1
            )
        active[idx[done]] = False
    return x


def simulate_markov_terminal(model: MarkovModel, t: float, n: int, seed: int = 0, per_visit: bool = False,
                             law: str = "quadrature") -> np.ndarray:
    return rngmod.map_chunks(
        lambda ci, a, b: _markov_terminal(model, t, _streams(seed, ci), b - a, law, per_visit), n
    )


# path simulation --------------------------------------------------------------

@dataclass
class PathSet:
    times: np.ndarray
    values: np.ndarray  # (paths, len(times))

    def to_csv(self) -> str:
        return paths_csv(self.times, self.values)


def paths_csv(times, values) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("path_id", "t", "x"))
    for p in range(values.shape[0]):
        for t, x in zip(times, values[p]):
            w.writerow((p, format(float(t), ".12g"), format(float(x), ".12g")))
    return buf.getvalue()


def read_paths_csv(text: str) -> PathSet:
    reader = csv.reader(io.StringIO(text))
    if tuple(next(reader)) != ("path_id", "t", "x"):
        raise ValueError("unexpected path CSV header")
    rows = [(int(p), float(t), float(x)) for p, t, x in reader]
    ids = sorted({r[0] for r in rows})
    times = np.array(sorted({r[1] for r in rows}))
    vals = np.empty((len(ids), len(times)))
    ti = {t: i for i, t in enumerate(times)}
    for p, t, x in rows:
        vals[p, ti[t]] = x
    return PathSet(times, vals)


def time_grid(horizon: float, step: float, required=()) -> np.ndarray:
    """Uniform grid; every required time must fall on it."""
    n = int(round(horizon / step))
    if abs(n * step - horizon) > 1e-9 * max(1.0, horizon):
        raise SimulationError(f"step {step} does not divide horizon {horizon}")
    grid = np.linspace(0.0, horizon, n + 1)
    for tau in required:
        if tau >= horizon:
            continue
        k = round(tau / step)
        if abs(k * step - tau) > 1e-9 * max(1.0, tau):
            raise SimulationError(f"switching time {tau} is not on the step-{step} grid")
        grid[k] = tau
    return grid


def simulate_paths(model, horizon: float, step: float, n: int, seed: int = 0, common_noise: bool = False,
                   law: str = "continuous", sojourn_law: str = "continuous") -> PathSet:
    """Composite paths on a uniform grid.

    Randomisers (and sojourns) are drawn once per path at time 0+. With
    ``common_noise`` every path uses the same Brownian increments on the
    grid; a switch falling inside a step is reached by a Brownian bridge
    draw, so regime boundaries are hit exactly.
    """
    st = _streams(seed, 0)
    required = ()
    if isinstance(model, (DeterministicModel, ScheduleDeterministic)):
        sched = model if isinstance(model, ScheduleDeterministic) else model.schedule(horizon)
        required = sched.times
    grid = time_grid(horizon, step, required)
    comps, bounds, x0 = _components_and_boundaries(model, horizon, n, st, law, sojourn_law)
    J = len(comps)
    theta = np.column_stack([sample_randomiser(c, st["randomiser"], n, law) for c in comps])
    B = np.column_stack([comps[j].b(theta[:, j]) for j in range(J)])
    S = np.column_stack([comps[j].sigma(theta[:, j]) for j in range(J)])
    noise = st["brownian"]
    bridge = rngmod.stream(seed, "bridge", 0)
    x = np.full(n, float(x0))
    out = np.empty((n, len(grid)))
    out[:, 0] = x
    inner = bounds[:, 1:-1] if bounds.shape[1] > 2 else np.zeros((n, 0))
    rows = np.arange(n)
    for k in range(len(grid) - 1):
        t0, t1 = grid[k], grid[k + 1]
        h = t1 - t0
        dW = np.full(n, noise.standard_normal() * math.sqrt(h)) if common_noise else \
            noise.standard_normal(n) * math.sqrt(h)
        inside = (inner > t0) & (inner < t1)
        cand = np.sort(np.where(inside, inner, t1), axis=1)
        n_in = int(inside.sum(axis=1).max()) if inner.shape[1] else 0
        ends = np.column_stack([cand[:, :n_in], np.full(n, t1)]) if n_in else np.full((n, 1), t1)
        seg0 = np.full(n, t0)
        w0 = np.zeros(n)
        for c in range(ends.shape[1]):
            e = ends[:, c]
            if c == ends.shape[1] - 1:
                w1 = dW
            else:
                span = t1 - seg0
                frac = np.divide(e - seg0, span, out=np.zeros(n), where=span > 0)
                var = np.clip((e - seg0) * (t1 - e), 0.0, None) / np.where(span > 0, span, 1.0)
                w1 = w0 + frac * (dW - w0) + np.sqrt(var) * bridge.standard_normal(n)
            active = np.minimum((bounds[:, 1:] <= seg0[:, None]).sum(axis=1), J - 1)
            dt = e - seg0
            b = B[rows, active]
            s = S[rows, active]
            lam_jump = np.zeros(n)
            for j in range(J):
                sel = active == j
                if np.any(sel) and comps[j].jumps.intensity > 0:
                    lam_jump[sel] = _jump_sum(comps[j], dt[sel], st["jumps"])
            x = x + b * dt + s * (w1 - w0) + lam_jump
            seg0, w0 = e, w1
        out[:, k + 1] = x
    return PathSet(grid, out)


# empirical statistics ---------------------------------------------------------

def empirical_chf(samples, u) -> tuple[np.ndarray, float]:
    """Sample mean of exp(i u X) and the 4/sqrt(n) agreement radius."""
    samples = np.asarray(samples, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    vals = np.array([np.mean(np.exp(1j * ui * samples)) for ui in u])
    return vals, 4.0 / math.sqrt(len(samples))


def empirical_density(samples, bins: int = 200, range_=None) -> tuple[np.ndarray, np.ndarray]:
    hist, edges = np.histogram(samples, bins=bins, range=range_, density=True)
    return 0.5 * (edges[1:] + edges[:-1]), hist


# concatenated drivers -----------------------------------------------------------

def driver_checks(sched: ScheduleDeterministic, n: int, seed: int = 0, horizon: float | None = None,
                  intensity: float | None = None, window: float = 0.25) -> dict:
    """Empirical checks that concatenated drivers are again a Brownian motion
    and a Poisson process.

    ``W~(t) = sum_j W_j(s_j(t))`` is sampled at the horizon and on either side
    of every switch; ``P~`` likewise with independent Poisson processes of the
    given intensity (defaults to the first component's).
    """
    if not sched.times:
        raise ModelError("driver checks need at least one switch")
    horizon = sched.times[-1] + 0.5 if horizon is None else horizon
    lam = sched.components[0].jumps.intensity if intensity is None else intensity
    probe = sorted({horizon} | {min(max(tau + d, 1e-9), horizon) for tau in sched.times
                               for d in (-window, 0.0, window)})
    probe = np.array(probe)
    J = len(sched.components)
    g_w = rngmod.stream(seed, "driver-brownian")
    g_p = rngmod.stream(seed, "driver-poisson")
    shifts = np.array([sched.time_shifts(t) for t in probe])  # (P, J)
    W = np.zeros((n, len(probe)))
    P = np.zeros((n, len(probe)), dtype=np.int64)
    for j in range(J):
        s = shifts[:, j]
        # each W_j / P_j is sampled at its own increasing shifts
        uniq, inv = np.unique(s, return_inverse=True)
        dt = np.diff(np.concatenate([[0.0], uniq]))
        wj = np.cumsum(g_w.standard_normal((n, len(uniq))) * np.sqrt(dt), axis=1)
        pj = np.cumsum(g_p.poisson(lam * dt, size=(n, len(uniq))), axis=1) if lam > 0 else \
            np.zeros((n, len(uniq)), dtype=np.int64)
        W += wj[:, inv]
        P += pj[:, inv]

    report = {"n": n, "seed": seed, "horizon": horizon, "intensity": lam, "checks": []}

    def add(name, value, target, tol, passed):
        report["checks"].append(
            {"name": name, "value": float(value), "target": float(target), "tol": float(tol), "pass": bool(passed)}
        )

    iT = int(np.argmin(np.abs(probe - horizon)))
    var = np.var(W[:, iT], ddof=1)
    tol = 3 * horizon * math.sqrt(2.0 / (n - 1))
    add(f"var W~({horizon:g})", var, horizon, tol, abs(var - horizon) <= tol)
    for tau in sched.times:
        a = float(np.clip(tau - window, 1e-9, horizon))
        b = float(np.clip(tau + window, 0, horizon))
        if not a < tau < b:
            continue
        ia = int(np.argmin(np.abs(probe - a)))
        ib = int(np.argmin(np.abs(probe - b)))
        cov = np.cov(W[:, ia], W[:, ib])[0, 1]
        tol = 3 * math.sqrt((a * b + a * a) / n)
        add(f"cov W~({a:g}), W~({b:g})", cov, a, tol, abs(cov - a) <= tol)
        itau = int(np.argmin(np.abs(probe - tau)))
        left = P[:, itau] - P[:, ia]
        right = P[:, ib] - P[:, itau]
        total = P[:, ib] - P[:, ia]
        if lam == 0:
            zero = not (np.any(total) or np.any(P))
            add(f"zero jumps around {tau:g}", float(np.abs(P).max()), 0.0, 0.0, zero)
            continue
        mean = lam * (b - a)
        pval = _poisson_chi2(total, mean)
        add(f"chi2 p-value of counts on [{a:g}, {b:g}]", pval, 0.01, 0.0, pval > 0.01)
        rho = np.corrcoef(left, right)[0, 1]
        tol = 3 / math.sqrt(n)
        add(f"corr of counts across {tau:g}", rho, 0.0, tol, abs(rho) < tol)
    report["pass"] = all(c["pass"] for c in report["checks"])
    return report


def _poisson_chi2(counts: np.ndarray, mean: float) -> float:
    """Chi-square goodness of fit to Poisson(mean); bins pooled to expected >= 5."""
    n = len(counts)
    kmax = int(counts.max())
    observed = np.bincount(counts, minlength=kmax + 1).astype(float)
    expected = n * stats.poisson.pmf(np.arange(kmax + 1), mean)
    expected[-1] += n * stats.poisson.sf(kmax, mean)
    obs, exp = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= 5:
            obs.append(o_acc)
            exp.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0:
        if obs:
            obs[-1] += o_acc
            exp[-1] += e_acc
        else:
            obs.append(o_acc)
            exp.append(e_acc)
    if len(obs) < 2:
        return 1.0
    return float(stats.chisquare(obs, exp).pvalue)
