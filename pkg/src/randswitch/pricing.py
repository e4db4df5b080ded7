"""European option pricing by the COS method, Black-Scholes and implied vols."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import fourier


class PricingError(ValueError):
    pass


class RangeViolation(PricingError):
    pass


class ImpliedVolError(PricingError):
    pass


@dataclass(frozen=True)
class MarketSpec:
    strikes: tuple[float, ...]
    expiries: tuple[float, ...]
    spot: float = 1.0
    rate: float = 0.05
    kind: str = "call"

    def __post_init__(self):
        object.__setattr__(self, "strikes", tuple(float(k) for k in self.strikes))
        object.__setattr__(self, "expiries", tuple(float(t) for t in self.expiries))
        if self.spot <= 0 or self.rate < 0:
            raise PricingError("spot must be > 0 and rate >= 0")
        if any(k <= 0 for k in self.strikes) or list(self.strikes) != sorted(set(self.strikes)):
            raise PricingError("strikes must be positive and strictly ascending")
        if any(t <= 0 for t in self.expiries):
            raise PricingError("expiries must be positive")
        if self.kind not in ("call", "put"):
            raise PricingError("kind must be 'call' or 'put'")


@dataclass(frozen=True)
class CosConfig:
    n_terms: int = 256
    width: float = 10.0
    tol: float = 1e-8
    max_terms: int = 2**14


# Black-Scholes ----------------------------------------------------------------

def bs_price(spot, strike, expiry, vol, rate, kind: str = "call"):
    spot, strike, expiry, vol = map(np.asarray, (spot, strike, expiry, vol))
    sd = vol * np.sqrt(expiry)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(spot / strike) + (rate + 0.5 * vol**2) * expiry) / sd
    d2 = d1 - sd
    disc = strike * np.exp(-rate * expiry)
    call = spot * special.ndtr(d1) - disc * special.ndtr(d2)
    if kind == "call":
        return call
    return call - spot + disc


def bs_vega(spot, strike, expiry, vol, rate):
    sd = vol * np.sqrt(expiry)
    d1 = (np.log(spot / strike) + (rate + 0.5 * vol**2) * expiry) / sd
    return spot * np.exp(-0.5 * d1**2) / math.sqrt(2 * math.pi) * np.sqrt(expiry)


def implied_vol(price: float, spot: float, strike: float, expiry: float, rate: float,
                kind: str = "call", tol: float = 1e-10, max_iter: int = 200) -> float:
    """Black-Scholes vol reproducing ``price``.

    Newton on vega inside a maintained bracket; bisection whenever the
    Newton step leaves the bracket or stalls.
    """
    disc = strike * math.exp(-rate * expiry)
    if kind == "call":
        lower, upper = max(spot - disc, 0.0), spot
    else:
        lower, upper = max(disc - spot, 0.0), disc
    if not (lower < price < upper):
        raise ImpliedVolError(
            f"price {price:.12g} outside no-arbitrage bounds ({lower:.12g}, {upper:.12g})"
        )

    def f(v):
        return float(bs_price(spot, strike, expiry, v, rate, kind)) - price

    lo, hi = 1e-8, 1.0
    while f(hi) < 0:
        lo, hi = hi, 2 * hi
        if hi > 1e4:
            raise ImpliedVolError("could not bracket the implied vol")
    v = math.sqrt(2 * abs(math.log(spot / strike) + rate * expiry) / expiry) or 0.2
    v = min(max(v, lo), hi)
    for _ in range(max_iter):
        fv = f(v)
        if abs(fv) < tol:
            return v
        if fv > 0:
            hi = v
        else:
            lo = v
        vega = float(bs_vega(spot, strike, expiry, v, rate))
        step = v - fv / vega if vega > 1e-14 else None
        if step is None or not (lo < step < hi):
            step = 0.5 * (lo + hi)
        if hi - lo < 1e-15:
            return step
        v = step
    if abs(f(v)) < 1e3 * tol:
        return v
    raise ImpliedVolError(f"implied vol did not converge (residual {f(v):.3g})")


# COS --------------------------------------------------------------------------

def _chi_psi(a, b, c, d, k):
    """Cosine coefficients of e^y and 1 over [c, d] on the range [a, b]."""
    w = k * np.pi / (b - a)
    chi = (
        np.cos(w * (d - a)) * np.exp(d) - np.cos(w * (c - a)) * np.exp(c)
        + w * np.sin(w * (d - a)) * np.exp(d) - w * np.sin(w * (c - a)) * np.exp(c)
    ) / (1.0 + w**2)
    psi = np.empty_like(w)
    psi[0] = d - c
    psi[1:] = (np.sin(w[1:] * (d - a)) - np.sin(w[1:] * (c - a))) / w[1:]
    return chi, psi


def _cos_once(chf_vals, u, a, b, x, strikes, disc):
    """Call and put prices for log-moneyness ``x = log(S0/K)`` from chf samples."""
    k = np.arange(len(u))
    chi_c, psi_c = _chi_psi(a, b, 0.0, b, k) if b > 0 else (np.zeros(len(k)), np.zeros(len(k)))
    chi_p, psi_p = _chi_psi(a, b, a, 0.0, k) if a < 0 else (np.zeros(len(k)), np.zeros(len(k)))
    Vc = 2.0 / (b - a) * (chi_c - psi_c)
    Vp = 2.0 / (b - a) * (-chi_p + psi_p)
    terms = chf_vals[None, :] * np.exp(1j * np.outer(x - a, u))
    terms[:, 0] *= 0.5
    re = terms.real
    call = disc * strikes * (re @ Vc)
    put = disc * strikes * (re @ Vp)
    return call, put


@dataclass
class PriceGrid:
    """Prices over ``strikes x expiries`` (arrays indexed ``[K, T]``)."""

    market: MarketSpec
    calls: np.ndarray
    puts: np.ndarray
    n_terms: np.ndarray
    parity_error: float
    ranges: list = field(default_factory=list)

    @property
    def prices(self) -> np.ndarray:
        return self.calls if self.market.kind == "call" else self.puts


def cos_price(chf, market: MarketSpec, cos: CosConfig = CosConfig()) -> PriceGrid:
    """COS prices for every strike and expiry.

    ``chf(u, t)`` is the characteristic function of the log-return
    ``log(S_t / S_0)``. The number of cosine terms is doubled until two
    successive price vectors agree within ``cos.tol``.
    """
    K = np.array(market.strikes)
    x = np.log(market.spot / K)
    calls = np.zeros((len(K), len(market.expiries)))
    puts = np.zeros_like(calls)
    used = np.zeros(len(market.expiries), dtype=int)
    ranges = []
    for j, T in enumerate(market.expiries):
        def f(u, T=T):
            return chf(u, T)

        one = complex(np.asarray(f(np.array([0.0])))[0])
        if abs(one - 1.0) > 1e-10:
            raise PricingError(f"chf(0) = {one} at T={T}; not a characteristic function")
        cum = fourier.cumulants_from_chf(f)
        lo, hi = cum.interval(cos.width)
        moneyness = -x
        if np.any(moneyness < lo) or np.any(moneyness > hi):
            raise RangeViolation(
                f"log-moneyness range [{moneyness.min():.4g}, {moneyness.max():.4g}] outside "
                f"truncation interval [{lo:.4g}, {hi:.4g}] at T={T}"
            )
        # the payoff variable is y = x + X; widen so every strike's law fits
        a, b = lo + x.min(), hi + x.max()
        ranges.append((a, b))
        disc = math.exp(-market.rate * T)
        n = cos.n_terms
        prev = None
        while True:
            u = np.arange(n) * np.pi / (b - a)
            c, p = _cos_once(np.asarray(f(u)), u, a, b, x, K, disc)
            if prev is not None and max(np.max(np.abs(c - prev[0])), np.max(np.abs(p - prev[1]))) < cos.tol:
                break
            if n >= cos.max_terms:
                break
            prev = (c, p)
            n *= 2
        calls[:, j], puts[:, j] = c, p
        used[j] = n
    T = np.array(market.expiries)
    parity = calls - puts - (market.spot - K[:, None] * np.exp(-market.rate * T[None, :]))
    return PriceGrid(market, calls, puts, used, float(np.max(np.abs(parity))), ranges)


def implied_vol_grid(grid: PriceGrid) -> np.ndarray:
    m = grid.market
    out = np.empty_like(grid.prices)
    for i, K in enumerate(m.strikes):
        for j, T in enumerate(m.expiries):
            out[i, j] = implied_vol(float(grid.prices[i, j]), m.spot, K, T, m.rate, m.kind)
    return out


# surfaces ---------------------------------------------------------------------

SURFACE_HEADER = ("model", "K", "T_or_xi", "iv", "price")


@dataclass
class SurfaceRow:
    model: str
    K: float
    sweep: float
    iv: float
    price: float


def iv_surface(models: dict, market: MarketSpec, sweep: str = "T", sweep_values=None,
               cos: CosConfig = CosConfig()) -> list[SurfaceRow]:
    """Implied-vol surface rows for each named model.

    ``sweep="T"``: ``models`` maps name -> model and the sweep runs over
    ``market.expiries``. ``sweep="xi"``: ``models`` maps name -> callable
    ``xi -> model``, priced at the single expiry of ``market`` for each value
    in ``sweep_values``.
    """
    rows: list[SurfaceRow] = []
    for name in models:
        if sweep == "T":
            grid = cos_price(models[name].chf, market, cos)
            iv = implied_vol_grid(grid)
            for i, K in enumerate(market.strikes):
                for j in np.argsort(market.expiries, kind="stable"):
                    T = market.expiries[j]
                    rows.append(SurfaceRow(name, K, T, float(iv[i, j]), float(grid.prices[i, j])))
        elif sweep == "xi":
            if len(market.expiries) != 1:
                raise PricingError("xi sweeps need exactly one expiry")
            cells = {}
            for xi in sweep_values:
                grid = cos_price(models[name](xi).chf, market, cos)
                iv = implied_vol_grid(grid)
                for i, K in enumerate(market.strikes):
                    cells[(K, xi)] = (float(iv[i, 0]), float(grid.prices[i, 0]))
            for K in market.strikes:
                for xi in sorted(sweep_values):
                    v, p = cells[(K, xi)]
                    rows.append(SurfaceRow(name, K, float(xi), v, p))
        else:
            raise PricingError(f"unknown sweep {sweep!r}")
    return rows


def fmt(x: float) -> str:
    return format(float(x), ".12g")


def surface_csv(rows: list[SurfaceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SURFACE_HEADER)
    for r in rows:
        w.writerow((r.model, fmt(r.K), fmt(r.sweep), fmt(r.iv), fmt(r.price)))
    return buf.getvalue()


def read_surface_csv(text: str) -> list[SurfaceRow]:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != SURFACE_HEADER:
        raise PricingError(f"unexpected surface header {header}")
    return [SurfaceRow(m, float(k), float(s), float(v), float(p)) for m, k, s, v, p in reader]
