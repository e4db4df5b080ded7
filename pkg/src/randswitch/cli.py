"""Command-line front end.

    randswitch quad --family normal --params 0 1 --order 2
    randswitch chf fig1 --t 1.5
    randswitch price bs
    randswitch iv-surface --figure fig3
    randswitch simulate fig1 --paths 10
    randswitch validate fig4 --paths 100000

Config arguments are JSON files or bundled preset names. Exit codes:
0 success, 2 configuration error, 3 numerical failure, 4 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys

import numpy as np

from . import config, figures, fourier, localvol, markov, montecarlo, pricing, processes
from .models import DeterministicModel, MarkovModel, NoSwitchModel
from .quadrature import QuadratureError, RandomiserSpec, rule_for

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4

NUMERIC_ERRORS = (
    ArithmeticError,
    QuadratureError,
    processes.ModelError,
    pricing.PricingError,
    markov.ExpmError,
    localvol.LocalVolError,
    montecarlo.SimulationError,
)

fmt = pricing.fmt


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in r])
    return buf.getvalue()


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


# commands ---------------------------------------------------------------------

def cmd_quad(args) -> int:
    if args.config:
        doc = config.load(args.config)
        comp = config.components(doc)[args.component]
        spec, order = comp.randomiser, args.order or comp.order
    else:
        if not args.family or not args.params:
            raise config.ConfigError("quad needs --family and --params (or a config)", "/")
        try:
            spec = RandomiserSpec(args.family, tuple(args.params), args.truncation)
        except QuadratureError as exc:
            raise config.ConfigError(str(exc), "/") from exc
        order = args.order or 7
    rule = rule_for(spec, order)
    _emit(_rows_csv(("node", "weight"), zip(rule.nodes, rule.weights)), args.output)
    return EXIT_OK


def cmd_chf(args) -> int:
    model = config.build_model(config.load(args.config))
    u = np.linspace(args.u_min, args.u_max, args.n)
    phi = np.asarray(model.chf(u, args.t))
    _emit(_rows_csv(("u", "re", "im"), zip(u, phi.real, phi.imag)), args.output)
    return EXIT_OK


def cmd_density(args) -> int:
    doc = config.load(args.config)
    model = config.build_model(doc)

    def chf(u):
        return model.chf(u, args.t)

    a, b = fourier.cumulants_from_chf(chf).interval(config.cos_config(doc).width)
    lo = a if args.x_min is None else args.x_min
    hi = b if args.x_max is None else args.x_max
    x = np.linspace(lo, hi, args.n)
    f = np.maximum(fourier.cos_density(chf, x, a, b, args.n_terms), 0.0)
    _emit(_rows_csv(("x", "f"), zip(x, f)), args.output)
    return EXIT_OK


def cmd_price(args) -> int:
    doc = config.load(args.config)
    model = config.build_model(doc)
    market = config.market(doc)
    grid = pricing.cos_price(model.chf, market, config.cos_config(doc))
    rows = []
    for i, K in enumerate(market.strikes):
        for j in np.argsort(market.expiries, kind="stable"):
            T = market.expiries[j]
            price = float(grid.prices[i, j])
            try:
                iv = pricing.implied_vol(price, market.spot, K, T, market.rate, market.kind)
            except pricing.ImpliedVolError:
                iv = math.nan
            rows.append((K, T, float(grid.calls[i, j]), float(grid.puts[i, j]), iv))
    _emit(_rows_csv(("K", "T", "call", "put", "iv"), rows), args.output)
    if args.verbose:
        print(f"parity error {grid.parity_error:.3g}; cosine terms {list(grid.n_terms)}", file=sys.stderr)
    return EXIT_OK


def cmd_iv_surface(args) -> int:
    if args.figure:
        rows = figures.surface(args.figure)
    elif args.config:
        doc = config.load(args.config)
        rows = pricing.iv_surface({args.name: config.build_model(doc)}, config.market(doc), "T",
                                  cos=config.cos_config(doc))
    else:
        raise config.ConfigError("iv-surface needs --figure or a config", "/")
    _emit(pricing.surface_csv(rows), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = config.load(args.config)
    num = config.numerics(doc)
    n = args.paths or num.paths
    step = args.step or num.step
    horizon = args.horizon or num.horizon
    seed = num.seed if args.seed is None else args.seed
    model = config.build_model(doc)
    if args.local_vol:
        if not isinstance(model, (DeterministicModel, NoSwitchModel)):
            raise config.ConfigError("local-vol simulation needs deterministic switching", "/switching/mode")
        sched = model.schedule(horizon) if isinstance(model, DeterministicModel) else \
            processes.ScheduleDeterministic((), (model.component,), model.x0)
        field = localvol.LocalVolField.from_schedule(sched)
        times, values = localvol.euler_simulate(field, horizon, step, n, seed, keep_paths=True)
        text = montecarlo.paths_csv(times, values)
    elif isinstance(model, MarkovModel):
        raise config.ConfigError("path output is not available for Markov switching; use validate", "/switching/mode")
    else:
        common = num.common_noise if args.common_noise is None else args.common_noise
        paths = montecarlo.simulate_paths(model, horizon, step, n, seed, common)
        text = paths.to_csv()
    _emit(text, args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    doc = config.load(args.config)
    num = config.numerics(doc)
    model = config.build_model(doc)
    n = args.paths or num.paths
    seed = num.seed if args.seed is None else args.seed
    t = args.t or num.horizon
    u = np.array(args.u)
    x = montecarlo.simulate_terminal(model, t, n, seed)
    emp, radius = montecarlo.empirical_chf(x, u)
    ana = np.asarray(model.chf(u, t))
    report = {"config": args.config, "t": t, "paths": n, "seed": seed, "radius": radius, "checks": []}
    for ui, e, a in zip(u, emp, ana):
        err = float(abs(e - a))
        report["checks"].append({"u": float(ui), "error": err, "pass": err <= radius})
    ok = all(c["pass"] for c in report["checks"])
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        for c in report["checks"]:
            status = "PASS" if c["pass"] else "FAIL"
            print(f"{status} chf u={fmt(c['u'])} |analytic - empirical|={c['error']:.3e} radius={radius:.3e}")
        print(("PASS" if ok else "FAIL") + f" {args.config} t={fmt(t)} n={n}")
    return EXIT_OK if ok else EXIT_VALIDATION


# parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randswitch", description="Randomised regime-switching models.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quad", help="quadrature nodes and weights of a randomiser")
    q.add_argument("--family", choices=["normal", "exponential", "uniform", "point"])
    q.add_argument("--params", type=float, nargs="+")
    q.add_argument("--truncation", type=float)
    q.add_argument("--order", type=int)
    q.add_argument("--config")
    q.add_argument("--component", type=int, default=0)
    q.set_defaults(fn=cmd_quad)

    c = sub.add_parser("chf", help="characteristic function on a u-grid")
    c.add_argument("config")
    c.add_argument("--t", type=float, default=1.0)
    c.add_argument("--u-min", type=float, default=0.0)
    c.add_argument("--u-max", type=float, default=20.0)
    c.add_argument("--n", type=int, default=201)
    c.set_defaults(fn=cmd_chf)

    d = sub.add_parser("density", help="density of X(t) by cosine inversion")
    d.add_argument("config")
    d.add_argument("--t", type=float, default=1.0)
    d.add_argument("--x-min", type=float)
    d.add_argument("--x-max", type=float)
    d.add_argument("--n", type=int, default=201)
    d.add_argument("--n-terms", type=int, default=2**12)
    d.set_defaults(fn=cmd_density)

    pr = sub.add_parser("price", help="European prices by the COS method")
    pr.add_argument("config")
    pr.set_defaults(fn=cmd_price)

    s = sub.add_parser("iv-surface", help="implied-volatility surface CSV")
    s.add_argument("config", nargs="?")
    s.add_argument("--figure", choices=["fig3", "fig4"])
    s.add_argument("--name", default="model")
    s.set_defaults(fn=cmd_iv_surface)

    m = sub.add_parser("simulate", help="simulate paths (path_id,t,x CSV)")
    m.add_argument("config")
    m.add_argument("--paths", type=int)
    m.add_argument("--step", type=float)
    m.add_argument("--horizon", type=float)
    m.add_argument("--seed", type=int)
    m.add_argument("--common-noise", action=argparse.BooleanOptionalAction, default=None)
    m.add_argument("--local-vol", action="store_true", help="Euler paths of the local-vol model")
    m.set_defaults(fn=cmd_simulate)

    v = sub.add_parser("validate", help="Monte Carlo vs analytic chf")
    v.add_argument("config")
    v.add_argument("--paths", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--t", type=float)
    v.add_argument("--u", type=float, nargs="+", default=[0.5, 1.0, 2.0, 5.0])
    v.add_argument("--json", action="store_true")
    v.set_defaults(fn=cmd_validate)

    for sp in (q, c, d, pr, s, m):
        sp.add_argument("-o", "--output")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure ({type(exc).__module__}.{type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
