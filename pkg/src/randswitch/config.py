"""JSON model configuration: schema validation and model construction.

A config has sections ``components`` (one entry per regime or Markov
state), ``switching``, ``market``, ``numerics`` and an optional ``x0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .markov import MarkovSpec
from .models import (
    DeterministicModel,
    FullyStochasticModel,
    MarkovModel,
    NoSwitchModel,
    StochasticModel,
)
from .pricing import CosConfig, MarketSpec
from .processes import ComponentSpec, JumpSpec
from .quadrature import N_MAX, RandomiserSpec
from .switching import SojournSpec

PRESETS = ("fig1", "fig2", "fig2-stochastic", "fig3", "fig4", "markov", "bs")


class ConfigError(ValueError):
    """Invalid configuration; ``pointer`` is a JSON pointer into the document."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"


_LAW = {
    "type": "object",
    "required": ["family", "params"],
    "additionalProperties": False,
    "properties": {
        "family": {"enum": ["normal", "exponential", "uniform", "point"]},
        "params": {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 2},
        "truncation": {"type": ["number", "null"], "exclusiveMinimum": 0},
    },
}

_NUM_LIST = {"type": "array", "items": {"type": "number"}}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["components"],
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string"},
        "x0": {"type": "number"},
        "components": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["randomiser"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "randomiser": _LAW,
                    "drift": {"enum": ["merton", "constant", "affine"]},
                    "drift_params": {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 2},
                    "vol": {"enum": ["identity", "constant"]},
                    "vol_param": {"type": "number"},
                    "jumps": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "intensity": {"type": "number", "minimum": 0},
                            "mean": {"type": "number"},
                            "std": {"type": "number", "minimum": 0},
                        },
                    },
                    "order": {"type": "integer", "minimum": 1, "maximum": N_MAX},
                },
            },
        },
        "switching": {
            "type": "object",
            "required": ["mode"],
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["none", "deterministic", "stochastic", "fully-stochastic", "markov"]},
                "times": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "relative": {"type": "boolean"},
                "sojourns": {"type": "array", "items": _LAW, "minItems": 1},
                "orders": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": N_MAX}},
                "m_max": {"type": "integer", "minimum": 0},
                "delta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "Q": {"type": "array", "items": _NUM_LIST},
                "p": _NUM_LIST,
            },
        },
        "market": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "spot": {"type": "number", "exclusiveMinimum": 0},
                "rate": {"type": "number", "minimum": 0},
                "strikes": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "expiries": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "kind": {"enum": ["call", "put"]},
            },
        },
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_cos": {"type": "integer", "minimum": 8},
                "width": {"type": "number", "exclusiveMinimum": 0},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "paths": {"type": "integer", "minimum": 1},
                "step": {"type": "number", "exclusiveMinimum": 0},
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "common_noise": {"type": "boolean"},
            },
        },
    },
}


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path)


def validate(doc: dict) -> None:
    """Raise ConfigError for the first schema violation (deepest path first)."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (-len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _pointer(e.absolute_path))


def load(path_or_name: str) -> dict:
    """Read a config file, or a bundled preset by name (``fig3``, ...)."""
    if path_or_name in PRESETS and not Path(path_or_name).exists():
        text = resources.files("randswitch.presets").joinpath(f"{path_or_name}.json").read_text()
        where = f"preset {path_or_name}"
    else:
        try:
            text = Path(path_or_name).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        where = path_or_name
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {where}: {exc.msg} (line {exc.lineno})") from exc
    validate(doc)
    return doc


# construction -----------------------------------------------------------------

def _law(d: dict, pointer: str) -> RandomiserSpec:
    try:
        return RandomiserSpec(d["family"], tuple(d["params"]), d.get("truncation"))
    except ValueError as exc:
        raise ConfigError(str(exc), pointer) from exc


def component(d: dict, pointer: str = "") -> ComponentSpec:
    j = d.get("jumps", {})
    try:
        return ComponentSpec(
            _law(d["randomiser"], pointer + "/randomiser"),
            d.get("drift", "merton"),
            tuple(d.get("drift_params", (0.05,))),
            d.get("vol", "identity"),
            float(d.get("vol_param", 0.0)),
            JumpSpec(j.get("intensity", 0.0), j.get("mean", 0.0), j.get("std", 0.0)),
            int(d.get("order", 7)),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), pointer) from exc


def components(doc: dict) -> tuple[ComponentSpec, ...]:
    return tuple(component(c, f"/components/{i}") for i, c in enumerate(doc["components"]))


def _sojourns(sw: dict, count: int) -> SojournSpec:
    laws = [_law(l, f"/switching/sojourns/{i}") for i, l in enumerate(sw.get("sojourns", []))]
    if not laws:
        raise ConfigError("stochastic switching needs sojourn laws", "/switching/sojourns")
    if len(laws) == 1 and count > 1:
        laws = laws * count
    orders = list(sw.get("orders", [7]))
    if len(orders) == 1 and len(laws) > 1:
        orders = orders * len(laws)
    if len(laws) != count or len(orders) != count:
        raise ConfigError(f"need {count} sojourn laws/orders (or a single shared one)", "/switching")
    return SojournSpec(tuple(laws), tuple(orders))


def build_model(doc: dict):
    """Model object (with ``.chf(u, t)``) described by the config."""
    comps = components(doc)
    x0 = float(doc.get("x0", 0.0))
    sw = doc.get("switching", {"mode": "none"})
    mode = sw["mode"]
    J = len(comps)
    try:
        if mode == "none":
            if J != 1:
                raise ConfigError("mode 'none' takes exactly one component", "/components")
            return NoSwitchModel(comps[0], x0)
        if mode == "deterministic":
            times = tuple(sw.get("times", ()))
            if len(times) != J - 1:
                raise ConfigError(f"{J} components need {J - 1} switching times", "/switching/times")
            if list(times) != sorted(set(times)):
                raise ConfigError("switching times must be strictly increasing", "/switching/times")
            return DeterministicModel(comps, times, x0, bool(sw.get("relative", False)))
        if mode == "stochastic":
            return StochasticModel(comps, _sojourns(sw, J - 1), x0, bool(sw.get("relative", False)))
        if mode == "fully-stochastic":
            m_max = int(sw.get("m_max", J - 1))
            if J < m_max + 1:
                raise ConfigError(f"m_max={m_max} needs {m_max + 1} components", "/components")
            return FullyStochasticModel(comps[: m_max + 1], _sojourns(sw, m_max), m_max,
                                        float(sw.get("delta", 0.05)), x0)
        if mode == "markov":
            if "Q" not in sw or "p" not in sw:
                raise ConfigError("markov switching needs Q and p", "/switching")
            return MarkovModel(MarkovSpec(sw["Q"], sw["p"], comps, x0))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), "/switching") from exc
    raise ConfigError(f"unknown mode {mode!r}", "/switching/mode")


def market(doc: dict) -> MarketSpec:
    m = doc.get("market", {})
    try:
        return MarketSpec(
            tuple(m.get("strikes", (1.0,))), tuple(m.get("expiries", (1.0,))),
            float(m.get("spot", 1.0)), float(m.get("rate", 0.05)), m.get("kind", "call"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), "/market") from exc


def cos_config(doc: dict) -> CosConfig:
    n = doc.get("numerics", {})
    return CosConfig(int(n.get("n_cos", 256)), float(n.get("width", 10.0)), float(n.get("tol", 1e-8)))


@dataclass(frozen=True)
class Numerics:
    seed: int = 0
    paths: int = 10_000
    step: float = 1e-2
    horizon: float = 1.0
    common_noise: bool = False


def numerics(doc: dict) -> Numerics:
    n = doc.get("numerics", {})
    return Numerics(int(n.get("seed", 0)), int(n.get("paths", 10_000)), float(n.get("step", 1e-2)),
                    float(n.get("horizon", 1.0)), bool(n.get("common_noise", False)))
