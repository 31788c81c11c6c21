"""Line-based ``key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored; lists are comma-separated.
Unknown keys are rejected so typos cannot silently fall back to defaults.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import TargetDistribution
from .errors import ConfigError, MissingKey, PacingError, UnknownKey
from .market import (
    Replay,
    Scenario,
    Synthetic,
    apply_price_unbalance,
    parse_dist,
)
from .regularizer import Distance, parse_distance

AGENTS = ("omd", "ap")

DEFAULTS = {
    "regularizer": "l2",
    "trials": "20",
    "eta_scale": "0.1",
    "rho_quantile": "0.5",
    "agents": "omd,ap",
    "base_seed": "0",
    "output_dir": "out",
    "value_dist": "uniform:0:1",
    "price_dist": "uniform:0:1",
    "price_discount": "0",
    "cheap_category": "0",
}
REQUIRED = ("scenario", "target", "horizons")
OPTIONAL = tuple(DEFAULTS) + ("category_probs", "rho")
KNOWN = REQUIRED + OPTIONAL


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    scenario: Scenario
    target: TargetDistribution
    regularizer: Distance
    horizons: tuple[int, ...]
    trials: int
    eta_scale: float
    rho_quantile: float
    rho: float | None
    agents: tuple[str, ...]
    base_seed: int
    output_dir: Path

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1", key="trials")
        if not self.horizons or any(T < 1 for T in self.horizons):
            raise ConfigError("horizons must be a nonempty list of positive integers", key="horizons")
        if not self.eta_scale > 0:
            raise ConfigError("eta_scale must be positive", key="eta_scale")
        if self.rho is not None and not self.rho > 0:
            raise ConfigError("rho must be positive", key="rho")
        if not 0 < self.rho_quantile < 1:
            raise ConfigError("rho_quantile must lie in (0, 1)", key="rho_quantile")
        if not self.agents:
            raise ConfigError("agents must name at least one agent", key="agents")


def _floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def read_pairs(path) -> dict[str, tuple[str, int]]:
    """Raw ``key -> (value, line)`` map; raises on syntax and unknown keys."""
    pairs: dict[str, tuple[str, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().lower()
            if not sep or not key:
                raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
            if key not in KNOWN:
                raise UnknownKey(f"unknown key {key!r}", line=lineno, key=key)
            if key in pairs:
                raise ConfigError(f"duplicate key {key!r}", line=lineno, key=key)
            pairs[key] = (value.strip(), lineno)
    return pairs


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    pairs = read_pairs(path)
    for key in REQUIRED:
        if key not in pairs:
            raise MissingKey(f"missing required key {key!r}", key=key)

    def get(key):
        if key in pairs:
            return pairs[key]
        return DEFAULTS.get(key), None

    def convert(key, fn):
        value, line = get(key)
        try:
            return fn(value)
        except (ValueError, PacingError) as exc:
            raise ConfigError(f"{key}: {exc}", line=line, key=key) from None

    target = convert("target", lambda s: TargetDistribution(np.array(_floats(s))))
    m = target.m

    scen_text, scen_line = get("scenario")
    kind, _, arg = scen_text.partition(":")
    kind = kind.strip().lower()
    if kind == "replay":
        if not arg.strip():
            raise ConfigError("scenario: replay needs a dataset path (replay:<path>)", line=scen_line, key="scenario")
        data = Path(arg.strip())
        if not data.is_absolute():
            data = (path.parent / data).resolve()
        if not data.is_file():
            raise ConfigError(f"scenario: dataset {data} does not exist", line=scen_line, key="scenario")
        scenario: Scenario = Replay(data, m)
    elif kind == "synthetic" and not arg:
        if "category_probs" not in pairs:
            raise MissingKey("missing key 'category_probs' (required for synthetic scenarios)", key="category_probs")
        probs = convert("category_probs", lambda s: np.array(_floats(s)))
        if probs.size != m:
            raise ConfigError(f"category_probs has {probs.size} entries, target has {m}",
                              line=pairs["category_probs"][1], key="category_probs")
        value_dist = convert("value_dist", parse_dist)
        price_dists = convert("price_dist", lambda s: tuple(parse_dist(x) for x in s.split(",")))
        scenario = convert("category_probs", lambda _: Synthetic(probs, value_dist, price_dists))
        discount = convert("price_discount", float)
        cheap = convert("cheap_category", int)
        scenario = convert("price_discount", lambda _: apply_price_unbalance(scenario, cheap, discount))
    else:
        raise ConfigError(f"scenario must be 'synthetic' or 'replay:<path>', got {scen_text!r}",
                          line=scen_line, key="scenario")

    agents = convert("agents", lambda s: tuple(a.strip().lower() for a in s.split(",") if a.strip()))
    for a in agents:
        if a not in AGENTS:
            raise ConfigError(f"agents: unknown agent {a!r}; expected omd or ap", line=get("agents")[1], key="agents")
    if len(set(agents)) != len(agents):
        raise ConfigError("agents: duplicate entry", line=get("agents")[1], key="agents")

    def ints(s):
        vals = [int(x) for x in s.split(",") if x.strip()]
        return tuple(vals)

    out_value, _ = get("output_dir")
    out = Path(out_value)
    if not out.is_absolute():
        out = path.parent / out

    kwargs = dict(
        scenario=scenario,
        target=target,
        regularizer=convert("regularizer", parse_distance),
        horizons=convert("horizons", ints),
        trials=convert("trials", int),
        eta_scale=convert("eta_scale", float),
        rho_quantile=convert("rho_quantile", float),
        rho=convert("rho", float) if "rho" in pairs else None,
        agents=agents,
        base_seed=convert("base_seed", lambda s: int(s, 0)),
        output_dir=out,
    )
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError as exc:
        line = pairs.get(exc.key, (None, None))[1]
        if line is None:
            raise
        raise type(exc)(str(exc), line=line, key=exc.key) from None
