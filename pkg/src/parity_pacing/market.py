"""Second-price auction rule and input-stream scenarios.

Competing prices are exogenous: the agent's bid never moves them.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .core import (
    DatasetStats,
    InputTuple,
    _frozen,
    load_dataset,
    make_rng,
    nearest_rank,
    sample_stream,
)
from .errors import BadScenario, EmptyDataset

REFERENCE_DRAWS = 100_000
REFERENCE_SEED = 0x5EED


@dataclass(frozen=True)
class AuctionOutcome:
    won: bool
    paid: float


def second_price_outcome(bid: float, price: float) -> AuctionOutcome:
    """Strictly higher bid wins and pays the price; ties lose."""
    if bid > price:
        return AuctionOutcome(True, float(price))
    return AuctionOutcome(False, 0.0)


# -- bounded distributions ---------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float

    def __post_init__(self):
        if not np.isfinite(self.value) or self.value < 0:
            raise BadScenario(f"constant must be finite and nonnegative, got {self.value}")

    @property
    def bounds(self) -> tuple[float, float]:
        return self.value, self.value

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return np.full_like(u, self.value, dtype=float)

    def scaled(self, k: float) -> "Const":
        return Const(self.value * k)

    def spec(self) -> str:
        return f"const:{self.value:g}"


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if not (np.isfinite(self.low) and np.isfinite(self.high)):
            raise BadScenario("uniform bounds must be finite")
        if self.low < 0 or self.high < self.low:
            raise BadScenario(f"need 0 <= low <= high, got [{self.low}, {self.high}]")

    @property
    def bounds(self) -> tuple[float, float]:
        return self.low, self.high

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return self.low + (self.high - self.low) * u

    def scaled(self, k: float) -> "Uniform":
        return Uniform(self.low * k, self.high * k)

    def spec(self) -> str:
        return f"uniform:{self.low:g}:{self.high:g}"


Dist = Const | Uniform


def parse_dist(text: str) -> Dist:
    """``const:<c>`` or ``uniform:<a>:<b>``."""
    parts = text.strip().lower().split(":")
    try:
        if parts[0] == "const" and len(parts) == 2:
            return Const(float(parts[1]))
        if parts[0] == "uniform" and len(parts) == 3:
            return Uniform(float(parts[1]), float(parts[2]))
    except ValueError:
        pass
    raise BadScenario(f"bad distribution {text!r}; expected const:<c> or uniform:<a>:<b>")


# -- scenarios ---------------------------------------------------------------

@dataclass(frozen=True)
class Replay:
    path: Path
    m: int


@dataclass(frozen=True, eq=False)
class Synthetic:
    category_probs: np.ndarray
    value_dist: Dist
    price_dists: tuple

    def __post_init__(self):
        probs = np.asarray(self.category_probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise BadScenario("category_probs must be a non-empty vector")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise BadScenario(f"category_probs {probs.tolist()} are not on the simplex")
        pd = tuple(self.price_dists)
        if len(pd) == 1:
            pd = pd * probs.size
        if len(pd) != probs.size:
            raise BadScenario(f"need 1 or {probs.size} price distributions, got {len(pd)}")
        object.__setattr__(self, "category_probs", _frozen(probs))
        object.__setattr__(self, "price_dists", pd)

    @property
    def m(self) -> int:
        return self.category_probs.size

    @property
    def bounds(self) -> tuple[float, float]:
        """Declared (v_bar, p_bar)."""
        return self.value_dist.bounds[1], max(d.bounds[1] for d in self.price_dists)

    def __eq__(self, other):
        if not isinstance(other, Synthetic):
            return NotImplemented
        return (np.array_equal(self.category_probs, other.category_probs)
                and self.value_dist == other.value_dist
                and self.price_dists == other.price_dists)

    def __hash__(self):
        return hash((self.category_probs.tobytes(), self.value_dist, self.price_dists))


Scenario = Replay | Synthetic


def default_synthetic(category_probs) -> Synthetic:
    """Values and prices uniform on [0, 1] in every category."""
    return Synthetic(category_probs, Uniform(0.0, 1.0), (Uniform(0.0, 1.0),))


@lru_cache(maxsize=8)
def _replay_data(path: Path, m: int):
    return load_dataset(path, m)


def _draw_synthetic(sc: Synthetic, T: int, seed: int):
    rng = make_rng(seed)
    u = rng.random((T, 3))
    cdf = np.cumsum(sc.category_probs)
    cdf[-1] = 1.0
    cat = np.minimum(np.searchsorted(cdf, u[:, 0], side="right"), sc.m - 1)
    vlo, vhi = sc.value_dist.bounds
    values = np.clip(sc.value_dist.ppf(u[:, 1]), vlo, vhi)
    prices = np.empty(T)
    for k, dist in enumerate(sc.price_dists):
        sel = cat == k
        lo, hi = dist.bounds
        prices[sel] = np.clip(dist.ppf(u[sel, 2]), lo, hi)
    return values, prices, cat


def generate_stream(scenario: Scenario, T: int, seed: int) -> tuple[list[InputTuple], DatasetStats]:
    """T i.i.d. tuples (synthetic) or a seeded sample without replacement (replay)."""
    if int(T) != T or T < 1:
        raise ValueError(f"horizon must be a positive integer, got {T}")
    if isinstance(scenario, Replay):
        data, _ = _replay_data(Path(scenario.path), scenario.m)
        stream = sample_stream(data, T, seed)
        return stream, DatasetStats.from_tuples(stream)
    if not isinstance(scenario, Synthetic):
        raise BadScenario(f"unknown scenario {scenario!r}")
    values, prices, cat = _draw_synthetic(scenario, T, seed)
    eye = np.eye(scenario.m)
    onehots = [_frozen(row) for row in eye]
    stream = [InputTuple(float(v), float(p), onehots[k]) for v, p, k in zip(values, prices, cat)]
    return stream, DatasetStats.from_arrays(values, prices, scenario.m)


def reference_stats(scenario: Scenario) -> DatasetStats:
    """Price statistics used to set rho: the whole file, or 10^5 fixed-seed draws."""
    if isinstance(scenario, Replay):
        return _replay_data(Path(scenario.path), scenario.m)[1]
    values, prices, _ = _draw_synthetic(scenario, REFERENCE_DRAWS, REFERENCE_SEED)
    return DatasetStats.from_arrays(values, prices, scenario.m)


def rho_from_quantile(stats: DatasetStats, q: float = 0.5) -> float:
    if stats.n == 0:
        raise EmptyDataset("no prices")
    if not 0 < q < 1:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    return nearest_rank(stats.sorted_prices, q)


def apply_price_unbalance(scenario: Scenario, cheap_category: int, discount: float) -> Synthetic:
    """Scale one category's price distribution by (1 - discount)."""
    if not isinstance(scenario, Synthetic):
        raise BadScenario("price unbalance needs a synthetic scenario")
    if not 0 <= cheap_category < scenario.m or int(cheap_category) != cheap_category:
        raise BadScenario(f"category index {cheap_category} out of range for m={scenario.m}")
    if not 0 <= discount < 1:
        raise BadScenario(f"discount must lie in [0, 1), got {discount}")
    if discount == 0:
        return scenario
    dists = list(scenario.price_dists)
    dists[cheap_category] = dists[cheap_category].scaled(1.0 - discount)
    return replace(scenario, price_dists=tuple(dists))
