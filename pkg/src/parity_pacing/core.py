"""Domain types, validation, dataset loading and seeded stream sampling.

All randomness in the package flows through :func:`make_rng`, which wraps
NumPy's PCG64 bit generator.  PCG64 output is specified bit-for-bit, so a
given seed produces the same stream on every platform.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    BadCategory,
    DimensionMismatch,
    EmptyDataset,
    HorizonExceedsData,
    NegativeField,
    ParseError,
)

SIMPLEX_TOL = 1e-9
RENORMALIZE_TOL = 1e-6
MASK64 = (1 << 64) - 1

# quantile levels precomputed into DatasetStats.price_quantiles
QUANTILE_LEVELS = (0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class InputTuple:
    """One auction request: valuation, competing price and category vector."""

    valuation: float
    price: float
    categories: np.ndarray

    @property
    def m(self) -> int:
        return self.categories.shape[0]

    def __eq__(self, other):
        if not isinstance(other, InputTuple):
            return NotImplemented
        return (
            self.valuation == other.valuation
            and self.price == other.price
            and np.array_equal(self.categories, other.categories)
        )

    def __hash__(self):
        return hash((self.valuation, self.price, self.categories.tobytes()))

    def __repr__(self):
        cats = ", ".join(f"{c:g}" for c in self.categories)
        return f"InputTuple(v={self.valuation:g}, p={self.price:g}, c=({cats}))"


@dataclass(frozen=True, eq=False)
class TargetDistribution:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DimensionMismatch("target must be a non-empty vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise BadCategory(f"target weights must be nonnegative, got {w.tolist()}")
        if abs(w.sum() - 1.0) > SIMPLEX_TOL:
            raise BadCategory(f"target weights sum to {w.sum():.12g}, expected 1")
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def m(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class BudgetSpec:
    horizon: int
    per_iteration_budget: float

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon}")
        if not self.per_iteration_budget > 0:
            raise ValueError(f"per-iteration budget must be positive, got {self.per_iteration_budget}")

    @property
    def total_budget(self) -> float:
        return self.horizon * self.per_iteration_budget


def nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    """Nearest-rank quantile: the ceil(q*n)-th order statistic (1-based)."""
    n = len(sorted_values)
    if n == 0:
        raise EmptyDataset("quantile of an empty sample")
    if not 0 < q <= 1:
        raise ValueError(f"quantile level must lie in (0, 1], got {q}")
    # the epsilon keeps e.g. 0.3*10 = 3.0000000000000004 at rank 3
    k = math.ceil(q * n - 1e-9)
    k = min(max(k, 1), n)
    return float(sorted_values[k - 1])


@dataclass(frozen=True, eq=False)
class DatasetStats:
    v_max: float
    p_max: float
    m: int
    n: int
    price_quantiles: dict
    sorted_prices: np.ndarray = field(repr=False)

    @classmethod
    def from_tuples(cls, tuples: Sequence[InputTuple]) -> "DatasetStats":
        if len(tuples) == 0:
            raise EmptyDataset("no records")
        prices = np.fromiter((t.price for t in tuples), dtype=float, count=len(tuples))
        values = np.fromiter((t.valuation for t in tuples), dtype=float, count=len(tuples))
        return cls.from_arrays(values, prices, tuples[0].m)

    @classmethod
    def from_arrays(cls, values: np.ndarray, prices: np.ndarray, m: int) -> "DatasetStats":
        if len(prices) == 0:
            raise EmptyDataset("no records")
        sp = _frozen(np.sort(prices))
        quantiles = {q: nearest_rank(sp, q) for q in QUANTILE_LEVELS}
        return cls(
            v_max=float(np.max(values)),
            p_max=float(sp[-1]),
            m=int(m),
            n=len(sp),
            price_quantiles=quantiles,
            sorted_prices=sp,
        )

    def quantile(self, q: float) -> float:
        if q in self.price_quantiles:
            return self.price_quantiles[q]
        return nearest_rank(self.sorted_prices, q)


def validate_tuple(raw, m: int, line: int | None = None) -> InputTuple:
    """Check a raw ``(valuation, price, categories)`` triple and build an InputTuple.

    Category vectors whose sum is off by at most 1e-6 are renormalized;
    larger deviations are rejected.
    """
    v, p, cats = raw
    c = np.asarray(cats, dtype=float).ravel()
    if c.shape[0] != m:
        raise DimensionMismatch(f"expected {m} category components, got {c.shape[0]}", line)
    v = float(v)
    p = float(p)
    if not (math.isfinite(v) and v >= 0):
        raise NegativeField(f"valuation must be a finite nonnegative number, got {v}", line)
    if not (math.isfinite(p) and p >= 0):
        raise NegativeField(f"price must be a finite nonnegative number, got {p}", line)
    if not np.all(np.isfinite(c)) or np.any(c < 0) or np.any(c > 1):
        raise BadCategory(f"category components must lie in [0, 1], got {c.tolist()}", line)
    s = c.sum()
    dev = abs(s - 1.0)
    if dev > RENORMALIZE_TOL:
        raise BadCategory(f"category components sum to {s:.12g}, expected 1", line)
    if dev > SIMPLEX_TOL:
        c = np.minimum(c / s, 1.0)
    return InputTuple(v, p, _frozen(c))


def load_dataset(path, m: int) -> tuple[list[InputTuple], DatasetStats]:
    """Read a ``v,p,c1,...,cm`` CSV file.

    Raises ``OSError`` when the file cannot be read; parse and validation
    errors carry the 1-based line number.
    """
    tuples: list[InputTuple] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataset(f"{path}: file is empty")
        header = [h.strip() for h in header]
        if len(header) != m + 2:
            raise DimensionMismatch(f"header has {len(header)} columns, expected {m + 2}", 1)
        expected = ["v", "p"] + [f"c{i + 1}" for i in range(m)]
        if header != expected:
            raise ParseError(f"header must be {','.join(expected)}, got {','.join(header)}", 1)
        for row in reader:
            lineno = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != m + 2:
                raise DimensionMismatch(f"row has {len(row)} columns, expected {m + 2}", lineno)
            try:
                nums = [float(cell) for cell in row]
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            tuples.append(validate_tuple((nums[0], nums[1], nums[2:]), m, line=lineno))
    if not tuples:
        raise EmptyDataset(f"{path}: no data rows")
    return tuples, DatasetStats.from_tuples(tuples)


def write_dataset(path, tuples: Sequence[InputTuple]) -> None:
    """Write tuples in the canonical CSV format (12 significant digits)."""
    if not tuples:
        raise EmptyDataset("refusing to write an empty dataset")
    m = tuples[0].m
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["v", "p"] + [f"c{i + 1}" for i in range(m)])
        for t in tuples:
            w.writerow([f"{t.valuation:.12g}", f"{t.price:.12g}"] + [f"{c:.12g}" for c in t.categories])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


def sample_stream(dataset: Sequence[InputTuple], T: int, seed: int, replacement: bool = False) -> list[InputTuple]:
    n = len(dataset)
    if n == 0:
        raise EmptyDataset("cannot sample from an empty dataset")
    rng = make_rng(seed)
    if replacement:
        idx = rng.integers(0, n, size=T)
        return [dataset[i] for i in idx]
    if T > n:
        raise HorizonExceedsData(f"horizon {T} exceeds dataset size {n} (sampling without replacement)")
    # partial Fisher-Yates: position i receives a uniform pick from the untouched tail
    perm = list(range(n))
    for i in range(T):
        j = i + int(rng.integers(0, n - i))
        perm[i], perm[j] = perm[j], perm[i]
    return [dataset[perm[i]] for i in range(T)]


def stream_arrays(stream: Sequence[InputTuple]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack a stream into ``(values, prices, categories)`` arrays."""
    T = len(stream)
    if T == 0:
        raise EmptyDataset("empty stream")
    v = np.fromiter((t.valuation for t in stream), dtype=float, count=T)
    p = np.fromiter((t.price for t in stream), dtype=float, count=T)
    C = np.vstack([t.categories for t in stream])
    return v, p, C
