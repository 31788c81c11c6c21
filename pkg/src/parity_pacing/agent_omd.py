"""Parity-regularized pacing agent: dual online mirror descent on (mu, lambda).

Each step takes the primal decision against the current duals, gates it on
the remaining budget, picks the target-mix point ``xbar`` from the
regularizer, and moves the duals against the stochastic subgradient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import BudgetSpec, InputTuple
from .regularizer import ParityRay, argmax_xbar


@dataclass(frozen=True, eq=False)
class DualState:
    mu: float
    lam: np.ndarray

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        lam = np.array(self.lam, dtype=float)
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def zeros(cls, m: int) -> "DualState":
        return cls(0.0, np.zeros(m))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.mu], self.lam])

    def __eq__(self, other):
        if not isinstance(other, DualState):
            return NotImplemented
        return self.mu == other.mu and np.array_equal(self.lam, other.lam)

    def __repr__(self):
        return f"DualState(mu={self.mu:g}, lam={np.array2string(self.lam, precision=6)})"


@dataclass(frozen=True)
class OmdConfig:
    """Step size, reference function and starting duals.

    Only the Euclidean reference ``psi(d) = |d|^2 / 2`` (modulus 1 under the
    l2 norm) is implemented; it turns the mirror step into a projected
    gradient step.
    """

    eta: float
    reference: str = "euclidean"
    initial_duals: DualState | None = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"step size must be positive, got {self.eta}")
        if self.reference != "euclidean":
            raise ValueError(f"unsupported reference function {self.reference!r}; only 'euclidean'")

    @property
    def sigma(self) -> float:
        return 1.0

    @classmethod
    def default(cls, T: int, scale: float = 0.1) -> "OmdConfig":
        return cls(eta=scale / math.sqrt(T))


@dataclass(slots=True)
class StepRecord:
    t: int
    valuation: float
    price: float
    categories: np.ndarray
    x_hat: int
    x: int
    xbar: np.ndarray | None
    subgradient: np.ndarray
    bid: float
    expenditure: float
    budget_remaining: float
    duals_after: DualState


def kappa(inp: InputTuple, duals: DualState) -> float:
    """Dual-adjusted margin (v - p) - mu p - <lam, c>."""
    return (inp.valuation - inp.price) - duals.mu * inp.price - float(np.dot(duals.lam, inp.categories))


def _shaded(inp: InputTuple, duals: DualState) -> float:
    return (inp.valuation - float(np.dot(duals.lam, inp.categories))) / (1.0 + duals.mu)


def primal_decision(inp: InputTuple, duals: DualState) -> int:
    """1 when the dual-adjusted margin is strictly positive; ties pass.

    kappa > 0 is tested as (v - <lam, c>)/(1 + mu) > p, the same inequality
    divided by 1 + mu > 0.  Evaluating it in the bid's scale keeps the
    decision bit-identical to the auction outcome of :func:`to_bid`; the
    direct form can disagree at rounding-level ties.
    """
    return int(_shaded(inp, duals) > inp.price)


def to_bid(inp: InputTuple, duals: DualState) -> float:
    """Double-paced bid max(0, (v - <lam, c>) / (1 + mu))."""
    return max(0.0, _shaded(inp, duals))


def budget_gate(x_hat: int, price: float, remaining: float) -> int:
    return x_hat if price * x_hat <= remaining else 0


def compute_subgradient(x_hat: int, inp: InputTuple, xbar, rho: float) -> np.ndarray:
    """g = (rho - p x_hat, xbar - c x_hat)."""
    xbar = np.asarray(xbar, dtype=float)
    return np.concatenate([[rho - inp.price * x_hat], xbar - inp.categories * x_hat])


def dual_update(duals: DualState, g, config: OmdConfig) -> DualState:
    g = np.asarray(g, dtype=float)
    mu = max(0.0, duals.mu - config.eta * g[0])
    return DualState(mu, duals.lam - config.eta * g[1:])


def regret_bound_constants(vbar: float, pbar: float, rho: float, L: float, r_lower: float) -> tuple[float, float]:
    """(C1, G) of the regret bound C1 + (G^2 eta / sigma) T + C2 / eta."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    c1 = (vbar - r_lower + 2.0 * L) * pbar / rho
    g = max(rho + pbar, 2.0)
    return c1, g


@dataclass
class OmdAgent:
    """Stateful runner for one trial.

    ``freeze_lambda`` pins lambda at its initial value, which with zero
    initial duals switches the parity term off.
    """

    budget: BudgetSpec
    reg: ParityRay
    config: OmdConfig
    freeze_lambda: bool = False
    duals: DualState = field(init=False)
    remaining: float = field(init=False)
    t: int = field(init=False, default=0)

    def __post_init__(self):
        init = self.config.initial_duals or DualState.zeros(self.reg.m)
        if init.lam.shape != (self.reg.m,):
            raise ValueError(f"initial lambda must have length {self.reg.m}")
        self.duals = init
        self.remaining = float(self.budget.total_budget)

    @property
    def rho(self) -> float:
        return self.budget.per_iteration_budget

    def step(self, inp: InputTuple) -> StepRecord:
        duals = self.duals
        x_hat = primal_decision(inp, duals)
        x = budget_gate(x_hat, inp.price, self.remaining)
        xbar = argmax_xbar(self.reg, duals.lam)
        spend = inp.price * x
        self.remaining -= spend
        g = compute_subgradient(x_hat, inp, xbar, self.rho)
        if self.freeze_lambda:
            new = DualState(max(0.0, duals.mu - self.config.eta * g[0]), duals.lam)
        else:
            new = dual_update(duals, g, self.config)
        self.t += 1
        rec = StepRecord(
            t=self.t,
            valuation=inp.valuation,
            price=inp.price,
            categories=inp.categories,
            x_hat=x_hat,
            x=x,
            xbar=xbar,
            subgradient=g,
            bid=to_bid(inp, duals),
            expenditure=spend,
            budget_remaining=self.remaining,
            duals_after=new,
        )
        self.duals = new
        return rec

    def run(self, stream: Sequence[InputTuple]) -> list[StepRecord]:
        return [self.step(inp) for inp in stream]
