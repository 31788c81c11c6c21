"""Adaptive pacing baseline: one budget dual, multiplicative bid shading.

The update is projected gradient descent on mu with the realized spend:
``mu <- max(0, mu - eta * (rho - z))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .agent_omd import DualState, StepRecord
from .core import BudgetSpec, InputTuple


@dataclass(frozen=True)
class ApState:
    mu: float
    budget_remaining: float

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        if not self.budget_remaining >= 0:
            raise ValueError(f"remaining budget must be nonnegative, got {self.budget_remaining}")


def ap_bid(v: float, state: ApState) -> float:
    return v / (1.0 + state.mu)


def ap_step(state: ApState, inp: InputTuple, rho: float, eta: float, t: int = 0) -> tuple[ApState, StepRecord]:
    bid = ap_bid(inp.valuation, state)
    x_hat = int(bid > inp.price)
    x = x_hat if inp.price <= state.budget_remaining else 0
    z = inp.price * x
    mu = max(0.0, state.mu - eta * (rho - z))
    new = ApState(mu, state.budget_remaining - z)
    m = inp.m
    g = np.zeros(m + 1)
    g[0] = rho - z
    rec = StepRecord(
        t=t,
        valuation=inp.valuation,
        price=inp.price,
        categories=inp.categories,
        x_hat=x_hat,
        x=x,
        xbar=None,
        subgradient=g,
        bid=bid,
        expenditure=z,
        budget_remaining=new.budget_remaining,
        duals_after=DualState(mu, np.zeros(m)),
    )
    return new, rec


@dataclass
class ApAgent:
    budget: BudgetSpec
    eta: float
    state: ApState = field(init=False)
    t: int = field(init=False, default=0)

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"step size must be positive, got {self.eta}")
        self.state = ApState(0.0, float(self.budget.total_budget))

    def step(self, inp: InputTuple) -> StepRecord:
        self.t += 1
        self.state, rec = ap_step(self.state, inp, self.budget.per_iteration_budget, self.eta, self.t)
        return rec

    def run(self, stream: Sequence[InputTuple]) -> list[StepRecord]:
        return [self.step(inp) for inp in stream]
