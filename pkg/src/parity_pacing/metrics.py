"""Offline optima, dual-function estimates, regret and distributional metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .agent_omd import DualState, StepRecord
from .core import BudgetSpec, InputTuple, TargetDistribution, stream_arrays
from .errors import DimensionMismatch, InstanceTooLarge, LengthMismatch
from .regularizer import GAMMA_TOL, ParityRay, conjugate_r_star, eval_r

BRUTE_MAX_T = 6
GRID_STEPS = (0.05, 0.02, 0.01)
FEAS_TOL = 1e-12
ZERO_WIN_TVD = 1.0


@dataclass(frozen=True, eq=False)
class TrialSummary:
    T: int
    reward_unreg: float
    reward_regularized: float
    opt_u: float
    regret_u: float
    tvd: float
    depletion_time: int | None
    realized_mix: np.ndarray


def opt_u_greedy(tuples: Sequence[InputTuple], budget: float) -> tuple[float, np.ndarray]:
    """Fractional knapsack on margins v - p with cost p.

    Order: free items (p = 0, v > 0) first, then decreasing (v - p) / p, ties
    by index.  The last affordable item is taken fractionally.
    """
    if budget < 0:
        raise ValueError(f"budget must be nonnegative, got {budget}")
    T = len(tuples)
    x = np.zeros(T)
    if T == 0:
        return 0.0, x
    v, p, _ = stream_arrays(tuples)
    margin = v - p
    cand = np.flatnonzero(margin > 0)
    with np.errstate(divide="ignore", over="ignore"):
        ratio = np.where(p[cand] > 0, margin[cand] / np.where(p[cand] > 0, p[cand], 1.0), np.inf)
    # lexsort is stable on the last key; index breaks ties
    order = cand[np.lexsort((cand, -ratio))]
    left = float(budget)
    value = 0.0
    for t in order:
        if p[t] == 0:
            x[t] = 1.0
        elif p[t] <= left:
            x[t] = 1.0
            left -= p[t]
        else:
            x[t] = left / p[t]
            left = 0.0
        value += margin[t] * x[t]
        if left <= 0 and p[t] > 0:
            break
    return float(value), x


def opt_reg_bruteforce(tuples: Sequence[InputTuple], budget: float, reg: ParityRay,
                       grid_step: float = 0.05) -> float:
    """Exhaustive grid search of the regularized offline problem (tests only)."""
    T = len(tuples)
    if T > BRUTE_MAX_T:
        raise InstanceTooLarge(f"brute force supports T <= {BRUTE_MAX_T}, got {T}")
    if not any(math.isclose(grid_step, s) for s in GRID_STEPS):
        raise ValueError(f"grid_step must be one of {GRID_STEPS}, got {grid_step}")
    if T == 0:
        return 0.0
    v, p, C = stream_arrays(tuples)
    n = int(round(1.0 / grid_step))
    best, _ = K.grid_opt_reg(reg.distance.kind, reg.distance.param, reg.xhat, v, p,
                             np.ascontiguousarray(C), float(budget), n, FEAS_TOL, GAMMA_TOL)
    return float(best)


def fstar(v, p, d):
    """Conjugate of x -> (v - p) x on [0, 1]: max(v - p - d, 0)."""
    return np.maximum(np.asarray(v) - np.asarray(p) - np.asarray(d), 0.0)


def dual_function_estimate(tuples: Sequence[InputTuple], duals: DualState, reg: ParityRay, rho: float) -> float:
    """Empirical dual: mean f*(mu p + <lam, c>) + R*(-lam) + rho mu."""
    v, p, C = stream_arrays(tuples)
    d = duals.mu * p + C @ duals.lam
    return float(np.mean(fstar(v, p, d))) + conjugate_r_star(reg, duals.lam) + rho * duals.mu


def _decisions(trace: Sequence[StepRecord], inputs: Sequence[InputTuple]):
    if len(trace) != len(inputs):
        raise LengthMismatch(f"trace has {len(trace)} steps, inputs have {len(inputs)}")
    x = np.fromiter((r.x for r in trace), dtype=float, count=len(trace))
    v, p, C = stream_arrays(inputs)
    return x, v, p, C


def realized_reward(trace: Sequence[StepRecord], inputs: Sequence[InputTuple], reg: ParityRay) -> tuple[float, float]:
    x, v, p, C = _decisions(trace, inputs)
    T = len(x)
    unreg = float(np.dot(v - p, x))
    mix = np.clip(C.T @ x / T, 0.0, None)
    return unreg, unreg + T * eval_r(reg, mix)


def realized_distribution(trace: Sequence[StepRecord], inputs: Sequence[InputTuple]) -> np.ndarray | None:
    """Share of won impressions per category, or None with no wins."""
    x, _, _, C = _decisions(trace, inputs)
    wins = x.sum()
    if wins <= 0:
        return None
    return C.T @ x / wins


def tvd(realized, target: TargetDistribution) -> float:
    """sup_j |realized_j - target_j|; None (no wins) maps to 1.0."""
    if realized is None:
        return ZERO_WIN_TVD
    r = np.asarray(realized, dtype=float)
    if r.shape != target.weights.shape:
        raise DimensionMismatch(f"realized mix has shape {r.shape}, target {target.weights.shape}")
    return float(np.max(np.abs(r - target.weights)))


def depletion_time(trace: Sequence[StepRecord]) -> int | None:
    """First step whose purchase the budget gate blocked."""
    for rec in trace:
        if rec.x_hat and not rec.x:
            return rec.t
    return None


def summarize_trial(trace: Sequence[StepRecord], inputs: Sequence[InputTuple], reg: ParityRay,
                    budget: BudgetSpec) -> TrialSummary:
    x, _, _, C = _decisions(trace, inputs)
    T = len(x)
    unreg, regd = realized_reward(trace, inputs, reg)
    opt, _ = opt_u_greedy(inputs, budget.total_budget)
    return TrialSummary(
        T=T,
        reward_unreg=unreg,
        reward_regularized=regd,
        opt_u=opt,
        regret_u=opt - regd,
        tvd=tvd(realized_distribution(trace, inputs), reg.target),
        depletion_time=depletion_time(trace),
        realized_mix=C.T @ x / T,
    )
