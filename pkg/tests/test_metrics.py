import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parity_pacing.agent_omd import DualState, StepRecord
from parity_pacing.core import BudgetSpec, InputTuple, TargetDistribution
from parity_pacing.errors import DimensionMismatch, InstanceTooLarge, LengthMismatch
from parity_pacing.metrics import (
    dual_function_estimate,
    opt_reg_bruteforce,
    opt_u_greedy,
    realized_distribution,
    realized_reward,
    summarize_trial,
    tvd,
)
from parity_pacing.regularizer import eval_r, make_parity_ray

E2 = np.eye(2)


def tup(v, p, k=0, m=2):
    return InputTuple(v, p, np.eye(m)[k])


def rec(t, x, m=2):
    return StepRecord(t, 0.0, 0.0, np.zeros(m), x, x, None, np.zeros(m + 1), 0.0, 0.0, 0.0, DualState.zeros(m))


def knapsack_grid(tuples, budget, step=0.01):
    """Brute force over {0, step, ..., 1}^T."""
    v = np.array([t.valuation for t in tuples])
    p = np.array([t.price for t in tuples])
    g = np.arange(0, 1 + step / 2, step)
    best = 0.0
    for x in itertools.product(g, repeat=len(tuples)):
        x = np.array(x)
        if p @ x <= budget + 1e-12:
            best = max(best, (v - p) @ x)
    return best


# -- greedy ---------------------------------------------------------------

def test_greedy_no_positive_margin():
    val, x = opt_u_greedy([tup(0.5, 0.5), tup(0.2, 0.9)], 10.0)
    assert val == 0.0 and np.all(x == 0)


def test_greedy_fractional_last_item():
    # frozen: tests/oracles/derive.py (0.01 grid)
    val, x = opt_u_greedy([tup(2.0, 1.0), tup(1.5, 1.0)], 1.5)
    assert val == pytest.approx(1.25, abs=1e-12)
    assert np.allclose(x, [1.0, 0.5])


def test_greedy_slack_budget():
    val, x = opt_u_greedy([tup(2.0, 1.0)], 5.0)
    assert val == 1.0 and x[0] == 1.0


def test_greedy_free_items_first():
    val, x = opt_u_greedy([tup(3.0, 1.0), tup(0.5, 0.0), tup(0.0, 0.0)], 0.5)
    assert x[1] == 1.0 and x[2] == 0.0
    assert val == pytest.approx(0.5 + 0.5 * 2.0)


@settings(max_examples=40, deadline=None)
@given(
    rows=st.lists(st.tuples(st.floats(0, 1), st.floats(0.01, 1)), min_size=1, max_size=3),
    budget=st.floats(0, 2),
)
def test_greedy_matches_grid(rows, budget):
    tuples = [tup(v, p) for v, p in rows]
    val, x = opt_u_greedy(tuples, budget)
    assert abs(val - knapsack_grid(tuples, budget)) <= 0.02 * max(v for v, _ in rows) + 1e-12
    assert np.dot([p for _, p in rows], x) <= budget + 1e-9


@settings(max_examples=40, deadline=None)
@given(rows=st.lists(st.tuples(st.floats(0, 2), st.floats(0, 1)), min_size=1, max_size=8),
       b1=st.floats(0, 3), b2=st.floats(0, 3))
def test_greedy_monotone_in_budget(rows, b1, b2):
    tuples = [tup(v, p) for v, p in rows]
    lo, hi = sorted((b1, b2))
    assert opt_u_greedy(tuples, lo)[0] <= opt_u_greedy(tuples, hi)[0] + 1e-12


# -- regularized brute force and weak duality -----------------------------

def test_bruteforce_single_item():
    # frozen: tests/oracles/derive.py
    reg = make_parity_ray([1.0, 0.0], "l2")
    assert opt_reg_bruteforce([tup(1.0, 0.5, 0)], 0.5, reg, 0.01) == pytest.approx(0.5, abs=1e-12)


def test_bruteforce_zero_budget():
    reg = make_parity_ray([0.5, 0.5], "l2")
    assert opt_reg_bruteforce([tup(1.0, 0.5, 0), tup(2.0, 0.1, 1)], 0.0, reg, 0.05) == 0.0


def test_bruteforce_zero_allocation_floor():
    reg = make_parity_ray([0.5, 0.5], "l2")
    assert opt_reg_bruteforce([tup(0.1, 0.9, 0)], 10.0, reg, 0.05) >= 0.0


def test_bruteforce_limits():
    reg = make_parity_ray([0.5, 0.5], "l2")
    with pytest.raises(InstanceTooLarge):
        opt_reg_bruteforce([tup(1, 0.5)] * 7, 1.0, reg, 0.05)
    with pytest.raises(ValueError):
        opt_reg_bruteforce([tup(1, 0.5)], 1.0, reg, 0.1)


@pytest.mark.parametrize("spec", ["l2", "l1", "mkl:0.01"])
def test_weak_duality_small(spec):
    reg = make_parity_ray([0.4, 0.6], spec)
    rng = np.random.default_rng(8)
    for _ in range(15):
        T = int(rng.integers(1, 4))
        tuples = [tup(float(rng.uniform()), float(rng.uniform()), int(rng.integers(2))) for _ in range(T)]
        rho = float(rng.uniform(0.05, 0.8))
        opt = opt_reg_bruteforce(tuples, T * rho, reg, 0.05)
        for _ in range(5):
            d = DualState(float(rng.uniform(0, 3)), rng.uniform(-2, 2, 2))
            assert T * dual_function_estimate(tuples, d, reg, rho) >= opt - 1e-9


# -- realized metrics -----------------------------------------------------

def test_realized_reward_no_wins():
    reg = make_parity_ray([0.5, 0.5], "l2")
    inputs = [tup(1.0, 0.5, 0), tup(1.0, 0.2, 1)]
    assert realized_reward([rec(1, 0), rec(2, 0)], inputs, reg) == (0.0, 0.0)


def test_realized_reward_on_target():
    reg = make_parity_ray([0.5, 0.5], "l2")
    inputs = [tup(0.8, 0.5, 0), tup(0.3, 0.2, 1)]
    unreg, regd = realized_reward([rec(1, 1), rec(2, 1)], inputs, reg)
    assert unreg == pytest.approx(0.4) and regd == pytest.approx(0.4)


def test_realized_reward_off_target_penalty():
    reg = make_parity_ray([0.5, 0.5], "l2")
    inputs = [tup(0.8, 0.5, 0), tup(0.3, 0.2, 0)]
    unreg, regd = realized_reward([rec(1, 1), rec(2, 1)], inputs, reg)
    assert regd == pytest.approx(unreg + 2 * eval_r(reg, [1.0, 0.0]))


def test_length_mismatch():
    reg = make_parity_ray([0.5, 0.5], "l2")
    with pytest.raises(LengthMismatch):
        realized_reward([rec(1, 1)], [tup(1, 0.5), tup(1, 0.5)], reg)


def test_realized_distribution():
    inputs = [tup(1, 0.5, 0), tup(1, 0.5, 0), tup(1, 0.5, 1)]
    assert np.allclose(realized_distribution([rec(1, 1), rec(2, 1), rec(3, 0)], inputs), [1.0, 0.0])
    assert np.allclose(realized_distribution([rec(1, 1), rec(2, 0), rec(3, 1)], inputs), [0.5, 0.5])
    assert realized_distribution([rec(1, 0), rec(2, 0), rec(3, 0)], inputs) is None


def test_tvd_examples():
    half = TargetDistribution(np.array([0.5, 0.5]))
    assert tvd([0.5, 0.5], half) == 0.0
    assert tvd([1.0, 0.0], half) == 0.5
    assert tvd([0.5, 0.3, 0.2], TargetDistribution(np.array([0.1, 0.3, 0.6]))) == pytest.approx(0.4)
    assert tvd(None, half) == 1.0
    with pytest.raises(DimensionMismatch):
        tvd([1.0, 0.0, 0.0], half)


@given(st.lists(st.floats(0, 1), min_size=3, max_size=3), st.lists(st.floats(0.01, 1), min_size=3, max_size=3))
def test_tvd_range(a, b):
    r = np.array(a)
    t = TargetDistribution(np.array(b) / np.sum(b))
    d = tvd(r, t)
    assert 0.0 <= d <= 1.0
    assert (d <= 1e-12) == bool(np.allclose(r, t.weights, atol=1e-12, rtol=0))


# -- summaries ------------------------------------------------------------

def test_summary_buy_nothing():
    reg = make_parity_ray([0.5, 0.5], "l2")
    inputs = [tup(1.0, 0.5, 0), tup(1.0, 0.2, 1)]
    s = summarize_trial([rec(1, 0), rec(2, 0)], inputs, reg, BudgetSpec(2, 0.5))
    assert s.regret_u == s.opt_u == pytest.approx(1.3)
    assert s.tvd == 1.0 and s.depletion_time is None


def test_summary_no_margin_items():
    reg = make_parity_ray([0.5, 0.5], "l2")
    inputs = [tup(0.1, 0.5, 0), tup(0.2, 0.2, 1)]
    s = summarize_trial([rec(1, 0), rec(2, 0)], inputs, reg, BudgetSpec(2, 0.5))
    assert s.opt_u == 0.0
    assert s.regret_u == pytest.approx(-2 * eval_r(reg, [0.0, 0.0])) and s.regret_u >= 0


def test_summary_omniscient_replay_has_zero_regret():
    # distinct bang-per-buck, integral greedy optimum that is on the ray
    reg = make_parity_ray([0.5, 0.5], "l2")
    inputs = [tup(2.0, 0.5, 0), tup(1.5, 0.5, 1), tup(0.4, 0.5, 0), tup(0.9, 1.0, 1)]
    budget = BudgetSpec(4, 0.25)
    _, x = opt_u_greedy(inputs, budget.total_budget)
    assert np.array_equal(x, [1, 1, 0, 0])
    trace = [rec(i + 1, int(xi)) for i, xi in enumerate(x)]
    s = summarize_trial(trace, inputs, reg, budget)
    assert abs(s.regret_u) <= 1e-9
    assert s.regret_u == s.opt_u - s.reward_regularized
