import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parity_pacing.agent_ap import ApAgent, ApState, ap_bid, ap_step
from parity_pacing.agent_omd import (
    DualState,
    OmdAgent,
    OmdConfig,
    budget_gate,
    compute_subgradient,
    dual_update,
    primal_decision,
    regret_bound_constants,
    to_bid,
)
from parity_pacing.core import BudgetSpec, InputTuple
from parity_pacing.market import default_synthetic, generate_stream, second_price_outcome
from parity_pacing.metrics import depletion_time, dual_function_estimate, fstar
from parity_pacing.regularizer import conjugate_r_star, make_parity_ray


def tup(v, p, c=(1.0, 0.0)):
    return InputTuple(v, p, np.array(c, dtype=float))


def duals(mu, lam=(0.0, 0.0)):
    return DualState(mu, np.array(lam, dtype=float))


# -- primal decision and bid ----------------------------------------------

def test_primal_truthful():
    assert primal_decision(tup(1.0, 0.5), duals(0.0)) == 1


def test_primal_budget_dual_blocks():
    assert primal_decision(tup(1.0, 0.6), duals(1.0)) == 0


def test_primal_tie_passes():
    # kappa = 0.5 - 0.25 - 0.25 = 0
    assert primal_decision(tup(1.0, 0.5, (1.0, 0.0)), duals(0.5, (0.25, 0.0))) == 0


def test_bid_values():
    assert to_bid(tup(1.0, 0.3), duals(0.0)) == 1.0
    assert to_bid(tup(1.0, 0.3), duals(0.5, (0.25, 0.0))) == pytest.approx(0.5)
    assert to_bid(tup(0.2, 0.3), duals(0.0, (0.5, 0.0))) == 0.0


@settings(max_examples=300, deadline=None)
@given(
    v=st.floats(0, 2), p=st.floats(0, 2), k=st.integers(0, 2),
    mu=st.floats(0, 5), lam=st.lists(st.floats(-2, 2), min_size=3, max_size=3),
)
def test_bid_primal_equivalence(v, p, k, mu, lam):
    inp = InputTuple(v, p, np.eye(3)[k])
    d = DualState(mu, np.array(lam))
    assert second_price_outcome(to_bid(inp, d), p).won == bool(primal_decision(inp, d))


def test_equivalence_on_constructed_ties():
    # kappa = 0 exactly: p = (v - <lam, c>) / (1 + mu)
    for v, lam0, mu in [(1.0, 0.25, 0.5), (2.0, 0.0, 1.0), (0.75, -0.25, 0.0)]:
        p = (v - lam0) / (1.0 + mu)
        inp = tup(v, p)
        d = duals(mu, (lam0, 0.0))
        assert primal_decision(inp, d) == 0
        assert not second_price_outcome(to_bid(inp, d), p).won


# -- gate, subgradient, dual update ---------------------------------------

def test_budget_gate():
    assert budget_gate(1, 0.5, 0.5) == 1
    assert budget_gate(1, 0.5, 0.49) == 0
    assert budget_gate(0, 0.5, 10.0) == 0


def test_subgradient_examples():
    g = compute_subgradient(1, tup(2.0, 1.0), [0.5, 0.5], 0.5)
    assert np.allclose(g, [-0.5, -0.5, 0.5])
    g = compute_subgradient(0, tup(2.0, 1.0), [0.3, 0.2], 0.5)
    assert np.allclose(g, [0.5, 0.3, 0.2])
    g = compute_subgradient(1, tup(1.0, 0.5), [1.0, 0.0], 0.5)
    assert np.allclose(g, [0.0, 0.0, 0.0])


def test_dual_update_examples():
    cfg = OmdConfig(eta=0.1)
    d = dual_update(duals(0.0), [-0.5, 0.2, -0.2], cfg)
    assert d.mu == pytest.approx(0.05)
    assert np.allclose(d.lam, [-0.02, 0.02])
    d = dual_update(duals(0.0), [0.5, 0.0, 0.0], cfg)
    assert d.mu == 0.0 and np.array_equal(d.lam, [0.0, 0.0])
    start = duals(0.3, (0.1, -0.2))
    assert dual_update(start, [0.0, 0.0, 0.0], cfg) == start


def test_config_validation():
    with pytest.raises(ValueError):
        OmdConfig(eta=0.0)
    with pytest.raises(ValueError):
        OmdConfig(eta=0.1, reference="entropy")
    with pytest.raises(ValueError):
        DualState(-0.1, np.zeros(2))
    assert OmdConfig.default(10_000).eta == pytest.approx(0.001)


def test_regret_constants():
    c1, g = regret_bound_constants(1.0, 1.0, 0.5, 1.0, -math.sqrt(2))
    assert c1 == pytest.approx(8.828427, abs=1e-6)
    assert g == 2.0
    assert regret_bound_constants(1.0, 2.5, 0.5, 1.0, 0.0)[1] == 3.0
    assert regret_bound_constants(0.0, 1.0, 0.5, 0.0, 0.0)[0] == 0.0


# -- full agent -----------------------------------------------------------

def _agent(T=10, rho=0.5, eta=0.1, target=(0.5, 0.5)):
    reg = make_parity_ray(list(target), "l2")
    return OmdAgent(BudgetSpec(T, rho), reg, OmdConfig(eta=eta))


def test_first_step():
    agent = _agent()
    rec = agent.step(tup(1.0, 0.5, (1.0, 0.0)))
    assert rec.x_hat == 1 and rec.x == 1
    assert np.array_equal(rec.xbar, [0.5, 0.5])
    assert rec.bid == 1.0
    # g = (0.5 - 0.5, 0.5 - 1, 0.5 - 0) -> duals move by -eta g
    assert rec.duals_after.mu == 0.0
    assert np.allclose(rec.duals_after.lam, [0.05, -0.05])
    assert rec.budget_remaining == pytest.approx(4.5)


def test_gated_step_still_updates_duals():
    agent = _agent(T=1, rho=0.4)
    rec = agent.step(tup(1.0, 0.5))
    assert rec.x_hat == 1 and rec.x == 0 and rec.expenditure == 0.0
    assert np.allclose(rec.subgradient, [0.4 - 0.5, 0.5 - 1.0, 0.5])
    assert rec.duals_after.mu == pytest.approx(0.01)
    assert depletion_time([rec]) == 1


def _stream(T, seed, probs=(0.5, 0.5)):
    return generate_stream(default_synthetic(list(probs)), T, seed)[0]


@pytest.mark.parametrize("rho", [0.05, 0.2, 0.5])
def test_budget_safety(rho):
    stream = _stream(400, 3)
    for agent in (_agent(400, rho), ApAgent(BudgetSpec(400, rho), 0.1)):
        trace = agent.run(stream)
        assert math.fsum(r.expenditure for r in trace) <= 400 * rho * (1 + 1e-12)
        assert all(r.budget_remaining >= 0 and r.duals_after.mu >= 0 for r in trace)
        assert all(r.x <= r.x_hat for r in trace)


def test_determinism():
    stream = _stream(300, 9)
    a = _agent(300, 0.1).run(stream)
    b = _agent(300, 0.1).run(stream)
    assert [(r.x, r.bid, r.duals_after) for r in a] == [(r.x, r.bid, r.duals_after) for r in b]


def test_subgradient_is_valid_for_per_sample_dual():
    reg = make_parity_ray([0.2, 0.8], "l2")
    rng = np.random.default_rng(4)
    rho = 0.3

    def xi(d, inp):
        mu, lam = d[0], d[1:]
        return float(fstar(inp.valuation, inp.price, mu * inp.price + lam @ inp.categories)) \
            + conjugate_r_star(reg, lam) + rho * mu

    for _ in range(20):
        inp = tup(float(rng.uniform()), float(rng.uniform()), np.eye(2)[rng.integers(2)])
        d0 = np.concatenate([[rng.uniform(0, 2)], rng.uniform(-1, 1, 2)])
        agent = OmdAgent(BudgetSpec(1, rho), reg,
                         OmdConfig(eta=0.1, initial_duals=DualState(d0[0], d0[1:])))
        g = agent.step(inp).subgradient
        base = xi(d0, inp)
        for _ in range(100):
            d1 = np.concatenate([[rng.uniform(0, 3)], rng.uniform(-2, 2, 2)])
            assert xi(d1, inp) >= base + g @ (d1 - d0) - 1e-4


def test_dual_estimate_examples():
    reg = make_parity_ray([0.5, 0.5], "l2")
    tuples = [tup(1.0, 0.5), tup(0.2, 0.4, (0.0, 1.0))]
    assert dual_function_estimate(tuples, duals(0.0), reg, 0.5) == pytest.approx(0.25)
    assert dual_function_estimate([tup(1.0, 0.5)], duals(1.0), reg, 0.5) == pytest.approx(0.5)


# -- adaptive pacing ------------------------------------------------------

def test_ap_bid():
    assert ap_bid(1.0, ApState(0.0, 1.0)) == 1.0
    assert ap_bid(1.0, ApState(1.0, 1.0)) == 0.5
    assert ap_bid(0.0, ApState(3.0, 1.0)) == 0.0


def test_ap_step_examples():
    s, rec = ap_step(ApState(0.0, 10.0), tup(1.0, 0.5), rho=0.5, eta=0.1)
    assert rec.x == 1 and rec.expenditure == 0.5 and s.mu == 0.0
    s, rec = ap_step(ApState(0.0, 10.0), tup(2.0, 1.0), rho=0.5, eta=0.1)
    assert s.mu == pytest.approx(0.05) and s.budget_remaining == 9.0
    s, rec = ap_step(ApState(0.02, 10.0), tup(0.1, 1.0), rho=0.5, eta=0.1)
    assert rec.x == 0 and s.mu == 0.0


def test_ap_tie_loses_and_gate():
    _, rec = ap_step(ApState(0.0, 10.0), tup(0.5, 0.5), 0.5, 0.1)
    assert rec.x == 0
    _, rec = ap_step(ApState(0.0, 0.4), tup(1.0, 0.5), 0.5, 0.1)
    assert rec.x_hat == 1 and rec.x == 0


@pytest.mark.parametrize("seed, rho", [(1, 0.5), (2, 0.1), (3, 0.03)])
def test_ap_is_frozen_lambda_slice(seed, rho):
    # identical up to the first gated step; AP spends the gated z afterwards
    T = 600
    stream = _stream(T, seed)
    reg = make_parity_ray([0.5, 0.5], "l2")
    omd = OmdAgent(BudgetSpec(T, rho), reg, OmdConfig(eta=0.1 / math.sqrt(T)), freeze_lambda=True).run(stream)
    ap = ApAgent(BudgetSpec(T, rho), 0.1 / math.sqrt(T)).run(stream)
    tau = depletion_time(omd) or T + 1
    upto = min(tau, depletion_time(ap) or T + 1)
    assert [r.x for r in omd[:upto]] == [r.x for r in ap[:upto]]
    assert all(np.array_equal(r.duals_after.lam, [0.0, 0.0]) for r in omd)
