"""Sweeps over (agent, horizon, trial) and their CSV outputs.

Trial seeds come from a fixed 64-bit mix of ``(T, trial)`` and the base
seed, so adding trials or horizons never changes existing streams.  Both
agents see the same stream for a given ``(T, trial)``, which pairs their
metrics.
"""
from __future__ import annotations

import csv
import hashlib
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .agent_ap import ApAgent
from .agent_omd import OmdAgent, OmdConfig, StepRecord
from .config import ExperimentConfig
from .core import MASK64, BudgetSpec, InputTuple
from .errors import InvariantBreach
from .market import generate_stream, reference_stats, rho_from_quantile
from .metrics import TrialSummary, summarize_trial
from .regularizer import ParityRay

SUMMARY_HEADER = ["agent", "T", "trial", "seed", "reward_unreg", "reward_reg", "opt_u", "regret_u", "tvd", "tau"]
AGGREGATE_HEADER = ["agent", "T", "trials", "regret_u_mean", "regret_u_std", "tvd_mean", "tvd_std"]
BUDGET_SLACK = 1e-9


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def trial_seed(base_seed: int, T: int, trial: int) -> int:
    """splitmix64(base_seed XOR blake2b-64("T:trial"))."""
    h = int.from_bytes(hashlib.blake2b(f"{T}:{trial}".encode(), digest_size=8).digest(), "little")
    return splitmix64((int(base_seed) & MASK64) ^ h)


@dataclass(frozen=True, eq=False)
class TrialResult:
    agent: str
    T: int
    trial: int
    seed: int
    summary: TrialSummary
    trace: list
    stream: list


def resolve_rho(cfg: ExperimentConfig) -> float:
    if cfg.rho is not None:
        return cfg.rho
    return rho_from_quantile(reference_stats(cfg.scenario), cfg.rho_quantile)


def make_agent(name: str, budget: BudgetSpec, reg: ParityRay, eta: float):
    if name == "omd":
        return OmdAgent(budget, reg, OmdConfig(eta=eta))
    if name == "ap":
        return ApAgent(budget, eta)
    raise ValueError(f"unknown agent {name!r}")


def check_budget(trace: Sequence[StepRecord], budget: BudgetSpec, label: str = "") -> None:
    """Raise InvariantBreach unless spend stays within B at every step."""
    B = budget.total_budget
    spent = math.fsum(r.expenditure for r in trace)
    if spent > B + BUDGET_SLACK * max(1.0, B):
        raise InvariantBreach(f"{label}: spent {spent:.12g} exceeds budget {B:.12g}")
    for r in trace:
        if r.budget_remaining < 0 or r.duals_after.mu < 0:
            raise InvariantBreach(f"{label}: negative budget or mu at step {r.t}")


def run_agent(name: str, stream: Sequence[InputTuple], reg: ParityRay, rho: float, eta_scale: float):
    T = len(stream)
    budget = BudgetSpec(T, rho)
    agent = make_agent(name, budget, reg, eta_scale / math.sqrt(T))
    trace = agent.run(stream)
    check_budget(trace, budget, f"{name} T={T}")
    return trace, summarize_trial(trace, stream, reg, budget)


def run_trials(cfg: ExperimentConfig, keep_traces: bool = False) -> list[TrialResult]:
    """All (agent, T, trial) results in sorted order."""
    reg = ParityRay(cfg.target, cfg.regularizer)
    rho = resolve_rho(cfg)
    results: dict[tuple, TrialResult] = {}
    for T in cfg.horizons:
        for trial in range(cfg.trials):
            seed = trial_seed(cfg.base_seed, T, trial)
            stream, _ = generate_stream(cfg.scenario, T, seed)
            for name in cfg.agents:
                trace, summary = run_agent(name, stream, reg, rho, cfg.eta_scale)
                results[(name, T, trial)] = TrialResult(
                    name, T, trial, seed, summary,
                    trace if keep_traces else [], stream if keep_traces else [],
                )
    order = sorted(results, key=lambda k: (cfg.agents.index(k[0]), k[1], k[2]))
    return [results[k] for k in order]


def summary_row(r: TrialResult) -> list[str]:
    s = r.summary
    return [r.agent, fmt(r.T), fmt(r.trial), str(r.seed), fmt(s.reward_unreg), fmt(s.reward_regularized),
            fmt(s.opt_u), fmt(s.regret_u), fmt(s.tvd), fmt(s.depletion_time)]


def aggregate(results: Sequence[TrialResult]) -> list[list[str]]:
    groups: dict[tuple, list[TrialSummary]] = {}
    for r in results:
        groups.setdefault((r.agent, r.T), []).append(r.summary)
    rows = []
    for (agent, T), items in groups.items():
        reg = [s.regret_u for s in items]
        tv = [s.tvd for s in items]
        sd = (lambda xs: statistics.stdev(xs) if len(xs) > 1 else 0.0)
        rows.append([agent, fmt(T), fmt(len(items)), fmt(statistics.fmean(reg)), fmt(sd(reg)),
                     fmt(statistics.fmean(tv)), fmt(sd(tv))])
    return rows


def trace_rows(trace: Sequence[StepRecord]):
    for r in trace:
        yield ([fmt(r.t), fmt(r.valuation), fmt(r.price)] + [fmt(c) for c in r.categories]
               + [fmt(r.bid), fmt(r.x_hat), fmt(r.x), fmt(r.expenditure), fmt(r.budget_remaining),
                  fmt(r.duals_after.mu)] + [fmt(l) for l in r.duals_after.lam])


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_experiment(cfg: ExperimentConfig, traces: bool = False, out: Path | None = None) -> list[TrialResult]:
    """Run the sweep and write summary.csv, aggregate.csv and optional traces."""
    out = Path(out) if out is not None else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    results = run_trials(cfg, keep_traces=traces)
    m = cfg.target.m
    if traces:
        tdir = out / "traces"
        tdir.mkdir(exist_ok=True)
        header = (["t", "v", "p"] + [f"c{i + 1}" for i in range(m)]
                  + ["bid", "x_hat", "x", "spend", "budget", "mu"] + [f"lambda{i + 1}" for i in range(m)])
        for r in results:
            write_csv(tdir / f"{r.agent}_T{r.T}_trial{r.trial}.csv", header, trace_rows(r.trace))
    write_csv(out / "summary.csv", SUMMARY_HEADER, (summary_row(r) for r in results))
    write_csv(out / "aggregate.csv", AGGREGATE_HEADER, aggregate(results))
    return results
