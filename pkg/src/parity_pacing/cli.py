"""Command-line entry point ``pace``.

Exit codes: 0 success, 1 configuration error, 2 input/output error,
3 internal invariant breach.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import parse_config
from .errors import ConfigError, HorizonExceedsData, InvariantBreach, PacingError

EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_INVARIANT = 3


def _cmd_run(args) -> int:
    from .experiment import run_experiment

    cfg = parse_config(args.config)
    out = Path(args.out) if args.out else None
    results = run_experiment(cfg, traces=args.traces, out=out)
    where = out if out is not None else cfg.output_dir
    print(f"wrote {len(results)} trial rows to {where / 'summary.csv'}")
    return 0


def _category_count(path) -> int:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    return max(len(header) - 2, 0)


def _cmd_opt_u(args) -> int:
    from .core import load_dataset
    from .metrics import opt_u_greedy

    if not args.rho > 0:
        raise ConfigError("--rho must be positive", key="rho")
    tuples, stats = load_dataset(args.data, _category_count(args.data))
    value, x = opt_u_greedy(tuples, stats.n * args.rho)
    print(f"n={stats.n} budget={stats.n * args.rho:.12g} opt_u={value:.12g} "
          f"spend={float(np.dot([t.price for t in tuples], x)):.12g}")
    return 0


def builtin_checks(seed: int = 7):
    """Yield ``(name, ok)`` for a quick invariant sweep on built-in instances."""
    from .agent_omd import DualState, primal_decision, to_bid
    from .experiment import run_agent
    from .market import default_synthetic, generate_stream, second_price_outcome
    from .metrics import opt_reg_bruteforce, opt_u_greedy, dual_function_estimate
    from .regularizer import argmax_xbar, conjugate_r_star, eval_r, eval_r_oracle, make_parity_ray
    from .core import InputTuple

    rng = np.random.default_rng(seed)
    reg = make_parity_ray([0.1, 0.3, 0.6], "l2")

    pts = rng.dirichlet(np.ones(4), size=200)[:, :3]
    yield "closed form matches grid oracle", all(abs(eval_r(reg, x) - eval_r_oracle(reg, x)) <= 1e-6 for x in pts)
    yield "R is nonpositive and bounded below", all(reg.range_lower <= eval_r(reg, x) <= 0 for x in pts)

    ok = True
    for _ in range(100):
        lam = rng.uniform(-3, 3, size=3)
        xs = argmax_xbar(reg, lam)
        star = conjugate_r_star(reg, lam)
        ok &= abs(star - (eval_r(reg, xs) + lam @ xs)) <= 1e-4
        ok &= all(star >= eval_r(reg, x) + lam @ x - 1e-6 for x in pts[:20])
    yield "Fenchel-Young at the argmax", bool(ok)

    ok = True
    for _ in range(2000):
        c = np.eye(3)[rng.integers(3)]
        inp = InputTuple(float(rng.uniform()), float(rng.uniform()), c)
        d = DualState(float(rng.uniform(0, 2)), rng.uniform(-1, 1, size=3))
        ok &= second_price_outcome(to_bid(inp, d), inp.price).won == bool(primal_decision(inp, d))
    yield "bid and primal decision agree", bool(ok)

    stream, _ = generate_stream(default_synthetic([0.5, 0.3, 0.2]), 500, seed)
    safe = True
    for name in ("omd", "ap"):
        try:
            run_agent(name, stream, reg, 0.5, 0.1)
        except InvariantBreach:
            safe = False
    yield "budget never overspent", safe

    ok = True
    reg2 = make_parity_ray([0.5, 0.5], "l2")
    for _ in range(10):
        T = int(rng.integers(1, 4))
        tuples = [InputTuple(float(rng.uniform()), float(rng.uniform()), np.eye(2)[rng.integers(2)]) for _ in range(T)]
        rho = float(rng.uniform(0.1, 0.6))
        opt = opt_reg_bruteforce(tuples, T * rho, reg2, 0.05)
        d = DualState(float(rng.uniform(0, 2)), rng.uniform(-1, 1, size=2))
        ok &= T * dual_function_estimate(tuples, d, reg2, rho) >= opt - 1e-9
        v, _ = opt_u_greedy(tuples, T * rho)
        ok &= v >= opt - 1e-9
    yield "weak duality and Opt^u dominance on small instances", bool(ok)


def _cmd_check(args) -> int:
    failed = 0
    for name, ok in builtin_checks(args.seed):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failed += not ok
    if failed:
        print(f"{failed} check(s) failed", file=sys.stderr)
        return EXIT_INVARIANT
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pace", description="Budget pacing with a parity-ray regularizer.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep from a config file")
    run.add_argument("--config", required=True, help="key = value config file")
    run.add_argument("--traces", action="store_true", help="also write one trace CSV per trial")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.set_defaults(func=_cmd_run)

    oracle = sub.add_parser("oracle", help="offline oracles")
    osub = oracle.add_subparsers(dest="oracle", required=True)
    optu = osub.add_parser("opt-u", help="unregularized offline optimum of a dataset")
    optu.add_argument("--data", required=True, help="CSV with header v,p,c1,...,cm")
    optu.add_argument("--rho", required=True, type=float, help="per-iteration budget")
    optu.set_defaults(func=_cmd_opt_u)

    check = sub.add_parser("check", help="run the invariant suite on built-in instances")
    check.add_argument("--seed", type=int, default=7)
    check.set_defaults(func=_cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, HorizonExceedsData) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantBreach as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OSError, PacingError) as exc:
        print(f"input/output error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
