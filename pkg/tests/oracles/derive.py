"""Independent brute-force derivations of the frozen values used in the tests.

Plain numpy only; nothing from the package is imported.  Run with
``python3 tests/oracles/derive.py`` to reprint the values.
"""
import itertools
import math

import numpy as np


def ray_min_l2(xhat, xbar, step=1e-4):
    g = np.arange(0, 1 + step / 2, step)
    return np.min(np.linalg.norm(xbar[None, :] - g[:, None] * xhat[None, :], axis=1))


def mkl_dist(a, b, eps):
    s = 0.0
    for ai, bi in zip(a, b):
        if ai <= 0:
            continue
        s += ai * (math.log(1 / eps) if bi <= 0 else min(math.log(ai / bi), math.log(1 / eps)))
    return s + math.log(len(a))


def ray_min_mkl(xhat, xbar, eps, step=1e-4):
    return min(mkl_dist(g * xhat, xbar, eps) for g in np.arange(0, 1 + step / 2, step))


def simplex_grid(m, step):
    n = int(round(1 / step))
    for idx in itertools.product(range(n + 1), repeat=m):
        if sum(idx) <= n:
            yield np.array(idx) / n


def argmax_grid_l2(xhat, lam, step=1e-3):
    best, bx = -np.inf, None
    g = np.arange(0, 1 + 1e-12, 1e-3)
    for x in simplex_grid(len(xhat), step):
        r = -np.min(np.linalg.norm(x[None, :] - g[:, None] * xhat[None, :], axis=1))
        v = r + lam @ x
        if v > best + 1e-15:
            best, bx = v, x
    return best, bx


def knapsack_grid(v, p, budget, step=0.01):
    best, bx = -np.inf, None
    g = np.arange(0, 1 + step / 2, step)
    for x in itertools.product(g, repeat=len(v)):
        x = np.array(x)
        if p @ x <= budget + 1e-12:
            val = (v - p) @ x
            if val > best:
                best, bx = val, x
    return best, bx


def nearest_rank(vals, q):
    s = sorted(vals)
    return s[math.ceil(q * len(s)) - 1]


if __name__ == "__main__":
    print("R l2 xhat=(.5,.5) xbar=(.5,0):", -ray_min_l2(np.array([.5, .5]), np.array([.5, 0.])))
    print("R l2 xhat=(1,0) xbar=(0,1):", -ray_min_l2(np.array([1., 0.]), np.array([0., 1.])))
    for g0 in (0.25, 0.5, 1.0):
        print(f"R mkl(0.01) xhat=(.5,.5) xbar={g0}*xhat:",
              -ray_min_mkl(np.array([.5, .5]), g0 * np.array([.5, .5]), 0.01))
    print("R mkl(0.01) xhat=(.1,.3,.6) xbar=xhat:",
          -ray_min_mkl(np.array([.1, .3, .6]), np.array([.1, .3, .6]), 0.01))
    for lam in ((2., 0.), (1., 1.), (-1., -1.)):
        v, x = argmax_grid_l2(np.array([.5, .5]), np.array(lam))
        print(f"argmax l2 xhat=(.5,.5) lam={lam}:", x, v)
    print("greedy {(2,1),(1.5,1)} B=1.5:", knapsack_grid(np.array([2., 1.5]), np.array([1., 1.]), 1.5))
    print("nearest rank q=.5 of {0.5,1.5}:", nearest_rank([0.5, 1.5], 0.5))
    print("nearest rank q=.5 of {.2,.4,.6,.8}:", nearest_rank([.2, .4, .6, .8], 0.5))
    # opt_reg, T=1, v=1, p=.5, c=xhat=(.5,.5) is not one-hot; use c=(1,0) with xhat=(1,0)
    g = np.arange(0, 1.0001, 0.01)
    best = max((1 - .5) * x - ray_min_l2(np.array([1., 0.]), np.array([x, 0.])) for x in g if .5 * x <= .5 + 1e-12)
    print("opt_reg T=1 v=1 p=.5 c=xhat=(1,0) B=.5:", best)
    s, t = np.meshgrid(np.arange(1, 1001) * 1e-3, np.arange(1, 1001) * 1e-3, indexing="ij")
    u = s / t
    fp = np.where(u < 100, np.log(u) + 1, math.log(100))
    print("mkl(0.01) L grid sup:", np.max(np.abs(s / t**2 * fp)))
