"""Parity ray regularizer, its conjugate and the regularized argmax subproblem.

For a target mix ``xhat`` the regularizer is

    R(xbar) = -min_{gamma in [0, 1]} D(gamma * xhat; xbar)

i.e. minus the D-distance from ``xbar`` to the segment ``[0, xhat]``.  It is
nonpositive, concave for jointly convex D, and zero on the segment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog

from . import _kernels as K
from .core import TargetDistribution
from .errors import OutsideSimplex

GAMMA_TOL = 1e-9
SIMPLEX_SLACK = 1e-9
ORACLE_STEP = 1e-4

ARGMAX_MAX_ITER = 2000
ARGMAX_TOL = 1e-10
ARGMAX_WINDOW = 50


@dataclass(frozen=True)
class LpNorm:
    p: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 1):
            raise ValueError(f"l_p distance needs finite p >= 1, got {self.p}")

    kind = K.LP

    @property
    def param(self) -> float:
        return float(self.p)

    @property
    def upper_bound(self) -> float:
        # diameter of the full simplex: ||e_i - e_j||_p
        return 2.0 ** (1.0 / self.p)

    def spec(self) -> str:
        if self.p == 2:
            return "l2"
        if self.p == 1:
            return "l1"
        return f"lp:{self.p:g}"


@dataclass(frozen=True)
class ModifiedKL:
    """KL divergence with f(t) = t log min(t, 1/epsilon), shifted by log m."""

    epsilon: float = 0.01

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    kind = K.MKL

    @property
    def param(self) -> float:
        return float(self.epsilon)

    def upper_bound_for(self, m: int) -> float:
        return math.log(1.0 / self.epsilon) + math.log(m)

    def spec(self) -> str:
        return f"mkl:{self.epsilon:g}"


Distance = LpNorm | ModifiedKL


def parse_distance(text: str) -> Distance:
    """Parse ``l2 | l1 | lp:<p> | mkl:<epsilon>``."""
    s = text.strip().lower()
    if s == "l2":
        return LpNorm(2.0)
    if s == "l1":
        return LpNorm(1.0)
    head, _, arg = s.partition(":")
    try:
        if head == "lp" and arg:
            return LpNorm(float(arg))
        if head == "mkl" and arg:
            return ModifiedKL(float(arg))
    except ValueError as exc:
        raise ValueError(f"bad regularizer {text!r}: {exc}") from None
    raise ValueError(f"unknown regularizer {text!r}; expected l2, l1, lp:<p> or mkl:<epsilon>")


@dataclass(frozen=True, eq=False)
class ParityRay:
    target: TargetDistribution
    distance: Distance

    @property
    def xhat(self) -> np.ndarray:
        return self.target.weights

    @property
    def m(self) -> int:
        return self.target.m

    @property
    def range_upper(self) -> float:
        """Upper bound on D over the full simplex (r-bar)."""
        if isinstance(self.distance, ModifiedKL):
            return self.distance.upper_bound_for(self.m)
        return self.distance.upper_bound

    @property
    def range_lower(self) -> float:
        return -self.range_upper

    @property
    def lipschitz(self) -> float:
        return lipschitz_constant(self)

    def norm(self, d) -> float:
        """The norm under which :attr:`lipschitz` is stated."""
        p = self.distance.p if isinstance(self.distance, LpNorm) else 1.0
        return float(np.linalg.norm(np.asarray(d, dtype=float), ord=p))


def make_parity_ray(target, distance: Distance | str = "l2") -> ParityRay:
    if not isinstance(target, TargetDistribution):
        target = TargetDistribution(np.asarray(target, dtype=float))
    if isinstance(distance, str):
        distance = parse_distance(distance)
    return ParityRay(target, distance)


def _check_point(reg: ParityRay, xbar) -> np.ndarray:
    x = np.asarray(xbar, dtype=float)
    if x.shape != (reg.m,):
        raise OutsideSimplex(f"expected a vector of length {reg.m}, got shape {x.shape}")
    if not np.all(np.isfinite(x)) or np.any(x < 0) or x.sum() > 1.0 + SIMPLEX_SLACK:
        raise OutsideSimplex(f"{x.tolist()} is not in the full-dimensional simplex")
    return x


def _is_l2(reg: ParityRay) -> bool:
    return isinstance(reg.distance, LpNorm) and reg.distance.p == 2


def distance_value(reg: ParityRay, a, b) -> float:
    """D(a; b) for the regularizer's distance."""
    return float(K.distance(reg.distance.kind, reg.distance.param,
                            np.asarray(a, dtype=float), np.asarray(b, dtype=float)))


def eval_r(reg: ParityRay, xbar) -> float:
    """R(xbar); closed form for l2, golden-section search over gamma otherwise."""
    x = _check_point(reg, xbar)
    if _is_l2(reg):
        return float(K.r_l2(x, reg.xhat))
    return -float(K.min_over_ray(reg.distance.kind, reg.distance.param, reg.xhat, x, GAMMA_TOL))


def eval_r_many(reg: ParityRay, X) -> np.ndarray:
    """Vectorized :func:`eval_r` over the rows of ``X``."""
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != reg.m:
        raise OutsideSimplex(f"expected an (n, {reg.m}) array, got shape {X.shape}")
    if np.any(X < 0) or np.any(X.sum(axis=1) > 1.0 + SIMPLEX_SLACK):
        raise OutsideSimplex("some rows are outside the full-dimensional simplex")
    return K.eval_r_batch(reg.distance.kind, reg.distance.param, reg.xhat, X, GAMMA_TOL)


def _oracle_values(reg: ParityRay, X: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    """D(gamma xhat; x) for every row x of X and every gamma in its row of ``gammas``."""
    pts = gammas[:, :, None] * reg.xhat[None, None, :]
    Xb = X[:, None, :]
    if isinstance(reg.distance, LpNorm):
        return _pnorm_last(np.abs(Xb - pts), reg.distance.p)
    eps = reg.distance.epsilon
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(Xb > 0, pts / np.where(Xb > 0, Xb, 1.0), np.inf)
        logs = np.minimum(np.log(ratio), math.log(1.0 / eps))
        terms = np.where(pts > 0, pts * logs, 0.0)
    return terms.sum(axis=2) + math.log(reg.m)


def _pnorm_last(a: np.ndarray, p: float) -> np.ndarray:
    if math.isinf(p):
        return a.max(axis=-1)
    if p == 1.0:
        return a.sum(axis=-1)
    if p == 2.0:
        return np.sqrt(np.einsum("...i,...i->...", a, a))
    return (a ** p).sum(axis=-1) ** (1.0 / p)


def eval_r_oracle_many(reg: ParityRay, X, chunk: int = 64) -> np.ndarray:
    """Brute-force R over the rows of ``X`` by nested gamma grids.

    Scans gamma on a 1e-4 grid, then rescans the best cell at 1e-6 and the
    best resulting cell at 1e-8.  Test-only reference; shares nothing with
    :func:`eval_r` except the definition of the distance.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    for x in X:
        _check_point(reg, x)
    out = np.empty(len(X))
    coarse = np.linspace(0.0, 1.0, int(round(1.0 / ORACLE_STEP)) + 1)
    offsets = np.linspace(-1.0, 1.0, 201)
    for lo in range(0, len(X), chunk):
        B = X[lo:lo + chunk]
        grid = np.broadcast_to(coarse, (len(B), coarse.size))
        vals = _oracle_values(reg, B, grid)
        k = vals.argmin(axis=1)
        best = vals[np.arange(len(B)), k]
        center = grid[np.arange(len(B)), k]
        for width in (ORACLE_STEP, ORACLE_STEP * 1e-2):
            g = np.clip(center[:, None] + width * offsets[None, :], 0.0, 1.0)
            v = _oracle_values(reg, B, g)
            k = v.argmin(axis=1)
            center = g[np.arange(len(B)), k]
            best = np.minimum(best, v[np.arange(len(B)), k])
        out[lo:lo + chunk] = -best
    return out


def eval_r_oracle(reg: ParityRay, xbar) -> float:
    """Scalar form of :func:`eval_r_oracle_many`."""
    return float(eval_r_oracle_many(reg, [_check_point(reg, xbar)])[0])


def _objective(reg: ParityRay, lam: np.ndarray, x: np.ndarray) -> float:
    return float(np.dot(lam, x)) + eval_r(reg, x)


def _l1_argmax_lp(reg: ParityRay, lam: np.ndarray) -> np.ndarray:
    # variables (x_1..x_m, gamma, t_1..t_m); maximize <lam, x> - sum t
    m = reg.m
    xhat = reg.xhat
    c = np.concatenate([-lam, [0.0], np.ones(m)])
    eye = np.eye(m)
    A_ub = np.vstack([
        np.hstack([eye, -xhat[:, None], -eye]),     # x - gamma xhat <= t
        np.hstack([-eye, xhat[:, None], -eye]),     # gamma xhat - x <= t
        np.concatenate([np.ones(m), [0.0], np.zeros(m)])[None, :],
    ])
    b_ub = np.concatenate([np.zeros(2 * m), [1.0]])
    bounds = [(0, None)] * m + [(0, 1)] + [(0, None)] * m
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"l1 argmax LP failed: {res.message}")
    return K.project_simplex_plus(np.asarray(res.x[:m], dtype=float))


def _lp_argmax_dual(reg: ParityRay, lam: np.ndarray) -> np.ndarray:
    """Exact l_p argmax for 1 < p < inf: dual over theta, then a 2-variable LP."""
    p = reg.distance.p
    xhat = reg.xhat
    _, u, binding, _ = K.lp_dual(lam, xhat, p)
    if binding:
        q = p / (p - 1.0)
        w = np.sign(u) * np.abs(u) ** (q - 1.0)
        wn = float(np.linalg.norm(w, ord=p))
        # variables (gamma, t); x = gamma xhat + t w
        c = -np.array([lam @ xhat, lam @ w - wn])
        A_ub = np.vstack([-np.column_stack([xhat, w]), [[xhat.sum(), w.sum()]]])
        b_ub = np.concatenate([np.zeros(reg.m), [1.0]])
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(0, 1), (0, None)], method="highs")
        if res.status == 0:
            g, t = res.x
            return K.project_simplex_plus(g * xhat + t * w)
    # ball not binding: the maximizer lies on the segment
    return xhat.copy() if lam @ xhat >= 0 else np.zeros(reg.m)


def argmax_xbar(reg: ParityRay, lam, method: str = "auto") -> np.ndarray:
    """A maximizer of R(x) + <lam, x> over the full simplex.

    ``method="auto"`` solves l2 and other l_p (p > 1) exactly through a
    one-dimensional dual, l1 as a linear program, and the modified KL by
    joint projected subgradient ascent in (x, gamma) from (xhat, 1) plus a
    separable per-gamma solver.  ``"subgradient"``
    forces the latter.  Ties keep ``xhat``, so ``lam = 0`` returns ``xhat``.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (reg.m,):
        raise ValueError(f"lambda must have length {reg.m}, got shape {lam.shape}")
    if method not in ("auto", "subgradient"):
        raise ValueError(f"unknown method {method!r}")
    xhat = reg.xhat
    if method == "auto" and _is_l2(reg):
        x, _, _ = K.l2_argmax(lam, xhat)
        return x
    if method == "auto" and isinstance(reg.distance, LpNorm) and reg.distance.p == 1:
        x = _l1_argmax_lp(reg, lam)
    elif method == "auto" and isinstance(reg.distance, LpNorm):
        x = _lp_argmax_dual(reg, lam)
    else:
        x = _subgradient_multistart(reg, lam)
    if _objective(reg, lam, xhat.copy()) >= _objective(reg, lam, x) - 1e-12:
        return xhat.copy()
    return x


def _starts(reg: ParityRay, lam: np.ndarray):
    yield reg.xhat, 1.0
    if isinstance(reg.distance, ModifiedKL):
        # the truncated KL makes the joint problem nonconcave: add starts at
        # the vertices, the origin and the exact l2 solution
        for i in range(reg.m):
            yield np.eye(reg.m)[i], 1.0
        yield np.zeros(reg.m), 0.0
        yield K.l2_argmax(lam, reg.xhat)[0], 1.0


def _subgradient_multistart(reg: ParityRay, lam: np.ndarray) -> np.ndarray:
    best_x, best_val = None, -np.inf
    if isinstance(reg.distance, ModifiedKL):
        x, _ = K.mkl_argmax(lam, reg.xhat, reg.distance.epsilon)
        x = K.project_simplex_plus(x)
        best_x, best_val = x, _objective(reg, lam, x)
    for x0, g0 in _starts(reg, lam):
        x, _, _ = K.subgradient_argmax(reg.distance.kind, reg.distance.param, reg.xhat, lam,
                                       np.ascontiguousarray(x0, dtype=float), g0,
                                       ARGMAX_MAX_ITER, ARGMAX_TOL, ARGMAX_WINDOW)
        val = _objective(reg, lam, x)
        if val > best_val:
            best_x, best_val = x, val
    return best_x


def conjugate_r_star(reg: ParityRay, lam) -> float:
    """R*(-lam) = sup over the full simplex of R(x) + <lam, x>."""
    x = argmax_xbar(reg, lam)
    return _objective(reg, np.asarray(lam, dtype=float), x)


@lru_cache(maxsize=32)
def _mkl_lipschitz(epsilon: float, step: float = 1e-3) -> float:
    grid = np.arange(1, int(round(1.0 / step)) + 1) * step
    s = grid[:, None]
    t = grid[None, :]
    u = s / t
    fprime = np.where(u < 1.0 / epsilon, np.log(u) + 1.0, math.log(1.0 / epsilon))
    return float(np.max(np.abs(s / t**2 * fprime)))


def lipschitz_constant(reg: ParityRay) -> float:
    if isinstance(reg.distance, LpNorm):
        return 1.0
    return _mkl_lipschitz(reg.distance.epsilon)
