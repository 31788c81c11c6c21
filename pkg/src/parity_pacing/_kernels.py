"""Compiled inner loops for the regularizer module.

Distance kinds: ``LP`` (parameter p >= 1) and ``MKL`` (parameter epsilon).
"""
import math

import numba
import numpy as np

LP = 0
MKL = 1

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


@numba.njit(cache=True)
def project_simplex_plus(y):
    """Euclidean projection onto {x >= 0, sum(x) <= 1}."""
    x = np.maximum(y, 0.0)
    if x.sum() <= 1.0:
        return x
    u = np.sort(y)[::-1]
    css = 0.0
    theta = 0.0
    for j in range(u.size):
        css += u[j]
        t = (css - 1.0) / (j + 1)
        if u[j] - t > 0.0:
            theta = t
    return np.maximum(y - theta, 0.0)


@numba.njit(cache=True)
def lp_norm(d, p):
    if p == 1.0:
        return np.abs(d).sum()
    if p == 2.0:
        return math.sqrt(np.dot(d, d))
    s = 0.0
    for i in range(d.size):
        s += abs(d[i]) ** p
    return s ** (1.0 / p)


@numba.njit(cache=True)
def distance(kind, param, a, b):
    """D(a; b) for the given kind; ``a`` is the point on the ray."""
    if kind == LP:
        return lp_norm(b - a, param)
    cap = math.log(1.0 / param)
    s = 0.0
    for i in range(a.size):
        if a[i] <= 0.0:
            continue
        if b[i] <= 0.0:
            s += a[i] * cap
        else:
            s += a[i] * min(math.log(a[i] / b[i]), cap)
    return s + math.log(a.size)


@numba.njit(cache=True)
def r_l2(x, xhat):
    """Closed-form l2 parity ray regularizer (projection onto the segment)."""
    g = np.dot(x, xhat) / np.dot(xhat, xhat)
    if g < 0.0:
        g = 0.0
    elif g > 1.0:
        g = 1.0
    d = x - g * xhat
    return -math.sqrt(np.dot(d, d))


@numba.njit(cache=True)
def _golden(kind, param, xhat, x, lo, hi, tol):
    a = lo
    b = hi
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc = distance(kind, param, c * xhat, x)
    fd = distance(kind, param, d * xhat, x)
    while b - a > tol:
        if fc <= fd:
            b = d
            d = c
            fd = fc
            c = b - _GOLD * (b - a)
            fc = distance(kind, param, c * xhat, x)
        else:
            a = c
            c = d
            fc = fd
            d = a + _GOLD * (b - a)
            fd = distance(kind, param, d * xhat, x)
    g = 0.5 * (a + b)
    return distance(kind, param, g * xhat, x)


@numba.njit(cache=True)
def min_over_ray(kind, param, xhat, x, tol):
    """min over gamma in [0, 1] of D(gamma * xhat; x)."""
    best = min(distance(kind, param, 0.0 * xhat, x), distance(kind, param, xhat, x))
    if kind == LP:
        v = _golden(kind, param, xhat, x, 0.0, 1.0, tol)
        return min(best, v)
    # the truncated KL is not convex in gamma: bracket the best grid cell first
    n = 200
    kbest = 0
    fbest = np.inf
    for k in range(n + 1):
        f = distance(kind, param, (k / n) * xhat, x)
        if f < fbest:
            fbest = f
            kbest = k
    lo = max(kbest - 1, 0) / n
    hi = min(kbest + 1, n) / n
    v = _golden(kind, param, xhat, x, lo, hi, tol)
    return min(best, fbest, v)


@numba.njit(cache=True)
def eval_r_batch(kind, param, xhat, X, tol):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        if kind == LP and param == 2.0:
            out[i] = r_l2(X[i], xhat)
        else:
            out[i] = -min_over_ray(kind, param, xhat, X[i], tol)
    return out


# ---------------------------------------------------------------------------
# exact l2 argmax via the dual:
#   R*(-lam) = min_{||u||<=1} max(0, max_i(lam_i - u_i)) + max(0, <u, xhat>)
# parametrized by the simplex multiplier theta; the inner problem
#   min <u, xhat>  s.t.  ||u|| <= 1,  u >= lam - theta
# is solved by u_i = max(lam_i - theta, -beta * xhat_i) with ||u|| = 1.
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _u_norm2(lam, xhat, theta, beta):
    s = 0.0
    for i in range(lam.size):
        a = lam[i] - theta
        b = -beta * xhat[i]
        u = a if a > b else b
        s += u * u
    return s


@numba.njit(cache=True)
def _inner(lam, xhat, theta):
    """Return (min <u, xhat>, beta, ball_binding); +inf when infeasible."""
    pos = 0.0
    full = 0.0
    bmax = 0.0
    for i in range(lam.size):
        a = lam[i] - theta
        if a > 0.0:
            pos += a * a
            full += a * a
        elif xhat[i] > 0.0:
            full += a * a
            r = -a / xhat[i]
            if r > bmax:
                bmax = r
    if pos > 1.0 + 1e-12:
        return np.inf, 0.0, False
    if full <= 1.0:
        s = 0.0
        for i in range(lam.size):
            s += xhat[i] * (lam[i] - theta)
        return s, np.inf, False
    lo = 0.0
    hi = bmax
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        if _u_norm2(lam, xhat, theta, mid) >= 1.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    beta = hi
    s = 0.0
    for i in range(lam.size):
        a = lam[i] - theta
        b = -beta * xhat[i]
        s += xhat[i] * (a if a > b else b)
    return s, beta, True


@numba.njit(cache=True)
def _dual_value(lam, xhat, theta):
    s, _, _ = _inner(lam, xhat, theta)
    return theta + max(0.0, s)


@numba.njit(cache=True)
def l2_argmax(lam, xhat):
    """Exact maximizer of R(x) + <lam, x> over the full simplex for l2.

    Returns ``(x, primal_value, dual_value)``; the two values agree up to
    floating point when the recovery succeeds.
    """
    m = lam.size
    # smallest feasible theta: ||(lam - theta)_+|| <= 1
    lo = 0.0
    if math.sqrt(np.sum(np.maximum(lam, 0.0) ** 2)) > 1.0:
        a = 0.0
        b = lam.max()
        for _ in range(200):
            mid = 0.5 * (a + b)
            if math.sqrt(np.sum(np.maximum(lam - mid, 0.0) ** 2)) > 1.0:
                a = mid
            else:
                b = mid
            if b - a <= 1e-16 * max(1.0, b):
                break
        lo = b
    f_lo = _dual_value(lam, xhat, lo)
    a = lo
    b = max(lo, f_lo)
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc = _dual_value(lam, xhat, c)
    fd = _dual_value(lam, xhat, d)
    for _ in range(300):
        if b - a <= 1e-15 * max(1.0, abs(b)):
            break
        if fc <= fd:
            b = d
            d = c
            fd = fc
            c = b - _GOLD * (b - a)
            fc = _dual_value(lam, xhat, c)
        else:
            a = c
            c = d
            fc = fd
            d = a + _GOLD * (b - a)
            fd = _dual_value(lam, xhat, d)
    theta = 0.5 * (a + b)
    vstar = _dual_value(lam, xhat, theta)
    if f_lo <= vstar:
        theta = lo
        vstar = f_lo

    # candidates on the segment come first so ties keep xhat (or the origin)
    best = xhat.copy()
    bval = np.dot(lam, xhat)
    if bval < -1e-12:
        best = np.zeros(m)
        bval = 0.0
    s, beta, binding = _inner(lam, xhat, theta)
    if binding:
        w = np.maximum(lam - theta + beta * xhat, 0.0)
        sw = w.sum()
        for rule in range(2):
            if rule == 0:
                if sw <= 0.0:
                    continue
                rho = 1.0 / sw
            else:
                if beta <= 0.0:
                    continue
                rho = 1.0 / beta
            x = rho * w
            tot = x.sum()
            if tot > 1.0:
                x = x / tot
            val = np.dot(lam, x) + r_l2(x, xhat)
            if val > bval + 1e-12:
                best = x
                bval = val
    return best, bval, vstar


# ---------------------------------------------------------------------------
# generic joint projected subgradient ascent on (x, gamma)
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _joint_objective(kind, param, xhat, lam, x, g):
    return np.dot(lam, x) - distance(kind, param, g * xhat, x)


@numba.njit(cache=True)
def _joint_supergradient(kind, param, xhat, lam, x, g):
    m = x.size
    gx = lam.copy()
    gg = 0.0
    if kind == LP:
        d = x - g * xhat
        nrm = lp_norm(d, param)
        if nrm > 0.0:
            for i in range(m):
                if param == 1.0:
                    gi = np.sign(d[i])
                else:
                    gi = np.sign(d[i]) * (abs(d[i]) / nrm) ** (param - 1.0)
                gx[i] -= gi
                gg += gi * xhat[i]
    else:
        inv_eps = 1.0 / param
        cap = math.log(inv_eps)
        for i in range(m):
            a = g * xhat[i]
            if a <= 0.0:
                # gamma = 0: the true derivative is +inf where x_i > 0; use a bounded push
                if xhat[i] > 0.0:
                    if x[i] <= 0.0:
                        gg -= xhat[i] * cap
                    else:
                        gg += xhat[i] * (cap + 1.0)
                continue
            if x[i] <= 0.0:
                gg -= xhat[i] * cap
                continue
            u = a / x[i]
            if u < inv_eps:
                gx[i] += u
                gg -= xhat[i] * (math.log(u) + 1.0)
            else:
                gg -= xhat[i] * cap
    return gx, gg


@numba.njit(cache=True)
def subgradient_argmax(kind, param, xhat, lam, x0, g0, max_iter, tol, window):
    """Projected subgradient ascent on -D(gamma xhat; x) + <lam, x>.

    Starts at (x0, g0) with step 0.5/sqrt(k); returns the best iterate.
    Stops after ``max_iter`` steps or once the best value has not improved
    by more than ``tol`` for ``window`` consecutive steps.
    """
    x = x0.copy()
    g = g0
    best = _joint_objective(kind, param, xhat, lam, x, g)
    bx = x.copy()
    bg = g
    stall = 0
    for k in range(1, max_iter + 1):
        gx, gg = _joint_supergradient(kind, param, xhat, lam, x, g)
        step = 0.5 / math.sqrt(k)
        x = project_simplex_plus(x + step * gx)
        g = min(1.0, max(0.0, g + step * gg))
        f = _joint_objective(kind, param, xhat, lam, x, g)
        if f > best + tol:
            best = f
            bx = x.copy()
            bg = g
            stall = 0
        else:
            if f > best:
                best = f
                bx = x.copy()
                bg = g
            stall += 1
            if stall >= window:
                break
    return bx, bg, best


# ---------------------------------------------------------------------------
# brute-force regularized offline optimum over a grid of allocations
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def grid_opt_reg(kind, param, xhat, values, prices, C, budget, n_grid, feas_tol, tol):
    """max over x in {0, 1/n, ..., 1}^T with <p, x> <= budget of
    sum (v - p) x + T R(C^T x / T).  Returns (value, argmax)."""
    T = values.size
    m = xhat.size
    idx = np.zeros(T, dtype=np.int64)
    best = -np.inf
    bx = np.zeros(T)
    x = np.zeros(T)
    mix = np.empty(m)
    while True:
        spend = 0.0
        for t in range(T):
            x[t] = idx[t] / n_grid
            spend += prices[t] * x[t]
        if spend <= budget + feas_tol:
            margin = 0.0
            for i in range(m):
                mix[i] = 0.0
            for t in range(T):
                margin += (values[t] - prices[t]) * x[t]
                for i in range(m):
                    mix[i] += C[t, i] * x[t]
            for i in range(m):
                mix[i] /= T
            if kind == LP and param == 2.0:
                r = r_l2(mix, xhat)
            else:
                r = -min_over_ray(kind, param, xhat, mix, tol)
            val = margin + T * r
            if val > best:
                best = val
                bx[:] = x
        # mixed-radix increment
        k = 0
        while k < T:
            idx[k] += 1
            if idx[k] <= n_grid:
                break
            idx[k] = 0
            k += 1
        if k == T:
            break
    return best, bx


# ---------------------------------------------------------------------------
# modified-KL argmax: for fixed gamma the problem separates per coordinate into
#   h_i(x) = lam_i x + a_i max(log(x / a_i), -cap),   a = gamma * xhat,
# linear below eps*a_i and concave above.  Its concave envelope is linear with
# slope s_i = lam_i + 1/(e eps) up to e*eps*a_i, so the envelope problem under
# sum(x) <= 1 is solved by bisection on the multiplier theta.
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _mkl_x_of_theta(lam, a, inv_e_eps, theta, x):
    tot = 0.0
    for i in range(lam.size):
        if a[i] <= 0.0:
            x[i] = np.inf if lam[i] > theta else 0.0
        elif theta < lam[i] + inv_e_eps:
            x[i] = np.inf if theta <= lam[i] else a[i] / (theta - lam[i])
        else:
            x[i] = 0.0
        tot += x[i]
    return tot


@numba.njit(cache=True)
def _mkl_joint(eps, lam, a, x):
    return np.dot(lam, x) - distance(MKL, eps, a, x)


@numba.njit(cache=True)
def mkl_inner(lam, xhat, gamma, eps):
    """Best x for fixed gamma; returns (true objective, x)."""
    m = lam.size
    a = gamma * xhat
    inv_e_eps = 1.0 / (math.e * eps)
    x = np.empty(m)
    if _mkl_x_of_theta(lam, a, inv_e_eps, 0.0, x) <= 1.0:
        return _mkl_joint(eps, lam, a, x), x.copy()
    hi = 0.0
    for i in range(m):
        s = lam[i] + (inv_e_eps if a[i] > 0.0 else 0.0)
        if s > hi:
            hi = s
    hi += 1e-9
    lo = 0.0
    xl = np.empty(m)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _mkl_x_of_theta(lam, a, inv_e_eps, mid, xl) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    tot = _mkl_x_of_theta(lam, a, inv_e_eps, hi, x)
    _mkl_x_of_theta(lam, a, inv_e_eps, lo, xl)
    left = max(1.0 - tot, 0.0)
    best = _mkl_joint(eps, lam, a, x)
    bx = x.copy()
    # the coordinate that jumps at theta* receives the leftover mass
    j = -1
    jump = 0.0
    for i in range(m):
        d = xl[i] - x[i]
        if d > jump:
            jump = d
            j = i
    if j >= 0 and left > 0.0:
        y = x.copy()
        y[j] += left
        v = _mkl_joint(eps, lam, a, y)
        if v > best:
            best = v
            bx = y
    return best, bx


@numba.njit(cache=True)
def mkl_argmax(lam, xhat, eps):
    """Grid over gamma with golden refinement of the best cell."""
    n = 200
    best = -np.inf
    bx = np.zeros(lam.size)
    kbest = 0
    for k in range(n + 1):
        v, x = mkl_inner(lam, xhat, k / n, eps)
        if v > best:
            best = v
            bx = x
            kbest = k
    a = max(kbest - 1, 0) / n
    b = min(kbest + 1, n) / n
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc, xc = mkl_inner(lam, xhat, c, eps)
    fd, xd = mkl_inner(lam, xhat, d, eps)
    for _ in range(80):
        if b - a <= 1e-12:
            break
        if fc >= fd:
            b = d
            d = c
            fd = fc
            xd = xc
            c = b - _GOLD * (b - a)
            fc, xc = mkl_inner(lam, xhat, c, eps)
        else:
            a = c
            c = d
            fc = fd
            xc = xd
            d = a + _GOLD * (b - a)
            fd, xd = mkl_inner(lam, xhat, d, eps)
    if fc > best:
        best = fc
        bx = xc
    if fd > best:
        best = fd
        bx = xd
    return bx, best


# ---------------------------------------------------------------------------
# exact l_p argmax (1 < p < inf) through the same dual with the dual-norm ball
# ||u||_q <= 1, q = p / (p - 1):  u_i = max(lam_i - theta, -beta * xhat_i^(p-1)).
# The primal direction is then x - gamma xhat = t * sign(u)|u|^(q-1), leaving a
# two-variable linear program in (gamma, t).
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _uq(lam, xhat, theta, beta, p, u):
    for i in range(lam.size):
        a = lam[i] - theta
        b = -beta * xhat[i] ** (p - 1.0) if xhat[i] > 0.0 else 0.0
        u[i] = a if a > b else b


@numba.njit(cache=True)
def _qnorm_q(u, q):
    s = 0.0
    for i in range(u.size):
        s += abs(u[i]) ** q
    return s


@numba.njit(cache=True)
def _inner_q(lam, xhat, theta, p, q, u):
    """min <u, xhat> over ||u||_q <= 1, u >= lam - theta; fills ``u``.

    Returns (value, binding); value is +inf when infeasible."""
    m = lam.size
    pos = 0.0
    for i in range(m):
        a = lam[i] - theta
        if a > 0.0:
            pos += a ** q
    if pos > 1.0 + 1e-12:
        return np.inf, False
    # beta -> inf gives u = max(lam - theta, 0 on zero-target coordinates)
    bmax = 0.0
    for i in range(m):
        a = lam[i] - theta
        if a < 0.0 and xhat[i] > 0.0:
            r = -a / xhat[i] ** (p - 1.0)
            if r > bmax:
                bmax = r
    _uq(lam, xhat, theta, bmax, p, u)
    if _qnorm_q(u, q) <= 1.0:
        return np.dot(u, xhat), False
    lo = 0.0
    hi = bmax
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        _uq(lam, xhat, theta, mid, p, u)
        if _qnorm_q(u, q) >= 1.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    _uq(lam, xhat, theta, hi, p, u)
    return np.dot(u, xhat), True


@numba.njit(cache=True)
def _dual_value_q(lam, xhat, theta, p, q, u):
    s, _ = _inner_q(lam, xhat, theta, p, q, u)
    return theta + max(0.0, s)


@numba.njit(cache=True)
def lp_dual(lam, xhat, p):
    """Minimize the convex dual over theta; returns (theta, u, binding, value)."""
    q = p / (p - 1.0)
    u = np.empty(lam.size)
    lo = 0.0
    pos = 0.0
    for i in range(lam.size):
        if lam[i] > 0.0:
            pos += lam[i] ** q
    if pos > 1.0:
        a = 0.0
        b = lam.max()
        for _ in range(200):
            mid = 0.5 * (a + b)
            s = 0.0
            for i in range(lam.size):
                if lam[i] > mid:
                    s += (lam[i] - mid) ** q
            if s > 1.0:
                a = mid
            else:
                b = mid
            if b - a <= 1e-16 * max(1.0, b):
                break
        lo = b
    f_lo = _dual_value_q(lam, xhat, lo, p, q, u)
    a = lo
    b = max(lo, f_lo)
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc = _dual_value_q(lam, xhat, c, p, q, u)
    fd = _dual_value_q(lam, xhat, d, p, q, u)
    for _ in range(300):
        if b - a <= 1e-15 * max(1.0, abs(b)):
            break
        if fc <= fd:
            b = d
            d = c
            fd = fc
            c = b - _GOLD * (b - a)
            fc = _dual_value_q(lam, xhat, c, p, q, u)
        else:
            a = c
            c = d
            fc = fd
            d = a + _GOLD * (b - a)
            fd = _dual_value_q(lam, xhat, d, p, q, u)
    theta = 0.5 * (a + b)
    vstar = _dual_value_q(lam, xhat, theta, p, q, u)
    if f_lo <= vstar:
        theta = lo
        vstar = f_lo
    _, binding = _inner_q(lam, xhat, theta, p, q, u)
    return theta, u, binding, vstar
