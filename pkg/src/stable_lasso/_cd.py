"""Compiled coordinate-descent kernels.

Columns are expected in Fortran order. ``col_sq[j]`` is ``(1/n) x_j' x_j``;
columns with ``col_sq == 0`` are skipped. The SCAD and MCP updates assume
``col_sq[j] == 1`` (standardized columns), which every caller guarantees.
"""

import numpy as np
from numba import njit

LASSO, SCAD, MCP = 0, 1, 2

OK, MAX_ITER, DIVERGED = 0, 1, 2


@njit(cache=True, nogil=True)
def soft_threshold(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True, nogil=True)
def scad_update(z, lam, a):
    az = abs(z)
    if az <= 2.0 * lam:
        return soft_threshold(z, lam)
    if az <= a * lam:
        return soft_threshold(z, a * lam / (a - 1.0)) / (1.0 - 1.0 / (a - 1.0))
    return z


@njit(cache=True, nogil=True)
def mcp_update(z, lam, gamma):
    if abs(z) <= gamma * lam:
        return soft_threshold(z, lam) / (1.0 - 1.0 / gamma)
    return z


@njit(cache=True, nogil=True)
def penalty_value(b, lam, family, param):
    ab = abs(b)
    if family == LASSO:
        return lam * ab
    if family == SCAD:
        if ab <= lam:
            return lam * ab
        if ab <= param * lam:
            return (2.0 * param * lam * ab - ab * ab - lam * lam) / (2.0 * (param - 1.0))
        return lam * lam * (param + 1.0) / 2.0
    if ab <= param * lam:
        return lam * ab - ab * ab / (2.0 * param)
    return param * lam * lam / 2.0


@njit(cache=True, nogil=True)
def penalty_slope(b, lam, family, param):
    """Derivative of the penalty at |b| > 0."""
    ab = abs(b)
    if family == LASSO:
        return lam
    if family == SCAD:
        if ab <= lam:
            return lam
        if ab <= param * lam:
            return (param * lam - ab) / (param - 1.0)
        return 0.0
    return max(lam - ab / param, 0.0)


@njit(cache=True, nogil=True)
def objective(r, beta, pen, family, param):
    n = r.shape[0]
    loss = 0.0
    for i in range(n):
        loss += r[i] * r[i]
    total = loss / (2.0 * n)
    for j in range(beta.shape[0]):
        if beta[j] != 0.0:
            total += penalty_value(beta[j], pen[j], family, param)
    return total


@njit(cache=True, nogil=True)
def _sweep(X, r, beta, col_sq, pen, family, param, idx):
    n = X.shape[0]
    dmax = 0.0
    for k in range(idx.shape[0]):
        j = idx[k]
        v = col_sq[j]
        if v == 0.0:
            continue
        g = 0.0
        for i in range(n):
            g += X[i, j] * r[i]
        g /= n
        old = beta[j]
        z = g + v * old
        if family == LASSO:
            new = soft_threshold(z, pen[j]) / v
        elif family == SCAD:
            new = scad_update(z, pen[j], param)
        else:
            new = mcp_update(z, pen[j], param)
        d = new - old
        if d != 0.0:
            for i in range(n):
                r[i] -= d * X[i, j]
            beta[j] = new
            if abs(d) > dmax:
                dmax = abs(d)
    return dmax


@njit(cache=True, nogil=True)
def _drop_redundant(X, beta, pen, active):
    """Shrink a rank-deficient support without changing the fit.

    Moving along a null direction of ``X[:, active]`` leaves the residual
    fixed and the l1 term linear, so stepping in its non-increasing
    direction until a coefficient reaches zero can only help. Repeats
    until the support has full column rank; returns the new support.
    """
    n = X.shape[0]
    while active.shape[0] > 0:
        m = active.shape[0]
        XA = np.empty((n, m))
        for k in range(m):
            XA[:, k] = X[:, active[k]]
        _, sv, vt = np.linalg.svd(XA, True)
        rank = 0
        for k in range(sv.shape[0]):
            if sv[k] > 1e-9 * sv[0]:
                rank += 1
        if rank == m:
            return active
        v = vt[m - 1]
        slope = 0.0
        for k in range(m):
            j = active[k]
            slope += pen[j] * np.sign(beta[j]) * v[k]
        if slope > 0.0:
            v = -v
        t = np.inf
        hit = -1
        for k in range(m):
            j = active[k]
            if v[k] * beta[j] < 0.0:
                tk = -beta[j] / v[k]
                if tk < t:
                    t = tk
                    hit = k
        if hit < 0:
            return active
        for k in range(m):
            beta[active[k]] += t * v[k]
        beta[active[hit]] = 0.0
        active = np.flatnonzero(beta)
    return active


@njit(cache=True, nogil=True)
def _sign_fixed_solve(X, y, beta, pen, active):
    """Stationary point of the Lasso objective restricted to ``active`` with
    the signs of ``beta``; an empty array if the Gram matrix is not
    numerically positive definite."""
    n = X.shape[0]
    m = active.shape[0]
    fail = np.empty(0)
    if m >= n:
        return fail
    XA = np.empty((n, m))
    for k in range(m):
        XA[:, k] = X[:, active[k]]
    G = XA.T @ XA / n
    c = XA.T @ y / n
    for k in range(m):
        j = active[k]
        c[k] -= pen[j] * np.sign(beta[j])
    try:
        low = np.linalg.cholesky(G)
    except Exception:
        return fail
    dmin = np.inf
    dmax = 0.0
    for k in range(m):
        dmin = min(dmin, low[k, k])
        dmax = max(dmax, low[k, k])
    if dmin <= 1e-7 * dmax:
        return fail
    z = np.linalg.solve(low, c)
    sol = np.linalg.solve(low.T, z)
    for k in range(m):
        if not np.isfinite(sol[k]):
            return fail
    return sol


@njit(cache=True, nogil=True)
def _active_newton(X, y, r, beta, pen, active):
    """Active-set steps toward the exact minimizer on the current support (Lasso only).

    On a fixed support and sign pattern the objective is a quadratic, so
    moving along the segment toward its minimizer never increases it. If a
    sign would flip, the step stops where the first coefficient hits zero,
    that coefficient is dropped and the solve is repeated on the smaller
    support. Rank-deficient supports are first reduced with
    ``_drop_redundant``. Returns True when the iterate was replaced.
    """
    n = X.shape[0]
    if active.shape[0] == 0:
        return False
    b_new = beta.copy()
    for _ in range(active.shape[0]):
        sol = _sign_fixed_solve(X, y, b_new, pen, active)
        if sol.shape[0] == 0:
            active = _drop_redundant(X, b_new, pen, active)
            if active.shape[0] == 0:
                break
            sol = _sign_fixed_solve(X, y, b_new, pen, active)
            if sol.shape[0] == 0:
                return False
        m = active.shape[0]
        t = 1.0
        hit = -1
        for k in range(m):
            j = active[k]
            if pen[j] > 0.0 and sol[k] * b_new[j] <= 0.0:
                tk = b_new[j] / (b_new[j] - sol[k])
                if tk < t:
                    t = tk
                    hit = k
        for k in range(m):
            j = active[k]
            b_new[j] += t * (sol[k] - b_new[j])
        if hit < 0:
            break
        b_new[active[hit]] = 0.0
        active = np.flatnonzero(b_new)
        if active.shape[0] == 0:
            break
    r_new = y.copy()
    for j in range(b_new.shape[0]):
        if b_new[j] != 0.0:
            for i in range(n):
                r_new[i] -= b_new[j] * X[i, j]
    if objective(r_new, b_new, pen, LASSO, 0.0) > objective(r, beta, pen, LASSO, 0.0):
        return False
    r[:] = r_new
    beta[:] = b_new
    return True


@njit(cache=True, nogil=True)
def cd_solve(X, r, beta, col_sq, pen, family, param, tol, max_sweeps, trace, y=None):
    """Cyclic coordinate descent with an active-set inner loop.

    ``r`` and ``beta`` are updated in place (``r`` must equal ``y - X beta``
    on entry). Convergence is declared when a full sweep over all
    coordinates moves no coefficient by ``tol`` or more. ``trace`` receives
    the objective after each sweep (pass a length-0 array to skip).

    For the Lasso, when ``y`` is given and the active loop stalls, an exact
    solve on the current support and signs is attempted (see
    ``_active_newton``); CD sweeps still certify convergence afterwards.

    Returns ``(sweeps, status)``.
    """
    p = X.shape[1]
    all_idx = np.arange(p)
    sweeps = 0
    last = objective(r, beta, pen, family, param)
    increases = 0
    ntrace = trace.shape[0]
    while sweeps < max_sweeps:
        dmax = _sweep(X, r, beta, col_sq, pen, family, param, all_idx)
        sweeps += 1
        obj = objective(r, beta, pen, family, param)
        if sweeps <= ntrace:
            trace[sweeps - 1] = obj
        if family != LASSO:
            if obj > last + 1e-14 * (1.0 + abs(last)):
                increases += 1
                if increases >= 100:
                    return sweeps, DIVERGED
            else:
                increases = 0
        last = obj
        if dmax < tol:
            return sweeps, OK
        active = np.flatnonzero(beta)
        inner = 0
        while sweeps < max_sweeps:
            dmax = _sweep(X, r, beta, col_sq, pen, family, param, active)
            sweeps += 1
            inner += 1
            if y is not None and family == LASSO and inner % 5 == 0 and dmax >= tol:
                _active_newton(X, y, r, beta, pen, np.flatnonzero(beta))
            obj = objective(r, beta, pen, family, param)
            if sweeps <= ntrace:
                trace[sweeps - 1] = obj
            if family != LASSO:
                if obj > last + 1e-14 * (1.0 + abs(last)):
                    increases += 1
                    if increases >= 100:
                        return sweeps, DIVERGED
                else:
                    increases = 0
            last = obj
            if dmax < tol:
                break
    return sweeps, MAX_ITER


@njit(cache=True, nogil=True)
def cd_path_support(X, y, col_sq, weights, lambdas, family, param, tol, max_sweeps):
    """Warm-started path; returns the support (L x p, uint8) and per-lambda status."""
    n, p = X.shape
    L = lambdas.shape[0]
    support = np.zeros((L, p), dtype=np.uint8)
    status = np.zeros(L, dtype=np.int64)
    beta = np.zeros(p)
    r = y.copy()
    pen = np.empty(p)
    empty = np.empty(0)
    for k in range(L):
        for j in range(p):
            pen[j] = lambdas[k] * weights[j]
        _, st = cd_solve(X, r, beta, col_sq, pen, family, param, tol, max_sweeps, empty, y)
        status[k] = st
        if st == DIVERGED:
            return support, status
        for j in range(p):
            if beta[j] != 0.0:
                support[k, j] = 1
    return support, status
