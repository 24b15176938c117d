"""Compiled inner loops for ARMA likelihood evaluation and simplex search.

Everything here works on plain float64 arrays so it can run without the GIL.
"""

import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)
# |u| beyond this only moves partial autocorrelations within 2.3e-7 of +-1
U_MAX = 8.0


@njit(cache=True, nogil=True)
def pacf_to_coef(r):
    """Durbin-Levinson map from partial autocorrelations (|r|<1) to the
    coefficients ``a`` of a stable polynomial ``1 - a_1 z - ... - a_k z^k``."""
    k = r.size
    a = np.zeros(k)
    tmp = np.zeros(k)
    for m in range(k):
        a[m] = r[m]
        for j in range(m):
            tmp[j] = a[j] - r[m] * a[m - 1 - j]
        for j in range(m):
            a[j] = tmp[j]
    return a


@njit(cache=True, nogil=True)
def coef_to_pacf(a):
    """Inverse of :func:`pacf_to_coef`; returns values >= 1 in modulus when
    ``a`` is not stable."""
    k = a.size
    cur = a.copy()
    r = np.zeros(k)
    for m in range(k - 1, -1, -1):
        rm = cur[m]
        r[m] = rm
        if m == 0:
            break
        den = 1.0 - rm * rm
        if den <= 0.0:
            for j in range(m):
                r[j] = 1.0
            return r
        nxt = np.zeros(m)
        for j in range(m):
            nxt[j] = (cur[j] + rm * cur[m - 1 - j]) / den
        cur = nxt
    return r


@njit(cache=True, nogil=True)
def unpack(u, p, q, rho):
    """Unconstrained vector -> (phi, theta) with all roots outside radius rho."""
    r = np.tanh(np.minimum(np.maximum(u, -U_MAX), U_MAX))
    phi = pacf_to_coef(r[:p])
    a = pacf_to_coef(r[p:p + q])
    theta = np.empty(q)
    s = 1.0
    for j in range(p):
        s /= rho
        phi[j] *= s
    s = 1.0
    for j in range(q):
        s /= rho
        theta[j] = -a[j] * s
    return phi, theta


@njit(cache=True, nogil=True)
def stationary_cov(T, Rv):
    """Solve P = T P T' + R R' via the Kronecker linear system."""
    r = T.shape[0]
    n = r * r
    A = np.eye(n)
    b = np.empty(n)
    for i in range(r):
        for j in range(r):
            row = i * r + j
            b[row] = Rv[i] * Rv[j]
            for k in range(r):
                for m in range(r):
                    A[row, k * r + m] -= T[i, k] * T[j, m]
    x = np.linalg.solve(A, b)
    P = np.empty((r, r))
    for i in range(r):
        for j in range(r):
            P[i, j] = 0.5 * (x[i * r + j] + x[j * r + i])
    return P


@njit(cache=True, nogil=True)
def filter_sums(y, phi, theta):
    """Kalman pass at unit innovation variance over ``y`` and a constant column.

    Returns ``(sum v^2/F, sum v w/F, sum w^2/F, sum log F)`` where ``v`` and
    ``w`` are the one-step prediction errors of the data and of the ones.
    A non-positive prediction variance yields ``sum log F = inf``.

    The transition matrix is the companion form (``phi`` in the first column,
    ones on the superdiagonal), which keeps every step O(r^2).
    """
    n = y.size
    p = phi.size
    q = theta.size
    r = max(p, q + 1)
    ph = np.zeros(r)
    ph[:p] = phi
    Rv = np.zeros(r)
    Rv[0] = 1.0
    for j in range(q):
        Rv[j + 1] = theta[j]
    T = np.zeros((r, r))
    for i in range(r):
        T[i, 0] = ph[i]
        if i + 1 < r:
            T[i, i + 1] = 1.0

    P = stationary_cov(T, Rv)
    a = np.zeros(r)
    b = np.zeros(r)
    K = np.zeros(r)
    TP = np.empty((r, r))
    svv = 0.0
    svw = 0.0
    sww = 0.0
    slogf = 0.0
    steady = False
    F = 1.0
    for t in range(n):
        if not steady:
            F = P[0, 0]
            if not F > 0.0:
                return 0.0, 0.0, 1.0, np.inf
            # TP = T P
            for i in range(r):
                for j in range(r):
                    s = ph[i] * P[0, j]
                    if i + 1 < r:
                        s += P[i + 1, j]
                    TP[i, j] = s
            for i in range(r):
                K[i] = TP[i, 0] / F
        v = y[t] - a[0]
        w = 1.0 - b[0]
        svv += v * v / F
        svw += v * w / F
        sww += w * w / F
        slogf += math.log(F)
        a0 = a[0]
        b0 = b[0]
        for i in range(r):
            na = ph[i] * a0 + K[i] * v
            nb = ph[i] * b0 + K[i] * w
            if i + 1 < r:
                na += a[i + 1]
                nb += b[i + 1]
            a[i] = na
            b[i] = nb
        if not steady:
            # P <- T P T' + R R' - F K K'
            delta = 0.0
            for i in range(r):
                for j in range(r):
                    s = ph[j] * TP[i, 0]
                    if j + 1 < r:
                        s += TP[i, j + 1]
                    s += Rv[i] * Rv[j] - F * K[i] * K[j]
                    d = abs(s - P[i, j])
                    if d > delta:
                        delta = d
                    P[i, j] = s
            if delta < 1e-13:
                steady = True
                F = P[0, 0]
                for i in range(r):
                    s = ph[i] * P[0, 0]
                    if i + 1 < r:
                        s += P[i + 1, 0]
                    K[i] = s / F
    return svv, svw, sww, slogf


@njit(cache=True, nogil=True)
def kalman_loglik(y, phi, theta):
    """Exact Gaussian log-likelihood of a stationary ARMA model.

    The mean is profiled out by generalised least squares and the innovation
    variance in closed form. Returns ``(loglik, mean, sigma2)``.
    """
    n = y.size
    svv, svw, sww, slogf = filter_sums(y, phi, theta)
    if not math.isfinite(slogf):
        return -np.inf, 0.0, 0.0
    mean = svw / sww
    ss = svv - svw * mean
    if not ss > 0.0:
        return -np.inf, mean, 0.0
    sigma2 = ss / n
    ll = -0.5 * n * (LOG_2PI + math.log(sigma2) + 1.0) - 0.5 * slogf
    return ll, mean, sigma2


@njit(cache=True, nogil=True)
def negloglik(u, y, p, q, rho):
    phi, theta = unpack(u, p, q, rho)
    ll, _, _ = kalman_loglik(y, phi, theta)
    if not math.isfinite(ll):
        return 1e300
    return -ll


@njit(cache=True, nogil=True)
def _box(x):
    for j in range(x.size):
        x[j] = min(max(x[j], -U_MAX), U_MAX)


@njit(cache=True, nogil=True)
def nelder_mead(x0, y, p, q, rho, step, xatol, fatol, maxfev):
    """Plain Nelder-Mead (reflection 1, expansion 2, contraction/shrink 0.5).

    Trial points are projected onto the box ``|u| <= U_MAX`` so that searches
    heading for the admissibility boundary collapse onto it instead of
    wandering along a flat direction.

    Returns ``(x_best, f_best, nfev, converged)``.
    """
    k = x0.size
    sim = np.empty((k + 1, k))
    fs = np.empty(k + 1)
    for i in range(k + 1):
        for j in range(k):
            sim[i, j] = x0[j]
        if i > 0:
            sim[i, i - 1] += step
        _box(sim[i])
        fs[i] = negloglik(sim[i], y, p, q, rho)
    nfev = k + 1
    centroid = np.empty(k)
    xr = np.empty(k)
    xe = np.empty(k)
    xc = np.empty(k)
    converged = False
    while nfev < maxfev:
        order = np.argsort(fs)
        sim = sim[order]
        fs = fs[order]
        fspread = 0.0
        xspread = 0.0
        for i in range(1, k + 1):
            fspread = max(fspread, abs(fs[i] - fs[0]))
            for j in range(k):
                xspread = max(xspread, abs(sim[i, j] - sim[0, j]))
        if fspread <= fatol and xspread <= xatol:
            converged = True
            break
        for j in range(k):
            s = 0.0
            for i in range(k):
                s += sim[i, j]
            centroid[j] = s / k
        for j in range(k):
            xr[j] = 2.0 * centroid[j] - sim[k, j]
        _box(xr)
        fr = negloglik(xr, y, p, q, rho)
        nfev += 1
        if fr < fs[0]:
            for j in range(k):
                xe[j] = 3.0 * centroid[j] - 2.0 * sim[k, j]
            _box(xe)
            fe = negloglik(xe, y, p, q, rho)
            nfev += 1
            if fe < fr:
                sim[k] = xe
                fs[k] = fe
            else:
                sim[k] = xr
                fs[k] = fr
        elif fr < fs[k - 1]:
            sim[k] = xr
            fs[k] = fr
        else:
            if fr < fs[k]:
                for j in range(k):
                    xc[j] = 1.5 * centroid[j] - 0.5 * sim[k, j]
                fc = negloglik(xc, y, p, q, rho)
                nfev += 1
                accept = fc <= fr
            else:
                for j in range(k):
                    xc[j] = 0.5 * centroid[j] + 0.5 * sim[k, j]
                fc = negloglik(xc, y, p, q, rho)
                nfev += 1
                accept = fc < fs[k]
            if accept:
                sim[k] = xc
                fs[k] = fc
            else:
                for i in range(1, k + 1):
                    for j in range(k):
                        sim[i, j] = sim[0, j] + 0.5 * (sim[i, j] - sim[0, j])
                    fs[i] = negloglik(sim[i], y, p, q, rho)
                nfev += k
    best = np.argmin(fs)
    return sim[best].copy(), fs[best], nfev, converged
