"""Numba-jitted implementation of the likelihood kernels.

Single fused pass over the pooled observations; dominates the runtime of
every Newton iteration and hence of bootstrap and Monte Carlo loops.
Matches the numpy implementation: log1p/expm1 evaluation of the log
mixture weight (exactly zero at theta = 0) with a log-sum-exp fallback
when the tilt sum overflows.
"""

import numpy as np
from numba import njit

__all__ = ["mixture_weights", "logel_value", "logel_grad_hess"]

_OPTS = dict(cache=True, nogil=True)

_OVERFLOW = 1e300


@njit(**_OPTS)
def _point_stats(theta, Q, rho, i, t, w):
    """Fill tilts and unnormalized weights for observation i; returns
    (logh, tot) with tot the unnormalized weight sum."""
    m, d = theta.shape
    t[0] = 0.0
    tmax = 0.0
    for r in range(m):
        s = 0.0
        for j in range(d):
            s += theta[r, j] * Q[i, j]
        t[r + 1] = s
        if s > tmax:
            tmax = s
    s1 = 0.0
    tot = 0.0
    for k in range(m + 1):
        s1 += rho[k] * np.expm1(t[k])
        wk = rho[k] * np.exp(t[k] - tmax)
        w[k] = wk
        tot += wk
    if s1 < _OVERFLOW:
        logh = np.log1p(s1)
    else:
        logh = tmax + np.log(tot)
    return logh, tot


@njit(**_OPTS)
def mixture_weights(theta, Q, rho):
    n = Q.shape[0]
    m = theta.shape[0]
    logh = np.empty(n)
    W = np.empty((n, m + 1))
    t = np.empty(m + 1)
    w = np.empty(m + 1)
    for i in range(n):
        logh[i], tot = _point_stats(theta, Q, rho, i, t, w)
        for k in range(m + 1):
            W[i, k] = w[k] / tot
    return logh, W


@njit(**_OPTS)
def logel_value(theta, Q, g, rho):
    n = Q.shape[0]
    m = theta.shape[0]
    t = np.empty(m + 1)
    w = np.empty(m + 1)
    val = 0.0
    for i in range(n):
        logh, _ = _point_stats(theta, Q, rho, i, t, w)
        val += t[g[i]] - logh
    return val


@njit(**_OPTS)
def logel_grad_hess(theta, Q, g, rho):
    n, d = Q.shape
    m = theta.shape[0]
    md = m * d
    t = np.empty(m + 1)
    h = np.empty(m + 1)
    val = 0.0
    grad = np.zeros(md)
    hess = np.zeros((md, md))
    for i in range(n):
        logh, tot = _point_stats(theta, Q, rho, i, t, h)
        for k in range(m + 1):
            h[k] /= tot
        gi = g[i]
        val += t[gi] - logh
        for r in range(m):
            c = -h[r + 1]
            if gi == r + 1:
                c += 1.0
            base = r * d
            for j in range(d):
                grad[base + j] += c * Q[i, j]
        # upper-triangle blocks of the true Hessian: weight h_r h_s - d_rs h_r
        for r in range(m):
            hr = h[r + 1]
            br = r * d
            for s in range(r, m):
                w = hr * h[s + 1]
                if s == r:
                    w -= hr
                bs = s * d
                for a in range(d):
                    qa = w * Q[i, a]
                    for b in range(d):
                        hess[br + a, bs + b] += qa * Q[i, b]
    # mirror the upper triangle so H == H.T bitwise
    for i in range(md):
        for j in range(i + 1, md):
            hess[j, i] = hess[i, j]
    return val, grad, hess
