"""Vectorized numpy implementation of the likelihood kernels.

The log mixture weight is computed as log1p(sum_k rho_k expm1(t_k)) over
the tilts t_k = theta_k' q(x) (t_0 = 0), which is exactly zero at
theta = 0; when the tilt sum overflows, evaluation falls back to
max-subtracted log-sum-exp, which is stable for any finite tilt.
"""

import numpy as np

__all__ = ["mixture_weights", "logel_value", "logel_grad_hess"]

_OVERFLOW = 1e300


def _tilts(theta, Q):
    """Tilt matrix t_k(x_i), shape (n, m+1), baseline column zero."""
    n = Q.shape[0]
    T = np.empty((n, theta.shape[0] + 1))
    T[:, 0] = 0.0
    T[:, 1:] = Q @ theta.T
    return T


def _logh_and_weights(T, rho):
    with np.errstate(over="ignore"):
        s1 = np.expm1(T) @ rho
        tmax = np.maximum(T.max(axis=1), 0.0)
        W = np.exp(T - tmax[:, None]) * rho
        tot = W.sum(axis=1)
        logh = np.where(s1 < _OVERFLOW, np.log1p(s1), tmax + np.log(tot))
    W /= tot[:, None]
    return logh, W


def mixture_weights(theta, Q, rho):
    """Per-observation log mixture weight and posterior group shares.

    Returns ``(logh, W)`` with ``logh[i] = log h(x_i; theta)`` and
    ``W[i, k] = h_k(x_i; theta)``; rows of ``W`` sum to 1.
    """
    return _logh_and_weights(_tilts(theta, Q), rho)


def logel_value(theta, Q, g, rho):
    """Dual log empirical likelihood at ``theta``; exactly 0 at zero."""
    T = _tilts(theta, Q)
    with np.errstate(over="ignore"):
        s1 = np.expm1(T) @ rho
        tmax = np.maximum(T.max(axis=1), 0.0)
        tot = (np.exp(T - tmax[:, None]) * rho).sum(axis=1)
        logh = np.where(s1 < _OVERFLOW, np.log1p(s1), tmax + np.log(tot))
    own = T[np.arange(Q.shape[0]), g]
    return float(np.sum(own - logh))


def logel_grad_hess(theta, Q, g, rho):
    """Value, gradient and Hessian of the dual log-EL at ``theta``.

    Gradient blocks are stacked for groups r = 1..m; the Hessian is the
    true (negative-semidefinite) second derivative, exactly symmetric.
    """
    n, d = Q.shape
    m = theta.shape[0]
    T = _tilts(theta, Q)
    logh, W = _logh_and_weights(T, rho)
    own = T[np.arange(n), g]
    val = float(np.sum(own - logh))

    grad = np.empty(m * d)
    for r in range(m):
        c = (g == r + 1).astype(np.float64) - W[:, r + 1]
        grad[r * d : (r + 1) * d] = c @ Q

    hess = np.zeros((m * d, m * d))
    for r in range(m):
        wr = W[:, r + 1]
        for s in range(r, m):
            w = wr * W[:, s + 1]
            if s == r:
                w = w - wr
            blk = (Q * w[:, None]).T @ Q
            hess[r * d : (r + 1) * d, s * d : (s + 1) * d] = blk
    # mirror the upper triangle so H == H.T bitwise
    iu = np.triu_indices(m * d, 1)
    hess[(iu[1], iu[0])] = hess[iu]
    return val, grad, hess
