"""Newton maximization of the dual log empirical likelihood.

The objective is smooth and concave, so a damped Newton iteration with a
backtracking line search converges quadratically from the zero start.
When the Newton system is near-singular the solver adds a ridge to the
curvature matrix, escalating it by factors of 10; structurally degenerate
data (collinear pooled basis columns) is rejected up front instead of
being silently regularized toward an arbitrary point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _backend
from .errors import FitError
from .likelihood import MultiSampleData, _check_theta

__all__ = ["FitOptions", "DrmFit", "fit_mele"]

_ARMIJO = 1e-4
_RIDGE_CAP = 1e8


@dataclass(frozen=True)
class FitOptions:
    """Newton solver controls.

    ``grad_tol`` is a per-observation threshold: convergence requires the
    gradient infinity norm to drop below ``grad_tol * n``.
    """

    max_iter: int = 200
    grad_tol: float = 1e-8
    step_tol: float = 1e-10
    ridge: float = 1e-10
    warm_start: np.ndarray | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.grad_tol <= 0 or self.step_tol <= 0 or self.ridge <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class DrmFit:
    """A fitted parameter block with solver diagnostics.

    ``converged`` guarantees ``grad_norm <= grad_tol * n``.  The fitted
    dataset is kept so downstream estimators need only the fit object.
    """

    theta_hat: np.ndarray
    loglik: float
    converged: bool
    iterations: int
    grad_norm: float
    data: MultiSampleData
    grad_tol: float = field(default=1e-8, repr=False)


def _check_pooled_rank(Q: np.ndarray):
    """Reject data whose pooled basis columns are collinear.

    With rank-deficient Q the curvature matrix is singular everywhere and
    the maximizer is a ridge; fitting such data would regularize toward an
    arbitrary answer.
    """
    norms = np.sqrt((Q * Q).sum(axis=0))
    if (norms == 0).any():
        raise FitError("basis column identically zero on this data")
    C = (Q / norms).T @ (Q / norms)
    eigs = np.linalg.eigvalsh(C)
    if eigs[0] < 1e-10:
        raise FitError(
            "collinear basis columns on this data (pooled basis matrix is "
            "rank deficient); the maximizer is not identified"
        )


def fit_mele(data: MultiSampleData, opts: FitOptions | None = None) -> DrmFit:
    """Maximize the dual log-EL and return the estimate with diagnostics.

    Starts from zero (where the objective is exactly 0) unless
    ``opts.warm_start`` is given.  Accepted iterates are monotone in the
    objective.  Non-convergence within ``max_iter`` is reported through
    ``converged=False`` rather than raised; unrecoverable singularity
    raises :class:`FitError`.
    """
    if opts is None:
        opts = FitOptions()
    _check_pooled_rank(data.Q)
    if opts.warm_start is not None:
        theta = _check_theta(opts.warm_start, data).copy()
    else:
        theta = data.zero_theta()

    Q, g, rho = data.Q, data.group_index, data.rho
    n = data.n
    gtol = opts.grad_tol * n

    val, grad, hess = _backend.logel_grad_hess(theta, Q, g, rho)
    gnorm = float(np.abs(grad).max())
    iterations = 0

    for _ in range(opts.max_iter):
        if gnorm <= gtol:
            break
        step = _newton_step(hess, grad, opts.ridge)
        slope = float(grad @ step)
        # Once the predicted increase falls below the float resolution of
        # the objective, the sufficient-increase test is pure noise; the
        # Newton step is then tiny on a concave surface, so take it as is.
        noise_floor = slope <= 1e-12 * (1.0 + abs(val))
        # backtracking line search, halving until sufficient increase;
        # the accepted trial's gradient and Hessian feed the next iteration
        t = 1.0
        accepted = False
        while t >= 1e-14:
            trial = theta + t * step.reshape(theta.shape)
            tval, tgrad, thess = _backend.logel_grad_hess(trial, Q, g, rho)
            if np.isfinite(tval) and (
                noise_floor or tval >= val + _ARMIJO * t * slope
            ):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        theta, val, grad, hess = trial, tval, tgrad, thess
        gnorm = float(np.abs(grad).max())
        iterations += 1
        if float(np.abs(t * step).max()) <= opts.step_tol:
            break

    if not np.isfinite(val):
        raise FitError("objective became non-finite during optimization")
    return DrmFit(
        theta_hat=theta.copy(),
        loglik=float(val),
        converged=bool(gnorm <= gtol),
        iterations=iterations,
        grad_norm=gnorm,
        data=data,
        grad_tol=opts.grad_tol,
    )


def _newton_step(hess: np.ndarray, grad: np.ndarray, ridge0: float) -> np.ndarray:
    """Ascent direction solving (-H + lam*I) p = grad.

    -H is positive semidefinite; a plain Cholesky solve is attempted
    first, then the ridge escalates by factors of 10 until the factorization
    succeeds or the cap is hit.
    """
    A = -hess
    scale = max(float(np.abs(A).max()), 1.0)
    lam = 0.0
    while True:
        try:
            cf = scipy.linalg.cho_factor(
                A + lam * np.eye(A.shape[0]), check_finite=False
            )
            return scipy.linalg.cho_solve(cf, grad, check_finite=False)
        except scipy.linalg.LinAlgError:
            lam = ridge0 * scale if lam == 0.0 else lam * 10.0
            if lam > _RIDGE_CAP * scale:
                raise FitError(
                    "Newton system singular beyond ridge escalation cap"
                ) from None
