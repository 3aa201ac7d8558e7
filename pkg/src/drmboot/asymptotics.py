"""Plug-in estimators of the limiting covariance structure.

These serve as an analytic cross-check on bootstrap output: the scaled
parameter error is asymptotically normal with covariance ``W^{-1} - S``,
and the scaled CDF error at a pair of points has the covariance returned
by :func:`cdf_covariance`.  Population integrals against the pooled
mixture are estimated by pooled-sample averages evaluated at the fitted
parameters, the same law-of-large-numbers device that links W to the
likelihood curvature.
"""

from __future__ import annotations

import csv
import warnings

import numpy as np

from .estimators import _require_converged
from .likelihood import dual_logel_hessian, mixture_weights
from .optimizer import DrmFit

__all__ = [
    "estimate_W",
    "build_S",
    "param_covariance",
    "cdf_covariance",
    "cdf_covariance_grid",
    "export_covariance_csv",
]


def estimate_W(fit: DrmFit) -> np.ndarray:
    """Curvature matrix estimate: the negated, n-scaled Hessian at the fit.

    Symmetric positive definite on non-degenerate data; raises
    ``numpy.linalg.LinAlgError`` otherwise.
    """
    _require_converged(fit)
    W = -dual_logel_hessian(fit.theta_hat, fit.data) / fit.data.n
    np.linalg.cholesky(W)  # positive-definiteness gate
    return W


def build_S(rho, d: int) -> np.ndarray:
    """Sparse correction matrix: block (r, s) is
    (1/rho_r * delta_rs + 1/rho_0) on its leading entry, zero elsewhere."""
    rho = np.asarray(rho, dtype=np.float64)
    if rho.ndim != 1 or len(rho) < 2 or (rho <= 0).any():
        raise ValueError("rho must hold positive fractions for m+1 groups")
    if abs(rho.sum() - 1.0) > 1e-8:
        raise ValueError("rho must sum to 1")
    m = len(rho) - 1
    S = np.zeros((m * d, m * d))
    for r in range(m):
        for s in range(m):
            S[r * d, s * d] = 1.0 / rho[0] + (1.0 / rho[r + 1] if r == s else 0.0)
    return S


def param_covariance(fit: DrmFit) -> np.ndarray:
    """Asymptotic covariance estimate ``W^{-1} - S`` for the scaled
    parameter error.

    Diagnostic only: in small samples it can be indefinite, which is
    reported through a warning rather than projected away.
    """
    W = estimate_W(fit)
    Winv = np.linalg.inv(W)
    C = Winv - build_S(fit.data.rho, fit.data.d)
    if np.linalg.eigvalsh(0.5 * (C + C.T))[0] < 0:
        warnings.warn(
            "plug-in parameter covariance is indefinite in this sample",
            RuntimeWarning,
            stacklevel=2,
        )
    return C


class _CdfCovContext:
    """Sorted prefix sums needed to evaluate the CDF-error covariance of
    one group at arbitrary points."""

    def __init__(self, fit: DrmFit, r: int):
        data = fit.data
        if not 0 <= r <= data.m:
            raise ValueError(f"group index {r} out of range 0..{data.m}")
        _, W = mixture_weights(fit.theta_hat, data)
        order = np.argsort(data.values, kind="stable")
        self.sorted_values = data.values[order]
        hr = W[order, r]
        n = data.n
        self.rho_r = float(data.rho[r])
        self.F_prefix = np.cumsum(hr) / data.sizes[r]
        self.a_prefix = np.cumsum(hr - hr * hr) / n
        # per-observation contribution to the md-vector integrand
        m, d = data.m, data.d
        contrib = np.empty((n, m * d))
        Qs = data.Q[order]
        for s in range(m):
            w = -hr * W[order, s + 1]
            if s + 1 == r:
                w = w + hr
            contrib[:, s * d : (s + 1) * d] = Qs * w[:, None]
        self.B_prefix = np.cumsum(contrib, axis=0) / n
        self.Winv = np.linalg.inv(estimate_W(fit))

    def _idx(self, t: float) -> int:
        return int(np.searchsorted(self.sorted_values, t, side="right"))

    def F(self, t: float) -> float:
        i = self._idx(t)
        return 0.0 if i == 0 else float(self.F_prefix[i - 1])

    def a(self, t: float) -> float:
        i = self._idx(t)
        return 0.0 if i == 0 else float(self.a_prefix[i - 1])

    def B(self, t: float) -> np.ndarray:
        i = self._idx(t)
        if i == 0:
            return np.zeros(self.B_prefix.shape[1])
        return self.B_prefix[i - 1]

    def omega(self, x: float, y: float) -> float:
        lo, hi = (x, y) if x <= y else (y, x)
        F_lo, F_hi = self.F(lo), self.F(hi)
        sigma = (F_lo - F_lo * F_hi) / self.rho_r
        quad = float(self.B(lo) @ self.Winv @ self.B(hi))
        return sigma - (self.a(lo) - quad) / self.rho_r**2


def cdf_covariance(fit: DrmFit, r: int, x: float, y: float) -> float:
    """Plug-in covariance of the scaled CDF-estimation error of group r
    between points x and y.

    Exactly symmetric in (x, y): arguments are canonically ordered before
    evaluation.
    """
    _require_converged(fit)
    return _CdfCovContext(fit, r).omega(float(x), float(y))


def cdf_covariance_grid(fit: DrmFit, r: int, xs) -> np.ndarray:
    """Covariance matrix of the scaled CDF error over a grid of points."""
    _require_converged(fit)
    ctx = _CdfCovContext(fit, r)
    xs = np.asarray(xs, dtype=np.float64)
    k = len(xs)
    out = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            out[i, j] = ctx.omega(float(xs[i]), float(xs[j]))
            out[j, i] = out[i, j]
    return out


def export_covariance_csv(path, xs, omega: np.ndarray):
    """Write a covariance grid as CSV with the grid in the header row."""
    xs = np.asarray(xs, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x"] + [repr(float(x)) for x in xs])
        for x, row in zip(xs, omega):
            writer.writerow([repr(float(x))] + [repr(float(v)) for v in row])
