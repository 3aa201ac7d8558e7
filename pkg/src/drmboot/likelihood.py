"""Dual log empirical likelihood for multiple samples under a density
ratio link.

The m+1 samples share a baseline distribution; sample k tilts it by
``exp(theta_k' q(x))`` with ``theta_0 = 0``.  The dual objective evaluated
here is

    l(theta) = sum_i [ theta_{g_i}' q(x_i) - log h(x_i; theta) ],
    h(x; theta) = sum_k rho_k exp(theta_k' q(x)),

a concave function of the stacked (m x d) parameter block whose maximizer
is the empirical-likelihood estimate.  Mixture weights are evaluated from
the tilts with max subtraction, and log h through log1p/expm1 (exact zero
at theta = 0) with a log-sum-exp fallback, so quadratic or log bases
cannot overflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .basis import BasisSpec, basis_matrix
from .errors import EvaluationError

__all__ = [
    "MultiSampleData",
    "dual_logel",
    "dual_logel_gradient",
    "dual_logel_hessian",
    "log_mixture_weight",
    "group_weight",
    "mixture_weights",
]


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MultiSampleData:
    """Pooled multi-sample dataset with a precomputed basis matrix.

    Group 0 is the baseline.  Observations are stored pooled, group by
    group; all arrays are read-only so instances can be shared freely
    across workers.

    Attributes
    ----------
    values : ndarray, shape (n,)
        Pooled observations, group 0 first.
    group_index : ndarray of int64, shape (n,)
        Group of each pooled observation.
    sizes : ndarray of int64, shape (m+1,)
        Per-group sample sizes n_k.
    Q : ndarray, shape (n, d)
        Basis matrix; row i is the basis evaluated at ``values[i]``.
    basis : BasisSpec
    labels : tuple of str
        Display labels per group.
    """

    values: np.ndarray
    group_index: np.ndarray
    sizes: np.ndarray
    Q: np.ndarray
    basis: BasisSpec
    labels: tuple[str, ...]
    rho: np.ndarray = field(init=False)
    offsets: np.ndarray = field(init=False)

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.int64)
        if sizes.ndim != 1 or len(sizes) < 2:
            raise ValueError("need at least two groups (baseline plus one)")
        if (sizes < 1).any():
            raise ValueError(f"every group must be non-empty, got sizes {sizes}")
        n = int(sizes.sum())
        if self.values.shape != (n,) or self.group_index.shape != (n,):
            raise ValueError("values/group_index length must equal sum of sizes")
        if self.Q.shape != (n, self.basis.d):
            raise ValueError("basis matrix shape does not match data")
        if len(self.labels) != len(sizes):
            raise ValueError("one label per group required")
        rho = sizes / n
        if abs(rho.sum() - 1.0) > 1e-12:
            raise ValueError("group fractions must sum to 1")
        object.__setattr__(self, "values", _readonly(self.values))
        object.__setattr__(self, "group_index", _readonly(self.group_index))
        object.__setattr__(self, "sizes", _readonly(sizes))
        object.__setattr__(self, "Q", _readonly(self.Q))
        object.__setattr__(self, "rho", _readonly(rho))
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        object.__setattr__(self, "offsets", _readonly(offsets))

    @classmethod
    def from_groups(cls, groups, basis: BasisSpec, labels=None) -> "MultiSampleData":
        """Build from per-group observation arrays (group 0 first).

        Every observation is scanned against the basis domain up front so
        a bad record fails here, with its group and index, rather than
        mid-optimization.
        """
        groups = [np.asarray(gr, dtype=np.float64).ravel() for gr in groups]
        if labels is None:
            labels = tuple(str(k) for k in range(len(groups)))
        else:
            labels = tuple(str(l) for l in labels)
        for k, gr in enumerate(groups):
            basis.check_domain(gr, group=labels[k] if labels else k)
        sizes = np.array([len(gr) for gr in groups], dtype=np.int64)
        values = np.concatenate(groups) if groups else np.empty(0)
        group_index = np.repeat(np.arange(len(groups), dtype=np.int64), sizes)
        Q = basis_matrix(basis, values)
        return cls(values, group_index, sizes, Q, basis, labels)

    @property
    def m(self) -> int:
        """Number of non-baseline groups."""
        return len(self.sizes) - 1

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def d(self) -> int:
        return self.basis.d

    def group(self, k: int) -> np.ndarray:
        """View of group k's observations."""
        return self.values[self.offsets[k] : self.offsets[k + 1]]

    @property
    def groups(self) -> list[np.ndarray]:
        return [self.group(k) for k in range(self.m + 1)]

    def gather(self, pooled_indices: np.ndarray) -> "MultiSampleData":
        """Row-gathered copy (used by resampling); group sizes must be
        preserved, i.e. ``group_index[pooled_indices]`` must equal
        ``group_index``.  Basis rows are reused, never re-evaluated.
        """
        return MultiSampleData(
            self.values[pooled_indices],
            self.group_index.copy(),
            self.sizes.copy(),
            self.Q[pooled_indices],
            self.basis,
            self.labels,
        )

    def zero_theta(self) -> np.ndarray:
        """Parameter block of zeros, shape (m, d)."""
        return np.zeros((self.m, self.d))


def _check_theta(theta, data: MultiSampleData) -> np.ndarray:
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if theta.shape != (data.m, data.d):
        raise ValueError(
            f"theta must have shape {(data.m, data.d)}, got {theta.shape}"
        )
    if not np.isfinite(theta).all():
        raise EvaluationError("non-finite entries in theta", theta=theta)
    return theta


def _point_tilts(theta, qx, rho):
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    qx = np.asarray(qx, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    t = np.concatenate([[0.0], theta @ qx])
    if not np.isfinite(t).all():
        raise EvaluationError("non-finite exponent in mixture weight", theta=theta)
    return t, rho


def log_mixture_weight(theta, qx, rho) -> float:
    """log h(x; theta) for one basis vector ``qx``.

    ``rho`` carries the m+1 sample fractions (they multiply the
    exponentials, so the mixture weight is not a function of theta
    alone).  Computed from the tilts so the value is exactly 0 at
    theta = 0, with a max-subtracted log-sum-exp fallback that keeps
    extreme tilts finite.
    """
    t, rho = _point_tilts(theta, qx, rho)
    with np.errstate(over="ignore"):
        s1 = float(np.expm1(t) @ rho)
        if s1 < 1e300:
            return float(np.log1p(s1))
        tmax = max(float(t.max()), 0.0)
        return float(tmax + np.log((rho * np.exp(t - tmax)).sum()))


def group_weight(theta, qx, rho, r: int) -> float:
    """Posterior share h_r(x; theta) of group r at one point; in (0, 1)
    and summing to 1 over r."""
    t, rho = _point_tilts(theta, qx, rho)
    if not 0 <= r <= len(t) - 1:
        raise ValueError(f"group index {r} out of range 0..{len(t) - 1}")
    w = rho * np.exp(t - max(float(t.max()), 0.0))
    return float(w[r] / w.sum())


def mixture_weights(theta, data: MultiSampleData):
    """Pooled log mixture weights and posterior shares at ``theta``.

    Returns ``(logh, W)`` with shapes (n,) and (n, m+1); ``W[i, r]`` is
    h_r(x_i; theta).
    """
    theta = _check_theta(theta, data)
    return _backend.mixture_weights(theta, data.Q, data.rho)


def dual_logel(theta, data: MultiSampleData) -> float:
    """Dual log empirical likelihood l(theta); exactly 0 at theta = 0."""
    theta = _check_theta(theta, data)
    val = _backend.logel_value(theta, data.Q, data.group_index, data.rho)
    if not np.isfinite(val):
        raise EvaluationError("dual log-EL evaluated non-finite", theta=theta)
    return float(val)


def dual_logel_gradient(theta, data: MultiSampleData) -> np.ndarray:
    """Gradient of the dual log-EL, blocks stacked for groups 1..m."""
    theta = _check_theta(theta, data)
    _, grad, _ = _backend.logel_grad_hess(
        theta, data.Q, data.group_index, data.rho
    )
    if not np.isfinite(grad).all():
        raise EvaluationError("non-finite gradient", theta=theta)
    return grad


def dual_logel_hessian(theta, data: MultiSampleData) -> np.ndarray:
    """Hessian of the dual log-EL (m*d x m*d).

    This is the true second derivative: symmetric and negative
    semidefinite, the negated curvature form that also serves as the
    information-matrix estimate in :mod:`drmboot.asymptotics`.
    """
    theta = _check_theta(theta, data)
    _, _, hess = _backend.logel_grad_hess(
        theta, data.Q, data.group_index, data.rho
    )
    if not np.isfinite(hess).all():
        raise EvaluationError("non-finite Hessian", theta=theta)
    return hess
