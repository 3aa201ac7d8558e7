"""Distribution functionals derived from a fitted parameter block.

Every group's CDF estimate places mass on the whole pooled sample: the
jump of group r at pooled value v is h_r(v) / n_r, so all step functions
share one support.  Quantiles follow the left-continuous convention
Q(p) = inf{x : F(x) >= p}, and the dominance index is the exact Lebesgue
measure of quantile levels where one quantile function strictly exceeds
the other, computed by a breakpoint sweep rather than grid integration.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import FitError
from .likelihood import mixture_weights
from .optimizer import DrmFit

__all__ = [
    "StepCdf",
    "FittedProbabilities",
    "fitted_probabilities",
    "cdf_estimate",
    "quantile",
    "dominance_index",
]

# cum values are accumulated floats; quantile lookups at exact jump
# heights need this slack
QUANTILE_TOL = 1e-12


@dataclass(frozen=True)
class StepCdf:
    """Right-continuous step function on a strictly increasing support.

    ``jumps`` are nonnegative point masses; ``cum`` their running sums,
    ending at 1 for a proper distribution.
    """

    support: np.ndarray
    jumps: np.ndarray
    cum: np.ndarray

    def __post_init__(self):
        if (np.diff(self.support) <= 0).any():
            raise ValueError("support must be strictly increasing")
        if (self.jumps < 0).any():
            raise ValueError("jumps must be nonnegative")

    @classmethod
    def from_points(cls, values, weights) -> "StepCdf":
        """Aggregate weighted points into a step function.

        Ties are merged; weights of tied points add in sorted order so the
        construction is deterministic.
        """
        values = np.asarray(values, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        order = np.argsort(values, kind="stable")
        v = values[order]
        w = weights[order]
        first = np.empty(len(v), dtype=bool)
        first[0] = True
        first[1:] = v[1:] != v[:-1]
        starts = np.flatnonzero(first)
        support = v[starts]
        jumps = np.add.reduceat(w, starts)
        return cls(support, jumps, np.cumsum(jumps))

    @property
    def total_mass(self) -> float:
        return float(self.cum[-1])

    def eval(self, x) -> np.ndarray | float:
        """F(x), vectorized over x."""
        idx = np.searchsorted(self.support, x, side="right")
        padded = np.concatenate([[0.0], self.cum])
        out = padded[idx]
        return float(out) if np.isscalar(x) else out

    def to_csv(self, path):
        """Two-column export (x, F(x)) for external plotting."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "F"])
            for x, f in zip(self.support, self.cum):
                writer.writerow([repr(float(x)), repr(float(f))])


@dataclass(frozen=True)
class FittedProbabilities:
    """Baseline point masses 1 / (n h(x_i; theta_hat)) over the pooled
    sample; they sum to 1 at a converged fit."""

    p_hat: np.ndarray


def _require_converged(fit: DrmFit):
    if not fit.converged:
        raise FitError("fit did not converge; refusing to compute estimates")


def fitted_probabilities(fit: DrmFit) -> FittedProbabilities:
    """Fitted baseline probabilities at each pooled observation."""
    _require_converged(fit)
    logh, _ = mixture_weights(fit.theta_hat, fit.data)
    return FittedProbabilities(p_hat=np.exp(-logh) / fit.data.n)


def cdf_estimate(fit: DrmFit, r: int) -> StepCdf:
    """Estimated CDF of group r as a step function on the pooled support."""
    _require_converged(fit)
    data = fit.data
    if not 0 <= r <= data.m:
        raise ValueError(f"group index {r} out of range 0..{data.m}")
    _, W = mixture_weights(fit.theta_hat, data)
    cdf = StepCdf.from_points(data.values, W[:, r] / data.sizes[r])
    if abs(cdf.total_mass - 1.0) > 1e-6:
        raise FitError(
            f"CDF mass {cdf.total_mass} departs from 1 beyond tolerance; "
            "fit is unreliable"
        )
    return cdf


def quantile(cdf: StepCdf, p: float) -> float:
    """Smallest support value v with F(v) >= p (within accumulation slack)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p}")
    idx = int(np.searchsorted(cdf.cum, p - QUANTILE_TOL, side="left"))
    idx = min(idx, len(cdf.support) - 1)
    return float(cdf.support[idx])


def dominance_index(cdf0: StepCdf, cdf1: StepCdf) -> float:
    """Lebesgue measure of {p in (0,1) : Q_0(p) > Q_1(p)}, exactly.

    Both quantile functions are constant between consecutive breakpoints
    (the union of the two cum arrays), so the measure is a finite sum of
    interval lengths; equality intervals contribute zero.
    """
    interior = np.concatenate([cdf0.cum, cdf1.cum])
    interior = np.unique(interior[(interior > 0.0) & (interior < 1.0)])
    edges = np.concatenate([[0.0], interior, [1.0]])
    mids = 0.5 * (edges[:-1] + edges[1:])
    q0 = _quantiles_at(cdf0, mids)
    q1 = _quantiles_at(cdf1, mids)
    lengths = np.diff(edges)
    return float(lengths[q0 > q1].sum())


def _quantiles_at(cdf: StepCdf, p: np.ndarray) -> np.ndarray:
    """Exact (no-slack) quantile lookup used by the breakpoint sweep."""
    idx = np.searchsorted(cdf.cum, p, side="left")
    return cdf.support[np.minimum(idx, len(cdf.support) - 1)]
