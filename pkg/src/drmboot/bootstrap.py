"""Grouped bootstrap for scalar functionals of the fitted distributions.

Resampling draws with replacement within each group, preserving every
group size, so the sample fractions are invariant by construction.  Each
replicate refits the model warm-started at the original estimate (the
surface is concave, so warm starts only cut iterations), evaluates the
requested functionals, and contributes one row to the replicate matrix.
Replicate RNG streams are keyed by (seed, replicate index), which makes
results independent of worker count and execution order.

Confidence intervals follow the percentile construction: with q_b the
empirical b-quantile of the replicate-minus-estimate differences, the
1-alpha interval is [estimate - q_{1-alpha/2}, estimate - q_{alpha/2}].
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BootstrapError, FitError
from .estimators import StepCdf, dominance_index, quantile
from .likelihood import MultiSampleData, mixture_weights
from .optimizer import DrmFit, FitOptions, fit_mele

__all__ = [
    "FunctionalSpec",
    "BootstrapSummary",
    "resample",
    "evaluate_functionals",
    "bootstrap_run",
    "percentile_ci",
]

_KINDS = ("theta", "cdf_at", "quantile_at", "dominance")


@dataclass(frozen=True)
class FunctionalSpec:
    """A scalar functional of the fitted model.

    Kinds and parameters:

    * ``theta``        -- component (r, s) of the parameter block,
      group r in 1..m, coordinate s in 1..d (both 1-based, matching the
      usual theta_{rs} table layout);
    * ``cdf_at``       -- F_r(x) for group r in 0..m;
    * ``quantile_at``  -- Q_r(p) for p in (0, 1);
    * ``dominance``    -- dominance index of group r over group s.
    """

    kind: str
    r: int
    s: int | None = None
    x: float | None = None
    p: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind == "theta" and (self.s is None or self.r < 1 or self.s < 1):
            raise ValueError("theta functional needs group r>=1 and coordinate s>=1")
        if self.kind == "cdf_at" and (self.x is None or not np.isfinite(self.x)):
            raise ValueError("cdf_at functional needs a finite evaluation point x")
        if self.kind == "quantile_at" and (
            self.p is None or not 0.0 < self.p < 1.0
        ):
            raise ValueError("quantile_at functional needs p in (0, 1)")
        if self.kind == "dominance" and (self.s is None or self.s == self.r):
            raise ValueError("dominance functional needs two distinct groups")

    @classmethod
    def theta(cls, r: int, s: int) -> "FunctionalSpec":
        return cls("theta", r=r, s=s)

    @classmethod
    def cdf(cls, r: int, x: float) -> "FunctionalSpec":
        return cls("cdf_at", r=r, x=float(x))

    @classmethod
    def quantile(cls, r: int, p: float) -> "FunctionalSpec":
        return cls("quantile_at", r=r, p=float(p))

    @classmethod
    def dominance(cls, r: int, s: int) -> "FunctionalSpec":
        return cls("dominance", r=r, s=s)

    @classmethod
    def parse(cls, text: str) -> "FunctionalSpec":
        """Parse CLI notation: ``theta:R,S``, ``cdf:R@X``,
        ``quantile:R@P``, ``dominance:R,S``."""
        try:
            kind, _, rest = text.partition(":")
            kind = kind.strip().lower()
            if kind == "theta":
                r, s = (int(t) for t in rest.split(","))
                return cls.theta(r, s)
            if kind == "cdf":
                r, x = rest.split("@")
                return cls.cdf(int(r), float(x))
            if kind == "quantile":
                r, p = rest.split("@")
                return cls.quantile(int(r), float(p))
            if kind == "dominance":
                r, s = (int(t) for t in rest.split(","))
                return cls.dominance(r, s)
        except (ValueError, TypeError) as exc:
            raise ValueError(f"cannot parse functional {text!r}: {exc}") from None
        raise ValueError(f"unknown functional kind in {text!r}")

    @property
    def label(self) -> str:
        if self.kind == "theta":
            return f"theta[{self.r},{self.s}]"
        if self.kind == "cdf_at":
            return f"F{self.r}({self.x:g})"
        if self.kind == "quantile_at":
            return f"Q{self.r}({self.p:g})"
        return f"gamma({self.r},{self.s})"

    def validate_against(self, data: MultiSampleData):
        m, d = data.m, data.d
        if self.kind == "theta":
            if not (1 <= self.r <= m and 1 <= self.s <= d):
                raise ValueError(f"{self.label}: indices outside 1..{m} x 1..{d}")
        elif self.kind == "dominance":
            if not (0 <= self.r <= m and 0 <= self.s <= m):
                raise ValueError(f"{self.label}: group outside 0..{m}")
        else:
            if not 0 <= self.r <= m:
                raise ValueError(f"{self.label}: group outside 0..{m}")

    def cdf_groups(self) -> tuple[int, ...]:
        """Groups whose CDF estimate this functional needs."""
        if self.kind == "theta":
            return ()
        if self.kind == "dominance":
            return (self.r, self.s)
        return (self.r,)


@dataclass(frozen=True)
class BootstrapSummary:
    """Replicate values and percentile CIs for one functional.

    ``replicate_index`` maps each entry of ``replicates`` back to its
    original replicate number, for audit trails.
    """

    functional: FunctionalSpec
    xi_hat: float
    replicates: np.ndarray
    B_requested: int
    B_failed: int
    seed: int
    ci: dict[float, tuple[float, float]] = field(default_factory=dict)
    notes: tuple[str, ...] = ()
    replicate_index: np.ndarray | None = None


def resample(data: MultiSampleData, rng: np.random.Generator) -> MultiSampleData:
    """Within-group resampling with replacement; group sizes preserved
    exactly and basis rows gathered, never re-evaluated."""
    n = data.n
    idx = np.empty(n, dtype=np.int64)
    for k in range(data.m + 1):
        lo = int(data.offsets[k])
        hi = int(data.offsets[k + 1])
        idx[lo:hi] = rng.integers(lo, hi, size=hi - lo)
    return data.gather(idx)


def _cdf_table(fit: DrmFit, groups: tuple[int, ...]) -> dict[int, StepCdf]:
    """Step CDFs for several groups off one shared sort of the pooled
    values (they all live on the same support)."""
    data = fit.data
    _, W = mixture_weights(fit.theta_hat, data)
    order = np.argsort(data.values, kind="stable")
    v = data.values[order]
    first = np.empty(len(v), dtype=bool)
    first[0] = True
    first[1:] = v[1:] != v[:-1]
    starts = np.flatnonzero(first)
    support = v[starts]
    out = {}
    for r in groups:
        w = W[order, r] / data.sizes[r]
        jumps = np.add.reduceat(w, starts)
        cdf = StepCdf(support, jumps, np.cumsum(jumps))
        if abs(cdf.total_mass - 1.0) > 1e-6:
            raise FitError(
                f"group {r} CDF mass {cdf.total_mass} departs from 1"
            )
        out[r] = cdf
    return out


class _EvalPlan:
    """Validated evaluation recipe for a fixed functional list, reusable
    across many replicate fits of same-shaped data."""

    def __init__(self, functionals, data: MultiSampleData):
        self.functionals = list(functionals)
        for fn in self.functionals:
            fn.validate_against(data)
        self.needed = tuple(
            sorted({r for fn in self.functionals for r in fn.cdf_groups()})
        )

    def __call__(self, fit: DrmFit) -> np.ndarray:
        if not fit.converged:
            raise FitError("fit did not converge; refusing to evaluate functionals")
        cdfs = _cdf_table(fit, self.needed) if self.needed else {}
        out = np.empty(len(self.functionals))
        for j, fn in enumerate(self.functionals):
            if fn.kind == "theta":
                out[j] = fit.theta_hat[fn.r - 1, fn.s - 1]
            elif fn.kind == "cdf_at":
                out[j] = cdfs[fn.r].eval(fn.x)
            elif fn.kind == "quantile_at":
                out[j] = quantile(cdfs[fn.r], fn.p)
            else:
                out[j] = dominance_index(cdfs[fn.r], cdfs[fn.s])
        return out


def evaluate_functionals(fit: DrmFit, functionals) -> np.ndarray:
    """Evaluate a list of functionals on one fit, sharing CDF work."""
    return _EvalPlan(functionals, fit.data)(fit)


def _replicate_batch(data, theta_hat, functionals, seed, indices):
    """Run a batch of replicates; returns (values, ok) keyed to indices."""
    values = np.full((len(indices), len(functionals)), np.nan)
    ok = np.zeros(len(indices), dtype=bool)
    opts = FitOptions(warm_start=theta_hat)
    plan = _EvalPlan(functionals, data)
    for row, b in enumerate(indices):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(int(b),)))
        )
        star = resample(data, rng)
        try:
            refit = fit_mele(star, opts)
        except FitError:
            continue
        if not refit.converged:
            continue
        try:
            values[row] = plan(refit)
        except FitError:
            continue
        ok[row] = True
    return values, ok


def bootstrap_run(
    data: MultiSampleData,
    fit: DrmFit,
    functionals,
    B: int,
    seed: int,
    alphas=(0.05,),
    workers: int = 1,
) -> list[BootstrapSummary]:
    """Resample, refit and evaluate; one summary per functional.

    Failed refits (non-convergence or degenerate resamples) are dropped
    and counted; above 5% failures the summaries carry a reliability note,
    and above 50% the run aborts because the data is pathologically
    unstable.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    if not fit.converged:
        raise FitError("original fit did not converge")
    functionals = list(functionals)
    if not functionals:
        raise ValueError("at least one functional required")
    xi_hat = evaluate_functionals(fit, functionals)

    all_idx = np.arange(B)
    if workers and workers > 1:
        chunk = max(1, math.ceil(B / (workers * 4)))
        batches = [all_idx[i : i + chunk] for i in range(0, B, chunk)]
        values = np.full((B, len(functionals)), np.nan)
        ok = np.zeros(B, dtype=bool)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(
                    _replicate_batch, data, fit.theta_hat, functionals, seed, idx
                )
                for idx in batches
            ]
            for idx, fut in zip(batches, futures):
                vals, oks = fut.result()
                values[idx] = vals
                ok[idx] = oks
    else:
        values, ok = _replicate_batch(data, fit.theta_hat, functionals, seed, all_idx)

    n_failed = int(B - ok.sum())
    if n_failed > 0.5 * B:
        raise BootstrapError(
            f"{n_failed}/{B} bootstrap refits failed; data too unstable"
        )
    notes = ()
    if n_failed > 0.05 * B:
        notes = (f"{n_failed}/{B} replicates failed; intervals may be unreliable",)

    ok_index = np.flatnonzero(ok)
    summaries = []
    for j, fn in enumerate(functionals):
        summary = BootstrapSummary(
            functional=fn,
            xi_hat=float(xi_hat[j]),
            replicates=values[ok, j].copy(),
            B_requested=B,
            B_failed=n_failed,
            seed=seed,
            notes=notes,
            replicate_index=ok_index,
        )
        for alpha in alphas:
            summary.ci[alpha] = percentile_ci(summary, alpha)
        summaries.append(summary)
    return summaries


def _order_stat(sorted_diffs: np.ndarray, beta: float) -> float:
    """Empirical beta-quantile as an order statistic of the differences.

    Lower tail takes the ceil(beta*B)-th smallest; the upper tail uses the
    mirrored rule (ceil((1-beta)*B)-th largest) so that paired tails are
    symmetric order statistics.  The 1e-9 slack keeps exact multiples of
    1/B from rounding to the neighbouring rank.
    """
    B = len(sorted_diffs)
    if beta <= 0.5:
        k = math.ceil(beta * B - 1e-9)
    else:
        k = B + 1 - math.ceil((1.0 - beta) * B - 1e-9)
    k = min(max(k, 1), B)
    return float(sorted_diffs[k - 1])


def percentile_ci(summary: BootstrapSummary, alpha: float) -> tuple[float, float]:
    """Percentile interval at level 1-alpha from a replicate summary."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if len(summary.replicates) < 2:
        raise BootstrapError("need at least 2 successful replicates for a CI")
    diffs = np.sort(summary.replicates - summary.xi_hat)
    lo = summary.xi_hat - _order_stat(diffs, 1.0 - alpha / 2.0)
    hi = summary.xi_hat - _order_stat(diffs, alpha / 2.0)
    return (float(lo), float(hi))
