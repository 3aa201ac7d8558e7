"""Scenario generators and Monte Carlo coverage experiments.

Two built-in scenarios probe distinct shapes and tails: a five-group
Gamma design with basis (1, x, log x) and a seven-group Normal design
with basis (1, x, x^2).  In both, the log density ratio between any group
and the baseline lies exactly in the basis span, so the true parameter
block, distribution values and quantiles are available in closed form and
empirical CI coverage can be scored against them.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.stats

from .basis import BasisSpec
from .bootstrap import BootstrapError, FunctionalSpec, bootstrap_run
from .errors import FitError
from .likelihood import MultiSampleData
from .optimizer import fit_mele

__all__ = [
    "Family",
    "ScenarioSpec",
    "gamma_scenario",
    "normal_scenario",
    "scenario_by_name",
    "true_theta",
    "true_value",
    "generate",
    "theta_targets",
    "quantile_targets",
    "cdf_targets",
    "coverage_experiment",
    "aggregate_coverage",
    "CoverageReport",
]


@dataclass(frozen=True)
class Family:
    """One group's sampling distribution.

    ``gamma`` uses (shape, scale); ``normal`` uses (mean, variance).
    """

    kind: str
    p1: float
    p2: float

    def __post_init__(self):
        if self.kind not in ("gamma", "normal"):
            raise ValueError(f"unknown family {self.kind!r}")
        if self.p2 <= 0:
            raise ValueError("scale/variance must be positive")
        if self.kind == "gamma" and self.p1 <= 0:
            raise ValueError("gamma shape must be positive")

    @property
    def dist(self):
        if self.kind == "gamma":
            return scipy.stats.gamma(self.p1, scale=self.p2)
        return scipy.stats.norm(self.p1, math.sqrt(self.p2))

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gamma":
            return rng.gamma(self.p1, self.p2, size)
        return rng.normal(self.p1, math.sqrt(self.p2), size)


@dataclass(frozen=True)
class ScenarioSpec:
    """A data-generating design: families, group sizes and model basis."""

    name: str
    families: tuple[Family, ...]
    sizes: tuple[int, ...]
    basis: BasisSpec

    def __post_init__(self):
        if len(self.families) != len(self.sizes):
            raise ValueError("one size per family required")
        if len(self.families) < 2:
            raise ValueError("need a baseline plus at least one group")

    @property
    def m(self) -> int:
        return len(self.families) - 1


def gamma_scenario() -> ScenarioSpec:
    """Five Gamma populations with shared support on (0, inf)."""
    shapes = (5, 5, 6, 6, 7)
    scales = (1.5, 1.4, 1.3, 1.2, 1.1)
    return ScenarioSpec(
        name="gamma1",
        families=tuple(Family("gamma", a, b) for a, b in zip(shapes, scales)),
        sizes=(500, 450, 550, 650, 675),
        basis=BasisSpec.from_tokens(["const", "x", "log"]),
    )


def normal_scenario() -> ScenarioSpec:
    """Seven Normal populations with increasing means and variances."""
    means = (11.0, 11.5, 12.0, 12.5, 13.0, 13.5, 14.0)
    variances = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0)
    return ScenarioSpec(
        name="normal2",
        families=tuple(Family("normal", mu, v) for mu, v in zip(means, variances)),
        sizes=(300, 320, 340, 330, 350, 370, 400),
        basis=BasisSpec.from_tokens(["const", "x", "x^2"]),
    )


_SCENARIOS = {"gamma1": gamma_scenario, "normal2": normal_scenario}


def scenario_by_name(name: str) -> ScenarioSpec:
    try:
        return _SCENARIOS[name.lower()]()
    except KeyError:
        raise ValueError(
            f"unknown scenario {name!r}; choose from {sorted(_SCENARIOS)}"
        ) from None


def _ratio_coefficients(f0: Family, fk: Family, basis: BasisSpec) -> np.ndarray:
    """Coefficients of log(f_k / f_0) in the basis, or raise if the ratio
    falls outside its span."""
    coeffs: dict[str, float] = {}
    if f0.kind == "gamma" and fk.kind == "gamma":
        a0, b0 = f0.p1, f0.p2
        ak, bk = fk.p1, fk.p2
        coeffs["log"] = ak - a0
        coeffs["x"] = 1.0 / b0 - 1.0 / bk
        coeffs["const"] = (math.lgamma(a0) - math.lgamma(ak)) + (
            a0 * math.log(b0) - ak * math.log(bk)
        )
    elif f0.kind == "normal" and fk.kind == "normal":
        mu0, v0 = f0.p1, f0.p2
        muk, vk = fk.p1, fk.p2
        coeffs["x^2"] = 0.5 * (1.0 / v0 - 1.0 / vk)
        coeffs["x"] = muk / vk - mu0 / v0
        coeffs["const"] = (
            0.5 * math.log(v0 / vk) + mu0**2 / (2 * v0) - muk**2 / (2 * vk)
        )
    else:
        raise ValueError(
            f"log density ratio of {fk.kind} over {f0.kind} is not in any "
            "whitelisted basis span"
        )
    theta = np.zeros(basis.d)
    theta[0] = coeffs.pop("const")
    for tok, val in coeffs.items():
        if val == 0.0:
            continue
        if tok not in basis.tokens:
            raise ValueError(
                f"log density ratio needs basis term {tok!r} which "
                f"{basis.tokens} does not provide"
            )
        theta[basis.tokens.index(tok)] = val
    return theta


def true_theta(spec: ScenarioSpec) -> np.ndarray:
    """Analytic parameter block (m x d) implied by the scenario families."""
    f0 = spec.families[0]
    return np.vstack(
        [_ratio_coefficients(f0, fk, spec.basis) for fk in spec.families[1:]]
    )


def generate(spec: ScenarioSpec, seed) -> MultiSampleData:
    """Draw one dataset; ``seed`` may be an int, SeedSequence or Generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    groups = [fam.draw(rng, size) for fam, size in zip(spec.families, spec.sizes)]
    return MultiSampleData.from_groups(groups, spec.basis)


def _true_dominance(dist_r, dist_s) -> float:
    """Measure of {p : Q_r(p) > Q_s(p)} from the true quantile functions,
    with sign changes refined by root finding."""
    eps = 1e-6
    grid = np.linspace(eps, 1.0 - eps, 2049)
    diff = dist_r.ppf(grid) - dist_s.ppf(grid)

    def f(p):
        return dist_r.ppf(p) - dist_s.ppf(p)

    total = 0.0
    if diff[0] > 0:
        total += eps  # boundary sliver carries the adjacent sign
    if diff[-1] > 0:
        total += eps
    for i in range(len(grid) - 1):
        a, b = grid[i], grid[i + 1]
        da, db = diff[i], diff[i + 1]
        if da > 0 and db > 0:
            total += b - a
        elif da > 0 or db > 0:
            if da * db < 0:
                c = scipy.optimize.brentq(f, a, b, xtol=1e-12)
                total += (c - a) if da > 0 else (b - c)
            else:
                total += 0.5 * (b - a)  # zero endpoint, split the cell
    return total


def true_value(spec: ScenarioSpec, fn: FunctionalSpec) -> float:
    """Closed-form target value for a functional under the scenario."""
    if fn.kind == "theta":
        return float(true_theta(spec)[fn.r - 1, fn.s - 1])
    if fn.kind == "cdf_at":
        return float(spec.families[fn.r].dist.cdf(fn.x))
    if fn.kind == "quantile_at":
        return float(spec.families[fn.r].dist.ppf(fn.p))
    return float(_true_dominance(spec.families[fn.r].dist, spec.families[fn.s].dist))


def theta_targets(spec: ScenarioSpec) -> list[FunctionalSpec]:
    """All parameter components theta_{rs}."""
    d = spec.basis.d
    return [
        FunctionalSpec.theta(r, s)
        for r in range(1, spec.m + 1)
        for s in range(1, d + 1)
    ]


def quantile_targets(spec: ScenarioSpec, ps) -> list[FunctionalSpec]:
    """Q_r(p) for every group and every requested level."""
    return [
        FunctionalSpec.quantile(r, p) for p in ps for r in range(spec.m + 1)
    ]


def cdf_targets(spec: ScenarioSpec, ps) -> list[FunctionalSpec]:
    """F_r(x) for every group, anchored at true baseline quantiles
    x = Q_0(p)."""
    q0 = spec.families[0].dist.ppf
    return [
        FunctionalSpec.cdf(r, float(q0(p))) for p in ps for r in range(spec.m + 1)
    ]


def _run_seed_pair(seed: int, i: int):
    data_ss = np.random.SeedSequence(entropy=seed, spawn_key=(i, 0))
    boot_seed = int(
        np.random.SeedSequence(entropy=seed, spawn_key=(i, 1)).generate_state(
            1, np.uint64
        )[0]
    )
    return data_ss, boot_seed


def _coverage_batch(spec, targets, B, alpha, seed, indices):
    """CI endpoints for a batch of Monte Carlo runs; None marks a failed
    run (fit or bootstrap did not complete)."""
    out = []
    for i in indices:
        data_ss, boot_seed = _run_seed_pair(seed, int(i))
        data = generate(spec, np.random.default_rng(data_ss))
        try:
            fit = fit_mele(data)
            if not fit.converged:
                out.append(None)
                continue
            summaries = bootstrap_run(
                data, fit, targets, B, boot_seed, alphas=(alpha,), workers=1
            )
        except (FitError, BootstrapError):
            out.append(None)
            continue
        out.append([s.ci[alpha] for s in summaries])
    return out


def aggregate_coverage(ci_rows, truths) -> tuple[np.ndarray, int]:
    """Fraction of successful runs whose CI contains the truth, per target.

    ``ci_rows`` holds one list of (lo, hi) pairs per run, or None for a
    failed run.
    """
    truths = np.asarray(truths, dtype=np.float64)
    hits = np.zeros(len(truths))
    n_success = 0
    for row in ci_rows:
        if row is None:
            continue
        n_success += 1
        for j, (lo, hi) in enumerate(row):
            if lo <= truths[j] <= hi:
                hits[j] += 1
    if n_success == 0:
        return np.full(len(truths), np.nan), 0
    return hits / n_success, n_success


@dataclass(frozen=True)
class CoverageReport:
    """Empirical CI coverage over Monte Carlo runs, with MC uncertainty."""

    scenario: str
    targets: tuple[FunctionalSpec, ...]
    truths: np.ndarray
    coverage: np.ndarray
    n_runs: int
    n_failed: int
    B: int
    alpha: float
    seed: int

    @property
    def mc_se(self) -> np.ndarray:
        n = max(self.n_runs - self.n_failed, 1)
        return np.sqrt(self.coverage * (1.0 - self.coverage) / n)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "nominal": 1.0 - self.alpha,
            "n_runs": self.n_runs,
            "n_failed": self.n_failed,
            "B": self.B,
            "seed": self.seed,
            "targets": [
                {
                    "label": fn.label,
                    "truth": float(t),
                    "coverage": float(c),
                    "mc_se": float(se),
                }
                for fn, t, c, se in zip(
                    self.targets, self.truths, self.coverage, self.mc_se
                )
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self, path):
        """Table layout: one row per target parameter, one column per
        group; dominance targets land in the column of their first group."""
        m = 0
        for fn in self.targets:
            m = max(m, fn.r, fn.s if fn.kind == "dominance" else 0)
        columns = [f"F{r}" for r in range(m + 1)]
        rows: dict[str, dict[str, float]] = {}
        order: list[str] = []
        for fn, c in zip(self.targets, self.coverage):
            if fn.kind == "theta":
                key = f"theta[s={fn.s}]"
            elif fn.kind == "quantile_at":
                key = f"Q(p={fn.p:g})"
            elif fn.kind == "cdf_at":
                key = f"F(x={fn.x:g})"
            else:
                key = f"gamma(vs F{fn.s})"
            if key not in rows:
                rows[key] = {}
                order.append(key)
            rows[key][f"F{fn.r}"] = float(c)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["target"] + columns)
            for key in order:
                writer.writerow(
                    [key]
                    + [
                        repr(rows[key][col]) if col in rows[key] else ""
                        for col in columns
                    ]
                )


def coverage_experiment(
    spec: ScenarioSpec,
    targets,
    n_runs: int,
    B: int,
    alpha: float = 0.05,
    seed: int = 0,
    workers: int | None = None,
) -> CoverageReport:
    """Monte Carlo coverage of percentile CIs for the given targets.

    Every run generates a fresh dataset, fits, bootstraps, and scores each
    CI against the closed-form truth.  Run RNG streams are keyed by run
    index, so reports are identical for any worker count.
    """
    targets = list(targets)
    if not targets:
        raise ValueError("at least one target required")
    truths = np.array([true_value(spec, fn) for fn in targets])
    indices = np.arange(n_runs)
    if workers and workers > 1:
        chunk = max(1, math.ceil(n_runs / (workers * 4)))
        batches = [indices[i : i + chunk] for i in range(0, n_runs, chunk)]
        ci_rows: list = [None] * n_runs
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_coverage_batch, spec, targets, B, alpha, seed, idx)
                for idx in batches
            ]
            for idx, fut in zip(batches, futures):
                for i, row in zip(idx, fut.result()):
                    ci_rows[i] = row
    else:
        ci_rows = _coverage_batch(spec, targets, B, alpha, seed, indices)

    coverage, n_success = aggregate_coverage(ci_rows, truths)
    return CoverageReport(
        scenario=spec.name,
        targets=tuple(targets),
        truths=truths,
        coverage=coverage,
        n_runs=n_runs,
        n_failed=n_runs - n_success,
        B=B,
        alpha=alpha,
        seed=seed,
    )
