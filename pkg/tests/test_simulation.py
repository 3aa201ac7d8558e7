"""Scenario truth values, data generation and the coverage harness."""

import dataclasses
import json
import math

import numpy as np
import pytest

from drmboot import (
    BasisSpec,
    FunctionalSpec,
    aggregate_coverage,
    coverage_experiment,
    generate,
    scenario_by_name,
    true_theta,
    true_value,
)
from drmboot.simulation import (
    Family,
    ScenarioSpec,
    cdf_targets,
    gamma_scenario,
    normal_scenario,
    quantile_targets,
    theta_targets,
)


class TestScenarios:
    def test_gamma_design(self):
        spec = gamma_scenario()
        assert spec.m == 4
        assert spec.sizes == (500, 450, 550, 650, 675)
        assert spec.basis.tokens == ("const", "x", "log")
        assert [f.kind for f in spec.families] == ["gamma"] * 5

    def test_normal_design(self):
        spec = normal_scenario()
        assert spec.m == 6
        assert spec.sizes == (300, 320, 340, 330, 350, 370, 400)
        assert spec.basis.tokens == ("const", "x", "x^2")

    def test_registry(self):
        assert scenario_by_name("gamma1").name == "gamma1"
        assert scenario_by_name("NORMAL2").name == "normal2"
        with pytest.raises(ValueError):
            scenario_by_name("weibull")


class TestTrueTheta:
    def test_gamma_group1_coefficients(self):
        """Equal shapes: the log-term coefficient vanishes and the linear
        term is 1/1.5 - 1/1.4."""
        tt = true_theta(gamma_scenario())
        np.testing.assert_allclose(tt[0, 1], 1 / 1.5 - 1 / 1.4, rtol=1e-15)
        assert tt[0, 2] == 0.0

    def test_normal_group1_quadratic_coefficient(self):
        tt = true_theta(normal_scenario())
        np.testing.assert_allclose(tt[0, 2], 0.25, rtol=1e-15)

    def test_identical_families_give_zero(self):
        fam = Family("gamma", 5.0, 1.5)
        spec = ScenarioSpec(
            "same",
            (fam, fam),
            (10, 10),
            BasisSpec.from_tokens(["const", "x", "log"]),
        )
        np.testing.assert_array_equal(true_theta(spec), np.zeros((1, 3)))

    def test_density_ratio_identity(self):
        """exp(theta_k' q(x)) equals the density ratio f_k / f_0."""
        for spec in (gamma_scenario(), normal_scenario()):
            tt = true_theta(spec)
            from drmboot import basis_matrix

            x = np.linspace(2.0, 14.0, 7)
            Q = basis_matrix(spec.basis, x)
            for k in range(1, spec.m + 1):
                ratio = spec.families[k].dist.pdf(x) / spec.families[0].dist.pdf(x)
                np.testing.assert_allclose(np.exp(Q @ tt[k - 1]), ratio, rtol=1e-10)

    def test_ratio_outside_span_rejected(self):
        mixed = ScenarioSpec(
            "mixed",
            (Family("gamma", 5.0, 1.5), Family("normal", 11.0, 1.0)),
            (10, 10),
            BasisSpec.from_tokens(["const", "x", "log"]),
        )
        with pytest.raises(ValueError):
            true_theta(mixed)
        narrow = ScenarioSpec(
            "narrow",
            (Family("gamma", 5.0, 1.5), Family("gamma", 6.0, 1.5)),
            (10, 10),
            BasisSpec.from_tokens(["const", "x"]),
        )
        with pytest.raises(ValueError):
            true_theta(narrow)


class TestGenerate:
    def test_deterministic(self):
        spec = gamma_scenario()
        a = generate(spec, 123)
        b = generate(spec, 123)
        np.testing.assert_array_equal(a.values, b.values)

    def test_sizes_exact(self):
        spec = normal_scenario()
        data = generate(spec, 5)
        np.testing.assert_array_equal(data.sizes, spec.sizes)

    def test_gamma_moment_oracle(self):
        """Baseline gamma mean is shape * scale = 7.5."""
        spec = dataclasses.replace(gamma_scenario(), sizes=(10_000, 1, 1, 1, 1))
        data = generate(spec, 99)
        x = data.group(0)
        se = x.std(ddof=1) / math.sqrt(len(x))
        assert abs(x.mean() - 7.5) <= 3 * se

    def test_normal_moment_oracle(self):
        """Baseline normal variance is 1."""
        spec = dataclasses.replace(
            normal_scenario(), sizes=(10_000, 1, 1, 1, 1, 1, 1)
        )
        data = generate(spec, 100)
        x = data.group(0)
        var = x.var(ddof=1)
        se = var * math.sqrt(2.0 / (len(x) - 1))
        assert abs(var - 1.0) <= 3 * se


class TestTrueValue:
    def test_theta_cdf_quantile_targets(self):
        spec = gamma_scenario()
        tt = true_theta(spec)
        assert true_value(spec, FunctionalSpec.theta(2, 3)) == tt[1, 2]
        x = 7.0
        np.testing.assert_allclose(
            true_value(spec, FunctionalSpec.cdf(1, x)),
            spec.families[1].dist.cdf(x),
        )
        np.testing.assert_allclose(
            true_value(spec, FunctionalSpec.quantile(4, 0.9)),
            spec.families[4].dist.ppf(0.9),
        )

    def test_dominance_scale_ordered_gammas(self):
        """A pure scale increase dominates at every level."""
        spec = gamma_scenario()
        assert true_value(spec, FunctionalSpec.dominance(0, 1)) >= 1 - 1e-5
        assert true_value(spec, FunctionalSpec.dominance(1, 0)) <= 1e-5

    def test_dominance_single_crossing_normals(self):
        """Same mean, larger variance: the quantile curves cross once at
        the median, so the index is exactly 1/2."""
        spec = ScenarioSpec(
            "cross",
            (Family("normal", 0.0, 1.0), Family("normal", 0.0, 2.0)),
            (10, 10),
            BasisSpec.from_tokens(["const", "x", "x^2"]),
        )
        got = true_value(spec, FunctionalSpec.dominance(0, 1))
        np.testing.assert_allclose(got, 0.5, atol=1e-5)

    def test_dominance_identical_is_zero(self):
        fam = Family("normal", 1.0, 1.0)
        spec = ScenarioSpec(
            "same2", (fam, fam), (5, 5), BasisSpec.from_tokens(["const", "x", "x^2"])
        )
        assert true_value(spec, FunctionalSpec.dominance(0, 1)) == 0.0


class TestTargetBuilders:
    def test_theta_targets_cover_block(self):
        spec = gamma_scenario()
        fns = theta_targets(spec)
        assert len(fns) == spec.m * spec.basis.d
        assert fns[0] == FunctionalSpec.theta(1, 1)
        assert fns[-1] == FunctionalSpec.theta(4, 3)

    def test_quantile_and_cdf_targets(self):
        spec = gamma_scenario()
        qs = quantile_targets(spec, [0.5])
        assert len(qs) == spec.m + 1
        cs = cdf_targets(spec, [0.5])
        want_x = float(spec.families[0].dist.ppf(0.5))
        assert all(fn.x == want_x for fn in cs)


class TestAggregateCoverage:
    def test_zero_width_intervals_never_cover(self):
        """Degenerate CIs at the estimate miss a continuous-valued truth."""
        truths = [0.3, 1.7]
        rows = [[(0.31, 0.31), (1.69, 1.69)] for _ in range(10)]
        cov, n = aggregate_coverage(rows, truths)
        assert n == 10
        np.testing.assert_array_equal(cov, [0.0, 0.0])

    def test_infinite_intervals_always_cover(self):
        truths = [0.3, 1.7]
        rows = [[(-np.inf, np.inf), (-np.inf, np.inf)] for _ in range(10)]
        cov, _ = aggregate_coverage(rows, truths)
        np.testing.assert_array_equal(cov, [1.0, 1.0])

    def test_failed_runs_excluded(self):
        truths = [0.0]
        rows = [[(-1.0, 1.0)], None, [(0.5, 1.0)], None]
        cov, n = aggregate_coverage(rows, truths)
        assert n == 2
        np.testing.assert_array_equal(cov, [0.5])

    def test_all_failed(self):
        cov, n = aggregate_coverage([None, None], [0.0])
        assert n == 0
        assert np.isnan(cov).all()


@pytest.fixture(scope="module")
def small_spec():
    return ScenarioSpec(
        "small",
        (Family("gamma", 5.0, 1.5), Family("gamma", 5.0, 1.2)),
        (60, 70),
        BasisSpec.from_tokens(["const", "x"]),
    )


class TestCoverageExperiment:
    def test_deterministic_across_workers(self, small_spec):
        fns = [FunctionalSpec.theta(1, 2), FunctionalSpec.quantile(0, 0.5)]
        a = coverage_experiment(small_spec, fns, n_runs=6, B=29, seed=3, workers=1)
        b = coverage_experiment(small_spec, fns, n_runs=6, B=29, seed=3, workers=2)
        np.testing.assert_array_equal(a.coverage, b.coverage)
        assert a.to_json() == b.to_json()

    def test_report_contents(self, small_spec, tmp_path):
        fns = [FunctionalSpec.theta(1, 1)]
        rep = coverage_experiment(small_spec, fns, n_runs=5, B=19, seed=1, workers=1)
        assert rep.n_runs == 5
        assert 0.0 <= rep.coverage[0] <= 1.0
        n_ok = rep.n_runs - rep.n_failed
        np.testing.assert_allclose(
            rep.mc_se[0],
            math.sqrt(rep.coverage[0] * (1 - rep.coverage[0]) / n_ok),
        )
        payload = json.loads(rep.to_json())
        assert payload["targets"][0]["label"] == "theta[1,1]"
        csv_path = tmp_path / "rep.csv"
        rep.to_csv(csv_path)
        rows = csv_path.read_text().strip().splitlines()
        assert rows[0] == "target,F0,F1"
        assert rows[1].startswith("theta[s=1],")

    def test_empty_targets_rejected(self, small_spec):
        with pytest.raises(ValueError):
            coverage_experiment(small_spec, [], n_runs=2, B=9, seed=0)
