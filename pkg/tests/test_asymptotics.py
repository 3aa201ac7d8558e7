"""Plug-in covariance objects: identities, fixtures and Monte Carlo oracles."""

import dataclasses

import numpy as np
import pytest

from drmboot import (
    build_S,
    cdf_covariance,
    cdf_covariance_grid,
    dual_logel_hessian,
    estimate_W,
    fit_mele,
    mixture_weights,
    param_covariance,
)
from drmboot.asymptotics import export_covariance_csv
from drmboot.estimators import cdf_estimate
from drmboot.simulation import gamma_scenario, generate, normal_scenario
from drmboot.basis import BasisSpec
from drmboot.likelihood import MultiSampleData
from helpers import identical_groups_data, random_dataset


class TestEstimateW:
    def test_equals_negated_scaled_hessian(self):
        rng = np.random.default_rng(31)
        data = random_dataset(rng)
        fit = fit_mele(data)
        W = estimate_W(fit)
        H = dual_logel_hessian(fit.theta_hat, data)
        assert np.abs(W + H / data.n).max() <= 1e-10

    def test_identical_groups_closed_form(self):
        """At the zero fit with m=1, W = rho_0 rho_1 / n * sum qq'."""
        data = identical_groups_data()
        fit = fit_mele(data)
        W = estimate_W(fit)
        closed = data.rho[0] * data.rho[1] * (data.Q.T @ data.Q) / data.n
        np.testing.assert_allclose(W, closed, rtol=1e-12, atol=1e-12)

    def test_positive_definite(self):
        rng = np.random.default_rng(32)
        data = random_dataset(rng)
        W = estimate_W(fit_mele(data))
        assert np.linalg.eigvalsh(W)[0] > 0

    def test_stabilizes_with_sample_size(self):
        """Independent W draws concentrate: doubling n shrinks the mean
        Frobenius distance between draws (by about 1/sqrt(2))."""
        spec = gamma_scenario()
        spec2 = dataclasses.replace(spec, sizes=tuple(2 * s for s in spec.sizes))
        d1, d2 = [], []
        for i in range(20):
            for s, ent, out in ((spec, 100, d1), (spec2, 200, d2)):
                Wa = estimate_W(
                    fit_mele(generate(s, np.random.SeedSequence(ent, spawn_key=(i, 0))))
                )
                Wb = estimate_W(
                    fit_mele(generate(s, np.random.SeedSequence(ent, spawn_key=(i, 1))))
                )
                out.append(np.linalg.norm(Wa - Wb))
        assert np.mean(d2) < np.mean(d1)


class TestBuildS:
    def test_two_group_example(self):
        np.testing.assert_array_equal(
            build_S([0.5, 0.5], 2), [[4.0, 0.0], [0.0, 0.0]]
        )

    def test_three_group_example(self):
        np.testing.assert_array_equal(
            build_S([1 / 3, 1 / 3, 1 / 3], 1), [[6.0, 3.0], [3.0, 6.0]]
        )

    def test_symmetric_and_sparse(self):
        rng = np.random.default_rng(33)
        rho = rng.dirichlet(np.ones(4))
        S = build_S(rho, 3)
        np.testing.assert_array_equal(S, S.T)
        mask = np.zeros_like(S, dtype=bool)
        mask[::3, ::3] = True
        assert (S[~mask] == 0).all()

    def test_validation(self):
        with pytest.raises(ValueError):
            build_S([0.7, 0.4], 2)
        with pytest.raises(ValueError):
            build_S([1.0], 2)


class TestParamCovariance:
    def test_subtraction_identity(self):
        rng = np.random.default_rng(34)
        data = random_dataset(rng)
        fit = fit_mele(data)
        C = param_covariance(fit)
        Winv = np.linalg.inv(estimate_W(fit))
        S = build_S(data.rho, data.d)
        np.testing.assert_allclose(C + S, Winv, rtol=0, atol=1e-10)

    def test_monte_carlo_oracle_small_design(self):
        """Sample covariance of the scaled estimation error matches the
        averaged plug-in on the diagonal (two equal normal groups)."""
        basis = BasisSpec.from_tokens(["const", "x"])
        draws, plugs = [], []
        for i in range(300):
            rng = np.random.default_rng(np.random.SeedSequence(55, spawn_key=(i,)))
            g0 = rng.normal(0.0, 1.0, 400)
            g1 = rng.normal(0.0, 1.0, 400)
            data = MultiSampleData.from_groups([g0, g1], basis)
            fit = fit_mele(data)
            draws.append(np.sqrt(data.n) * fit.theta_hat.ravel())
            plugs.append(np.diag(param_covariance(fit)))
        mc = np.var(np.array(draws), axis=0, ddof=1)
        plug = np.mean(plugs, axis=0)
        # the leading coordinate is first-order degenerate (truth 0)
        assert plug[0] == pytest.approx(0.0, abs=0.5)
        assert abs(mc[1] - plug[1]) / plug[1] <= 0.25


class TestCdfCovariance:
    def test_exactly_symmetric(self):
        rng = np.random.default_rng(36)
        data = random_dataset(rng)
        fit = fit_mele(data)
        xs = np.quantile(data.values, [0.2, 0.5, 0.8])
        for r in range(data.m + 1):
            for x in xs:
                for y in xs:
                    assert cdf_covariance(fit, r, x, y) == cdf_covariance(
                        fit, r, y, x
                    )

    def test_diagonal_nonnegative(self):
        rng = np.random.default_rng(37)
        data = random_dataset(rng)
        fit = fit_mele(data)
        for r in range(data.m + 1):
            for x in np.quantile(data.values, np.linspace(0.05, 0.95, 12)):
                assert cdf_covariance(fit, r, x, x) >= -1e-8

    def test_zero_fit_closed_form(self):
        """At the zero fit all plug-in integrals reduce to pooled-ECDF
        expressions."""
        data = identical_groups_data(n_per_group=20)
        fit = fit_mele(data)
        _, W = mixture_weights(fit.theta_hat, data)
        rho = data.rho
        Winv = np.linalg.inv(estimate_W(fit))
        cdf = cdf_estimate(fit, 1)
        for x, y in [(3.0, 5.0), (4.0, 4.0), (2.5, 6.0)]:
            lo, hi = min(x, y), max(x, y)
            F_lo, F_hi = cdf.eval(lo), cdf.eval(hi)
            sigma = (F_lo - F_lo * F_hi) / rho[1]
            a = (rho[1] - rho[1] ** 2) * F_lo
            mask_lo = data.values <= lo
            mask_hi = data.values <= hi
            w = rho[1] - rho[1] ** 2
            B_lo = w * data.Q[mask_lo].sum(axis=0) / data.n
            B_hi = w * data.Q[mask_hi].sum(axis=0) / data.n
            want = sigma - (a - B_lo @ Winv @ B_hi) / rho[1] ** 2
            got = cdf_covariance(fit, 1, x, y)
            np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)

    def test_saturates_beyond_support(self):
        """Past the support maximum both CDF terms freeze, so the
        covariance stops changing."""
        rng = np.random.default_rng(38)
        data = random_dataset(rng)
        fit = fit_mele(data)
        top = data.values.max()
        v1 = cdf_covariance(fit, 0, top, top)
        v2 = cdf_covariance(fit, 0, top + 5.0, top + 10.0)
        np.testing.assert_allclose(v1, v2, rtol=1e-12)

    def test_monte_carlo_oracle_normal_design(self):
        """Sample variance of the scaled CDF error at the baseline median
        matches the averaged plug-in within 25%."""
        spec = normal_scenario()
        n = sum(spec.sizes)
        x = float(spec.families[0].dist.ppf(0.5))
        vals = {0: [], 5: []}
        omegas = {0: [], 5: []}
        for i in range(500):
            data = generate(spec, np.random.SeedSequence(entropy=909, spawn_key=(i,)))
            fit = fit_mele(data)
            assert fit.converged
            for r in vals:
                truth = float(spec.families[r].dist.cdf(x))
                vals[r].append(np.sqrt(n) * (cdf_estimate(fit, r).eval(x) - truth))
                omegas[r].append(cdf_covariance(fit, r, x, x))
        for r in vals:
            mc = np.var(vals[r], ddof=1)
            plug = np.mean(omegas[r])
            assert abs(mc - plug) / plug <= 0.25

    def test_grid_and_csv_export(self, tmp_path):
        rng = np.random.default_rng(39)
        data = random_dataset(rng)
        fit = fit_mele(data)
        xs = np.quantile(data.values, [0.25, 0.5, 0.75])
        omega = cdf_covariance_grid(fit, 0, xs)
        np.testing.assert_array_equal(omega, omega.T)
        path = tmp_path / "omega.csv"
        export_covariance_csv(path, xs, omega)
        rows = path.read_text().strip().splitlines()
        assert len(rows) == 4
        got = float(rows[1].split(",")[1])
        assert got == omega[0, 0]
