import dataclasses
import math

import numpy as np
import pytest

from fourpl import (
    ConvergenceStatus,
    Dataset,
    EstimationCrash,
    FitOptions,
    ItemParameters,
    LatentWeights,
    Method,
    ModelKind,
    ModelSpec,
    em_expectation,
    em_maximisation,
    fit_em,
    fit_mle,
    fit_nls,
    fit_plf,
    generate_dataset,
    initial_values,
    log_likelihood,
    plf_step_asymptotes,
    plf_step_b,
    simple_truth,
)
from fourpl.model import ASYMPTOTE_MARGIN

EPS = ASYMPTOTE_MARGIN


def logistic_irls(X, y, tol=1e-12, max_iter=200):
    """Plain logistic regression by iteratively reweighted least squares.

    Independent oracle: no shared code with the estimators.
    """
    beta = np.zeros(X.shape[1])
    for _ in range(max_iter):
        eta = X @ beta
        mu = 1.0 / (1.0 + np.exp(-eta))
        w = mu * (1.0 - mu)
        WX = X * w[:, None]
        delta = np.linalg.solve(X.T @ WX, X.T @ (y - mu))
        beta = beta + delta
        if np.max(np.abs(delta)) < tol:
            break
    return beta


@pytest.fixture(scope="module")
def simple_data():
    return generate_dataset(simple_truth(), ModelKind.SIMPLE, 1500, seed=31, replication=0)


@pytest.fixture(scope="module")
def simple_init(simple_data):
    init, _ = initial_values(simple_data, ModelSpec.simple())
    return init


class TestFitDeterminism:
    @pytest.mark.parametrize("fitter", [fit_nls, fit_mle, fit_em, fit_plf])
    def test_bit_identical_results(self, fitter, simple_data, simple_init):
        r1 = fitter(simple_data, simple_init)
        r2 = fitter(simple_data, simple_init)
        assert r1.status == r2.status
        assert r1.iterations == r2.iterations
        assert r1.objective == r2.objective
        assert r1.log_likelihood == r2.log_likelihood
        assert np.array_equal(r1.params.flat, r2.params.flat)


class TestFitNls:
    def test_descends_from_init(self, simple_data, simple_init):
        from fourpl import rss

        res = fit_nls(simple_data, simple_init)
        assert res.status is ConvergenceStatus.CONVERGED
        assert res.objective <= rss(simple_init, simple_data)

    def test_exactly_representable_pattern(self):
        # Steep logistic truth: responses deterministic in x, so some
        # parameter vector reproduces them almost exactly.
        n = 60
        x = np.linspace(-2, 2, n)
        y = (x > 0).astype(float)
        data = Dataset(
            y=y, x_design=np.column_stack([np.ones(n), x]), z_design=np.ones((n, 1))
        )
        init = ItemParameters(np.array([0.0, 1.0]), np.array([0.1]), np.array([0.9]))
        from fourpl import rss

        res = fit_nls(data, init)
        assert res.objective <= rss(init, data)

    def test_weighted_variant_runs(self, simple_data, simple_init):
        res = fit_nls(simple_data, simple_init, FitOptions(weighted_nls=True))
        assert res.status is ConvergenceStatus.CONVERGED
        assert res.objective_label == "rss"

    def test_monotone_objective_trace(self, simple_data, simple_init):
        vals = []
        fit_nls(simple_data, simple_init, on_step=lambda x, f: vals.append(f))
        assert np.all(np.diff(vals) <= 1e-12)


class TestFitMle:
    def test_matches_logistic_oracle_on_boundary_pinned_data(self):
        # Steep plain-logistic truth pushes the asymptote estimates onto
        # the feasibility boundary; the slope block then solves the plain
        # logistic score equations to within the boundary margin.
        rng = np.random.default_rng(12)
        n = 800
        x = rng.standard_normal(n)
        eta = 3.0 * x
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
        data = Dataset(
            y=y, x_design=np.column_stack([np.ones(n), x]), z_design=np.ones((n, 1))
        )
        init = ItemParameters(np.array([0.0, 2.0]), np.array([EPS]), np.array([1 - EPS]))
        res = fit_mle(data, init)
        assert res.converged
        assert res.at_boundary  # c pinned at eps, d at 1 - eps
        oracle = logistic_irls(data.x_design, y)
        np.testing.assert_allclose(res.params.b, oracle, atol=1e-4)

    def test_monotone_loglik_trace(self, simple_data, simple_init):
        vals = []
        fit_mle(simple_data, simple_init, on_step=lambda x, ll: vals.append(ll))
        assert np.all(np.diff(vals) >= -1e-12)

    def test_fixed_point_restart(self, simple_data, simple_init):
        first = fit_mle(simple_data, simple_init)
        again = fit_mle(simple_data, first.params)
        assert again.converged
        assert again.iterations <= 2
        assert np.max(np.abs(again.params.flat - first.params.flat)) < 1e-6


class TestEmExpectation:
    def test_hand_values_endorsed(self):
        data = Dataset(
            y=np.array([1.0]),
            x_design=np.array([[1.0, 0.0]]),
            z_design=np.array([[1.0]]),
        )
        p = ItemParameters(np.array([0.0, 1.5]), np.array([0.25]), np.array([0.9]))
        w = em_expectation(p, data)
        assert w.w1[0] == pytest.approx(0.25 / 0.575, abs=1e-9)
        assert w.w2[0] == pytest.approx(1.0 - 0.25 / 0.575, abs=1e-9)
        assert w.w3[0] == 0.0 and w.w4[0] == 0.0

    def test_hand_values_not_endorsed(self):
        data = Dataset(
            y=np.array([0.0]),
            x_design=np.array([[1.0, 0.0]]),
            z_design=np.array([[1.0]]),
        )
        p = ItemParameters(np.array([0.0, 1.5]), np.array([0.25]), np.array([0.9]))
        w = em_expectation(p, data)
        assert w.w4[0] == pytest.approx(0.1 / 0.425, abs=1e-9)
        assert w.w3[0] == pytest.approx(1.0 - 0.1 / 0.425, abs=1e-9)
        assert w.w1[0] == 0.0 and w.w2[0] == 0.0

    def test_degenerate_logistic_weights(self):
        n = 6
        y = np.array([1.0, 0.0, 1.0, 1.0, 0.0, 1.0])
        data = Dataset(
            y=y,
            x_design=np.column_stack([np.ones(n), np.linspace(-1, 1, n)]),
            z_design=np.ones((n, 1)),
        )
        p = ItemParameters(np.array([0.2, 1.0]), np.array([0.0]), np.array([1.0]))
        w = em_expectation(p, data)
        np.testing.assert_allclose(w.w1, 0.0, atol=1e-15)
        np.testing.assert_allclose(w.w4, 0.0, atol=1e-15)
        np.testing.assert_allclose(w.w2, y, atol=1e-15)
        np.testing.assert_allclose(w.w3, 1.0 - y, atol=1e-15)

    def test_denominator_guard_raises(self):
        data = Dataset(
            y=np.array([1.0]),
            x_design=np.array([[1.0, 0.0]]),
            z_design=np.array([[1.0]]),
        )
        # pi underflows to ~0 with a huge negative intercept
        p = ItemParameters(np.array([-800.0, 0.0]), np.array([0.0]), np.array([1.0]))
        with pytest.raises(EstimationCrash):
            em_expectation(p, data)

    def test_weight_identities(self, simple_data):
        p = ItemParameters(np.array([0.1, 1.2]), np.array([0.2]), np.array([0.85]))
        w = em_expectation(p, simple_data)
        w.validate(simple_data.y)  # w1+w2 = y, w3+w4 = 1-y, all in [0, 1]


class TestEmMaximisation:
    def _dataset(self, rng, n=40):
        x = rng.standard_normal(n)
        y = (rng.random(n) < 0.6).astype(float)
        return Dataset(
            y=y, x_design=np.column_stack([np.ones(n), x]), z_design=np.ones((n, 1))
        )

    def test_degenerate_weights_push_asymptotes_to_bounds(self):
        rng = np.random.default_rng(21)
        data = self._dataset(rng, 60)
        y = data.y
        weights = LatentWeights(
            w1=np.zeros(60), w2=y.copy(), w3=1.0 - y, w4=np.zeros(60)
        )
        current = ItemParameters(np.array([0.0, 0.5]), np.array([0.2]), np.array([0.8]))
        out = em_maximisation(weights, data, current)
        assert out.c[0] == pytest.approx(EPS, abs=1e-9)
        assert out.d[0] == pytest.approx(1.0 - EPS, abs=1e-9)
        oracle = logistic_irls(data.x_design, y)
        np.testing.assert_allclose(out.b, oracle, atol=1e-6)

    def test_m_step_never_decreases_complete_objective(self):
        from fourpl import kernels

        rng = np.random.default_rng(22)
        for trial in range(10):
            data = self._dataset(rng, 50)
            p = ItemParameters(
                rng.normal(0, 1, 2),
                np.array([rng.uniform(0.05, 0.4)]),
                np.array([rng.uniform(0.6, 0.95)]),
            )
            w = em_expectation(p, data)

            def objective(q):
                l1 = kernels.l1_value_grad_hess(data.x_design, w.w2, w.w3, q.b)[0]
                l2 = kernels.l2_value_grad(
                    data.z_design, w.w1, w.w4, w.w2 + w.w3, q.c, q.d
                )[0]
                return l1 + l2

            out = em_maximisation(w, data, p)
            assert objective(out) >= objective(p) - 1e-10

    def test_asymptote_block_matches_grid_search(self):
        rng = np.random.default_rng(23)
        n = 20
        x = rng.standard_normal(n)
        y = (rng.random(n) < 0.55).astype(float)
        data = Dataset(
            y=y, x_design=np.column_stack([np.ones(n), x]), z_design=np.ones((n, 1))
        )
        p = ItemParameters(np.array([0.2, 0.9]), np.array([0.3]), np.array([0.8]))
        w = em_expectation(p, data)
        out = em_maximisation(w, data, p)

        from fourpl import kernels

        w23 = w.w2 + w.w3
        best, best_val = None, -np.inf
        grid = np.arange(EPS, 1.0, 1e-3)
        for c0 in grid:
            for d0 in grid:
                if d0 - c0 < EPS:
                    continue
                val = kernels.l2_value_grad(
                    data.z_design, w.w1, w.w4, w23, np.array([c0]), np.array([d0])
                )[0]
                if val > best_val:
                    best, best_val = (c0, d0), val
        assert abs(out.c[0] - best[0]) < 2e-3
        assert abs(out.d[0] - best[1]) < 2e-3


class TestFitEm:
    def test_monotone_loglik(self, simple_data, simple_init):
        lls = [log_likelihood(simple_init, simple_data)]
        fit_em(simple_data, simple_init, on_iteration=lambda t, p, ll: lls.append(ll))
        assert np.all(np.diff(lls) >= -1e-10)

    def test_agrees_with_mle(self, simple_data, simple_init):
        em = fit_em(simple_data, simple_init)
        mle = fit_mle(simple_data, simple_init)
        assert em.converged and mle.converged
        assert abs(em.log_likelihood - mle.log_likelihood) < 1e-3

    def test_status_is_did_not_finish_at_cap(self, simple_data, simple_init):
        res = fit_em(simple_data, simple_init, FitOptions(max_iterations=3))
        assert res.status is ConvergenceStatus.DID_NOT_FINISH
        assert res.iterations == 3


class TestPlfSteps:
    def test_step_b_with_degenerate_link_is_logistic(self):
        rng = np.random.default_rng(41)
        n = 300
        x = rng.standard_normal(n)
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-(0.4 + 1.1 * x)))).astype(float)
        data = Dataset(
            y=y, x_design=np.column_stack([np.ones(n), x]), z_design=np.ones((n, 1))
        )
        b = plf_step_b(data, np.array([0.0]), np.array([1.0]), np.array([0.0, 1.0]))
        oracle = logistic_irls(data.x_design, y)
        np.testing.assert_allclose(b, oracle, atol=1e-6)

    def test_step_b_fixed_point_at_joint_optimum(self, simple_data, simple_init):
        opt = fit_mle(simple_data, simple_init)
        b = plf_step_b(simple_data, opt.params.c, opt.params.d, opt.params.b)
        np.testing.assert_allclose(b, opt.params.b, atol=1e-4)

    def test_step_b_matches_grid_search(self):
        rng = np.random.default_rng(42)
        n = 20
        x = rng.standard_normal(n)
        y = (rng.random(n) < 0.5).astype(float)
        data = Dataset(
            y=y, x_design=np.column_stack([np.ones(n), x]), z_design=np.ones((n, 1))
        )
        c = np.array([0.2])
        d = np.array([0.85])
        b = plf_step_b(data, c, d, np.array([0.0, 0.5]))

        from fourpl import kernels

        best, best_val = None, -np.inf
        for b0 in np.arange(-2.0, 2.0, 1e-3):
            for b1 in np.arange(-2.0, 2.0, 1e-2):
                val = kernels.loglik_value(
                    data.y, data.x_design, data.z_design, np.array([b0, b1]), c, d
                )
                if val > best_val:
                    best, best_val = (b0, b1), val
        assert abs(b[0] - best[0]) < 2e-3
        assert abs(b[1] - best[1]) < 2e-2

    def test_step_asymptotes_pushed_to_bounds_by_separable_pattern(self):
        rng = np.random.default_rng(43)
        n = 50
        x = rng.standard_normal(n)
        b = np.array([0.0, 2.0])
        phi = 1.0 / (1.0 + np.exp(-(x * 2.0)))
        y = (phi > 0.5).astype(float)
        data = Dataset(
            y=y, x_design=np.column_stack([np.ones(n), x]), z_design=np.ones((n, 1))
        )
        c, d = plf_step_asymptotes(data, b, np.array([0.3]), np.array([0.7]))
        # grid-search oracle over (c0, d0)
        from fourpl import kernels

        phi_arr = np.ascontiguousarray(phi)
        best, best_val = None, -np.inf
        grid = np.arange(EPS, 1.0, 1e-3)
        for c0 in grid:
            for d0 in grid:
                if d0 - c0 < EPS:
                    continue
                val = kernels.asymptote_loglik_value_grad_hess(
                    data.y, data.z_design, phi_arr, np.array([c0]), np.array([d0])
                )[0]
                if val > best_val:
                    best, best_val = (c0, d0), val
        assert abs(c[0] - best[0]) < 2e-3
        assert abs(d[0] - best[1]) < 2e-3
        assert c[0] == pytest.approx(EPS, abs=1e-6)
        assert d[0] == pytest.approx(1.0 - EPS, abs=1e-6)

    def test_step_asymptotes_fixed_point_at_joint_optimum(self, simple_data, simple_init):
        opt = fit_mle(simple_data, simple_init)
        c, d = plf_step_asymptotes(
            simple_data, opt.params.b, opt.params.c, opt.params.d
        )
        np.testing.assert_allclose(c, opt.params.c, atol=1e-4)
        np.testing.assert_allclose(d, opt.params.d, atol=1e-4)

    def test_step_asymptotes_respects_constraints(self):
        rng = np.random.default_rng(44)
        n = 80
        x = rng.standard_normal(n)
        g = (np.arange(n) % 2).astype(float)
        y = (rng.random(n) < 0.5).astype(float)
        data = Dataset(
            y=y,
            x_design=np.column_stack([np.ones(n), x, g, g * x]),
            z_design=np.column_stack([np.ones(n), g]),
        )
        c, d = plf_step_asymptotes(
            data,
            np.array([0.0, 1.0, 0.0, 0.0]),
            np.array([0.2, 0.0]),
            np.array([0.9, 0.0]),
        )
        for z in (np.array([1.0, 0.0]), np.array([1.0, 1.0])):
            assert z @ c + EPS <= z @ d + 1e-12


class TestFitPlf:
    def test_monotone_loglik_per_cycle(self, simple_data, simple_init):
        lls = [log_likelihood(simple_init, simple_data)]
        fit_plf(simple_data, simple_init, on_iteration=lambda t, p, ll: lls.append(ll))
        assert np.all(np.diff(lls) >= -1e-10)

    def test_agrees_with_mle(self, simple_data, simple_init):
        plf = fit_plf(simple_data, simple_init)
        mle = fit_mle(simple_data, simple_init)
        assert plf.converged and mle.converged
        assert abs(plf.log_likelihood - mle.log_likelihood) < 1e-3


class TestStatusPartition:
    @pytest.mark.parametrize("fitter", [fit_nls, fit_mle, fit_em, fit_plf])
    def test_no_exception_escapes_and_status_is_single(self, fitter):
        rng = np.random.default_rng(51)
        statuses = set()
        for trial in range(6):
            n = 25
            x = rng.standard_normal(n)
            y = (rng.random(n) < 0.5).astype(float)
            if trial == 3:
                y = np.ones(n)  # no variation at all
            data = Dataset(
                y=y,
                x_design=np.column_stack([np.ones(n), x]),
                z_design=np.ones((n, 1)),
            )
            init = ItemParameters(
                np.array([0.0, 0.5]), np.array([0.1]), np.array([0.9])
            )
            res = fitter(data, init, FitOptions(max_iterations=50))
            assert res.status in (
                ConvergenceStatus.CONVERGED,
                ConvergenceStatus.CRASHED,
                ConvergenceStatus.DID_NOT_FINISH,
            )
            statuses.add(res.status)
            assert res.iterations <= 50

    def test_invalid_init_raises_before_fitting(self, simple_data):
        bad = ItemParameters(np.array([0.0, 1.0]), np.array([0.7]), np.array([0.3]))
        from fourpl import InvalidParametersError

        with pytest.raises(InvalidParametersError):
            fit_mle(simple_data, bad)


class TestCrossMethodAgreement:
    def test_three_likelihood_methods_agree_n2500(self):
        data = generate_dataset(simple_truth(), ModelKind.SIMPLE, 2500, seed=77, replication=0)
        init, _ = initial_values(data, ModelSpec.simple())
        fits = {
            "mle": fit_mle(data, init),
            "em": fit_em(data, init),
            "plf": fit_plf(data, init),
        }
        assert all(f.converged for f in fits.values())
        lls = [f.log_likelihood for f in fits.values()]
        assert max(lls) - min(lls) < 1e-3


class TestFitOptions:
    def test_validation(self):
        with pytest.raises(ValueError):
            FitOptions(max_iterations=0)
        with pytest.raises(ValueError):
            FitOptions(tolerance=0.0)
        with pytest.raises(ValueError):
            FitOptions(deterministic=False)

    def test_frozen(self):
        opts = FitOptions()
        with pytest.raises(dataclasses.FrozenInstanceError):
            opts.tolerance = 1e-3
