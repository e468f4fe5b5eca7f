import numpy as np
import pytest

from fourpl.optim import minimize


def quad(center, scale):
    center = np.asarray(center, dtype=float)
    scale = np.asarray(scale, dtype=float)

    def fun_grad(x):
        r = x - center
        return float(np.sum(scale * r * r)), 2.0 * scale * r

    return fun_grad


def test_unconstrained_quadratic():
    res = minimize(quad([1.0, -2.0], [1.0, 3.0]), np.zeros(2), tolerance=1e-10)
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, -2.0], atol=1e-6)


def test_constraint_blocks_minimum():
    # Minimum at (1, 1) but constrained to x0 <= 0.5, i.e. -x0 >= -0.5.
    A = np.array([[-1.0, 0.0]])
    lb = np.array([-0.5])
    res = minimize(
        quad([1.0, 1.0], [1.0, 1.0]), np.zeros(2), constraints=(A, lb), tolerance=1e-10
    )
    assert res.converged
    np.testing.assert_allclose(res.x, [0.5, 1.0], atol=1e-6)


def test_corner_solution():
    # Linear objective pushes to the corner of the box [0,1]^2.
    def fun_grad(x):
        return float(-x[0] - 2.0 * x[1]), np.array([-1.0, -2.0])

    A = np.vstack([np.eye(2), -np.eye(2)])
    lb = np.array([0.0, 0.0, -1.0, -1.0])
    res = minimize(fun_grad, np.array([0.2, 0.3]), constraints=(A, lb))
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-9)


def test_infeasible_start_fails():
    A = np.array([[1.0, 0.0]])
    lb = np.array([0.0])
    res = minimize(quad([1.0, 1.0], [1.0, 1.0]), np.array([-1.0, 0.0]), constraints=(A, lb))
    assert not res.converged
    assert res.failure is not None


def test_non_finite_objective_fails():
    def fun_grad(x):
        return float("nan"), np.zeros(1)

    res = minimize(fun_grad, np.zeros(1))
    assert res.failure is not None


def test_monotone_descent_trace():
    values = []
    rng = np.random.default_rng(2)
    H = rng.normal(size=(4, 4))
    M = H @ H.T + np.eye(4)

    def fun_grad(x):
        return float(x @ M @ x), 2.0 * M @ x

    res = minimize(fun_grad, rng.normal(size=4), callback=lambda x, f: values.append(f))
    assert res.converged
    diffs = np.diff(values)
    assert np.all(diffs <= 1e-12)


def test_deterministic():
    fun_grad = quad([0.3, 0.7, -0.2], [2.0, 1.0, 5.0])
    r1 = minimize(fun_grad, np.ones(3))
    r2 = minimize(fun_grad, np.ones(3))
    assert r1.iterations == r2.iterations
    assert r1.fun == r2.fun
    assert np.array_equal(r1.x, r2.x)


def test_iteration_cap_reports_not_converged():
    # Rosenbrock from a far start with a tiny cap.
    def fun_grad(x):
        a, b = 1.0, 100.0
        f = (a - x[0]) ** 2 + b * (x[1] - x[0] ** 2) ** 2
        g = np.array(
            [
                -2.0 * (a - x[0]) - 4.0 * b * x[0] * (x[1] - x[0] ** 2),
                2.0 * b * (x[1] - x[0] ** 2),
            ]
        )
        return float(f), g

    res = minimize(fun_grad, np.array([-1.5, 2.0]), max_iterations=3, tolerance=1e-12)
    assert not res.converged
    assert res.failure is None
    assert res.iterations == 3
