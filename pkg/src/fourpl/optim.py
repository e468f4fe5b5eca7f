"""Shared minimiser: BFGS with linear inequality constraints.

All four estimation routines reduce to minimising a smooth objective,
possibly subject to linear constraints ``A @ x >= lb`` (the asymptote
feasibility polytope).  The method keeps every iterate feasible:

* quasi-Newton direction ``-H @ g`` (inverse-BFGS approximation),
* directions pointing out of active constraints are projected onto the
  null space of the active constraint normals,
* a ratio test caps the step at the feasible boundary,
* Armijo backtracking guarantees monotone descent.

Convergence follows one rule everywhere: the absolute objective change
and the largest absolute parameter change of an accepted step must both
fall below the tolerance.  A step of zero length (no usable descent
direction, objective flat to machine precision) satisfies that rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_ARMIJO = 1e-4
_MAX_HALVINGS = 60
_ACTIVE_TOL = 1e-9
_CURVATURE_TOL = 1e-10


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    failure: str | None = None  # set only on numerical breakdown


def _project_direction(d, A, slack):
    """Remove components of d that push into active constraints.

    Iteratively augments the active set until no near-active constraint
    is violated by the direction.  Returns None when no usable direction
    remains.
    """
    for _ in range(A.shape[0] + 1):
        act = (slack <= _ACTIVE_TOL) & (A @ d < -1e-13)
        if not np.any(act):
            return d
        Aa = A[act]
        try:
            corr, *_ = np.linalg.lstsq(Aa @ Aa.T, Aa @ d, rcond=None)
        except np.linalg.LinAlgError:
            return None
        d = d - Aa.T @ corr
    return None


def _is_descent(d, g):
    if d is None:
        return False
    nd = float(np.linalg.norm(d))
    ng = float(np.linalg.norm(g))
    return float(d @ g) < -1e-14 * max(1.0, nd * ng)


def minimize(
    fun_grad,
    x0,
    *,
    constraints=None,
    max_iterations: int = 2000,
    tolerance: float = 1e-6,
    callback=None,
) -> OptimResult:
    """Minimise ``fun_grad`` (returning (value, gradient)) from ``x0``.

    ``constraints`` is an optional pair (A, lb) meaning A @ x >= lb; the
    start point must satisfy it.  ``callback(x, f)`` runs after every
    accepted step.
    """
    x = np.array(x0, dtype=np.float64)
    k = x.shape[0]
    if constraints is not None:
        A, lb = constraints
        A = np.asarray(A, dtype=np.float64)
        lb = np.asarray(lb, dtype=np.float64)
        if A.shape[1] != k:
            raise ValueError("constraint matrix width does not match x0")
        if np.min(A @ x - lb) < -1e-8:
            return OptimResult(x, np.nan, 0, False, failure="infeasible start")
    else:
        A = None
        lb = None

    f, g = fun_grad(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        return OptimResult(x, f, 0, False, failure="non-finite objective at start")

    H = np.eye(k)
    first_update = True
    active_set = None

    for t in range(1, max_iterations + 1):
        slack = A @ x - lb if A is not None else None
        if slack is not None:
            # Stale curvature from another face of the feasible set makes
            # projected steps zigzag; restart the approximation.
            current_active = frozenset(np.nonzero(slack <= _ACTIVE_TOL)[0].tolist())
            if active_set is not None and current_active != active_set:
                H = np.eye(k)
                first_update = True
            active_set = current_active
        d = -H @ g
        if A is not None:
            d = _project_direction(d, A, slack)
        if not _is_descent(d, g):
            d = -g.copy()
            if A is not None:
                d = _project_direction(d, A, slack)
            if not _is_descent(d, g):
                d = None

        step = None
        if d is not None:
            alpha0 = 1.0
            if A is not None:
                Ad = A @ d
                blocking = Ad < -1e-13
                if np.any(blocking):
                    alpha_max = float(np.min(slack[blocking] / -Ad[blocking]))
                    alpha0 = min(1.0, max(alpha_max, 0.0))
            if alpha0 > 0.0:
                gd = float(g @ d)
                alpha = alpha0
                saw_finite = False
                for _ in range(_MAX_HALVINGS):
                    x_try = x + alpha * d
                    f_try, g_try = fun_grad(x_try)
                    if np.isfinite(f_try) and np.all(np.isfinite(g_try)):
                        saw_finite = True
                        if f_try <= f + _ARMIJO * alpha * gd:
                            step = (x_try, f_try, g_try)
                            break
                    alpha *= 0.5
                if step is None and not saw_finite:
                    return OptimResult(
                        x, f, t, False, failure="non-finite values in line search"
                    )

        if step is None:
            # No progress possible: changes are exactly zero, which meets
            # the convergence rule.
            if callback is not None:
                callback(x, f)
            return OptimResult(x, f, t, True)

        x_new, f_new, g_new = step
        s = x_new - x
        yk = g_new - g
        df = abs(f - f_new)
        dx = float(np.max(np.abs(s)))
        x, f, g = x_new, f_new, g_new
        if callback is not None:
            callback(x, f)

        sy = float(s @ yk)
        if sy > _CURVATURE_TOL * float(np.linalg.norm(s) * np.linalg.norm(yk)):
            if first_update:
                H = (sy / float(yk @ yk)) * np.eye(k)
                first_update = False
            rho = 1.0 / sy
            Hy = H @ yk
            H = (
                H
                - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                + rho * rho * (float(yk @ Hy) + sy) * np.outer(s, s)
            )

        if df < tolerance and dx < tolerance:
            return OptimResult(x, f, t, True)

    return OptimResult(x, f, max_iterations, False)
