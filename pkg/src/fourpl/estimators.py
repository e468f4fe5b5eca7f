"""The four fitting algorithms: NLS, MLE, EM and PLF.

Every fit shares one convergence-state machine: a fit ends Converged,
Crashed or DidNotFinish, numerical breakdowns are reported as status
(never as exceptions), and identical inputs give identical results.

Iteration counting: one NLS/MLE iteration is one accepted optimiser
step; one EM iteration is one expectation/maximisation pair; one PLF
iteration is one two-step cycle.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels, optim
from .errors import EstimationCrash, InvalidParametersError
from .model import Dataset, ItemParameters, feasibility_constraints

# Tolerance and cap for the nested maximisations inside EM and PLF.
_INNER_TOL = 1e-8
_INNER_MAX_ITER = 200

# Constraint slack below which an estimate counts as sitting on the
# asymptote feasibility boundary.
_BOUNDARY_TOL = 1e-8

_MAX_BACKTRACK = 60

_CAUGHT = (EstimationCrash, np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError)


class Method(str, Enum):
    NLS = "nls"
    MLE = "mle"
    EM = "em"
    PLF = "plf"


class ConvergenceStatus(str, Enum):
    CONVERGED = "converged"
    CRASHED = "crashed"
    DID_NOT_FINISH = "did_not_finish"


@dataclass(frozen=True)
class FitOptions:
    """Iteration cap and tolerance shared by all methods.

    Fits never draw random numbers; ``deterministic`` is informational
    and must stay True.
    """

    max_iterations: int = 2000
    tolerance: float = 1e-6
    weighted_nls: bool = False
    deterministic: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be positive")
        if not self.deterministic:
            raise ValueError("fits are always deterministic")


@dataclass
class FitResult:
    params: ItemParameters
    status: ConvergenceStatus
    iterations: int
    objective: float
    objective_label: str
    log_likelihood: float
    method: Method
    n_obs: int
    at_boundary: bool

    @property
    def converged(self) -> bool:
        return self.status is ConvergenceStatus.CONVERGED

    @property
    def n_parameters(self) -> int:
        return self.params.flat.shape[0]


@dataclass
class LatentWeights:
    """Per-respondent expected category indicators."""

    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    w4: np.ndarray

    def validate(self, y: np.ndarray) -> None:
        for w in (self.w1, self.w2, self.w3, self.w4):
            if np.any(w < -1e-12) or np.any(w > 1.0 + 1e-12):
                raise ValueError("latent weights must lie in [0, 1]")
        if np.max(np.abs(self.w1 + self.w2 - y)) > 1e-12:
            raise ValueError("w1 + w2 must equal the response")
        if np.max(np.abs(self.w3 + self.w4 - (1.0 - y))) > 1e-12:
            raise ValueError("w3 + w4 must equal one minus the response")


def _safe_loglik(data: Dataset, flat: np.ndarray, kb: int, kc: int) -> float:
    if not np.all(np.isfinite(flat)):
        return float("nan")
    return kernels.loglik_value(
        data.y, data.x_design, data.z_design, flat[:kb], flat[kb : kb + kc], flat[kb + kc :]
    )


def _at_boundary(flat: np.ndarray, constraints) -> bool:
    A, lb = constraints
    if not np.all(np.isfinite(flat)):
        return False
    return bool(np.min(A @ flat - lb) <= _BOUNDARY_TOL)


def _run_minimize(fun_grad, x0, constraints, opts, callback) -> optim.OptimResult:
    try:
        return optim.minimize(
            fun_grad,
            x0,
            constraints=constraints,
            max_iterations=opts.max_iterations,
            tolerance=opts.tolerance,
            callback=callback,
        )
    except _CAUGHT as exc:
        return optim.OptimResult(
            np.array(x0, dtype=np.float64), np.nan, 0, False, failure=str(exc)
        )


def _finish(
    data, res: optim.OptimResult, method, objective, label, kb, kc, constraints
) -> FitResult:
    if res.failure is not None:
        status = ConvergenceStatus.CRASHED
    elif res.converged:
        status = ConvergenceStatus.CONVERGED
    else:
        status = ConvergenceStatus.DID_NOT_FINISH
    return FitResult(
        params=ItemParameters.from_flat(res.x, kb, kc),
        status=status,
        iterations=res.iterations,
        objective=objective,
        objective_label=label,
        log_likelihood=_safe_loglik(data, res.x, kb, kc),
        method=method,
        n_obs=data.n,
        at_boundary=_at_boundary(res.x, constraints),
    )


def fit_nls(
    data: Dataset, init: ItemParameters, opts: FitOptions = FitOptions(), on_step=None
) -> FitResult:
    """Least-squares fit, optionally with Pearson-residual weights."""
    init.validate_interior(data.distinct_z_rows())
    kb = init.b.shape[0]
    kc = init.c.shape[0]
    y, X, Z = data.y, data.x_design, data.z_design
    weighted = opts.weighted_nls

    def fun_grad(v):
        return kernels.rss_value_grad(
            y, X, Z, v[:kb], v[kb : kb + kc], v[kb + kc :], weighted
        )

    constraints = feasibility_constraints(Z, kb)
    res = _run_minimize(fun_grad, init.flat, constraints, opts, on_step)
    return _finish(data, res, Method.NLS, res.fun, "rss", kb, kc, constraints)


def fit_mle(
    data: Dataset, init: ItemParameters, opts: FitOptions = FitOptions(), on_step=None
) -> FitResult:
    """Direct maximisation of the log-likelihood."""
    init.validate_interior(data.distinct_z_rows())
    kb = init.b.shape[0]
    kc = init.c.shape[0]
    y, X, Z = data.y, data.x_design, data.z_design

    def fun_grad(v):
        val, grad = kernels.loglik_value_grad(
            y, X, Z, v[:kb], v[kb : kb + kc], v[kb + kc :]
        )
        return -val, -grad

    callback = None
    if on_step is not None:
        callback = lambda x, f: on_step(x, -f)  # report the log-likelihood

    constraints = feasibility_constraints(Z, kb)
    res = _run_minimize(fun_grad, init.flat, constraints, opts, callback)
    return _finish(
        data, res, Method.MLE, -res.fun, "log_likelihood", kb, kc, constraints
    )


# ---------------------------------------------------------------------------
# EM algorithm
# ---------------------------------------------------------------------------


def em_expectation(params: ItemParameters, data: Dataset) -> LatentWeights:
    """E-step: expected latent category indicators at the current fit.

    Raises EstimationCrash when a response probability used as a
    denominator falls below 1e-12.
    """
    params.validate_domain(data.distinct_z_rows())
    return _expectation_raw(data, params.b, params.c, params.d)


def _expectation_raw(data, b, c, d) -> LatentWeights:
    phi, lower, upper, _ = kernels.components(data.x_design, data.z_design, b, c, d)
    w1, w2, w3, w4, ok = kernels.em_weights(data.y, phi, lower, upper)
    if not ok:
        raise EstimationCrash("expectation denominator below 1e-12")
    return LatentWeights(w1, w2, w3, w4)


def _newton_ascent(fun_vgh, theta0, constraints=None, tol=_INNER_TOL, max_iter=_INNER_MAX_ITER):
    """Damped Newton ascent, optionally under linear constraints.

    ``fun_vgh`` returns (value, gradient, Hessian).  Directions that are
    not ascent directions fall back to the (projected) gradient, so the
    objective never decreases from the warm start.
    """
    theta = np.array(theta0, dtype=np.float64)
    if constraints is not None:
        A, lb = constraints
    val, grad, hess = fun_vgh(theta)
    if not np.isfinite(val) or not np.all(np.isfinite(grad)):
        raise EstimationCrash("non-finite objective in a nested maximisation")
    for _ in range(max_iter):
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = grad.copy()
        if not np.all(np.isfinite(step)) or float(step @ grad) <= 0.0:
            step = grad.copy()
        alpha0 = 1.0
        if constraints is not None:
            slack = A @ theta - lb
            step = optim._project_direction(step, A, slack)
            if step is None or float(step @ grad) <= 0.0:
                break
            As = A @ step
            blocking = As < -1e-13
            if np.any(blocking):
                alpha0 = min(
                    1.0, max(float(np.min(slack[blocking] / -As[blocking])), 0.0)
                )
            if alpha0 <= 0.0:
                break
        gd = float(grad @ step)
        t = alpha0
        accepted = None
        for _ in range(_MAX_BACKTRACK):
            cand = theta + t * step
            out = fun_vgh(cand)
            if np.isfinite(out[0]) and out[0] >= val + 1e-4 * t * gd:
                accepted = (cand, out)
                break
            t *= 0.5
        if accepted is None:
            break
        theta_new, (val_new, grad_new, hess_new) = accepted
        moved = float(np.max(np.abs(theta_new - theta)))
        gained = abs(val_new - val)
        theta, val, grad, hess = theta_new, val_new, grad_new, hess_new
        if gained < tol and moved < tol:
            break
    return theta


def _maximise_l1(X, w2, w3, b0):
    """Newton ascent on the weighted logistic log-likelihood."""
    return _newton_ascent(
        lambda b: kernels.l1_value_grad_hess(X, w2, w3, b), b0
    )


def _maximise_l2(Z, w1, w4, w23, c0, d0, constraints):
    """Constrained Newton ascent on the asymptote block of the EM objective."""
    kc = c0.shape[0]
    theta = _newton_ascent(
        lambda v: kernels.l2_value_grad_hess(Z, w1, w4, w23, v[:kc], v[kc:]),
        np.concatenate([c0, d0]),
        constraints=constraints,
    )
    return theta[:kc], theta[kc:]


def em_maximisation(
    weights: LatentWeights, data: Dataset, current: ItemParameters, opts: FitOptions = FitOptions()
) -> ItemParameters:
    """M-step: maximise the two blocks of the complete-data likelihood.

    The b block solves a weighted logistic problem; the (c, d) block is
    maximised under the interior constraints.  Both warm-start at the
    current estimate, so neither block's objective can decrease.
    """
    weights.validate(data.y)
    b = _maximise_l1(data.x_design, weights.w2, weights.w3, current.b)
    c, d = _maximise_l2(
        data.z_design,
        weights.w1,
        weights.w4,
        weights.w2 + weights.w3,
        current.c,
        current.d,
        feasibility_constraints(data.z_design, 0),
    )
    return ItemParameters(b, c, d)


def fit_em(
    data: Dataset, init: ItemParameters, opts: FitOptions = FitOptions(), on_iteration=None
) -> FitResult:
    """Alternate expectation and maximisation until the observed-data
    log-likelihood stabilises."""
    init.validate_interior(data.distinct_z_rows())
    kb = init.b.shape[0]
    kc = init.c.shape[0]
    constraints = feasibility_constraints(data.z_design, kb)
    cd_constraints = feasibility_constraints(data.z_design, 0)

    params = init
    ll = _safe_loglik(data, init.flat, kb, kc)
    status = ConvergenceStatus.DID_NOT_FINISH
    iterations = opts.max_iterations
    for t in range(1, opts.max_iterations + 1):
        try:
            weights = _expectation_raw(data, params.b, params.c, params.d)
            b = _maximise_l1(data.x_design, weights.w2, weights.w3, params.b)
            c, d = _maximise_l2(
                data.z_design,
                weights.w1,
                weights.w4,
                weights.w2 + weights.w3,
                params.c,
                params.d,
                cd_constraints,
            )
        except _CAUGHT:
            status = ConvergenceStatus.CRASHED
            iterations = t
            break
        params = ItemParameters(b, c, d)
        ll_new = _safe_loglik(data, params.flat, kb, kc)
        if on_iteration is not None:
            on_iteration(t, params, ll_new)
        if not np.isfinite(ll_new):
            status = ConvergenceStatus.CRASHED
            iterations = t
            break
        if abs(ll_new - ll) < opts.tolerance:
            status = ConvergenceStatus.CONVERGED
            iterations = t
            ll = ll_new
            break
        ll = ll_new

    return FitResult(
        params=params,
        status=status,
        iterations=iterations,
        objective=ll,
        objective_label="log_likelihood",
        log_likelihood=ll,
        method=Method.EM,
        n_obs=data.n,
        at_boundary=_at_boundary(params.flat, constraints),
    )


# ---------------------------------------------------------------------------
# PLF algorithm
# ---------------------------------------------------------------------------


def plf_step_b(data: Dataset, current_c, current_d, current_b, opts: FitOptions = FitOptions()):
    """Maximise the log-likelihood over b with the asymptotes frozen.

    With the asymptotes fixed this is a generalised-linear fit under a
    logit link stretched between the two asymptote values.
    """
    c = np.asarray(current_c, dtype=np.float64)
    d = np.asarray(current_d, dtype=np.float64)
    b0 = np.asarray(current_b, dtype=np.float64)
    kb = b0.shape[0]
    y, X, Z = data.y, data.x_design, data.z_design

    def fun_grad(v):
        val, grad = kernels.loglik_value_grad(y, X, Z, v, c, d)
        return -val, -grad[:kb]

    res = optim.minimize(
        fun_grad, b0, max_iterations=_INNER_MAX_ITER, tolerance=_INNER_TOL
    )
    if res.failure is not None:
        raise EstimationCrash(f"slope step failed: {res.failure}")
    return res.x


def _plf_asymptote_step(data, phi, c0, d0, constraints):
    kc = c0.shape[0]
    y, Z = data.y, data.z_design
    theta = _newton_ascent(
        lambda v: kernels.asymptote_loglik_value_grad_hess(y, Z, phi, v[:kc], v[kc:]),
        np.concatenate([c0, d0]),
        constraints=constraints,
    )
    return theta[:kc], theta[kc:]


def plf_step_asymptotes(
    data: Dataset, current_b, current_c, current_d, opts: FitOptions = FitOptions()
):
    """Maximise the log-likelihood over (c, d) with the logistic part frozen."""
    b = np.asarray(current_b, dtype=np.float64)
    c0 = np.asarray(current_c, dtype=np.float64)
    d0 = np.asarray(current_d, dtype=np.float64)
    phi = kernels.sigmoid(np.ascontiguousarray(data.x_design @ b))
    return _plf_asymptote_step(
        data, phi, c0, d0, feasibility_constraints(data.z_design, 0)
    )


def fit_plf(
    data: Dataset, init: ItemParameters, opts: FitOptions = FitOptions(), on_iteration=None
) -> FitResult:
    """Alternate the slope and asymptote steps until the joint
    log-likelihood stabilises."""
    init.validate_interior(data.distinct_z_rows())
    kb = init.b.shape[0]
    kc = init.c.shape[0]
    constraints = feasibility_constraints(data.z_design, kb)
    cd_constraints = feasibility_constraints(data.z_design, 0)

    params = init
    ll = _safe_loglik(data, init.flat, kb, kc)
    status = ConvergenceStatus.DID_NOT_FINISH
    iterations = opts.max_iterations
    for t in range(1, opts.max_iterations + 1):
        try:
            b = plf_step_b(data, params.c, params.d, params.b, opts)
            phi = kernels.sigmoid(np.ascontiguousarray(data.x_design @ b))
            c, d = _plf_asymptote_step(data, phi, params.c, params.d, cd_constraints)
        except _CAUGHT:
            status = ConvergenceStatus.CRASHED
            iterations = t
            break
        params = ItemParameters(b, c, d)
        ll_new = _safe_loglik(data, params.flat, kb, kc)
        if on_iteration is not None:
            on_iteration(t, params, ll_new)
        if not np.isfinite(ll_new):
            status = ConvergenceStatus.CRASHED
            iterations = t
            break
        if abs(ll_new - ll) < opts.tolerance:
            status = ConvergenceStatus.CONVERGED
            iterations = t
            ll = ll_new
            break
        ll = ll_new

    return FitResult(
        params=params,
        status=status,
        iterations=iterations,
        objective=ll,
        objective_label="log_likelihood",
        log_likelihood=ll,
        method=Method.PLF,
        n_obs=data.n,
        at_boundary=_at_boundary(params.flat, constraints),
    )


_FITTERS = {
    Method.NLS: fit_nls,
    Method.MLE: fit_mle,
    Method.EM: fit_em,
    Method.PLF: fit_plf,
}


def fit(
    data: Dataset,
    init: ItemParameters,
    method: Method | str,
    opts: FitOptions = FitOptions(),
) -> FitResult:
    """Dispatch to one of the four estimation methods."""
    return _FITTERS[Method(method)](data, init, opts)
