"""Standard errors, confidence intervals and the DIF likelihood-ratio test.

NLS fits get the sandwich covariance built from the least-squares
estimating function; likelihood-based fits (MLE, EM, PLF) get the
inverse observed information.  Both are reported on the scale of the
estimate itself, so the diagonal is directly the squared standard error.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import stats

from . import kernels
from .errors import BoundarySolutionError, NotPositiveDefiniteError, SingularMatrixError
from .estimators import FitResult, Method
from .model import Dataset

_COND_LIMIT = 1e12
_PSD_SLACK = -1e-8


class CovarianceKind(str, Enum):
    SANDWICH = "sandwich"
    OBSERVED_INFORMATION = "observed_information"


@dataclass
class CovarianceEstimate:
    matrix: np.ndarray
    kind: CovarianceKind

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("covariance matrix must be square")
        if np.max(np.abs(m - m.T)) > 1e-10:
            raise ValueError("covariance matrix must be symmetric")
        if float(np.min(np.linalg.eigvalsh(m))) < _PSD_SLACK:
            raise NotPositiveDefiniteError(
                f"{self.kind.value} covariance has a negative eigenvalue"
            )
        self.matrix = m

    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.matrix), 0.0, None))


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    truncated: bool = False


@dataclass(frozen=True)
class DifTestResult:
    statistic: float
    df: int
    p_value: float
    flagged: bool
    alpha: float
    negative_statistic: bool = False


def _check_condition(m: np.ndarray, what: str) -> None:
    cond = float(np.linalg.cond(m))
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularMatrixError(
            f"{what} is singular or too ill-conditioned (cond={cond:.3g})"
        )


def _require(fit: FitResult, methods, what: str) -> None:
    if fit.method not in methods:
        raise ValueError(f"{what} applies to {', '.join(m.value for m in methods)} fits")
    if not fit.converged:
        raise ValueError(f"{what} needs a converged fit")


def sandwich_covariance(fit: FitResult, data: Dataset) -> CovarianceEstimate:
    """Sandwich covariance of a converged NLS fit.

    Built from the averaged Jacobian and outer product of the
    least-squares estimating function, divided by the sample size.
    """
    _require(fit, (Method.NLS,), "the sandwich covariance")
    p = fit.params
    gamma, sigma = kernels.nls_sandwich_parts(
        data.y, data.x_design, data.z_design, p.b, p.c, p.d
    )
    _check_condition(gamma, "the estimating-function Jacobian")
    inner = np.linalg.solve(gamma, sigma)
    cov = np.linalg.solve(gamma, inner.T).T / data.n
    cov = 0.5 * (cov + cov.T)
    return CovarianceEstimate(cov, CovarianceKind.SANDWICH)


def observed_information_covariance(fit: FitResult, data: Dataset) -> CovarianceEstimate:
    """Inverse observed information of a converged likelihood-based fit."""
    _require(fit, (Method.MLE, Method.EM, Method.PLF), "the observed information")
    p = fit.params
    hess = kernels.loglik_hessian(
        data.y, data.x_design, data.z_design, p.b, p.c, p.d
    )
    info = -hess / data.n
    _check_condition(info, "the observed information matrix")
    cov = np.linalg.inv(info) / data.n
    cov = 0.5 * (cov + cov.T)
    return CovarianceEstimate(cov, CovarianceKind.OBSERVED_INFORMATION)


def covariance_for(fit: FitResult, data: Dataset) -> CovarianceEstimate:
    """Method-matched covariance: sandwich for NLS, information otherwise."""
    if fit.method is Method.NLS:
        return sandwich_covariance(fit, data)
    return observed_information_covariance(fit, data)


def wald_intervals(
    fit: FitResult, cov: CovarianceEstimate, level: float = 0.95
) -> list[ConfidenceInterval]:
    """Symmetric normal intervals for every coefficient.

    The asymptote intercepts are probabilities, so their intervals are
    truncated to [0, 1]; asymptote offsets (group columns) are signed
    differences and stay untouched.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    flat = fit.params.flat
    k = flat.shape[0]
    if cov.matrix.shape[0] != k:
        raise ValueError("covariance dimension does not match the fit")
    variances = np.diag(cov.matrix)
    if np.any(variances < _PSD_SLACK):
        raise ValueError("negative variance entry")
    se = np.sqrt(np.clip(variances, 0.0, None))
    z = float(stats.norm.ppf(0.5 * (1.0 + level)))

    kb = fit.params.b.shape[0]
    kc = fit.params.c.shape[0]
    probability_indices = {kb, kb + kc}  # c and d intercepts

    intervals = []
    for i in range(k):
        lower = float(flat[i] - z * se[i])
        upper = float(flat[i] + z * se[i])
        truncated = False
        if i in probability_indices:
            clipped = (max(lower, 0.0), min(upper, 1.0))
            truncated = clipped != (lower, upper)
            lower, upper = clipped
        intervals.append(ConfidenceInterval(lower, upper, level, truncated))
    return intervals


def lrt_dif(fit_simple: FitResult, fit_group: FitResult, alpha: float = 0.05) -> DifTestResult:
    """Likelihood-ratio test of the group-specific model against the
    simple one.

    Refuses fits whose asymptotes ended on the feasibility boundary,
    where the nested-model asymptotics do not hold.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if not (fit_simple.converged and fit_group.converged):
        raise ValueError("both fits must have converged")
    if fit_simple.n_obs != fit_group.n_obs:
        raise ValueError("fits cover different respondent counts")
    df = fit_group.n_parameters - fit_simple.n_parameters
    if df <= 0:
        raise ValueError("group-specific fit must have more parameters")
    if fit_simple.at_boundary or fit_group.at_boundary:
        raise BoundarySolutionError(
            "an asymptote estimate sits on the feasibility boundary; "
            "the likelihood-ratio test is not valid there"
        )
    raw = 2.0 * (fit_group.log_likelihood - fit_simple.log_likelihood)
    negative = raw < 0.0
    statistic = max(raw, 0.0)
    p_value = float(stats.chi2.sf(statistic, df))
    return DifTestResult(
        statistic=statistic,
        df=df,
        p_value=p_value,
        flagged=bool(p_value < alpha),
        alpha=alpha,
        negative_statistic=negative,
    )
