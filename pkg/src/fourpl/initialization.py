"""Starting values from tertile groups of the matching criterion.

The slope seed is four times the upper-lower index (difference of the
empirical endorsement rates of the top and bottom tertile groups), the
asymptote seeds are tail empirical rates clamped to safe bands, and the
intercept seed places the curve midpoint at the criterion level where a
smoothed running endorsement rate first crosses it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InitializationError
from .model import ASYMPTOTE_MARGIN, Dataset, ItemParameters, ModelSpec

# Clamping bands for the asymptote seeds.
_C_BAND = (ASYMPTOTE_MARGIN, 0.45)
_D_BAND = (0.55, 1.0 - ASYMPTOTE_MARGIN)

_SMOOTH_WINDOW = 7  # centred moving average for the intercept search


@dataclass(frozen=True)
class InitDiagnostics:
    tertile_bounds: tuple[float, float]
    p_lower: float
    p_upper: float
    uli: float
    used_median_fallback: bool = False


def _running_mean(values: np.ndarray, window: int) -> np.ndarray:
    """Centred moving average with shrinking windows at the edges."""
    n = values.shape[0]
    half = window // 2
    cs = np.concatenate([[0.0], np.cumsum(values)])
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + half + 1, n)
    return (cs[hi] - cs[lo]) / (hi - lo)


def initial_values(data: Dataset, spec: ModelSpec) -> tuple[ItemParameters, InitDiagnostics]:
    """Compute starting values for every coefficient of ``spec``.

    Group and interaction coefficients and the asymptote offsets start
    at exactly zero.
    """
    x = data.criterion
    y = data.y

    if np.unique(x).shape[0] < 9:
        raise InitializationError(
            "need at least 9 distinct matching-criterion values"
        )
    if np.all(y == y[0]):
        raise InitializationError("no variation in the responses")

    t1, t2 = np.quantile(x, [1.0 / 3.0, 2.0 / 3.0])
    low_group = x <= t1
    high_group = x > t2
    if not np.any(low_group) or not np.any(high_group):
        raise InitializationError("empty tertile group")

    p_lower = float(np.mean(y[low_group]))
    p_upper = float(np.mean(y[high_group]))
    uli = p_upper - p_lower
    b1 = 4.0 * uli

    # Sort before averaging: the group means must be bit-identical under
    # any respondent permutation, because ties in x sit exactly on them.
    low_tail = x < np.mean(np.sort(x[low_group]))
    high_tail = x > np.mean(np.sort(x[high_group]))
    c_raw = float(np.mean(y[low_tail])) if np.any(low_tail) else p_lower
    d_raw = float(np.mean(y[high_tail])) if np.any(high_tail) else p_upper
    c0 = float(np.clip(c_raw, *_C_BAND))
    d0 = float(np.clip(d_raw, *_D_BAND))

    # Midpoint crossing of the smoothed endorsement rate along x.  Sorting
    # breaks criterion ties by the response so that respondent order never
    # matters.
    order = np.lexsort((y, x))
    smoothed = _running_mean(y[order], _SMOOTH_WINDOW)
    target = 0.5 * (c0 + d0)
    delta = smoothed - target
    fallback = False
    if delta[0] == 0.0:
        x_star = float(x[order][0])
    else:
        crossings = np.nonzero(np.sign(delta) != np.sign(delta[0]))[0]
        if crossings.size:
            x_star = float(x[order][crossings[0]])
        else:
            x_star = float(np.median(x))
            fallback = True
    b0 = -b1 * x_star

    kb = spec.n_predictor_coefs()
    kc = spec.n_asymptote_coefs()
    b = np.zeros(kb)
    b[0] = b0
    b[1] = b1
    c = np.zeros(kc)
    c[0] = c0
    d = np.zeros(kc)
    d[0] = d0

    params = ItemParameters(b, c, d)
    diagnostics = InitDiagnostics(
        tertile_bounds=(float(t1), float(t2)),
        p_lower=p_lower,
        p_upper=p_upper,
        uli=uli,
        used_median_fallback=fallback,
    )
    return params, diagnostics
