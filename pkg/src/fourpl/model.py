"""Model family, design construction and probability kernels.

The response model bounds a logistic curve between two regressor-based
asymptotes::

    pi = Z@c + (Z@d - Z@c) * sigmoid(X@b)

with the coefficient vector always laid out as (b..., c..., d...).
Asymptote coefficients are kept strictly inside the unit interval for
every observed asymptote-design row, with margin ``ASYMPTOTE_MARGIN``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .errors import DataError, DegenerateWeightError, InvalidParametersError

# Interior margin for the asymptote constraints: for every observed row z,
# z@c >= EPS, z@d <= 1-EPS and z@d - z@c >= EPS.
ASYMPTOTE_MARGIN = 1e-6

# Slack used when *checking* the constraints, to absorb float drift of
# iterates that sit exactly on the boundary.
_FEAS_ATOL = 1e-9


class ModelKind(str, Enum):
    SIMPLE = "simple"
    GROUP = "group"
    GENERAL = "general"


@dataclass(frozen=True)
class ModelSpec:
    """Names the raw columns that enter the two design matrices.

    ``predictor_columns`` feed the logistic part (after a constant), and
    ``asymptote_columns`` feed both asymptotes.  For the group-specific
    kind the layout is fixed: X = (1, x, g, g*x) and Z = (1, g).
    """

    kind: ModelKind
    predictor_columns: tuple[str, ...]
    asymptote_columns: tuple[str, ...] = ()

    @staticmethod
    def simple(criterion: str = "x") -> "ModelSpec":
        return ModelSpec(ModelKind.SIMPLE, (criterion,), ())

    @staticmethod
    def group_specific(criterion: str = "x", group: str = "g") -> "ModelSpec":
        return ModelSpec(ModelKind.GROUP, (criterion, group), (group,))

    @staticmethod
    def general(predictors, asymptote_covariates=()) -> "ModelSpec":
        return ModelSpec(
            ModelKind.GENERAL, tuple(predictors), tuple(asymptote_covariates)
        )

    @property
    def criterion_column(self) -> str:
        return self.predictor_columns[0]

    @property
    def group_column(self) -> str | None:
        if self.kind is ModelKind.GROUP:
            return self.predictor_columns[1]
        return None

    def n_predictor_coefs(self) -> int:
        if self.kind is ModelKind.GROUP:
            return 4  # const, x, g, g*x
        return 1 + len(self.predictor_columns)

    def n_asymptote_coefs(self) -> int:
        return 1 + len(self.asymptote_columns)

    def parameter_labels(self) -> list[str]:
        kb = self.n_predictor_coefs()
        kc = self.n_asymptote_coefs()
        return (
            [f"b{i}" for i in range(kb)]
            + [f"c{i}" for i in range(kc)]
            + [f"d{i}" for i in range(kc)]
        )


@dataclass
class Dataset:
    """Binary responses for one item plus the two design matrices."""

    y: np.ndarray
    x_design: np.ndarray
    z_design: np.ndarray

    def __post_init__(self):
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        self.x_design = np.ascontiguousarray(self.x_design, dtype=np.float64)
        self.z_design = np.ascontiguousarray(self.z_design, dtype=np.float64)
        n = self.y.shape[0]
        if n < 1:
            raise DataError("dataset is empty")
        if self.y.ndim != 1 or self.x_design.ndim != 2 or self.z_design.ndim != 2:
            raise DataError("y must be 1-d and the designs 2-d")
        if self.x_design.shape[0] != n or self.z_design.shape[0] != n:
            raise DataError("design row counts do not match the response length")
        if not np.all((self.y == 0.0) | (self.y == 1.0)):
            raise DataError("responses must be exactly 0 or 1")
        if not np.all(self.x_design[:, 0] == 1.0) or not np.all(
            self.z_design[:, 0] == 1.0
        ):
            raise DataError("first design column must be the constant 1")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def criterion(self) -> np.ndarray:
        """Matching-criterion column (second predictor column)."""
        if self.x_design.shape[1] < 2:
            raise DataError("design has no criterion column")
        return self.x_design[:, 1]

    def distinct_z_rows(self) -> np.ndarray:
        return np.unique(self.z_design, axis=0)


@dataclass
class ItemParameters:
    """Coefficients (b, c, d) for one item, in canonical order."""

    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        self.b = np.ascontiguousarray(self.b, dtype=np.float64)
        self.c = np.ascontiguousarray(self.c, dtype=np.float64)
        self.d = np.ascontiguousarray(self.d, dtype=np.float64)
        if self.c.shape != self.d.shape:
            raise InvalidParametersError("c and d must have the same length")

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.b, self.c, self.d])

    @staticmethod
    def from_flat(flat: np.ndarray, kb: int, kc: int) -> "ItemParameters":
        flat = np.asarray(flat, dtype=np.float64)
        return ItemParameters(flat[:kb], flat[kb : kb + kc], flat[kb + kc :])

    def feasible(self, z_rows: np.ndarray, atol: float = _FEAS_ATOL) -> bool:
        """Check the interior-asymptote constraints on the given z rows."""
        z_rows = np.atleast_2d(np.asarray(z_rows, dtype=np.float64))
        lo = z_rows @ self.c
        up = z_rows @ self.d
        eps = ASYMPTOTE_MARGIN
        return bool(
            np.all(lo >= eps - atol)
            and np.all(up <= 1.0 - eps + atol)
            and np.all(up - lo >= eps - atol)
        )

    def validate_domain(self, z_rows: np.ndarray) -> None:
        """Probabilities must be defined: asymptotes within the closed unit
        interval and ordered.  The degenerate logistic (c=0, d=1) passes."""
        if not np.all(np.isfinite(self.flat)):
            raise InvalidParametersError("parameters contain non-finite values")
        z_rows = np.atleast_2d(np.asarray(z_rows, dtype=np.float64))
        lo = z_rows @ self.c
        up = z_rows @ self.d
        if (
            np.any(lo < -_FEAS_ATOL)
            or np.any(up > 1.0 + _FEAS_ATOL)
            or np.any(up - lo < -_FEAS_ATOL)
        ):
            raise InvalidParametersError(
                "asymptote values leave [0, 1] for an observed row"
            )

    def validate_interior(self, z_rows: np.ndarray) -> None:
        """Estimation-grade check: the interior margin must hold."""
        if not np.all(np.isfinite(self.flat)):
            raise InvalidParametersError("parameters contain non-finite values")
        if not self.feasible(z_rows):
            raise InvalidParametersError(
                "asymptote values leave the interior of [0, 1] for an observed row"
            )


@dataclass(frozen=True)
class ProbabilityComponents:
    phi: float
    lower: float
    upper: float
    pi: float


def build_design(spec: ModelSpec, raw, response_column: str = "y") -> Dataset:
    """Assemble a Dataset from named columns.

    ``raw`` is any mapping from column name to a 1-d sequence (a pandas
    DataFrame works).  The constant column is prepended here; the
    group-specific kind also appends the group-by-criterion interaction.
    """
    cols = {}
    needed = [response_column, *spec.predictor_columns, *spec.asymptote_columns]
    for name in needed:
        if name in cols:
            continue
        try:
            col = raw[name]
        except (KeyError, IndexError):
            raise DataError(f"missing column {name!r}") from None
        cols[name] = np.asarray(col, dtype=np.float64)
    n = len(cols[response_column])
    if n == 0:
        raise DataError("empty table")
    for name, col in cols.items():
        if col.ndim != 1 or col.shape[0] != n:
            raise DataError(f"column {name!r} has inconsistent length")
        if not np.all(np.isfinite(col)):
            raise DataError(f"column {name!r} contains non-finite values")

    y = cols[response_column]
    if not np.all((y == 0.0) | (y == 1.0)):
        raise DataError(f"response column {response_column!r} must be binary 0/1")

    if spec.kind is ModelKind.GROUP:
        g = cols[spec.group_column]
        if not np.all((g == 0.0) | (g == 1.0)):
            raise DataError(f"group column {spec.group_column!r} must be binary 0/1")
        x = cols[spec.criterion_column]
        x_design = np.column_stack([np.ones(n), x, g, g * x])
        z_design = np.column_stack([np.ones(n), g])
    else:
        x_design = np.column_stack(
            [np.ones(n)] + [cols[name] for name in spec.predictor_columns]
        )
        z_design = np.column_stack(
            [np.ones(n)] + [cols[name] for name in spec.asymptote_columns]
        )
    return Dataset(y=y, x_design=x_design, z_design=z_design)


def predict_prob(params: ItemParameters, x_row, z_row) -> ProbabilityComponents:
    """Response probability and its pieces for a single covariate row."""
    x_row = np.asarray(x_row, dtype=np.float64)
    z_row = np.asarray(z_row, dtype=np.float64)
    if x_row.shape != params.b.shape or z_row.shape != params.c.shape:
        raise InvalidParametersError("row lengths do not match the parameters")
    params.validate_domain(z_row)
    phi, lower, upper, pi = kernels.components(
        np.ascontiguousarray(x_row[None, :]),
        np.ascontiguousarray(z_row[None, :]),
        params.b,
        params.c,
        params.d,
    )
    return ProbabilityComponents(
        phi=float(phi[0]), lower=float(lower[0]), upper=float(upper[0]), pi=float(pi[0])
    )


def grad_prob(params: ItemParameters, x_row, z_row) -> np.ndarray:
    """Analytic gradient of the response probability, (b, c, d) order."""
    comp = predict_prob(params, x_row, z_row)
    x_row = np.asarray(x_row, dtype=np.float64)
    z_row = np.asarray(z_row, dtype=np.float64)
    span = comp.upper - comp.lower
    pm = comp.phi * (1.0 - comp.phi)
    return np.concatenate(
        [span * pm * x_row, (1.0 - comp.phi) * z_row, comp.phi * z_row]
    )


def predict_matrix(params: ItemParameters, x_design, z_design) -> np.ndarray:
    """Vectorised response probabilities for whole design matrices."""
    _, _, _, pi = kernels.components(
        np.ascontiguousarray(x_design, dtype=np.float64),
        np.ascontiguousarray(z_design, dtype=np.float64),
        params.b,
        params.c,
        params.d,
    )
    return pi


def rss(params: ItemParameters, data: Dataset, weighted: bool = False) -> float:
    """Residual sum of squares, optionally Pearson-weighted."""
    params.validate_domain(data.distinct_z_rows())
    pi = predict_matrix(params, data.x_design, data.z_design)
    r = data.y - pi
    if weighted:
        if np.any(pi <= kernels.CLAMP) or np.any(pi >= 1.0 - kernels.CLAMP):
            raise DegenerateWeightError(
                "weighted residuals need probabilities strictly inside (0, 1)"
            )
        return float(np.sum(r * r / (pi * (1.0 - pi))))
    return float(r @ r)


def log_likelihood(params: ItemParameters, data: Dataset) -> float:
    """Bernoulli log-likelihood at the given parameters."""
    params.validate_domain(data.distinct_z_rows())
    return kernels.loglik_value(
        data.y, data.x_design, data.z_design, params.b, params.c, params.d
    )


def feasibility_constraints(z_design: np.ndarray, kb: int):
    """Linear constraints A @ gamma >= lb encoding the asymptote box.

    One triple of rows per distinct z row: z@c >= eps, z@d <= 1-eps and
    z@d - z@c >= eps.  ``kb`` leading columns (the b block) are zero.
    """
    rows = np.unique(np.asarray(z_design, dtype=np.float64), axis=0)
    m, kc = rows.shape
    eps = ASYMPTOTE_MARGIN
    A = np.zeros((3 * m, kb + 2 * kc))
    lb = np.empty(3 * m)
    for i, r in enumerate(rows):
        A[3 * i, kb : kb + kc] = r
        lb[3 * i] = eps
        A[3 * i + 1, kb + kc :] = -r
        lb[3 * i + 1] = -(1.0 - eps)
        A[3 * i + 2, kb : kb + kc] = -r
        A[3 * i + 2, kb + kc :] = r
        lb[3 * i + 2] = eps
    return A, lb
