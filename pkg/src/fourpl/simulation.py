"""Seeded data generation and the Monte Carlo study harness.

Random streams are counter-based (Philox) and keyed by
(seed, replication, purpose), so any execution order of the replications
produces identical results.  The focal-group offsets follow the model's
coefficient layout: the focal lower asymptote is c0 + c1 and the focal
upper asymptote is d0 + d1.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _scipy_stats

from . import kernels
from .errors import FourplError
from .estimators import (
    ConvergenceStatus,
    FitOptions,
    FitResult,
    Method,
    fit as fit_method,
)
from .initialization import initial_values
from .model import Dataset, ItemParameters, ModelKind, ModelSpec

# Purpose codes of the random streams.
_PURPOSE_CRITERION = 0
_PURPOSE_RESPONSE = 1

_METHOD_ORDER = (Method.NLS, Method.MLE, Method.EM, Method.PLF)


def simple_truth(b0=0.0, b1=1.5, c=0.25, d=0.9) -> ItemParameters:
    """Data-generating values of the simple model (defaults: the study's)."""
    return ItemParameters(np.array([b0, b1]), np.array([c]), np.array([d]))


def group_truth(
    b0=0.0, b1=1.5, b2=-1.0, b3=0.5, c=0.25, c_dif=-0.15, d=0.9, d_dif=0.1
) -> ItemParameters:
    """Data-generating values of the group-specific model.

    ``c_dif`` and ``d_dif`` are the focal-group shifts as usually
    reported: focal lower asymptote c + c_dif, focal upper d - d_dif.
    In coefficient space that makes the group column of d equal -d_dif.
    """
    return ItemParameters(
        np.array([b0, b1, b2, b3]), np.array([c, c_dif]), np.array([d, -d_dif])
    )


def _stream(seed: int, replication: int, purpose: int) -> np.random.Generator:
    # Philox takes a 128-bit key: seed in one word, (replication, purpose)
    # packed into the other.
    packed = (int(replication) << 3) | int(purpose)
    key = np.array([np.uint64(seed & (2**64 - 1)), np.uint64(packed)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def spec_for_kind(kind: ModelKind) -> ModelSpec:
    if kind is ModelKind.GROUP:
        return ModelSpec.group_specific()
    return ModelSpec.simple()


def generate_dataset(
    truth: ItemParameters,
    kind: ModelKind | str,
    n: int,
    seed: int,
    replication: int = 0,
) -> Dataset:
    """Draw one dataset from the model at ``truth``.

    The criterion is standard normal; the group indicator (group kind)
    assigns the first floor(n/2) respondents to the reference group.
    """
    kind = ModelKind(kind)
    if n < 1:
        raise ValueError("n must be positive")
    x = _stream(seed, replication, _PURPOSE_CRITERION).standard_normal(n)
    if kind is ModelKind.GROUP:
        g = np.zeros(n)
        g[n // 2 :] = 1.0
        x_design = np.column_stack([np.ones(n), x, g, g * x])
        z_design = np.column_stack([np.ones(n), g])
    else:
        x_design = np.column_stack([np.ones(n), x])
        z_design = np.ones((n, 1))
    truth.validate_domain(np.unique(z_design, axis=0))
    _, _, _, pi = kernels.components(
        np.ascontiguousarray(x_design),
        np.ascontiguousarray(z_design),
        truth.b,
        truth.c,
        truth.d,
    )
    u = _stream(seed, replication, _PURPOSE_RESPONSE).random(n)
    y = (u < pi).astype(np.float64)
    return Dataset(y=y, x_design=x_design, z_design=z_design)


@dataclass(frozen=True)
class SimulationConfig:
    kind: ModelKind = ModelKind.SIMPLE
    truth: ItemParameters | None = None
    sample_sizes: tuple[int, ...] = (500, 1000, 2500, 5000)
    replications: int = 1000
    seed: int = 1
    methods: tuple[Method, ...] = _METHOD_ORDER
    options: FitOptions = field(default_factory=FitOptions)
    ci_level: float = 0.95
    percentile_ci: bool = False
    nonmeaningful_threshold: float = 100.0

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if any(n < 20 for n in self.sample_sizes):
            raise ValueError("sample sizes must be at least 20")
        if self.truth is None:
            default = (
                group_truth() if self.kind is ModelKind.GROUP else simple_truth()
            )
            object.__setattr__(self, "truth", default)

    @staticmethod
    def from_json_dict(doc: dict) -> "SimulationConfig":
        kind = ModelKind(doc.get("model", "simple"))
        truth = None
        if "truth" in doc:
            t = doc["truth"]
            truth = ItemParameters(
                np.asarray(t["b"]), np.asarray(t["c"]), np.asarray(t["d"])
            )
        opts = FitOptions(
            max_iterations=int(doc.get("max_iterations", 2000)),
            tolerance=float(doc.get("tolerance", 1e-6)),
            weighted_nls=bool(doc.get("weighted_nls", False)),
        )
        return SimulationConfig(
            kind=kind,
            truth=truth,
            sample_sizes=tuple(int(n) for n in doc.get("sample_sizes", (500,))),
            replications=int(doc.get("replications", 100)),
            seed=int(doc.get("seed", 1)),
            methods=tuple(Method(m) for m in doc.get("methods", [m.value for m in _METHOD_ORDER])),
            options=opts,
            ci_level=float(doc.get("ci_level", 0.95)),
            percentile_ci=bool(doc.get("percentile_ci", False)),
            nonmeaningful_threshold=float(doc.get("nonmeaningful_threshold", 100.0)),
        )


@dataclass(frozen=True)
class ReplicationRecord:
    sample_size: int
    replication: int
    method: Method
    fit: FitResult
    nonmeaningful: bool


def _crashed_fit(method: Method, kb: int, kc: int, n: int) -> FitResult:
    return FitResult(
        params=ItemParameters(
            np.full(kb, np.nan), np.full(kc, np.nan), np.full(kc, np.nan)
        ),
        status=ConvergenceStatus.CRASHED,
        iterations=0,
        objective=float("nan"),
        objective_label="none",
        log_likelihood=float("nan"),
        method=method,
        n_obs=n,
        at_boundary=False,
    )


def run_study(config: SimulationConfig) -> list[ReplicationRecord]:
    """Generate, initialise and fit every replication of the study.

    Failures of any kind become Crashed records; nothing raises.
    """
    spec = spec_for_kind(config.kind)
    kb = spec.n_predictor_coefs()
    kc = spec.n_asymptote_coefs()
    records: list[ReplicationRecord] = []
    for n in config.sample_sizes:
        for r in range(config.replications):
            data = generate_dataset(config.truth, config.kind, n, config.seed, r)
            try:
                init, _ = initial_values(data, spec)
            except FourplError:
                for m in config.methods:
                    records.append(
                        ReplicationRecord(n, r, m, _crashed_fit(m, kb, kc, n), False)
                    )
                continue
            for m in config.methods:
                try:
                    res = fit_method(data, init, m, config.options)
                except Exception:
                    res = _crashed_fit(m, kb, kc, n)
                nonmeaningful = bool(
                    np.any(np.abs(res.params.b) > config.nonmeaningful_threshold)
                )
                records.append(ReplicationRecord(n, r, m, res, nonmeaningful))
    return records


@dataclass(frozen=True)
class ConvergenceCell:
    total: int
    converged: int
    crashed: int
    did_not_finish: int
    iterations_mean: float | None
    iterations_median: float | None

    @property
    def converged_pct(self) -> float:
        return 100.0 * self.converged / self.total

    @property
    def crashed_pct(self) -> float:
        return 100.0 * self.crashed / self.total

    @property
    def did_not_finish_pct(self) -> float:
        return 100.0 * self.did_not_finish / self.total


@dataclass(frozen=True)
class EstimateCell:
    parameter: str
    truth: float
    mean: float
    sd: float
    ci_lower: float
    ci_upper: float
    truncated: bool
    n_used: int


@dataclass
class SimulationSummary:
    kind: ModelKind
    truth: ItemParameters
    methods: tuple[Method, ...]
    sample_sizes: tuple[int, ...]
    replications: int
    seed: int
    ci_level: float
    percentile_ci: bool
    convergence: dict  # {n: {method: ConvergenceCell}}
    estimates: dict  # {n: {method: list[EstimateCell] | None}}
    joint_converged: dict  # {n: count of jointly usable replications}

    def to_json_dict(self) -> dict:
        labels = _parameter_labels(self.kind)
        return {
            "model": self.kind.value,
            "truth": {
                "b": self.truth.b.tolist(),
                "c": self.truth.c.tolist(),
                "d": self.truth.d.tolist(),
            },
            "parameter_labels": labels,
            "methods": [m.value for m in self.methods],
            "sample_sizes": list(self.sample_sizes),
            "replications": self.replications,
            "seed": self.seed,
            "ci_level": self.ci_level,
            "percentile_ci": self.percentile_ci,
            "joint_converged": {str(n): c for n, c in sorted(self.joint_converged.items())},
            "convergence": {
                str(n): {
                    m.value: {
                        "total": cell.total,
                        "converged_pct": cell.converged_pct,
                        "crashed_pct": cell.crashed_pct,
                        "did_not_finish_pct": cell.did_not_finish_pct,
                        "iterations_mean": cell.iterations_mean,
                        "iterations_median": cell.iterations_median,
                    }
                    for m, cell in sorted(cells.items())
                }
                for n, cells in sorted(self.convergence.items())
            },
            "estimates": {
                str(n): {
                    m.value: (
                        None
                        if cells is None
                        else [
                            {
                                "parameter": c.parameter,
                                "truth": c.truth,
                                "mean": c.mean,
                                "sd": c.sd,
                                "ci_lower": c.ci_lower,
                                "ci_upper": c.ci_upper,
                                "truncated": c.truncated,
                                "n_used": c.n_used,
                            }
                            for c in cells
                        ]
                    )
                    for m, cells in sorted(per_method.items())
                }
                for n, per_method in sorted(self.estimates.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def _parameter_labels(kind: ModelKind) -> list[str]:
    return spec_for_kind(kind).parameter_labels()


def summarise_study(
    records: list[ReplicationRecord],
    truth: ItemParameters,
    *,
    kind: ModelKind = ModelKind.SIMPLE,
    ci_level: float = 0.95,
    percentile_ci: bool = False,
    seed: int = 0,
) -> SimulationSummary:
    """Reduce replication records to the study tables.

    Convergence percentages cover all records; iteration statistics all
    non-crashed records; mean estimates only those replications where
    every requested method converged and none was non-meaningful.
    """
    if not records:
        raise ValueError("no records to summarise")
    records = sorted(records, key=lambda r: (r.sample_size, r.replication, r.method.value))
    sizes = tuple(sorted({r.sample_size for r in records}))
    methods = tuple(m for m in _METHOD_ORDER if any(r.method is m for r in records))
    replications = 1 + max(r.replication for r in records)
    labels = _parameter_labels(kind)
    kb = truth.b.shape[0]
    kc = truth.c.shape[0]
    truth_flat = truth.flat
    prob_indices = {kb, kb + kc}
    z = float(_scipy_stats.norm.ppf(0.5 * (1.0 + ci_level)))

    convergence: dict = {}
    estimates: dict = {}
    joint_converged: dict = {}
    for n in sizes:
        cell_records = [r for r in records if r.sample_size == n]
        per_method: dict = {}
        for m in methods:
            rs = [r for r in cell_records if r.method is m]
            conv = sum(r.fit.status is ConvergenceStatus.CONVERGED for r in rs)
            crash = sum(r.fit.status is ConvergenceStatus.CRASHED for r in rs)
            dnf = sum(r.fit.status is ConvergenceStatus.DID_NOT_FINISH for r in rs)
            iters = [
                r.fit.iterations
                for r in rs
                if r.fit.status is not ConvergenceStatus.CRASHED
            ]
            per_method[m] = ConvergenceCell(
                total=len(rs),
                converged=conv,
                crashed=crash,
                did_not_finish=dnf,
                iterations_mean=float(np.mean(iters)) if iters else None,
                iterations_median=float(statistics.median(iters)) if iters else None,
            )
        convergence[n] = per_method

        # Joint subset: replications where every method converged and no
        # method produced a non-meaningful estimate.
        by_rep: dict = {}
        for r in cell_records:
            by_rep.setdefault(r.replication, []).append(r)
        usable = {
            rep
            for rep, rs in by_rep.items()
            if len(rs) == len(methods)
            and all(x.fit.status is ConvergenceStatus.CONVERGED for x in rs)
            and not any(x.nonmeaningful for x in rs)
        }
        joint_converged[n] = len(usable)

        per_method_est: dict = {}
        for m in methods:
            rows = [
                r.fit.params.flat
                for r in cell_records
                if r.method is m and r.replication in usable
            ]
            if not rows:
                per_method_est[m] = None
                continue
            mat = np.vstack(rows)
            cells = []
            for j, label in enumerate(labels):
                vals = mat[:, j]
                mean = float(np.mean(vals))
                sd = float(np.std(vals, ddof=1)) if vals.shape[0] > 1 else 0.0
                if percentile_ci:
                    lo = float(np.quantile(vals, 0.5 * (1.0 - ci_level)))
                    hi = float(np.quantile(vals, 0.5 * (1.0 + ci_level)))
                else:
                    lo = mean - z * sd
                    hi = mean + z * sd
                truncated = False
                if j in prob_indices:
                    clipped = (max(lo, 0.0), min(hi, 1.0))
                    truncated = clipped != (lo, hi)
                    lo, hi = clipped
                cells.append(
                    EstimateCell(
                        parameter=label,
                        truth=float(truth_flat[j]),
                        mean=mean,
                        sd=sd,
                        ci_lower=lo,
                        ci_upper=hi,
                        truncated=truncated,
                        n_used=mat.shape[0],
                    )
                )
            per_method_est[m] = cells
        estimates[n] = per_method_est

    return SimulationSummary(
        kind=kind,
        truth=truth,
        methods=methods,
        sample_sizes=sizes,
        replications=replications,
        seed=seed,
        ci_level=ci_level,
        percentile_ci=percentile_ci,
        convergence=convergence,
        estimates=estimates,
        joint_converged=joint_converged,
    )


def run_and_summarise(config: SimulationConfig) -> SimulationSummary:
    records = run_study(config)
    return summarise_study(
        records,
        config.truth,
        kind=config.kind,
        ci_level=config.ci_level,
        percentile_ci=config.percentile_ci,
        seed=config.seed,
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def convergence_table_csv(summary: SimulationSummary) -> str:
    """Convergence-status table, one row per sample size and method."""
    lines = [
        "model,n,method,converged_pct,crashed_pct,dnf_pct,iterations_mean,iterations_median"
    ]
    for n in summary.sample_sizes:
        for m in summary.methods:
            cell = summary.convergence[n][m]
            lines.append(
                ",".join(
                    [
                        summary.kind.value,
                        str(n),
                        m.value.upper(),
                        _fmt(cell.converged_pct),
                        _fmt(cell.crashed_pct),
                        _fmt(cell.did_not_finish_pct),
                        _fmt(cell.iterations_mean),
                        _fmt(cell.iterations_median),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def estimates_table_csv(summary: SimulationSummary) -> str:
    """Mean-estimate table, one row per parameter, method and sample size."""
    lines = [
        "model,parameter,truth,method,n,n_used,mean,sd,ci_lower,ci_upper,truncated"
    ]
    labels = _parameter_labels(summary.kind)
    for label_idx, label in enumerate(labels):
        for m in summary.methods:
            for n in summary.sample_sizes:
                cells = summary.estimates[n][m]
                if cells is None:
                    row = [
                        summary.kind.value,
                        label,
                        _fmt(float(summary.truth.flat[label_idx])),
                        m.value.upper(),
                        str(n),
                        "0",
                        "",
                        "",
                        "",
                        "",
                        "",
                    ]
                else:
                    c = cells[label_idx]
                    row = [
                        summary.kind.value,
                        c.parameter,
                        _fmt(c.truth),
                        m.value.upper(),
                        str(n),
                        str(c.n_used),
                        _fmt(c.mean),
                        _fmt(c.sd),
                        _fmt(c.ci_lower),
                        _fmt(c.ci_upper),
                        _fmt(c.truncated),
                    ]
                lines.append(",".join(row))
    return "\n".join(lines) + "\n"
