"""Report assembly: per-item fit summaries, intervals, DIF table and
curve samples for external plotting.

Emitted JSON documents validate against the schema files shipped in
``fourpl/schemas``; ``curves_csv`` flattens the sampled item
characteristic curves for plotting tools.
"""

from __future__ import annotations

import importlib.resources
import json
import math
from dataclasses import dataclass, field

import numpy as np

import jsonschema

from . import kernels
from .estimators import FitResult
from .model import ItemParameters, ModelKind, ModelSpec

SCHEMA_VERSION = 1

CURVE_POINTS = 201
CURVE_PADDING = 0.5


def jsonable(value):
    """Recursively convert to plain JSON types; non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):  # bool before int: bool is an int
        return bool(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, (np.integer, int)):
        return int(value)
    return value


def dump_json(doc: dict) -> str:
    return json.dumps(jsonable(doc), indent=2, sort_keys=True, allow_nan=False)


def load_schema(name: str) -> dict:
    text = (
        importlib.resources.files("fourpl")
        .joinpath("schemas", f"{name}.schema.json")
        .read_text(encoding="utf-8")
    )
    return json.loads(text)


def validate_document(doc: dict, schema_name: str) -> None:
    jsonschema.validate(jsonable(doc), load_schema(schema_name))


def provenance(seed=None, options=None, extra=None) -> dict:
    import scipy

    from . import __version__
    from .kernels import BACKEND

    doc = {
        "package": "fourpl",
        "version": __version__,
        "backend": BACKEND,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }
    if seed is not None:
        doc["seed"] = int(seed)
    if options is not None:
        doc["options"] = {
            "max_iterations": options.max_iterations,
            "tolerance": options.tolerance,
            "weighted_nls": options.weighted_nls,
        }
    if extra:
        doc.update(extra)
    return doc


def curve_grid(criterion: np.ndarray) -> np.ndarray:
    lo = float(np.min(criterion)) - CURVE_PADDING
    hi = float(np.max(criterion)) + CURVE_PADDING
    return np.linspace(lo, hi, CURVE_POINTS)


def sample_curves(
    params: ItemParameters, kind: ModelKind, criterion: np.ndarray
) -> list[dict]:
    """Fitted probability along an x grid, one series per group."""
    grid = curve_grid(criterion)
    groups = (0.0, 1.0) if kind is ModelKind.GROUP else (None,)
    series = []
    for g in groups:
        if g is None:
            X = np.column_stack([np.ones(grid.shape[0]), grid])
            Z = np.ones((grid.shape[0], 1))
        else:
            gv = np.full(grid.shape[0], g)
            X = np.column_stack([np.ones(grid.shape[0]), grid, gv, gv * grid])
            Z = np.column_stack([np.ones(grid.shape[0]), gv])
        _, _, _, pi = kernels.components(
            np.ascontiguousarray(X), np.ascontiguousarray(Z), params.b, params.c, params.d
        )
        series.append(
            {
                "group": None if g is None else int(g),
                "x": grid.tolist(),
                "probability": pi.tolist(),
            }
        )
    return series


def fit_summary(fit: FitResult, spec: ModelSpec, intervals=None, covariance_kind=None) -> dict:
    labels = spec.parameter_labels()
    doc = {
        "method": fit.method.value,
        "status": fit.status.value,
        "iterations": fit.iterations,
        "objective": fit.objective,
        "objective_label": fit.objective_label,
        "log_likelihood": fit.log_likelihood,
        "n_obs": fit.n_obs,
        "at_boundary": fit.at_boundary,
        "estimates": {
            label: value for label, value in zip(labels, fit.params.flat.tolist())
        },
    }
    if covariance_kind is not None:
        doc["covariance_kind"] = covariance_kind
    if intervals is not None:
        doc["intervals"] = [
            {
                "parameter": label,
                "lower": ci.lower,
                "upper": ci.upper,
                "level": ci.level,
                "truncated": ci.truncated,
            }
            for label, ci in zip(labels, intervals)
        ]
    return doc


@dataclass
class ReportBundle:
    """Everything one `fit` run produces, ready for serialisation."""

    model: ModelKind
    items: list[dict] = field(default_factory=list)
    dif: list[dict] | None = None
    curves: list[dict] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "model": self.model.value,
            "items": self.items,
            "curves": self.curves,
            "provenance": self.provenance,
        }
        if self.dif is not None:
            doc["dif"] = self.dif
        return doc

    def to_json(self) -> str:
        doc = self.to_json_dict()
        validate_document(doc, "report")
        return dump_json(doc)


def curves_csv(report_doc: dict) -> str:
    """Flatten a report's curve samples to item,group,x,probability rows."""
    lines = ["item,group,x,probability"]
    for entry in report_doc.get("curves", []):
        item = entry["item"]
        for series in entry["series"]:
            group = series.get("group")
            gtxt = "" if group is None else str(group)
            for x, p in zip(series["x"], series["probability"]):
                lines.append(f"{item},{gtxt},{format(x, '.10g')},{format(p, '.10g')}")
    return "\n".join(lines) + "\n"
