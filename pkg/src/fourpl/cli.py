"""Command-line interface.

Subcommands: ``fit`` (per-item estimates, intervals and curve samples),
``dif`` (likelihood-ratio DIF screen over all items), ``simulate``
(Monte Carlo study from a JSON config), ``init`` (starting values) and
``curves`` (flatten a report's curve samples to CSV).

Exit codes: 0 success, 2 usage error, 3 data error, 4 when any
requested fit crashed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import report as rpt
from .dataio import ColumnSchema, dichotomise, load_dataset, standardised_score
from .errors import BoundarySolutionError, DataError, FourplError, InitializationError
from .estimators import ConvergenceStatus, FitOptions, Method, fit as fit_method
from .inference import covariance_for, lrt_dif, wald_intervals
from .initialization import initial_values
from .model import ModelKind, ModelSpec, build_design
from .simulation import (
    SimulationConfig,
    convergence_table_csv,
    estimates_table_csv,
    run_and_summarise,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CRASHED = 4

# Donor order for re-initialising a crashed fit from another method's
# converged estimates.
_FALLBACK_DONORS = (Method.MLE, Method.PLF, Method.EM, Method.NLS)


def _add_data_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument(
        "--items",
        required=True,
        help="comma-separated response column names",
    )
    p.add_argument(
        "--criterion",
        default="derive",
        help="matching-criterion column, or 'derive' for the standardised "
        "sum of the raw responses (default)",
    )
    p.add_argument(
        "--scale-items",
        default=None,
        dest="scale_items",
        help="columns the derived criterion sums over (default: --items)",
    )
    p.add_argument("--group", default=None, help="binary group column")
    p.add_argument(
        "--cut",
        type=int,
        default=2,
        help="dichotomisation threshold on the 1..5 scale (response >= cut "
        "scores 1); 0 means the responses are already binary",
    )


def _add_fit_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-iter", type=int, default=2000, dest="max_iter")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--weighted-nls", action="store_true", dest="weighted_nls")
    p.add_argument("--ci-level", type=float, default=0.95, dest="ci_level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fourpl",
        description="Four-parameter logistic item functioning: fitting, "
        "DIF testing and simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit every item and report estimates")
    _add_data_options(p_fit)
    _add_fit_options(p_fit)
    p_fit.add_argument("--model", choices=["simple", "group"], default="simple")
    p_fit.add_argument(
        "--method", choices=[m.value for m in Method], default="mle"
    )
    p_fit.add_argument("--out", default=None, help="output path (default stdout)")
    p_fit.set_defaults(handler=_cmd_fit)

    p_dif = sub.add_parser(
        "dif", help="likelihood-ratio DIF test per item (simple vs group)"
    )
    _add_data_options(p_dif)
    _add_fit_options(p_dif)
    p_dif.add_argument(
        "--method", choices=[m.value for m in Method], default="mle"
    )
    p_dif.add_argument("--alpha", type=float, default=0.05)
    p_dif.add_argument("--out", default=None)
    p_dif.set_defaults(handler=_cmd_dif)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    p_sim.add_argument("--config", required=True, help="JSON configuration file")
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.add_argument(
        "--out", required=True, help="output directory for summary.json and CSV tables"
    )
    p_sim.set_defaults(handler=_cmd_simulate)

    p_init = sub.add_parser("init", help="starting values and diagnostics")
    _add_data_options(p_init)
    p_init.add_argument("--model", choices=["simple", "group"], default="simple")
    p_init.add_argument("--out", default=None)
    p_init.set_defaults(handler=_cmd_init)

    p_curves = sub.add_parser(
        "curves", help="flatten a fit report's curve samples to CSV"
    )
    p_curves.add_argument("--report", required=True, help="report JSON from `fit`")
    p_curves.add_argument("--out", default=None)
    p_curves.set_defaults(handler=_cmd_curves)

    return parser


def _write_output(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _item_names(args) -> list[str]:
    names = [s.strip() for s in args.items.split(",") if s.strip()]
    if not names:
        raise DataError("--items names no columns")
    return names


def _prepare(args, need_group: bool):
    items = _item_names(args)
    scale_items = items
    if getattr(args, "scale_items", None):
        scale_items = [s.strip() for s in args.scale_items.split(",") if s.strip()]
    group_col = getattr(args, "group", None)
    if need_group and group_col is None:
        raise DataError("this command needs --group")
    load_items = list(dict.fromkeys([*items, *scale_items]))
    schema = ColumnSchema(
        item_columns=tuple(load_items),
        criterion_column=args.criterion,
        group_column=group_col,
    )
    frame = load_dataset(args.data, schema)
    raw = frame[list(items)].to_numpy(dtype=np.float64)
    if args.cut >= 1:
        binary = dichotomise(raw, cut=args.cut).astype(np.float64)
    else:
        if not np.all((raw == 0.0) | (raw == 1.0)):
            raise DataError("--cut 0 requires responses already coded 0/1")
        binary = raw
    if args.criterion == "derive":
        criterion = standardised_score(frame[list(scale_items)].to_numpy(dtype=np.float64))
    else:
        criterion = frame[args.criterion].to_numpy(dtype=np.float64)
    group = None
    if group_col is not None:
        group = frame[group_col].to_numpy(dtype=np.float64)
        if not np.all((group == 0.0) | (group == 1.0)):
            raise DataError(f"group column {group_col!r} must be binary 0/1")
    return items, binary, criterion, group


def _make_data(spec: ModelSpec, item: str, y, criterion, group):
    raw = {item: y, "x": criterion}
    if group is not None:
        raw["g"] = group
    return build_design(spec, raw, response_column=item)


def _spec_for(model: str) -> ModelSpec:
    if model == "group":
        return ModelSpec.group_specific("x", "g")
    return ModelSpec.simple("x")


def _fit_options(args) -> FitOptions:
    return FitOptions(
        max_iterations=args.max_iter,
        tolerance=args.tol,
        weighted_nls=args.weighted_nls,
    )


def _fit_with_fallback(data, init, method: Method, opts: FitOptions):
    """Fit; on a crash, retry from another method's converged estimates."""
    res = fit_method(data, init, method, opts)
    if res.status is not ConvergenceStatus.CRASHED:
        return res, False
    for donor in _FALLBACK_DONORS:
        if donor is method:
            continue
        donor_res = fit_method(data, init, donor, opts)
        if not donor_res.converged:
            continue
        retry = fit_method(data, donor_res.params, method, opts)
        if retry.status is not ConvergenceStatus.CRASHED:
            return retry, True
    return res, False


def _cmd_fit(args) -> int:
    items, binary, criterion, group = _prepare(args, need_group=args.model == "group")
    spec = _spec_for(args.model)
    opts = _fit_options(args)
    method = Method(args.method)
    kind = ModelKind(args.model)

    item_docs = []
    curve_docs = []
    any_crashed = False
    for idx, item in enumerate(items):
        y = binary[:, idx]
        try:
            data = _make_data(spec, item, y, criterion, group)
            init, _ = initial_values(data, spec)
        except FourplError as exc:
            any_crashed = True
            item_docs.append(
                {
                    "item": item,
                    "method": method.value,
                    "status": "crashed",
                    "iterations": 0,
                    "estimates": {},
                    "covariance_error": str(exc),
                }
            )
            continue
        res = fit_method(data, init, method, opts)
        intervals = None
        cov_kind = None
        cov_error = None
        if res.converged:
            try:
                cov = covariance_for(res, data)
                intervals = wald_intervals(res, cov, level=args.ci_level)
                cov_kind = cov.kind.value
            except FourplError as exc:
                cov_error = str(exc)
        else:
            any_crashed = any_crashed or res.status is ConvergenceStatus.CRASHED
        doc = rpt.fit_summary(res, spec, intervals=intervals, covariance_kind=cov_kind)
        doc["item"] = item
        if cov_error is not None:
            doc["covariance_error"] = cov_error
        item_docs.append(doc)
        if res.converged:
            curve_docs.append(
                {"item": item, "series": rpt.sample_curves(res.params, kind, criterion)}
            )

    bundle = rpt.ReportBundle(
        model=kind,
        items=item_docs,
        curves=curve_docs,
        provenance=rpt.provenance(
            options=opts,
            extra={
                "source": str(args.data),
                "items": items,
                "criterion": args.criterion,
                "cut": args.cut,
                "method": method.value,
            },
        ),
    )
    _write_output(bundle.to_json() + "\n", args.out)
    return EXIT_CRASHED if any_crashed else EXIT_OK


def _cmd_dif(args) -> int:
    items, binary, criterion, group = _prepare(args, need_group=True)
    opts = _fit_options(args)
    method = Method(args.method)
    spec_simple = _spec_for("simple")
    spec_group = _spec_for("group")

    rows = []
    any_crashed = False
    for idx, item in enumerate(items):
        y = binary[:, idx]
        row = {"item": item, "method": method.value, "alpha": args.alpha}
        try:
            data_simple = _make_data(spec_simple, item, y, criterion, group)
            data_group = _make_data(spec_group, item, y, criterion, group)
            init_simple, _ = initial_values(data_simple, spec_simple)
            init_group, _ = initial_values(data_group, spec_group)
        except FourplError as exc:
            any_crashed = True
            row.update(status="failed", detail=str(exc))
            rows.append(row)
            continue
        fit_simple, fb1 = _fit_with_fallback(data_simple, init_simple, method, opts)
        fit_group, fb2 = _fit_with_fallback(data_group, init_group, method, opts)
        row["used_fallback_init"] = fb1 or fb2
        crashed = (
            fit_simple.status is ConvergenceStatus.CRASHED
            or fit_group.status is ConvergenceStatus.CRASHED
        )
        any_crashed = any_crashed or crashed
        if not (fit_simple.converged and fit_group.converged):
            row.update(
                status="failed",
                detail=f"simple: {fit_simple.status.value}, "
                f"group: {fit_group.status.value}",
            )
            rows.append(row)
            continue
        try:
            test = lrt_dif(fit_simple, fit_group, alpha=args.alpha)
        except BoundarySolutionError as exc:
            row.update(status="boundary", detail=str(exc))
            rows.append(row)
            continue
        row.update(
            status="ok",
            statistic=test.statistic,
            df=test.df,
            p_value=test.p_value,
            flagged=test.flagged,
            negative_statistic=test.negative_statistic,
        )
        rows.append(row)

    doc = {
        "schema_version": rpt.SCHEMA_VERSION,
        "alpha": args.alpha,
        "method": method.value,
        "items": rows,
        "provenance": rpt.provenance(
            options=opts,
            extra={"source": str(args.data), "items": items, "cut": args.cut},
        ),
    }
    rpt.validate_document(doc, "dif")
    _write_output(rpt.dump_json(doc) + "\n", args.out)
    return EXIT_CRASHED if any_crashed else EXIT_OK


def _cmd_simulate(args) -> int:
    path = Path(args.config)
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    try:
        cfg_doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"config is not valid JSON: {exc}") from None
    try:
        rpt.validate_document(cfg_doc, "simulation_config")
    except Exception as exc:
        raise DataError(f"config does not match the schema: {exc}") from None
    config = SimulationConfig.from_json_dict(cfg_doc)
    if args.seed is not None:
        config = SimulationConfig(
            kind=config.kind,
            truth=config.truth,
            sample_sizes=config.sample_sizes,
            replications=config.replications,
            seed=args.seed,
            methods=config.methods,
            options=config.options,
            ci_level=config.ci_level,
            percentile_ci=config.percentile_ci,
            nonmeaningful_threshold=config.nonmeaningful_threshold,
        )
    summary = run_and_summarise(config)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    doc = summary.to_json_dict()
    rpt.validate_document(doc, "simulation_summary")
    (outdir / "summary.json").write_text(rpt.dump_json(doc) + "\n", encoding="utf-8")
    (outdir / "convergence.csv").write_text(
        convergence_table_csv(summary), encoding="utf-8"
    )
    (outdir / "estimates.csv").write_text(
        estimates_table_csv(summary), encoding="utf-8"
    )
    return EXIT_OK


def _cmd_init(args) -> int:
    items, binary, criterion, group = _prepare(args, need_group=args.model == "group")
    spec = _spec_for(args.model)
    out_items = {}
    for idx, item in enumerate(items):
        y = binary[:, idx]
        try:
            data = _make_data(spec, item, y, criterion, group)
            params, diag = initial_values(data, spec)
        except FourplError as exc:
            out_items[item] = {
                "parameters": {"b": [], "c": [], "d": []},
                "diagnostics": {
                    "tertile_bounds": [0.0, 0.0],
                    "p_lower": 0.0,
                    "p_upper": 0.0,
                    "uli": 0.0,
                },
                "error": str(exc),
            }
            continue
        out_items[item] = {
            "parameters": {
                "b": params.b.tolist(),
                "c": params.c.tolist(),
                "d": params.d.tolist(),
            },
            "diagnostics": {
                "tertile_bounds": list(diag.tertile_bounds),
                "p_lower": diag.p_lower,
                "p_upper": diag.p_upper,
                "uli": diag.uli,
                "used_median_fallback": diag.used_median_fallback,
            },
        }
    doc = {
        "schema_version": rpt.SCHEMA_VERSION,
        "model": args.model,
        "items": out_items,
        "provenance": rpt.provenance(
            extra={"source": str(args.data), "items": items, "cut": args.cut}
        ),
    }
    rpt.validate_document(doc, "init")
    _write_output(rpt.dump_json(doc) + "\n", args.out)
    return EXIT_OK


def _cmd_curves(args) -> int:
    path = Path(args.report)
    if not path.exists():
        raise DataError(f"report file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"report is not valid JSON: {exc}") from None
    try:
        rpt.validate_document(doc, "report")
    except Exception as exc:
        raise DataError(f"report does not match the schema: {exc}") from None
    _write_output(rpt.curves_csv(doc), args.out)
    return EXIT_OK


def run_cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.handler(args)
    except (DataError, InitializationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FourplError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
